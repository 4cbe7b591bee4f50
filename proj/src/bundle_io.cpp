#include "resp/bundle_io.hpp"

#include <cstring>
#include <map>
#include <sstream>

#include <json.hpp>

#include "resp/dataset_io.hpp"

namespace resp::train {

namespace {

using nlohmann::json;

constexpr char kMagic[9] = "RESPBNDL";
constexpr int kBundleVersion = 1;

json spec_to_json(const models::EncoderSpec& s) {
    return json{{"variant", models::to_string(s.variant)},
                {"n_t", s.n_t},
                {"in_channels", s.in_channels},
                {"filters", s.filters},
                {"kernel", s.kernel},
                {"dense_units", s.dense_units},
                {"latent_dim", s.latent_dim},
                {"class_dim", s.class_dim},
                {"noise_dim", s.noise_dim},
                {"dropout", s.dropout},
                {"leaky_slope", s.leaky_slope}};
}

models::EncoderSpec encoder_spec_from_json(const json& j) {
    models::EncoderSpec s;
    s.variant = models::variant_from_string(j.at("variant").get<std::string>());
    s.n_t = j.at("n_t").get<int>();
    s.in_channels = j.at("in_channels").get<int>();
    s.filters = j.at("filters").get<std::vector<int>>();
    s.kernel = j.at("kernel").get<int>();
    s.dense_units = j.at("dense_units").get<int>();
    s.latent_dim = j.at("latent_dim").get<int>();
    s.class_dim = j.at("class_dim").get<int>();
    s.noise_dim = j.at("noise_dim").get<int>();
    s.dropout = j.at("dropout").get<double>();
    s.leaky_slope = j.at("leaky_slope").get<double>();
    return s;
}

json spec_to_json(const models::DecoderSpec& s) {
    return json{{"n_t", s.n_t},           {"out_channels", s.out_channels},
                {"filters", s.filters},   {"dilations", s.dilations},
                {"kernel", s.kernel},     {"dense_units", s.dense_units},
                {"input_dim", s.input_dim}, {"dropout", s.dropout},
                {"leaky_slope", s.leaky_slope}};
}

models::DecoderSpec decoder_spec_from_json(const json& j) {
    models::DecoderSpec s;
    s.n_t = j.at("n_t").get<int>();
    s.out_channels = j.at("out_channels").get<int>();
    s.filters = j.at("filters").get<std::vector<int>>();
    s.dilations = j.at("dilations").get<std::vector<int>>();
    s.kernel = j.at("kernel").get<int>();
    s.dense_units = j.at("dense_units").get<int>();
    s.input_dim = j.at("input_dim").get<int>();
    s.dropout = j.at("dropout").get<double>();
    s.leaky_slope = j.at("leaky_slope").get<double>();
    return s;
}

json spec_to_json(const models::DiscriminatorSpec& s) {
    return json{{"input_dim", s.input_dim}, {"hidden", s.hidden}, {"leaky_slope", s.leaky_slope}};
}

models::DiscriminatorSpec discriminator_spec_from_json(const json& j) {
    models::DiscriminatorSpec s;
    s.input_dim = j.at("input_dim").get<int>();
    s.hidden = j.at("hidden").get<std::vector<int>>();
    s.leaky_slope = j.at("leaky_slope").get<double>();
    return s;
}

json spec_to_json(const models::ClassifierSpec& s) {
    return json{{"arch", models::to_string(s.arch)},
                {"n_t", s.n_t},
                {"in_channels", s.in_channels},
                {"classes", s.classes},
                {"filters", s.filters},
                {"kernel", s.kernel},
                {"hidden", s.hidden},
                {"dropout", s.dropout},
                {"leaky_slope", s.leaky_slope}};
}

models::ClassifierSpec classifier_spec_from_json(const json& j) {
    models::ClassifierSpec s;
    s.arch = models::classifier_arch_from_string(j.at("arch").get<std::string>());
    s.n_t = j.at("n_t").get<int>();
    s.in_channels = j.at("in_channels").get<int>();
    s.classes = j.at("classes").get<int>();
    s.filters = j.at("filters").get<std::vector<int>>();
    s.kernel = j.at("kernel").get<int>();
    s.hidden = j.at("hidden").get<std::vector<int>>();
    s.dropout = j.at("dropout").get<double>();
    s.leaky_slope = j.at("leaky_slope").get<double>();
    return s;
}

json spec_to_json(const models::ReconNetSpec& s) {
    return json{{"input_len", s.input_len},
                {"output_len", s.output_len},
                {"hidden", s.hidden},
                {"leaky_slope", s.leaky_slope},
                {"mode", s.mode}};
}

models::ReconNetSpec recon_spec_from_json(const json& j) {
    models::ReconNetSpec s;
    s.input_len = j.at("input_len").get<int>();
    s.output_len = j.at("output_len").get<int>();
    s.hidden = j.at("hidden").get<std::vector<int>>();
    s.leaky_slope = j.at("leaky_slope").get<double>();
    s.mode = j.at("mode").get<std::string>();
    return s;
}

void append_u32(std::string& out, std::uint32_t v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

void append_block(std::string& out, const std::string& name, const Tensor& t) {
    append_u32(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    append_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) {
        const auto v = static_cast<std::int64_t>(d);
        out.append(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(double));
}

struct NetBlocks {
    std::string prefix;
    models::Network* net;
};

void append_network(std::string& out, const std::string& prefix, models::Network& net) {
    int i = 0;
    for (const diff::Parameter* p : net.params())
        append_block(out, prefix + ":" + p->name, p->value), ++i;
    int s = 0;
    for (const diff::BatchNormState* st : net.bn_states()) {
        if (!st->initialized) {
            // persist a canonical state so reload is well-defined
            Tensor zero({1});
            append_block(out, prefix + ":bnstate" + std::to_string(s) + ":uninit", zero);
        } else {
            append_block(out, prefix + ":bnstate" + std::to_string(s) + ":mean", st->running_mean);
            append_block(out, prefix + ":bnstate" + std::to_string(s) + ":var", st->running_var);
        }
        ++s;
    }
}

class BlockReader {
public:
    BlockReader(const std::string& content, std::size_t pos) : content_(content), pos_(pos) {
        while (pos_ < content_.size()) {
            const std::string name = read_string(read_u32());
            Tensor t;
            const std::uint32_t ndim = read_u32();
            t.shape.resize(ndim);
            for (std::uint32_t i = 0; i < ndim; ++i) {
                std::int64_t d;
                read_raw(&d, sizeof(d));
                t.shape[i] = static_cast<int>(d);
            }
            t.data.resize(t.numel());
            read_raw(t.data.data(), t.data.size() * sizeof(double));
            blocks_[name] = std::move(t);
        }
    }

    const Tensor& get(const std::string& name) const {
        const auto it = blocks_.find(name);
        if (it == blocks_.end()) throw IoError("bundle: missing parameter block '" + name + "'");
        return it->second;
    }
    bool has(const std::string& name) const { return blocks_.count(name) > 0; }

private:
    std::uint32_t read_u32() {
        std::uint32_t v;
        read_raw(&v, sizeof(v));
        return v;
    }
    std::string read_string(std::uint32_t len) {
        if (pos_ + len > content_.size()) throw IoError("bundle: corrupt payload (truncated)");
        std::string s(content_.data() + pos_, len);
        pos_ += len;
        return s;
    }
    void read_raw(void* dst, std::size_t n) {
        if (pos_ + n > content_.size()) throw IoError("bundle: corrupt payload (truncated)");
        std::memcpy(dst, content_.data() + pos_, n);
        pos_ += n;
    }

    const std::string& content_;
    std::size_t pos_;
    std::map<std::string, Tensor> blocks_;
};

void restore_network(const BlockReader& r, const std::string& prefix, models::Network& net) {
    for (diff::Parameter* p : net.params()) {
        const Tensor& t = r.get(prefix + ":" + p->name);
        if (t.shape != p->value.shape) throw IoError("bundle: shape mismatch for '" + p->name + "'");
        p->value = t;
    }
    int s = 0;
    for (diff::BatchNormState* st : net.bn_states()) {
        const std::string base = prefix + ":bnstate" + std::to_string(s);
        if (r.has(base + ":uninit")) {
            st->initialized = false;
        } else {
            st->running_mean = r.get(base + ":mean");
            st->running_var = r.get(base + ":var");
            st->initialized = true;
        }
        ++s;
    }
}

}  // namespace

void save_bundle(const ModelBundle& bundle, const std::string& path) {
    json header;
    header["format"] = "respbundle";
    header["version"] = kBundleVersion;
    header["variant"] = bundle.variant;
    header["seed"] = bundle.seed;
    header["training_log"] = bundle.training_log_path;
    header["prior"] = json{{"latent_dim", bundle.prior.latent_dim},
                           {"class_dim", bundle.prior.class_dim},
                           {"class_probs", bundle.prior.class_probs}};
    if (bundle.norm) {
        header["norm"] = json{{"mean", bundle.norm->mean}, {"std", bundle.norm->std}};
    }
    if (bundle.thresholds) {
        header["thresholds"] =
            json{{"lower", bundle.thresholds->lower}, {"upper", bundle.thresholds->upper}};
    }
    if (bundle.encoder) header["encoder"] = spec_to_json(bundle.encoder->spec());
    if (bundle.decoder) header["decoder"] = spec_to_json(bundle.decoder->spec());
    if (bundle.discriminator) header["discriminator"] = spec_to_json(bundle.discriminator->spec());
    if (bundle.classifier) header["classifier"] = spec_to_json(bundle.classifier->spec());
    if (bundle.recon_net) header["recon"] = spec_to_json(bundle.recon_net->spec());

    std::string out;
    out.append(kMagic, 8);
    const std::string htext = header.dump();
    append_u32(out, static_cast<std::uint32_t>(htext.size()));
    out.append(htext);

    if (bundle.encoder) append_network(out, "encoder", *bundle.encoder);
    if (bundle.decoder) append_network(out, "decoder", *bundle.decoder);
    if (bundle.discriminator) append_network(out, "discriminator", *bundle.discriminator);
    if (bundle.classifier) append_network(out, "classifier", *bundle.classifier);
    if (bundle.recon_net) append_network(out, "recon", *bundle.recon_net);

    io::write_file_atomic(path, out);
}

ModelBundle load_bundle(const std::string& path) {
    const std::string content = io::read_file(path);
    if (content.size() < 12 || std::memcmp(content.data(), kMagic, 8) != 0)
        throw IoError("bundle '" + path + "': bad magic");
    std::uint32_t hlen;
    std::memcpy(&hlen, content.data() + 8, sizeof(hlen));
    if (12 + static_cast<std::size_t>(hlen) > content.size())
        throw IoError("bundle '" + path + "': corrupt payload (truncated header)");
    json header;
    try {
        header = json::parse(content.substr(12, hlen));
    } catch (const json::parse_error& e) {
        throw IoError("bundle '" + path + "': corrupt header: " + e.what());
    }
    if (header.value("format", "") != "respbundle")
        throw IoError("bundle '" + path + "': not a bundle file");
    const int version = header.at("version").get<int>();
    if (version > kBundleVersion)
        throw IoError("bundle '" + path + "': version " + std::to_string(version) +
                      " is newer than supported version " + std::to_string(kBundleVersion));

    ModelBundle b;
    b.variant = header.at("variant").get<std::string>();
    b.seed = header.at("seed").get<std::uint64_t>();
    b.training_log_path = header.value("training_log", "");
    b.prior.latent_dim = header.at("prior").at("latent_dim").get<int>();
    b.prior.class_dim = header.at("prior").at("class_dim").get<int>();
    b.prior.class_probs = header.at("prior").at("class_probs").get<std::vector<double>>();
    if (header.contains("norm")) {
        NormStats st;
        const auto m = header["norm"]["mean"].get<std::vector<double>>();
        const auto s = header["norm"]["std"].get<std::vector<double>>();
        if (m.size() != 6 || s.size() != 6) throw IoError("bundle: bad norm stats");
        std::copy(m.begin(), m.end(), st.mean.begin());
        std::copy(s.begin(), s.end(), st.std.begin());
        b.norm = st;
    }
    if (header.contains("thresholds")) {
        SlopeThresholds th;
        th.lower = header["thresholds"]["lower"].get<double>();
        th.upper = header["thresholds"]["upper"].get<double>();
        b.thresholds = th;
    }

    Rng dummy(0);
    BlockReader reader(content, 12 + hlen);
    if (header.contains("encoder")) {
        b.encoder = std::make_unique<models::Encoder>(encoder_spec_from_json(header["encoder"]), dummy);
        restore_network(reader, "encoder", *b.encoder);
    }
    if (header.contains("decoder")) {
        b.decoder = std::make_unique<models::Decoder>(decoder_spec_from_json(header["decoder"]), dummy);
        restore_network(reader, "decoder", *b.decoder);
    }
    if (header.contains("discriminator")) {
        b.discriminator = std::make_unique<models::Discriminator>(
            discriminator_spec_from_json(header["discriminator"]), dummy);
        restore_network(reader, "discriminator", *b.discriminator);
    }
    if (header.contains("classifier")) {
        b.classifier = std::make_unique<models::Classifier>(
            classifier_spec_from_json(header["classifier"]), dummy);
        restore_network(reader, "classifier", *b.classifier);
    }
    if (header.contains("recon")) {
        b.recon_net = std::make_unique<models::ReconNet>(recon_spec_from_json(header["recon"]), dummy);
        restore_network(reader, "recon", *b.recon_net);
    }
    return b;
}

}  // namespace resp::train
