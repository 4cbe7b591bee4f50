#include "resp/runconfig.hpp"

#include <algorithm>
#include <sstream>

#include "resp/dataset_io.hpp"

namespace resp::cli {

const std::map<std::string, std::string>& RunConfig::registry() {
    static const std::map<std::string, std::string> reg = {
        {"seed", "1234"},
        {"out_dir", "out"},
        {"dataset.binary", "false"},

        {"synth.num_samples", "1000"},
        {"synth.periods_per_sample", "25"},
        {"synth.sample_rate", "26"},
        {"synth.base_amplitude", "10"},
        {"synth.base_period", "4"},
        {"synth.period_jitter", "0.1"},
        {"synth.amplitude_jitter", "0.1"},
        {"synth.noise_sigma", "0.05"},
        {"synth.vary_period_amplitude", "false"},
        {"synth.slope_down_lo", "-0.02"},
        {"synth.slope_down_hi", "-0.005"},
        {"synth.slope_regular_lo", "-0.002"},
        {"synth.slope_regular_hi", "0.002"},
        {"synth.slope_up_lo", "0.005"},
        {"synth.slope_up_hi", "0.02"},

        {"model.variant", "saae"},
        {"model.latent_dim", "15"},
        {"model.classes", "3"},
        {"model.noise_dim", "1"},
        {"model.filters", "32,64,64,128"},
        {"model.kernel", "5"},
        {"model.dense_units", "128"},

        {"train.epochs", "50"},
        {"train.batch_size", "256"},
        {"train.lr_reconstruction", "0"},  // 0 = variant default
        {"train.lr_discriminator", "0"},
        {"train.lr_classification", "0"},
        {"train.lr_decay", "0"},
        {"train.beta_n", "0.02"},
        {"train.alpha", "5"},
        {"train.recon_scale", "4"},
        {"train.label_fraction", "1.0"},
        {"train.label_count", "0"},
        {"train.validation_fraction", "0.1"},
        {"train.patience", "20"},
        {"train.gen_style", "nonsaturating"},
        {"train.verbose", "false"},

        {"classifier.arch", "cnn"},
        {"classifier.hidden", "128,128"},

        {"preprocess.n_t", "25"},
        {"preprocess.stride", "1"},
        {"preprocess.percentile", "0.075"},

        {"recon.stride", "100"},
        {"recon.hidden", "256,256,256"},
        {"recon.popbr_fraction", "0.1"},
        {"recon.mode", "popbr"},
        {"recon.sample_index", "0"},

        {"eval.n_generated", "3000"},
        {"eval.repeats", "3"},
        {"eval.bins", "50"},
        {"eval.protocol", "classification"},

        {"generate.count", "100"},
        {"generate.class", "any"},
    };
    return reg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (registry().find(key) == registry().end())
        throw ConfigError("unknown configuration key '" + key + "'");
    overrides_[key] = value;
}

std::string RunConfig::get_string(const std::string& key) const {
    const auto it = overrides_.find(key);
    if (it != overrides_.end()) return it->second;
    const auto reg = registry().find(key);
    if (reg == registry().end()) throw ConfigError("unknown configuration key '" + key + "'");
    return reg->second;
}

long long RunConfig::get_int(const std::string& key) const {
    const std::string s = get_string(key);
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected integer, got '" + s + "'");
    }
}

double RunConfig::get_double(const std::string& key) const {
    const std::string s = get_string(key);
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected number, got '" + s + "'");
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string s = get_string(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("key '" + key + "': expected boolean, got '" + s + "'");
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
    const std::string s = get_string(key);
    std::vector<int> out;
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, ',')) {
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': expected integer list, got '" + s + "'");
        }
    }
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

namespace {
std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}
}  // namespace

void RunConfig::merge_file(const std::string& path) {
    const std::string content = io::read_file(path);
    std::istringstream is(content);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

RunConfig RunConfig::from_file(const std::string& path) {
    RunConfig cfg;
    cfg.merge_file(path);
    return cfg;
}

std::string RunConfig::resolved_text() const {
    std::ostringstream os;
    for (const auto& [key, def] : registry()) {
        const auto it = overrides_.find(key);
        os << key << " = " << (it != overrides_.end() ? it->second : def) << "\n";
    }
    return os.str();
}

synth::SynthConfig RunConfig::synth_config() const {
    synth::SynthConfig c;
    c.seed = static_cast<std::uint64_t>(get_int("seed"));
    c.num_samples = static_cast<int>(get_int("synth.num_samples"));
    c.periods_per_sample = static_cast<int>(get_int("synth.periods_per_sample"));
    c.sample_rate = get_double("synth.sample_rate");
    c.base_amplitude = get_double("synth.base_amplitude");
    c.base_period = get_double("synth.base_period");
    c.period_jitter = get_double("synth.period_jitter");
    c.amplitude_jitter = get_double("synth.amplitude_jitter");
    c.noise_sigma = get_double("synth.noise_sigma");
    c.vary_period_amplitude = get_bool("synth.vary_period_amplitude");
    c.slope_classes[0] = {get_double("synth.slope_down_lo"), get_double("synth.slope_down_hi")};
    c.slope_classes[1] = {get_double("synth.slope_regular_lo"), get_double("synth.slope_regular_hi")};
    c.slope_classes[2] = {get_double("synth.slope_up_lo"), get_double("synth.slope_up_hi")};
    c.validate();
    return c;
}

train::TrainConfig RunConfig::train_config(models::Variant variant) {
    train::TrainConfig c = train::TrainConfig::defaults_for(variant);
    c.epochs = static_cast<int>(get_int("train.epochs"));
    c.batch_size = static_cast<int>(get_int("train.batch_size"));
    if (get_double("train.lr_reconstruction") > 0)
        c.lr_reconstruction = get_double("train.lr_reconstruction");
    if (get_double("train.lr_discriminator") > 0)
        c.lr_discriminator = get_double("train.lr_discriminator");
    if (get_double("train.lr_classification") > 0)
        c.lr_classification = get_double("train.lr_classification");
    c.lr_decay = get_double("train.lr_decay");
    c.beta_n = get_double("train.beta_n");
    c.alpha = get_double("train.alpha");
    c.recon_scale = get_double("train.recon_scale");
    c.label_fraction = get_double("train.label_fraction");
    c.label_count = static_cast<int>(get_int("train.label_count"));
    c.seed = static_cast<std::uint64_t>(get_int("seed"));
    c.validation_fraction = get_double("train.validation_fraction");
    c.patience = static_cast<int>(get_int("train.patience"));
    c.gen_style = obj::gen_style_from_string(get_string("train.gen_style"));
    c.verbose = get_bool("train.verbose");
    c.validate();
    // pin the effective rates in the resolved document
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", c.lr_reconstruction);
    overrides_["train.lr_reconstruction"] = buf;
    std::snprintf(buf, sizeof(buf), "%.17g", c.lr_discriminator);
    overrides_["train.lr_discriminator"] = buf;
    std::snprintf(buf, sizeof(buf), "%.17g", c.lr_classification);
    overrides_["train.lr_classification"] = buf;
    return c;
}

train::ModelSpecs RunConfig::model_specs(models::Variant variant, int n_t) const {
    return train::make_specs(variant, n_t, static_cast<int>(get_int("model.latent_dim")),
                             static_cast<int>(get_int("model.classes")),
                             get_int_list("model.filters"),
                             static_cast<int>(get_int("model.dense_units")),
                             static_cast<int>(get_int("model.noise_dim")),
                             static_cast<int>(get_int("model.kernel")));
}

models::ClassifierSpec RunConfig::classifier_spec(int n_t) const {
    models::ClassifierSpec s;
    s.arch = models::classifier_arch_from_string(get_string("classifier.arch"));
    s.n_t = n_t;
    s.classes = static_cast<int>(get_int("model.classes"));
    s.filters = get_int_list("model.filters");
    s.kernel = static_cast<int>(get_int("model.kernel"));
    s.hidden = get_int_list("classifier.hidden");
    return s;
}

models::ReconNetSpec RunConfig::recon_spec() const {
    models::ReconNetSpec s;
    s.hidden = get_int_list("recon.hidden");
    s.mode = get_string("recon.mode");
    return s;
}

}  // namespace resp::cli
