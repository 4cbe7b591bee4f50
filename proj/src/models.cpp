#include "resp/models.hpp"

#include <cmath>

namespace resp::models {

Variant variant_from_string(const std::string& s) {
    if (s == "vae") return Variant::vae;
    if (s == "aae") return Variant::aae;
    if (s == "saae") return Variant::saae;
    throw ConfigError("unknown model variant '" + s + "'");
}

const char* to_string(Variant v) {
    switch (v) {
        case Variant::vae: return "vae";
        case Variant::aae: return "aae";
        case Variant::saae: return "saae";
    }
    return "?";
}

ClassifierSpec::Arch classifier_arch_from_string(const std::string& s) {
    if (s == "feedforward") return ClassifierSpec::Arch::feedforward;
    if (s == "cnn") return ClassifierSpec::Arch::cnn;
    throw ConfigError("unknown classifier architecture '" + s + "'");
}

const char* to_string(ClassifierSpec::Arch a) {
    return a == ClassifierSpec::Arch::feedforward ? "feedforward" : "cnn";
}

std::vector<int> encoder_pools(int n_t, int stages) {
    std::vector<int> pools;
    int t = n_t;
    for (int i = 0; i < stages; ++i) {
        const int p = t >= 6 ? 2 : 1;
        pools.push_back(p);
        t /= p;
    }
    return pools;
}

int pooled_length(int n_t, int stages) {
    int t = n_t;
    for (int p : encoder_pools(n_t, stages)) t /= p;
    return t;
}

void EncoderSpec::validate() const {
    if (n_t < 4) throw ConfigError("encoder: n_t too small");
    if (filters.size() != 4) throw ConfigError("encoder: expected 4 conv layers");
    if (kernel < 1) throw ConfigError("encoder: kernel must be >= 1");
    if (latent_dim < 1) throw ConfigError("encoder: latent_dim must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder: dropout must be in [0,1)");
    if (variant == Variant::saae && class_dim < 2)
        throw ConfigError("encoder: saae needs class_dim >= 2");
    if (variant != Variant::vae && noise_dim < 0)
        throw ConfigError("encoder: noise_dim must be >= 0");
}

void DecoderSpec::validate() const {
    if (filters.size() != 4 || dilations.size() != 4)
        throw ConfigError("decoder: expected 4 conv layers with dilations");
    for (int d : dilations)
        if (d < 1) throw ConfigError("decoder: dilation must be >= 1");
    if (input_dim < 1) throw ConfigError("decoder: input_dim must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("decoder: dropout must be in [0,1)");
}

void DiscriminatorSpec::validate() const {
    if (input_dim < 1) throw ConfigError("discriminator: input_dim must be >= 1");
    if (hidden.size() != 4) throw ConfigError("discriminator: expected 4 hidden layers");
}

void ClassifierSpec::validate() const {
    if (classes < 2) throw ConfigError("classifier: classes must be >= 2");
    if (arch == Arch::cnn && filters.size() != 4)
        throw ConfigError("classifier: cnn trunk expects 4 conv layers");
    if (hidden.empty()) throw ConfigError("classifier: hidden stack must be non-empty");
}

void ReconNetSpec::validate() const {
    if (input_len != 120 || output_len != 100)
        throw ConfigError("recon net: fixed 120 -> 100 mapping");
    if (hidden.empty()) throw ConfigError("recon net: hidden stack must be non-empty");
    if (mode != "patbr" && mode != "popbr") throw ConfigError("recon net: mode must be patbr|popbr");
}

// ---- layers -------------------------------------------------------------------

DenseLayer::DenseLayer(const std::string& name, int in, int out, bool he_init, Rng& rng)
    : w(name + ".w",
        he_init ? diff::he_uniform({in, out}, in, rng) : diff::glorot_uniform({in, out}, in, out, rng)),
      b(name + ".b", Tensor({out})) {}

ConvLayer::ConvLayer(const std::string& name, int kernel, int in_ch, int out_ch, int dil, Rng& rng)
    : k(name + ".k", diff::he_uniform({kernel, in_ch, out_ch}, kernel * in_ch, rng)),
      b(name + ".b", Tensor({out_ch})),
      dilation(dil) {}

BatchNormLayer::BatchNormLayer(const std::string& name, int channels)
    : gamma(name + ".gamma", Tensor({channels}, 1.0)), beta(name + ".beta", Tensor({channels})) {}

std::size_t Network::param_count() const {
    std::size_t n = 0;
    for (const Parameter* p : params_) n += p->numel();
    return n;
}

void Network::zero_grads() {
    for (Parameter* p : params_) p->zero_grad();
}

// ---- encoder -------------------------------------------------------------------

Encoder::Encoder(EncoderSpec spec, Rng& rng) : spec_(std::move(spec)) {
    spec_.validate();
    pools_ = encoder_pools(spec_.n_t);
    int ch = spec_.in_channels;
    for (int i = 0; i < 4; ++i) {
        const int out = spec_.filters[static_cast<std::size_t>(i)];
        convs_.emplace_back("enc.conv" + std::to_string(i), spec_.kernel, ch, out, 1, rng);
        register_conv(convs_.back());
        bns_.emplace_back("enc.bn" + std::to_string(i), out);
        register_bn(bns_.back());
        ch = out;
    }
    const int t_final = pooled_length(spec_.n_t);
    int feat = t_final * ch;
    if (spec_.variant != Variant::vae) feat += spec_.noise_dim;

    dense_.emplace_back("enc.body", feat, spec_.dense_units, true, rng);
    register_dense(dense_.back());
    if (spec_.variant == Variant::vae) {
        dense_.emplace_back("enc.mu", spec_.dense_units, spec_.latent_dim, false, rng);
        register_dense(dense_.back());
        dense_.emplace_back("enc.logvar", spec_.dense_units, spec_.latent_dim, false, rng);
        register_dense(dense_.back());
    } else {
        dense_.emplace_back("enc.z", spec_.dense_units, spec_.latent_dim, false, rng);
        register_dense(dense_.back());
        if (spec_.variant == Variant::saae) {
            dense_.emplace_back("enc.class", spec_.dense_units, spec_.class_dim, false, rng);
            register_dense(dense_.back());
        }
    }
}

Encoder::Out Encoder::forward(Graph& g, int x, Mode mode, Rng& rng, int eta) {
    int h = x;
    for (int i = 0; i < 4; ++i) {
        h = convs_[static_cast<std::size_t>(i)].apply(g, h);
        h = g.maxpool1d(h, pools_[static_cast<std::size_t>(i)]);
        h = g.leaky_relu(h, spec_.leaky_slope);
        h = bns_[static_cast<std::size_t>(i)].apply(g, h, mode);
        h = g.dropout(h, spec_.dropout, mode, rng);
    }
    h = g.flatten(h);
    if (spec_.variant != Variant::vae && spec_.noise_dim > 0) {
        if (eta < 0) throw ShapeError("encoder: noise input required for aae/saae forward");
        h = g.concat_cols(h, eta);
    }
    h = dense_[0].apply(g, h);
    h = g.leaky_relu(h, spec_.leaky_slope);

    Out out;
    out.features = h;
    if (spec_.variant == Variant::vae) {
        out.mu = dense_[1].apply(g, h);
        out.logvar = dense_[2].apply(g, h);
    } else {
        out.z = dense_[1].apply(g, h);
        if (spec_.variant == Variant::saae) {
            out.pi_logits = dense_[2].apply(g, h);
            out.pi = g.softmax(out.pi_logits);
        }
    }
    return out;
}

// ---- decoder -------------------------------------------------------------------

Decoder::Decoder(DecoderSpec spec, Rng& rng) : spec_(std::move(spec)) {
    spec_.validate();
    const std::vector<int> pools = encoder_pools(spec_.n_t);
    up_factors_.assign(pools.rbegin(), pools.rend());
    t0_ = pooled_length(spec_.n_t);

    dense_.emplace_back("dec.body0", spec_.input_dim, spec_.dense_units, true, rng);
    register_dense(dense_.back());
    const int c0 = spec_.filters[0];
    dense_.emplace_back("dec.body1", spec_.dense_units, t0_ * c0, true, rng);
    register_dense(dense_.back());

    int ch = c0;
    for (int i = 0; i < 4; ++i) {
        const int out = spec_.filters[static_cast<std::size_t>(i)];
        convs_.emplace_back("dec.conv" + std::to_string(i), spec_.kernel, ch, out,
                            spec_.dilations[static_cast<std::size_t>(i)], rng);
        register_conv(convs_.back());
        bns_.emplace_back("dec.bn" + std::to_string(i), out);
        register_bn(bns_.back());
        ch = out;
    }
    int t = t0_;
    for (int f : up_factors_) t *= f;
    dense_.emplace_back("dec.out", t * ch, spec_.n_t * spec_.out_channels, false, rng);
    register_dense(dense_.back());
}

int Decoder::forward(Graph& g, int zy, Mode mode, Rng& rng) {
    if (g.val(zy).dim(1) != spec_.input_dim)
        throw ShapeError("decoder: latent input has dimension " +
                         std::to_string(g.val(zy).dim(1)) + ", expected " +
                         std::to_string(spec_.input_dim));
    int h = dense_[0].apply(g, zy);
    h = g.leaky_relu(h, spec_.leaky_slope);
    h = dense_[1].apply(g, h);
    h = g.leaky_relu(h, spec_.leaky_slope);
    h = g.reshape3(h, t0_, spec_.filters[0]);
    for (int i = 0; i < 4; ++i) {
        h = g.upsample1d(h, up_factors_[static_cast<std::size_t>(i)]);
        h = convs_[static_cast<std::size_t>(i)].apply(g, h);
        h = g.leaky_relu(h, spec_.leaky_slope);
        h = bns_[static_cast<std::size_t>(i)].apply(g, h, mode);
        h = g.dropout(h, spec_.dropout, mode, rng);
    }
    h = g.flatten(h);
    h = dense_.back().apply(g, h);
    return g.reshape3(h, spec_.n_t, spec_.out_channels);
}

// ---- discriminator ---------------------------------------------------------------

Discriminator::Discriminator(DiscriminatorSpec spec, Rng& rng) : spec_(std::move(spec)) {
    spec_.validate();
    int in = spec_.input_dim;
    for (std::size_t i = 0; i < spec_.hidden.size(); ++i) {
        dense_.emplace_back("disc.h" + std::to_string(i), in, spec_.hidden[i], true, rng);
        register_dense(dense_.back());
        in = spec_.hidden[i];
    }
    dense_.emplace_back("disc.logit", in, 1, false, rng);
    register_dense(dense_.back());
}

int Discriminator::forward(Graph& g, int zy) {
    if (g.val(zy).dim(1) != spec_.input_dim)
        throw ShapeError("discriminator: input has dimension " + std::to_string(g.val(zy).dim(1)) +
                         ", expected " + std::to_string(spec_.input_dim));
    int h = zy;
    for (std::size_t i = 0; i + 1 < dense_.size(); ++i) {
        h = dense_[i].apply(g, h);
        h = g.leaky_relu(h, spec_.leaky_slope);
    }
    return dense_.back().apply(g, h);  // raw logit
}

// ---- classifier --------------------------------------------------------------------

Classifier::Classifier(ClassifierSpec spec, Rng& rng) : spec_(std::move(spec)) {
    spec_.validate();
    if (spec_.arch == ClassifierSpec::Arch::cnn) {
        pools_ = encoder_pools(spec_.n_t);
        int ch = spec_.in_channels;
        for (int i = 0; i < 4; ++i) {
            const int out = spec_.filters[static_cast<std::size_t>(i)];
            convs_.emplace_back("cls.conv" + std::to_string(i), spec_.kernel, ch, out, 1, rng);
            register_conv(convs_.back());
            bns_.emplace_back("cls.bn" + std::to_string(i), out);
            register_bn(bns_.back());
            ch = out;
        }
        int in = pooled_length(spec_.n_t) * ch;
        dense_.emplace_back("cls.body", in, spec_.hidden[0], true, rng);
        register_dense(dense_.back());
        dense_.emplace_back("cls.logits", spec_.hidden[0], spec_.classes, false, rng);
        register_dense(dense_.back());
    } else {
        int in = spec_.n_t * spec_.in_channels;
        for (std::size_t i = 0; i < spec_.hidden.size(); ++i) {
            dense_.emplace_back("cls.h" + std::to_string(i), in, spec_.hidden[i], true, rng);
            register_dense(dense_.back());
            in = spec_.hidden[i];
        }
        dense_.emplace_back("cls.logits", in, spec_.classes, false, rng);
        register_dense(dense_.back());
    }
}

int Classifier::forward_logits(Graph& g, int x, Mode mode, Rng& rng) {
    int h = x;
    if (spec_.arch == ClassifierSpec::Arch::cnn) {
        for (int i = 0; i < 4; ++i) {
            h = convs_[static_cast<std::size_t>(i)].apply(g, h);
            h = g.maxpool1d(h, pools_[static_cast<std::size_t>(i)]);
            h = g.leaky_relu(h, spec_.leaky_slope);
            h = bns_[static_cast<std::size_t>(i)].apply(g, h, mode);
            h = g.dropout(h, spec_.dropout, mode, rng);
        }
        h = g.flatten(h);
        h = dense_[0].apply(g, h);
        h = g.leaky_relu(h, spec_.leaky_slope);
        return dense_[1].apply(g, h);
    }
    h = g.flatten(h);
    for (std::size_t i = 0; i + 1 < dense_.size(); ++i) {
        h = dense_[i].apply(g, h);
        h = g.leaky_relu(h, spec_.leaky_slope);
        h = g.dropout(h, spec_.dropout, mode, rng);
    }
    return dense_.back().apply(g, h);
}

// ---- recon net -----------------------------------------------------------------------

ReconNet::ReconNet(ReconNetSpec spec, Rng& rng) : spec_(std::move(spec)) {
    spec_.validate();
    int in = spec_.input_len;
    for (std::size_t i = 0; i < spec_.hidden.size(); ++i) {
        dense_.emplace_back("recon.h" + std::to_string(i), in, spec_.hidden[i], true, rng);
        register_dense(dense_.back());
        in = spec_.hidden[i];
    }
    dense_.emplace_back("recon.out", in, spec_.output_len, false, rng);
    register_dense(dense_.back());
}

int ReconNet::forward(Graph& g, int x) {
    int h = x;
    for (std::size_t i = 0; i + 1 < dense_.size(); ++i) {
        h = dense_[i].apply(g, h);
        h = g.leaky_relu(h, spec_.leaky_slope);
    }
    return dense_.back().apply(g, h);
}

// ---- tensor-level convenience ------------------------------------------------------

EncodeResult encode(Encoder& enc, const Tensor& x, Mode mode, Rng& rng, const Tensor* eta) {
    Graph g;
    const int xi = g.input(x);
    int eta_node = -1;
    const EncoderSpec& sp = enc.spec();
    if (sp.variant != Variant::vae && sp.noise_dim > 0) {
        Tensor e = eta ? *eta : Tensor({x.dim(0), sp.noise_dim});
        eta_node = g.input(std::move(e));
    }
    const Encoder::Out out = enc.forward(g, xi, mode, rng, eta_node);
    EncodeResult r;
    if (sp.variant == Variant::vae) {
        r.mu = g.val(out.mu);
        r.sigma = Tensor(r.mu.shape);
        const Tensor& lv = g.val(out.logvar);
        for (std::size_t i = 0; i < lv.data.size(); ++i)
            r.sigma.data[i] = std::exp(0.5 * lv.data[i]);
    } else {
        r.z = g.val(out.z);
        if (sp.variant == Variant::saae) r.pi = g.val(out.pi);
    }
    for (const Tensor* t : {&r.mu, &r.sigma, &r.z, &r.pi})
        if (t->numel() > 0 && !t->all_finite()) throw NumericError("encode: non-finite output");
    return r;
}

Tensor decode(Decoder& dec, const Tensor& z, const Tensor* y, Mode mode, Rng& rng) {
    Graph g;
    int zy;
    if (y && y->numel() > 0) {
        if (y->dim(0) != z.dim(0)) throw ShapeError("decode: class rows mismatch");
        zy = g.concat_cols(g.input(z), g.input(*y));
    } else {
        zy = g.input(z);
    }
    const int xhat = dec.forward(g, zy, mode, rng);
    Tensor out = g.val(xhat);
    if (!out.all_finite()) throw NumericError("decode: non-finite output");
    return out;
}

}  // namespace resp::models
