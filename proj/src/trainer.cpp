#include "resp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "resp/metrics.hpp"
#include "resp/preprocess.hpp"

namespace resp::train {

using diff::Adam;
using diff::Graph;
using diff::Mode;
using diff::Parameter;

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
    if (lr_reconstruction <= 0 || lr_discriminator <= 0 || lr_classification <= 0)
        throw ConfigError("train: learning rates must be > 0");
    if (beta_n < 0) throw ConfigError("train: beta_n must be >= 0");
    if (alpha < 0) throw ConfigError("train: alpha must be >= 0");
    if (recon_scale <= 0) throw ConfigError("train: recon_scale must be > 0");
    if (label_fraction <= 0.0 || label_fraction > 1.0)
        throw ConfigError("train: label_fraction must be in (0,1]");
    if (validation_fraction < 0.0 || validation_fraction >= 1.0)
        throw ConfigError("train: validation_fraction must be in [0,1)");
    if (patience < 1) throw ConfigError("train: patience must be >= 1");
}

TrainConfig TrainConfig::defaults_for(Variant v) {
    TrainConfig c;
    switch (v) {
        case Variant::vae:
            c.lr_reconstruction = 1e-4;
            break;
        case Variant::aae:
            c.lr_reconstruction = 2e-4;
            c.lr_discriminator = 1e-4;
            break;
        case Variant::saae:
            c.lr_reconstruction = 1e-4;
            c.lr_classification = 1e-4;
            c.lr_discriminator = 2e-4;
            break;
    }
    return c;
}

ModelSpecs make_specs(Variant variant, int n_t, int latent_dim, int classes,
                      const std::vector<int>& enc_filters, int dense_units, int noise_dim,
                      int kernel) {
    ModelSpecs s;
    s.encoder.variant = variant;
    s.encoder.n_t = n_t;
    s.encoder.filters = enc_filters;
    s.encoder.kernel = kernel;
    s.encoder.dense_units = dense_units;
    s.encoder.latent_dim = latent_dim;
    s.encoder.class_dim = variant == Variant::saae ? classes : 0;
    s.encoder.noise_dim = variant == Variant::vae ? 0 : noise_dim;

    s.decoder.n_t = n_t;
    s.decoder.filters.assign(enc_filters.rbegin(), enc_filters.rend());
    s.decoder.kernel = kernel;
    s.decoder.dense_units = dense_units;
    s.decoder.input_dim = latent_dim + (variant == Variant::saae ? classes : 0);

    // joint (z, y) space for saae, z alone otherwise
    s.discriminator.input_dim = s.decoder.input_dim;
    return s;
}

// ---- batching -----------------------------------------------------------------

std::vector<std::vector<int>> make_batches(const std::vector<int>& indices, int batch_size,
                                           Rng& rng) {
    std::vector<int> shuffled = indices;
    rng.shuffle(shuffled);
    std::vector<std::vector<int>> batches;
    for (std::size_t i = 0; i + static_cast<std::size_t>(batch_size) <= shuffled.size();
         i += static_cast<std::size_t>(batch_size))
        batches.emplace_back(shuffled.begin() + static_cast<std::ptrdiff_t>(i),
                             shuffled.begin() + static_cast<std::ptrdiff_t>(i) + batch_size);
    return batches;
}

LabelCycler::LabelCycler(std::vector<int> indices, Rng* rng)
    : indices_(std::move(indices)), rng_(rng) {
    if (indices_.empty()) throw DataError("label cycler: empty labeled set");
    if (rng_) rng_->shuffle(indices_);
}

std::vector<int> LabelCycler::next(int count) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        if (pos_ >= indices_.size()) {
            pos_ = 0;
            if (rng_) rng_->shuffle(indices_);
        }
        out.push_back(indices_[pos_++]);
    }
    return out;
}

std::vector<int> stratified_label_subset(const LabeledDataset& data, const std::vector<int>& pool,
                                         int count, Rng& rng) {
    if (count < 1) throw ConfigError("stratified subset: count must be >= 1");
    if (count > static_cast<int>(pool.size()))
        throw DataError("stratified subset: not enough samples in pool");
    const int classes = data.num_classes;
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(classes));
    for (int idx : pool) {
        const int lab = data.samples[static_cast<std::size_t>(idx)].label;
        if (lab < 0 || lab >= classes)
            throw DataError("stratified subset: unlabeled sample in pool");
        by_class[static_cast<std::size_t>(lab)].push_back(idx);
    }
    for (int c = 0; c < classes; ++c)
        if (by_class[static_cast<std::size_t>(c)].empty())
            throw DataError("stratified subset: class " + std::to_string(c) +
                            " missing from pool");
    for (auto& v : by_class) rng.shuffle(v);

    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(count));
    // per-class quota, remainder round-robin
    const int base = count / classes;
    int rem = count % classes;
    for (int c = 0; c < classes; ++c) {
        int want = base + (rem > 0 ? 1 : 0);
        if (rem > 0) --rem;
        auto& v = by_class[static_cast<std::size_t>(c)];
        if (want > static_cast<int>(v.size()))
            throw DataError("stratified subset: class " + std::to_string(c) +
                            " has too few samples");
        out.insert(out.end(), v.begin(), v.begin() + want);
    }
    rng.shuffle(out);
    return out;
}

bool CollapseMonitor::update(double accuracy) {
    if (accuracy > 0.99)
        ++consecutive_;
    else
        consecutive_ = 0;
    if (consecutive_ >= 5 && !collapsed_) {
        collapsed_ = true;
        std::fprintf(stderr,
                     "warning: discriminator accuracy > 0.99 for 5 consecutive epochs; "
                     "the regularization signal has collapsed\n");
    }
    return collapsed_;
}

// ---- small helpers ----------------------------------------------------------------

Tensor gather_rows(const Tensor& x, const std::vector<int>& indices) {
    if (x.rank() == 2) {
        Tensor out({static_cast<int>(indices.size()), x.dim(1)});
        for (std::size_t i = 0; i < indices.size(); ++i)
            std::copy_n(&x.data[static_cast<std::size_t>(indices[i]) * x.dim(1)], x.dim(1),
                        &out.data[i * static_cast<std::size_t>(x.dim(1))]);
        return out;
    }
    if (x.rank() == 3) {
        const std::size_t row = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
        Tensor out({static_cast<int>(indices.size()), x.dim(1), x.dim(2)});
        for (std::size_t i = 0; i < indices.size(); ++i)
            std::copy_n(&x.data[static_cast<std::size_t>(indices[i]) * row], row,
                        &out.data[i * row]);
        return out;
    }
    throw ShapeError("gather_rows: unsupported rank");
}

Tensor randn(const std::vector<int>& shape, Rng& rng) {
    Tensor t(shape);
    for (double& v : t.data) v = rng.normal();
    return t;
}

namespace {

struct Snapshot {
    std::vector<Tensor> values;
    std::vector<Tensor> bn_mean, bn_var;
    std::vector<bool> bn_init;
};

Snapshot take_snapshot(const std::vector<Parameter*>& params,
                       const std::vector<diff::BatchNormState*>& states) {
    Snapshot s;
    for (const Parameter* p : params) s.values.push_back(p->value);
    for (const diff::BatchNormState* st : states) {
        s.bn_mean.push_back(st->running_mean);
        s.bn_var.push_back(st->running_var);
        s.bn_init.push_back(st->initialized);
    }
    return s;
}

void restore_snapshot(const Snapshot& s, const std::vector<Parameter*>& params,
                      const std::vector<diff::BatchNormState*>& states) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = s.values[i];
    for (std::size_t i = 0; i < states.size(); ++i) {
        states[i]->running_mean = s.bn_mean[i];
        states[i]->running_var = s.bn_var[i];
        states[i]->initialized = s.bn_init[i];
    }
}

std::vector<Parameter*> concat_params(std::vector<Parameter*> a,
                                      const std::vector<Parameter*>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

void split_train_val(std::size_t n, double val_fraction, Rng& rng, std::vector<int>& train,
                     std::vector<int>& val) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    const std::size_t n_val = static_cast<std::size_t>(
        std::llround(val_fraction * static_cast<double>(n)));
    val.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
    if (train.empty()) throw DataError("train/val split: empty training set");
}

double decayed(double lr, double decay, int epoch) {
    return lr / (1.0 + decay * static_cast<double>(epoch));
}

void check_log_finite(const TrainLogRow& row) {
    const double vals[] = {row.recon_se, row.kl,         row.disc_loss, row.gen_loss,
                           row.class_ce, row.val_metric, row.val_recon_se, row.disc_acc};
    for (double v : vals)
        if (!std::isfinite(v)) throw NumericError("training diverged: non-finite logged value");
}

}  // namespace

// ---- VAE ------------------------------------------------------------------------

ModelBundle train_vae(const LabeledDataset& data, const TrainConfig& cfg, const ModelSpecs& specs) {
    cfg.validate();
    if (data.empty()) throw DataError("train_vae: empty dataset");
    if (specs.encoder.variant != Variant::vae) throw ConfigError("train_vae: spec variant mismatch");

    Rng init_rng(mix_seed(cfg.seed, 1));
    Rng split_rng(mix_seed(cfg.seed, 2));
    Rng loop_rng(mix_seed(cfg.seed, 3));

    ModelBundle bundle;
    bundle.variant = "vae";
    bundle.seed = cfg.seed;
    bundle.prior.latent_dim = specs.encoder.latent_dim;
    bundle.prior.class_dim = 0;
    bundle.encoder = std::make_unique<models::Encoder>(specs.encoder, init_rng);
    bundle.decoder = std::make_unique<models::Decoder>(specs.decoder, init_rng);
    models::Encoder& enc = *bundle.encoder;
    models::Decoder& dec = *bundle.decoder;

    const Tensor all_x = pre::to_tensor(data);
    std::vector<int> train_idx, val_idx;
    split_train_val(data.size(), cfg.validation_fraction, split_rng, train_idx, val_idx);
    if (val_idx.empty()) val_idx = train_idx;

    Adam opt(concat_params(enc.params(), dec.params()), cfg.lr_reconstruction);
    auto all_params = concat_params(enc.params(), dec.params());
    auto all_states = enc.bn_states();
    const auto dec_states = dec.bn_states();
    all_states.insert(all_states.end(), dec_states.begin(), dec_states.end());

    const Tensor val_x = gather_rows(all_x, val_idx);
    Rng dummy;
    auto validation_se = [&]() {
        const models::EncodeResult er = models::encode(enc, val_x, Mode::infer, dummy);
        const Tensor xhat = models::decode(dec, er.mu, nullptr, Mode::infer, dummy);
        double se = 0.0;
        for (std::size_t i = 0; i < xhat.data.size(); ++i) {
            const double d = xhat.data[i] - val_x.data[i];
            se += 0.5 * d * d;
        }
        return se / static_cast<double>(val_x.dim(0));
    };

    double best = std::numeric_limits<double>::infinity();
    Snapshot best_snap = take_snapshot(all_params, all_states);
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        opt.set_lr(decayed(cfg.lr_reconstruction, cfg.lr_decay, epoch));
        double se_sum = 0.0, kl_sum = 0.0;
        const auto batches = make_batches(train_idx, cfg.batch_size, loop_rng);
        if (batches.empty())
            throw DataError("train_vae: batch_size exceeds the training split");
        for (const auto& b : batches) {
            enc.zero_grads();
            dec.zero_grads();
            Graph g;
            const int xi = g.input(gather_rows(all_x, b));
            const auto out = enc.forward(g, xi, Mode::train, loop_rng);
            const int sigma = g.exp_(g.scale(out.logvar, 0.5));
            const int eps = g.input(randn({static_cast<int>(b.size()), specs.encoder.latent_dim},
                                          loop_rng));
            const int z = g.add(out.mu, g.mul(sigma, eps));
            const int xhat = dec.forward(g, z, Mode::train, loop_rng);
            const int se = g.se_half_mean(xhat, xi);
            const int kl = g.kl_gauss_mean(out.mu, out.logvar);
            const int loss = g.add(se, g.scale(kl, cfg.beta_n));
            g.backward(loss);
            opt.step();
            se_sum += g.scalar(se);
            kl_sum += g.scalar(kl);
        }
        TrainLogRow row;
        row.epoch = epoch;
        row.recon_se = se_sum / static_cast<double>(batches.size());
        row.kl = kl_sum / static_cast<double>(batches.size());
        row.val_recon_se = validation_se();
        row.val_metric = row.val_recon_se;
        row.lr = opt.lr();
        check_log_finite(row);
        bundle.log.push_back(row);
        if (cfg.verbose)
            std::fprintf(stderr, "vae epoch %d recon %.6f kl %.6f val %.6f\n", epoch, row.recon_se,
                         row.kl, row.val_recon_se);

        if (row.val_recon_se < best - 1e-12) {
            best = row.val_recon_se;
            best_snap = take_snapshot(all_params, all_states);
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    if (cfg.epochs > 0) restore_snapshot(best_snap, all_params, all_states);
    return bundle;
}

// ---- adversarial (aae / saae) -------------------------------------------------------

AdversarialTrainer::AdversarialTrainer(Variant variant, const LabeledDataset& data,
                                       std::vector<int> labeled_indices, const TrainConfig& cfg,
                                       const ModelSpecs& specs)
    : variant_(variant),
      data_(data),
      cfg_(cfg),
      loop_rng_(mix_seed(cfg.seed, 3)) {
    cfg_.validate();
    if (data.empty()) throw DataError("adversarial trainer: empty dataset");
    if (variant == Variant::vae) throw ConfigError("adversarial trainer: vae not supported here");
    if (specs.encoder.variant != variant)
        throw ConfigError("adversarial trainer: spec variant mismatch");

    Rng init_rng(mix_seed(cfg.seed, 1));
    Rng split_rng(mix_seed(cfg.seed, 2));

    encoder_ = std::make_unique<models::Encoder>(specs.encoder, init_rng);
    decoder_ = std::make_unique<models::Decoder>(specs.decoder, init_rng);
    discriminator_ = std::make_unique<models::Discriminator>(specs.discriminator, init_rng);

    prior_.latent_dim = specs.encoder.latent_dim;
    prior_.class_dim = variant == Variant::saae ? specs.encoder.class_dim : 0;

    all_x_ = pre::to_tensor(data);
    labels_ = pre::labels_of(data);
    split_train_val(data.size(), cfg_.validation_fraction, split_rng, train_idx_, val_idx_);
    if (val_idx_.empty()) val_idx_ = train_idx_;

    if (variant == Variant::saae) {
        if (labeled_indices.empty())
            throw DataError("train_saae: labeled subset must be non-empty");
        labeled_idx_ = std::move(labeled_indices);
        // classes present?
        std::vector<bool> seen(static_cast<std::size_t>(prior_.class_dim), false);
        for (int idx : labeled_idx_) {
            const int lab = labels_[static_cast<std::size_t>(idx)];
            if (lab < 0 || lab >= prior_.class_dim)
                throw DataError("train_saae: labeled subset contains an unlabeled sample");
            seen[static_cast<std::size_t>(lab)] = true;
        }
        for (int c = 0; c < prior_.class_dim; ++c)
            if (!seen[static_cast<std::size_t>(c)])
                throw DataError("train_saae: class " + std::to_string(c) +
                                " missing from labeled subset");
        cycler_ = std::make_unique<LabelCycler>(labeled_idx_, &loop_rng_);
    }

    opt_recon_ = std::make_unique<Adam>(
        concat_params(encoder_->params(), decoder_->params()), cfg_.lr_reconstruction);
    opt_disc_ = std::make_unique<Adam>(discriminator_->params(), cfg_.lr_discriminator);
    opt_gen_ = std::make_unique<Adam>(encoder_->params(), cfg_.lr_discriminator);
    opt_class_ = std::make_unique<Adam>(encoder_->params(), cfg_.lr_classification);
}

Tensor AdversarialTrainer::batch_x(const std::vector<int>& batch) const {
    return gather_rows(all_x_, batch);
}

namespace {
void zero_all(models::Network& a, models::Network& b, models::Network& c) {
    a.zero_grads();
    b.zero_grads();
    c.zero_grads();
}
}  // namespace

double AdversarialTrainer::step_reconstruction(const std::vector<int>& batch) {
    zero_all(*encoder_, *decoder_, *discriminator_);
    Graph g;
    const int xi = g.input(batch_x(batch));
    const int eta = g.input(randn({static_cast<int>(batch.size()), encoder_->spec().noise_dim},
                                  loop_rng_));
    const auto out = encoder_->forward(g, xi, Mode::train, loop_rng_, eta);
    const int zy = variant_ == Variant::saae ? g.concat_cols(out.z, out.pi) : out.z;
    const int xhat = decoder_->forward(g, zy, Mode::train, loop_rng_);
    const int loss = g.scale(g.se_half_mean(xhat, xi), cfg_.recon_scale);
    g.backward(loss);
    opt_recon_->step();
    return g.scalar(loss) / cfg_.recon_scale;
}

std::pair<double, double> AdversarialTrainer::step_discriminator(const std::vector<int>& batch) {
    zero_all(*encoder_, *decoder_, *discriminator_);
    const int b = static_cast<int>(batch.size());

    // fake joint samples from the current encoder (constants for this phase)
    Tensor fake;
    {
        Graph g;
        const int xi = g.input(batch_x(batch));
        const int eta = g.input(randn({b, encoder_->spec().noise_dim}, loop_rng_));
        const auto out = encoder_->forward(g, xi, Mode::train, loop_rng_, eta);
        const int zy = variant_ == Variant::saae ? g.concat_cols(out.z, out.pi) : out.z;
        fake = g.val(zy);
    }
    auto [z_r, y_r] = obj::sample_prior(prior_, b, loop_rng_);
    Tensor real;
    {
        Graph g;
        const int zr = g.input(std::move(z_r));
        const int zy = prior_.class_dim > 0 ? g.concat_cols(zr, g.input(std::move(y_r))) : zr;
        real = g.val(zy);
    }

    Graph g;
    const int dr = discriminator_->forward(g, g.input(std::move(real)));
    const int df = discriminator_->forward(g, g.input(std::move(fake)));
    const int loss = g.add(g.mean_all(g.softplus(g.neg(dr))), g.mean_all(g.softplus(df)));
    g.backward(loss);
    opt_disc_->step();

    int correct = 0;
    for (double v : g.val(dr).data)
        if (v > 0.0) ++correct;
    for (double v : g.val(df).data)
        if (v < 0.0) ++correct;
    const double acc = static_cast<double>(correct) / static_cast<double>(2 * b);
    return {g.scalar(loss), acc};
}

double AdversarialTrainer::step_generator(const std::vector<int>& batch) {
    zero_all(*encoder_, *decoder_, *discriminator_);
    Graph g;
    const int xi = g.input(batch_x(batch));
    const int eta = g.input(randn({static_cast<int>(batch.size()), encoder_->spec().noise_dim},
                                  loop_rng_));
    const auto out = encoder_->forward(g, xi, Mode::train, loop_rng_, eta);
    const int zy = variant_ == Variant::saae ? g.concat_cols(out.z, out.pi) : out.z;
    const int d = discriminator_->forward(g, zy);
    int loss;
    switch (cfg_.gen_style) {
        case obj::GenLossStyle::nonsaturating: loss = g.mean_all(g.softplus(g.neg(d))); break;
        case obj::GenLossStyle::saturating: loss = g.scale(g.mean_all(g.softplus(d)), -1.0); break;
        case obj::GenLossStyle::logit: loss = g.scale(g.mean_all(d), -1.0); break;
        default: throw ConfigError("bad generator loss style");
    }
    g.backward(loss);
    opt_gen_->step();
    return g.scalar(loss);
}

double AdversarialTrainer::step_classification() {
    if (variant_ != Variant::saae) return 0.0;
    const int want = std::min<int>(cfg_.batch_size, static_cast<int>(labeled_idx_.size()));
    const std::vector<int> batch = cycler_->next(want);
    std::vector<int> batch_labels(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
        batch_labels[i] = labels_[static_cast<std::size_t>(batch[i])];

    zero_all(*encoder_, *decoder_, *discriminator_);
    Graph g;
    const int xi = g.input(batch_x(batch));
    const int eta = g.input(randn({static_cast<int>(batch.size()), encoder_->spec().noise_dim},
                                  loop_rng_));
    const auto out = encoder_->forward(g, xi, Mode::train, loop_rng_, eta);
    const int loss = g.scale(g.softmax_ce_mean(out.pi_logits, std::move(batch_labels)), cfg_.alpha);
    g.backward(loss);
    opt_class_->step();
    return g.scalar(loss);
}

std::pair<double, double> AdversarialTrainer::validate() {
    Rng dummy;
    const Tensor vx = gather_rows(all_x_, val_idx_);
    const models::EncodeResult er = models::encode(*encoder_, vx, Mode::infer, dummy);
    Tensor zy = er.z;
    if (variant_ == Variant::saae) {
        Graph g;
        zy = g.val(g.concat_cols(g.input(er.z), g.input(er.pi)));
    }
    Graph g;
    const int xhat = decoder_->forward(g, g.input(zy), Mode::infer, dummy);
    const Tensor& xh = g.val(xhat);
    double se = 0.0;
    for (std::size_t i = 0; i < xh.data.size(); ++i) {
        const double d = xh.data[i] - vx.data[i];
        se += 0.5 * d * d;
    }
    se /= static_cast<double>(vx.dim(0));

    if (variant_ == Variant::saae) {
        bool have_labels = true;
        std::vector<int> val_labels(val_idx_.size());
        for (std::size_t i = 0; i < val_idx_.size(); ++i) {
            val_labels[i] = labels_[static_cast<std::size_t>(val_idx_[i])];
            if (val_labels[i] < 0) have_labels = false;
        }
        if (have_labels) {
            std::vector<int> preds(val_idx_.size());
            for (std::size_t i = 0; i < preds.size(); ++i) {
                int best = 0;
                for (int c = 1; c < er.pi.dim(1); ++c)
                    if (er.pi.at2(static_cast<int>(i), c) >
                        er.pi.at2(static_cast<int>(i), best))
                        best = c;
                preds[i] = best;
            }
            const auto scores = metrics::macro_f1(preds, val_labels, prior_.class_dim);
            return {scores.mf1, se};
        }
    }
    return {-se, se};
}

ModelBundle AdversarialTrainer::run() {
    ModelBundle bundle;
    bundle.variant = variant_ == Variant::saae ? "saae" : "aae";
    bundle.seed = cfg_.seed;
    bundle.prior = prior_;

    auto all_params = concat_params(concat_params(encoder_->params(), decoder_->params()),
                                    discriminator_->params());
    std::vector<diff::BatchNormState*> all_states = encoder_->bn_states();
    const auto dec_states = decoder_->bn_states();
    all_states.insert(all_states.end(), dec_states.begin(), dec_states.end());

    double best_metric = -std::numeric_limits<double>::infinity();
    double best_se = std::numeric_limits<double>::infinity();
    Snapshot best_snap = take_snapshot(all_params, all_states);
    int since_best = 0;
    CollapseMonitor monitor;

    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        opt_recon_->set_lr(decayed(cfg_.lr_reconstruction, cfg_.lr_decay, epoch));
        opt_disc_->set_lr(decayed(cfg_.lr_discriminator, cfg_.lr_decay, epoch));
        opt_gen_->set_lr(decayed(cfg_.lr_discriminator, cfg_.lr_decay, epoch));
        opt_class_->set_lr(decayed(cfg_.lr_classification, cfg_.lr_decay, epoch));

        const auto batches = make_batches(train_idx_, cfg_.batch_size, loop_rng_);
        if (batches.empty())
            throw DataError("adversarial trainer: batch_size exceeds the training split");
        double se_sum = 0, disc_sum = 0, gen_sum = 0, ce_sum = 0, acc_sum = 0;
        for (const auto& b : batches) {
            se_sum += step_reconstruction(b);
            const auto [dl, acc] = step_discriminator(b);
            disc_sum += dl;
            acc_sum += acc;
            gen_sum += step_generator(b);
            if (variant_ == Variant::saae) ce_sum += step_classification();
        }
        const double nb = static_cast<double>(batches.size());

        const auto [metric, val_se] = validate();
        TrainLogRow row;
        row.epoch = epoch;
        row.recon_se = se_sum / nb;
        row.disc_loss = disc_sum / nb;
        row.gen_loss = gen_sum / nb;
        row.class_ce = ce_sum / nb;
        row.disc_acc = acc_sum / nb;
        row.val_metric = metric;
        row.val_recon_se = val_se;
        row.lr = opt_recon_->lr();
        check_log_finite(row);
        bundle.log.push_back(row);
        if (cfg_.verbose)
            std::fprintf(stderr, "%s epoch %d recon %.5f disc %.4f gen %.4f ce %.4f val %.5f\n",
                         bundle.variant.c_str(), epoch, row.recon_se, row.disc_loss, row.gen_loss,
                         row.class_ce, row.val_metric);
        monitor.update(row.disc_acc);

        const bool improved =
            metric > best_metric + 1e-12 ||
            (metric >= best_metric - 1e-12 && val_se < best_se - 1e-12);
        if (improved) {
            best_metric = std::max(metric, best_metric);
            best_se = val_se;
            best_snap = take_snapshot(all_params, all_states);
            since_best = 0;
        } else if (++since_best >= cfg_.patience) {
            break;
        }
    }
    if (cfg_.epochs > 0) restore_snapshot(best_snap, all_params, all_states);

    bundle.encoder = std::move(encoder_);
    bundle.decoder = std::move(decoder_);
    bundle.discriminator = std::move(discriminator_);
    return bundle;
}

ModelBundle train_aae(const LabeledDataset& data, const TrainConfig& cfg, const ModelSpecs& specs) {
    AdversarialTrainer t(Variant::aae, data, {}, cfg, specs);
    return t.run();
}

ModelBundle train_saae(const LabeledDataset& data, const std::vector<int>& labeled_indices,
                       const TrainConfig& cfg, const ModelSpecs& specs) {
    AdversarialTrainer t(Variant::saae, data, labeled_indices, cfg, specs);
    return t.run();
}

// ---- classifier ---------------------------------------------------------------------

ModelBundle train_classifier(const LabeledDataset& data, const std::vector<int>& labeled_indices,
                             const models::ClassifierSpec& spec, const TrainConfig& cfg) {
    cfg.validate();
    if (labeled_indices.empty()) throw DataError("train_classifier: empty labeled set");

    Rng init_rng(mix_seed(cfg.seed, 1));
    Rng split_rng(mix_seed(cfg.seed, 2));
    Rng loop_rng(mix_seed(cfg.seed, 3));

    ModelBundle bundle;
    bundle.variant = "classifier";
    bundle.seed = cfg.seed;
    bundle.classifier = std::make_unique<models::Classifier>(spec, init_rng);
    models::Classifier& cls = *bundle.classifier;

    const Tensor all_x = pre::to_tensor(data);
    const std::vector<int> all_labels = pre::labels_of(data);
    for (int idx : labeled_indices)
        if (all_labels[static_cast<std::size_t>(idx)] < 0)
            throw DataError("train_classifier: unlabeled sample in the labeled set");

    // split the labeled subset
    std::vector<int> local_train, local_val;
    split_train_val(labeled_indices.size(), cfg.validation_fraction, split_rng, local_train,
                    local_val);
    if (local_val.empty()) local_val = local_train;
    auto expand = [&](const std::vector<int>& local) {
        std::vector<int> out(local.size());
        for (std::size_t i = 0; i < local.size(); ++i)
            out[i] = labeled_indices[static_cast<std::size_t>(local[i])];
        return out;
    };
    const std::vector<int> train_idx = expand(local_train);
    const std::vector<int> val_idx = expand(local_val);

    Adam opt(cls.params(), cfg.lr_classification);
    Rng dummy;
    auto validate = [&]() {
        Graph g;
        const int logits = cls.forward_logits(g, g.input(gather_rows(all_x, val_idx)), Mode::infer,
                                              dummy);
        const Tensor& lg = g.val(logits);
        std::vector<int> preds(val_idx.size());
        for (int i = 0; i < lg.dim(0); ++i) {
            int best = 0;
            for (int c = 1; c < lg.dim(1); ++c)
                if (lg.at2(i, c) > lg.at2(i, best)) best = c;
            preds[static_cast<std::size_t>(i)] = best;
        }
        std::vector<int> truth(val_idx.size());
        for (std::size_t i = 0; i < val_idx.size(); ++i)
            truth[i] = all_labels[static_cast<std::size_t>(val_idx[i])];
        return metrics::macro_f1(preds, truth, spec.classes).mf1;
    };

    auto all_params = cls.params();
    auto all_states = cls.bn_states();
    double best = -1.0;
    Snapshot best_snap = take_snapshot(all_params, all_states);
    int since_best = 0;

    const int batch_size = std::min<int>(cfg.batch_size, std::max<int>(2, static_cast<int>(train_idx.size())));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        opt.set_lr(decayed(cfg.lr_classification, cfg.lr_decay, epoch));
        auto batches = make_batches(train_idx, batch_size, loop_rng);
        if (batches.empty()) batches.push_back(train_idx);
        double ce_sum = 0.0;
        for (const auto& b : batches) {
            if (static_cast<int>(b.size()) < 2) continue;
            cls.zero_grads();
            std::vector<int> blabels(b.size());
            for (std::size_t i = 0; i < b.size(); ++i)
                blabels[i] = all_labels[static_cast<std::size_t>(b[i])];
            Graph g;
            const int logits = cls.forward_logits(g, g.input(gather_rows(all_x, b)), Mode::train,
                                                  loop_rng);
            const int loss = g.softmax_ce_mean(logits, std::move(blabels));
            g.backward(loss);
            opt.step();
            ce_sum += g.scalar(loss);
        }
        TrainLogRow row;
        row.epoch = epoch;
        row.class_ce = ce_sum / static_cast<double>(std::max<std::size_t>(1, batches.size()));
        row.val_metric = validate();
        row.lr = opt.lr();
        check_log_finite(row);
        bundle.log.push_back(row);
        if (cfg.verbose)
            std::fprintf(stderr, "classifier epoch %d ce %.5f val mf1 %.4f\n", epoch, row.class_ce,
                         row.val_metric);
        if (row.val_metric > best + 1e-12) {
            best = row.val_metric;
            best_snap = take_snapshot(all_params, all_states);
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    if (cfg.epochs > 0) restore_snapshot(best_snap, all_params, all_states);
    return bundle;
}

// ---- bundle-level inference ----------------------------------------------------------

std::vector<int> predict_classes(ModelBundle& bundle, const Tensor& x) {
    Rng dummy;
    if (bundle.variant == "saae") {
        const models::EncodeResult er = models::encode(*bundle.encoder, x, Mode::infer, dummy);
        std::vector<int> preds(static_cast<std::size_t>(er.pi.dim(0)));
        for (int i = 0; i < er.pi.dim(0); ++i) {
            int best = 0;
            for (int c = 1; c < er.pi.dim(1); ++c)
                if (er.pi.at2(i, c) > er.pi.at2(i, best)) best = c;
            preds[static_cast<std::size_t>(i)] = best;
        }
        return preds;
    }
    if (bundle.variant == "classifier") {
        Graph g;
        const int logits = bundle.classifier->forward_logits(g, g.input(x), Mode::infer, dummy);
        const Tensor& lg = g.val(logits);
        std::vector<int> preds(static_cast<std::size_t>(lg.dim(0)));
        for (int i = 0; i < lg.dim(0); ++i) {
            int best = 0;
            for (int c = 1; c < lg.dim(1); ++c)
                if (lg.at2(i, c) > lg.at2(i, best)) best = c;
            preds[static_cast<std::size_t>(i)] = best;
        }
        return preds;
    }
    throw ConfigError("predict_classes: bundle variant '" + bundle.variant +
                      "' has no class head");
}

Tensor reconstruct_tensor(ModelBundle& bundle, const Tensor& x) {
    Rng dummy;
    const models::EncodeResult er = models::encode(*bundle.encoder, x, Mode::infer, dummy);
    if (bundle.variant == "vae") return models::decode(*bundle.decoder, er.mu, nullptr, Mode::infer, dummy);
    if (bundle.variant == "aae") return models::decode(*bundle.decoder, er.z, nullptr, Mode::infer, dummy);
    if (bundle.variant == "saae")
        return models::decode(*bundle.decoder, er.z, &er.pi, Mode::infer, dummy);
    throw ConfigError("reconstruct_tensor: bundle has no autoencoder");
}

double mean_recon_se(ModelBundle& bundle, const Tensor& x) {
    const Tensor xhat = reconstruct_tensor(bundle, x);
    double se = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double d = x.data[i] - xhat.data[i];
        se += 0.5 * d * d;
    }
    return se / static_cast<double>(x.dim(0));
}

Tensor generate_tensor(ModelBundle& bundle, int n, int class_index, Rng& rng,
                       std::vector<int>* labels_out) {
    if (!bundle.decoder) throw ConfigError("generate_tensor: bundle has no decoder");
    obj::PriorSpec prior = bundle.prior;
    auto [z, y] = obj::sample_prior(prior, n, rng);
    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    if (prior.class_dim > 0) {
        if (class_index >= 0) {
            if (class_index >= prior.class_dim)
                throw ConfigError("generate_tensor: class index out of range");
            y.fill(0.0);
            for (int i = 0; i < n; ++i) y.at2(i, class_index) = 1.0;
            std::fill(labels.begin(), labels.end(), class_index);
        } else {
            for (int i = 0; i < n; ++i)
                for (int c = 0; c < prior.class_dim; ++c)
                    if (y.at2(i, c) > 0.5) labels[static_cast<std::size_t>(i)] = c;
        }
    }
    Rng dummy;
    const Tensor out = models::decode(*bundle.decoder, z,
                                      prior.class_dim > 0 ? &y : nullptr, Mode::infer, dummy);
    if (labels_out) *labels_out = std::move(labels);
    return out;
}

Tensor sample_posterior(ModelBundle& bundle, const Tensor& x, Rng& rng) {
    if (!bundle.encoder) throw ConfigError("sample_posterior: bundle has no encoder");
    const models::EncoderSpec& sp = bundle.encoder->spec();
    Rng dummy;
    if (bundle.variant == "vae") {
        const models::EncodeResult er = models::encode(*bundle.encoder, x, Mode::infer, dummy);
        const Tensor eps = randn(er.mu.shape, rng);
        return obj::reparameterize(er.mu, er.sigma, eps);
    }
    const Tensor eta = randn({x.dim(0), sp.noise_dim}, rng);
    const models::EncodeResult er = models::encode(*bundle.encoder, x, Mode::infer, dummy, &eta);
    return er.z;
}

}  // namespace resp::train
