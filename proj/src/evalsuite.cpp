#include "resp/evalsuite.hpp"

#include <algorithm>
#include <cmath>

#include "resp/preprocess.hpp"

namespace resp::eval {

using diff::Graph;
using diff::Mode;

ClassScores macro_f1(const std::vector<int>& predictions, const std::vector<int>& labels,
                     int classes) {
    return metrics::macro_f1(predictions, labels, classes);
}

namespace {

double mean_se_of(models::Encoder& enc, models::Decoder& dec, const std::string& variant,
                  const Tensor& x) {
    Rng dummy;
    const models::EncodeResult er = models::encode(enc, x, Mode::infer, dummy);
    Tensor xhat;
    if (variant == "vae")
        xhat = models::decode(dec, er.mu, nullptr, Mode::infer, dummy);
    else if (variant == "saae")
        xhat = models::decode(dec, er.z, &er.pi, Mode::infer, dummy);
    else
        xhat = models::decode(dec, er.z, nullptr, Mode::infer, dummy);
    double se = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double d = x.data[i] - xhat.data[i];
        se += 0.5 * d * d;
    }
    return se / static_cast<double>(x.dim(0));
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    s = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
    return {m, s};
}

}  // namespace

ReconErrorReport relative_recon_error(train::ModelBundle& model, const Tensor& x,
                                      std::uint64_t baseline_seed) {
    if (!model.encoder || !model.decoder)
        throw ConfigError("relative_recon_error: bundle has no autoencoder");
    ReconErrorReport rep;
    rep.model_se = train::mean_recon_se(model, x);

    std::vector<double> baseline_ses;
    for (int k = 0; k < 3; ++k) {
        Rng init(mix_seed(baseline_seed + static_cast<std::uint64_t>(k), 1));
        models::Encoder enc(model.encoder->spec(), init);
        models::Decoder dec(model.decoder->spec(), init);
        baseline_ses.push_back(mean_se_of(enc, dec, model.variant, x));
    }
    rep.baseline_se = baseline_ses[0];
    rep.percent = 100.0 * rep.model_se / rep.baseline_se;
    const auto [bm, bs] = mean_std(baseline_ses);
    rep.baseline_std_percent = 100.0 * bs / bm;
    return rep;
}

RepeatedScore cas(train::ModelBundle& generative, const Tensor& real_test_x,
                  const std::vector<int>& real_test_labels, int n_generated,
                  const models::ClassifierSpec& classifier_spec, const train::TrainConfig& cls_cfg,
                  int repeats, std::uint64_t seed) {
    if (generative.variant != "saae")
        throw ConfigError("cas: requires a saae bundle (labeled generation)");
    if (repeats < 1) throw ConfigError("cas: repeats must be >= 1");

    RepeatedScore out;
    for (int r = 0; r < repeats; ++r) {
        Rng gen_rng(mix_seed(seed, 100 + static_cast<std::uint64_t>(r)));
        std::vector<int> labels;
        const Tensor gx = train::generate_tensor(generative, n_generated, -1, gen_rng, &labels);

        LabeledDataset gen_ds;
        gen_ds.n_t = gx.dim(1);
        gen_ds.num_classes = generative.prior.class_dim;
        gen_ds.source = "generated";
        gen_ds.samples.reserve(static_cast<std::size_t>(n_generated));
        for (int i = 0; i < n_generated; ++i)
            gen_ds.samples.push_back(pre::vector_from_row(gx, i, "gen", labels[static_cast<std::size_t>(i)]));

        std::vector<int> all_idx(gen_ds.size());
        for (std::size_t i = 0; i < all_idx.size(); ++i) all_idx[i] = static_cast<int>(i);
        train::TrainConfig cfg = cls_cfg;
        cfg.seed = mix_seed(seed, 200 + static_cast<std::uint64_t>(r));
        train::ModelBundle cls = train::train_classifier(gen_ds, all_idx, classifier_spec, cfg);

        const std::vector<int> preds = train::predict_classes(cls, real_test_x);
        out.runs.push_back(metrics::macro_f1(preds, real_test_labels, classifier_spec.classes).mf1);
    }
    const auto [m, s] = mean_std(out.runs);
    out.mean = m;
    out.stddev = s;
    return out;
}

DistinguishabilityResult distinguishability_test(train::ModelBundle& bundle, const Tensor& x,
                                                 SampleSource source, int repeats,
                                                 std::uint64_t seed,
                                                 const train::TrainConfig& cls_cfg,
                                                 double vicinity_radius) {
    if (!bundle.encoder || !bundle.decoder)
        throw ConfigError("distinguishability_test: bundle has no autoencoder");
    const int n = x.dim(0);
    const int n_t = x.dim(1);

    std::vector<double> accs, bces;
    for (int r = 0; r < repeats; ++r) {
        Rng rng(mix_seed(seed, 300 + static_cast<std::uint64_t>(r)));
        // class 0: reconstructions of real data; class 1: decoded samples
        const Tensor recon = train::reconstruct_tensor(bundle, x);
        Tensor decoded;
        Rng dummy;
        if (source == SampleSource::prior) {
            decoded = train::generate_tensor(bundle, n, -1, rng, nullptr);
        } else {
            const Tensor z = train::sample_posterior(bundle, x, rng);
            Tensor zv = z;
            for (double& v : zv.data) v += vicinity_radius * rng.normal();
            if (bundle.variant == "saae") {
                const models::EncodeResult er = models::encode(*bundle.encoder, x, Mode::infer, dummy);
                decoded = models::decode(*bundle.decoder, zv, &er.pi, Mode::infer, dummy);
            } else {
                decoded = models::decode(*bundle.decoder, zv, nullptr, Mode::infer, dummy);
            }
        }

        LabeledDataset ds;
        ds.n_t = n_t;
        ds.num_classes = 2;
        ds.source = "distinguish";
        for (int i = 0; i < n; ++i) ds.samples.push_back(pre::vector_from_row(recon, i, "r", 0));
        for (int i = 0; i < n; ++i) ds.samples.push_back(pre::vector_from_row(decoded, i, "d", 1));

        // held-out split for the reported metrics
        std::vector<int> idx(ds.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        rng.shuffle(idx);
        const std::size_t n_test = idx.size() / 5;
        const std::vector<int> test_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
        const std::vector<int> train_idx(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());

        models::ClassifierSpec cspec;
        cspec.arch = models::ClassifierSpec::Arch::cnn;
        cspec.n_t = n_t;
        cspec.classes = 2;
        cspec.filters = {16, 32, 32, 64};
        train::TrainConfig cfg = cls_cfg;
        cfg.seed = mix_seed(seed, 400 + static_cast<std::uint64_t>(r));
        train::ModelBundle cls = train::train_classifier(ds, train_idx, cspec, cfg);

        // logits on the held-out set
        const Tensor tx = train::gather_rows(pre::to_tensor(ds), test_idx);
        Graph g;
        const int logits_id = cls.classifier->forward_logits(g, g.input(tx), Mode::infer, dummy);
        const Tensor& lg = g.val(logits_id);
        std::vector<double> blogits(test_idx.size());
        std::vector<int> blabels(test_idx.size());
        for (std::size_t i = 0; i < test_idx.size(); ++i) {
            blogits[i] = lg.at2(static_cast<int>(i), 1) - lg.at2(static_cast<int>(i), 0);
            blabels[i] = ds.samples[static_cast<std::size_t>(test_idx[i])].label;
        }
        accs.push_back(metrics::binary_accuracy(blogits, blabels));
        bces.push_back(metrics::binary_cross_entropy(blogits, blabels));
    }
    DistinguishabilityResult out;
    std::tie(out.accuracy_mean, out.accuracy_std) = mean_std(accs);
    std::tie(out.bce_mean, out.bce_std) = mean_std(bces);
    return out;
}

Histogram latent_neighbor_distances(const Tensor& encodings, int bins) {
    const std::vector<double> d = metrics::nn_l1_distances(encodings);
    return metrics::histogram(d, bins);
}

NormComparison latent_norm_distribution(const Tensor& encodings, const Tensor& prior_samples,
                                        int bins) {
    if (encodings.numel() == 0 || prior_samples.numel() == 0)
        throw DataError("latent_norm_distribution: empty input");
    NormComparison out;
    const std::vector<double> ne = metrics::l2_norms(encodings);
    const std::vector<double> np = metrics::l2_norms(prior_samples);
    const double lo = std::min(*std::min_element(ne.begin(), ne.end()),
                               *std::min_element(np.begin(), np.end()));
    const double hi0 = std::max(*std::max_element(ne.begin(), ne.end()),
                                *std::max_element(np.begin(), np.end()));
    const double hi = hi0 > lo ? hi0 : lo + 1e-9;
    out.encodings = metrics::histogram(ne, bins, lo, hi);
    out.prior = metrics::histogram(np, bins, lo, hi);
    out.ks = metrics::ks_statistic(ne, np);
    return out;
}

GridSample grid_sample_2d(train::ModelBundle& bundle, double lo, double hi, int points,
                          int class_index) {
    if (!bundle.decoder) throw ConfigError("grid_sample_2d: bundle has no decoder");
    if (bundle.prior.latent_dim != 2)
        throw ConfigError("grid_sample_2d: requires a 2-dimensional latent space");
    if (points < 2) throw ConfigError("grid_sample_2d: points must be >= 2");
    if (bundle.prior.class_dim > 0 && class_index < 0)
        throw ConfigError("grid_sample_2d: class_index required for a joint model");

    const int n = points * points;
    GridSample out;
    out.zs = Tensor({n, 2});
    int row = 0;
    for (int i = 0; i < points; ++i)
        for (int j = 0; j < points; ++j, ++row) {
            out.zs.at2(row, 0) =
                lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
            out.zs.at2(row, 1) =
                lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(points - 1);
        }
    Rng dummy;
    if (bundle.prior.class_dim > 0) {
        Tensor y({n, bundle.prior.class_dim});
        for (int i = 0; i < n; ++i) y.at2(i, class_index) = 1.0;
        out.signals = models::decode(*bundle.decoder, out.zs, &y, Mode::infer, dummy);
    } else {
        out.signals = models::decode(*bundle.decoder, out.zs, nullptr, Mode::infer, dummy);
    }
    return out;
}

}  // namespace resp::eval
