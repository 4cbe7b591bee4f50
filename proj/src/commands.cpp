#include "resp/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "resp/bundle_io.hpp"
#include "resp/dataset_io.hpp"
#include "resp/evalsuite.hpp"
#include "resp/preprocess.hpp"
#include "resp/reconstruct.hpp"
#include "resp/synth.hpp"

namespace resp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

void write_resolved(const RunConfig& cfg, const std::string& dir) {
    io::write_file_atomic(dir + "/resolved.config", cfg.resolved_text());
}

void append_hash(const std::string& dir, const std::string& name, const std::string& path) {
    std::string manifest;
    const std::string mpath = dir + "/hashes.txt";
    if (fs::exists(mpath)) manifest = io::read_file(mpath);
    manifest += name + " " + io::file_hash_hex(path) + "\n";
    io::write_file_atomic(mpath, manifest);
}

void write_training_log(const train::ModelBundle& bundle, const std::string& path) {
    std::ostringstream os;
    os << "epoch,recon_se,kl,disc_loss,gen_loss,class_ce,val_metric,val_recon_se,disc_acc,lr\n";
    for (const train::TrainLogRow& r : bundle.log)
        os << r.epoch << "," << fmt(r.recon_se) << "," << fmt(r.kl) << "," << fmt(r.disc_loss)
           << "," << fmt(r.gen_loss) << "," << fmt(r.class_ce) << "," << fmt(r.val_metric) << ","
           << fmt(r.val_recon_se) << "," << fmt(r.disc_acc) << "," << fmt(r.lr) << "\n";
    io::write_file_atomic(path, os.str());
}

SlopeThresholds thresholds_from_synth(const RunConfig& cfg) {
    SlopeThresholds th;
    th.lower = 0.5 * (cfg.get_double("synth.slope_down_hi") + cfg.get_double("synth.slope_regular_lo"));
    th.upper = 0.5 * (cfg.get_double("synth.slope_regular_hi") + cfg.get_double("synth.slope_up_lo"));
    return th;
}

void write_thresholds(const SlopeThresholds& th, const std::string& path) {
    json j{{"lower", th.lower}, {"upper", th.upper}};
    io::write_file_atomic(path, j.dump(2) + "\n");
}

SlopeThresholds read_thresholds(const std::string& path) {
    const json j = json::parse(io::read_file(path));
    SlopeThresholds th;
    th.lower = j.at("lower").get<double>();
    th.upper = j.at("upper").get<double>();
    return th;
}

int class_index_from_name(const std::string& name) {
    if (name == "any") return -1;
    if (name == "down") return 0;
    if (name == "regular") return 1;
    if (name == "up") return 2;
    try {
        return std::stoi(name);
    } catch (const std::exception&) {
        throw ConfigError("generate.class: expected down|regular|up|any or an index, got '" +
                          name + "'");
    }
}

std::string class_report_csv(const metrics::ClassScores& s) {
    std::ostringstream os;
    os << "class,precision,recall,f1,absent\n";
    for (std::size_t c = 0; c < s.f1.size(); ++c)
        os << c << "," << fmt(s.precision[c]) << "," << fmt(s.recall[c]) << "," << fmt(s.f1[c])
           << "," << (s.absent[c] ? 1 : 0) << "\n";
    os << "macro,,," << fmt(s.mf1) << ",\n";
    return os.str();
}

// matplotlib script consuming the CSVs written next to it
constexpr const char* kPlotScript = R"(#!/usr/bin/env python3
"""Plot helper: renders the CSV artifacts written by the run."""
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))

def read_csv(name):
    path = os.path.join(here, name)
    if not os.path.exists(path):
        return None
    with open(path) as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]

def plot_training_log():
    data = read_csv("training_log.csv")
    if data is None:
        return
    header, rows = data
    cols = {name: [float(r[i]) for r in rows] for i, name in enumerate(header)}
    fig, ax = plt.subplots(1, 2, figsize=(10, 4))
    ax[0].plot(cols["epoch"], cols["recon_se"], label="reconstruction SE")
    if any(v != 0 for v in cols.get("disc_loss", [])):
        ax[0].plot(cols["epoch"], cols["disc_loss"], label="discriminator")
        ax[0].plot(cols["epoch"], cols["gen_loss"], label="generator")
    ax[0].set_xlabel("epoch"); ax[0].legend(); ax[0].set_title("training losses")
    ax[1].plot(cols["epoch"], cols["val_metric"])
    ax[1].set_xlabel("epoch"); ax[1].set_title("validation metric")
    fig.tight_layout()
    fig.savefig(os.path.join(here, "training_log.png"), dpi=120)

def plot_series(name):
    data = read_csv(name)
    if data is None:
        return
    _, rows = data
    t = [float(r[0]) for r in rows]
    v = [float(r[1]) for r in rows]
    fig, ax = plt.subplots(figsize=(10, 3))
    ax.plot(t, v)
    ax.set_xlabel("t [s]"); ax.set_ylabel("position [mm]")
    fig.tight_layout()
    fig.savefig(os.path.join(here, name.replace(".csv", ".png")), dpi=120)

def plot_histograms():
    data = read_csv("latent_norms.csv")
    if data is None:
        return
    _, rows = data
    centers = [float(r[0]) for r in rows]
    enc = [float(r[1]) for r in rows]
    pri = [float(r[2]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(centers, enc, label="encodings")
    ax.plot(centers, pri, label="prior")
    ax.set_xlabel("||z||"); ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(here, "latent_norms.png"), dpi=120)

plot_training_log()
for f in os.listdir(here):
    if f.startswith("series_") and f.endswith(".csv"):
        plot_series(f)
plot_histograms()
print("plots written to", here)
)";

}  // namespace

CommandResult cmd_synth(RunConfig cfg) {
    const std::string dir = cfg.get_string("out_dir");
    ensure_dir(dir);
    const LabeledDataset ds = synth::generate_sinusoid_dataset(cfg.synth_config());
    CommandResult res;
    res.out_dir = dir;
    res.dataset_path = dir + "/dataset.respdata";
    io::write_dataset(res.dataset_path, ds, cfg.get_bool("dataset.binary"));
    write_resolved(cfg, dir);
    append_hash(dir, "dataset.respdata", res.dataset_path);
    return res;
}

CommandResult cmd_preprocess(RunConfig cfg, const std::string& marker_csv,
                             const std::string& thresholds_json) {
    const std::string dir = cfg.get_string("out_dir");
    ensure_dir(dir);
    const Marker3DSeries marker = io::read_marker_csv(marker_csv);
    const PrincipalAxisSeries axis = pre::pca_project(marker);
    const pre::SegmentationResult seg = pre::segment_periods(axis);
    std::vector<BreathingVector> vectors =
        pre::assemble_vectors(seg.periods, static_cast<int>(cfg.get_int("preprocess.n_t")),
                              static_cast<int>(cfg.get_int("preprocess.stride")),
                              fs::path(marker_csv).stem().string());

    SlopeThresholds th;
    if (!thresholds_json.empty()) {
        th = read_thresholds(thresholds_json);
        vectors = pre::apply_thresholds(std::move(vectors), th);
    } else {
        auto [labeled, computed] =
            pre::label_baseline_shift(std::move(vectors), cfg.get_double("preprocess.percentile"));
        vectors = std::move(labeled);
        th = computed;
    }

    LabeledDataset ds;
    ds.n_t = static_cast<int>(cfg.get_int("preprocess.n_t"));
    ds.num_classes = 3;
    ds.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    ds.source = fs::path(marker_csv).stem().string();
    ds.samples = std::move(vectors);

    CommandResult res;
    res.out_dir = dir;
    res.dataset_path = dir + "/dataset.respdata";
    io::write_dataset(res.dataset_path, ds, cfg.get_bool("dataset.binary"));
    write_thresholds(th, dir + "/thresholds.json");
    write_resolved(cfg, dir);
    append_hash(dir, "input:" + fs::path(marker_csv).filename().string(), marker_csv);
    append_hash(dir, "dataset.respdata", res.dataset_path);
    return res;
}

namespace {

// labeled subset for the supervised phase, stratified over classes
std::vector<int> pick_labels(const LabeledDataset& ds, const std::vector<int>& pool,
                             const train::TrainConfig& tc) {
    int count = tc.label_count;
    if (count <= 0)
        count = static_cast<int>(std::llround(tc.label_fraction * static_cast<double>(pool.size())));
    count = std::max(1, std::min<int>(count, static_cast<int>(pool.size())));
    Rng rng(mix_seed(tc.seed, 4));
    return train::stratified_label_subset(ds, pool, count, rng);
}

}  // namespace

CommandResult cmd_train(RunConfig cfg, const std::string& dataset_path) {
    const std::string dir = cfg.get_string("out_dir");
    ensure_dir(dir);
    const LabeledDataset raw = io::read_dataset(dataset_path);
    if (raw.empty()) throw DataError("cmd_train: empty dataset");
    auto [ds, norm] = pre::normalize_features(raw);

    const std::string variant_name = cfg.get_string("model.variant");
    CommandResult res;
    res.out_dir = dir;
    res.bundle_path = dir + "/model.respbundle";

    train::ModelBundle bundle;
    if (variant_name == "classifier") {
        train::TrainConfig tc = cfg.train_config(models::Variant::saae);
        std::vector<int> pool;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (ds.samples[i].label >= 0) pool.push_back(static_cast<int>(i));
        if (pool.empty()) throw DataError("cmd_train: classifier needs labeled samples");
        const std::vector<int> labeled = pick_labels(ds, pool, tc);
        bundle = train::train_classifier(ds, labeled, cfg.classifier_spec(ds.n_t), tc);
    } else {
        const models::Variant variant = models::variant_from_string(variant_name);
        train::TrainConfig tc = cfg.train_config(variant);
        const train::ModelSpecs specs = cfg.model_specs(variant, ds.n_t);
        switch (variant) {
            case models::Variant::vae: bundle = train::train_vae(ds, tc, specs); break;
            case models::Variant::aae: bundle = train::train_aae(ds, tc, specs); break;
            case models::Variant::saae: {
                std::vector<int> pool;
                for (std::size_t i = 0; i < ds.size(); ++i)
                    if (ds.samples[i].label >= 0) pool.push_back(static_cast<int>(i));
                if (pool.empty()) throw DataError("cmd_train: saae needs labeled samples");
                bundle = train::train_saae(ds, pick_labels(ds, pool, tc), tc, specs);
                break;
            }
        }
    }
    bundle.norm = norm;

    // slope thresholds travel with the model: preprocess output if present,
    // otherwise the synthetic class-gap midpoints
    const fs::path tpath = fs::path(dataset_path).parent_path() / "thresholds.json";
    if (fs::exists(tpath)) {
        bundle.thresholds = read_thresholds(tpath.string());
    } else if (raw.source.rfind("synth", 0) == 0) {
        bundle.thresholds = thresholds_from_synth(cfg);
    }

    bundle.training_log_path = "training_log.csv";
    write_training_log(bundle, dir + "/training_log.csv");
    train::save_bundle(bundle, res.bundle_path);
    write_resolved(cfg, dir);
    append_hash(dir, "input:dataset", dataset_path);
    append_hash(dir, "model.respbundle", res.bundle_path);
    append_hash(dir, "training_log.csv", dir + "/training_log.csv");
    io::write_file_atomic(dir + "/plots.py", kPlotScript);
    return res;
}

CommandResult cmd_generate(RunConfig cfg, const std::string& bundle_path) {
    const std::string dir = cfg.get_string("out_dir");
    ensure_dir(dir);
    train::ModelBundle bundle = train::load_bundle(bundle_path);
    if (!bundle.decoder) throw ConfigError("cmd_generate: bundle has no decoder");

    const int n = static_cast<int>(cfg.get_int("generate.count"));
    const int cls = class_index_from_name(cfg.get_string("generate.class"));
    Rng rng(mix_seed(static_cast<std::uint64_t>(cfg.get_int("seed")), 11));
    std::vector<int> labels;
    Tensor x = train::generate_tensor(bundle, n, cls, rng, &labels);
    if (bundle.norm) pre::denormalize_tensor(x, *bundle.norm);

    LabeledDataset ds;
    ds.n_t = x.dim(1);
    ds.num_classes = bundle.prior.class_dim;
    ds.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    ds.source = "generated";
    for (int i = 0; i < n; ++i)
        ds.samples.push_back(pre::vector_from_row(x, i, "gen-" + std::to_string(i),
                                                  labels.empty() ? -1 : labels[static_cast<std::size_t>(i)]));

    CommandResult res;
    res.out_dir = dir;
    res.dataset_path = dir + "/generated.respdata";
    io::write_dataset(res.dataset_path, ds, cfg.get_bool("dataset.binary"));

    // series for the first few samples; generated gaps are clamped to one
    // sample step so interpolation is well-defined
    const double rate = cfg.get_double("synth.sample_rate");
    const int n_series = std::min(n, 5);
    for (int i = 0; i < n_series; ++i) {
        BreathingVector v = ds.samples[static_cast<std::size_t>(i)];
        for (PeriodTuple& p : v.periods) {
            p.d_ee = std::max(p.d_ee, 1.0 / rate);
            p.d_ei = std::max(p.d_ei, 1.0 / rate);
        }
        io::write_series_csv(dir + "/series_" + std::to_string(i) + ".csv",
                             recon::linear_interpolate(v, rate), rate);
    }
    write_resolved(cfg, dir);
    append_hash(dir, "input:bundle", bundle_path);
    append_hash(dir, "generated.respdata", res.dataset_path);
    io::write_file_atomic(dir + "/plots.py", kPlotScript);
    return res;
}

CommandResult cmd_classify(RunConfig cfg, const std::string& bundle_path,
                           const std::string& dataset_path) {
    const std::string dir = cfg.get_string("out_dir");
    ensure_dir(dir);
    train::ModelBundle bundle = train::load_bundle(bundle_path);
    const LabeledDataset raw = io::read_dataset(dataset_path);
    if (raw.empty()) throw DataError("cmd_classify: empty dataset");
    LabeledDataset ds = bundle.norm ? pre::apply_normalization(raw, *bundle.norm) : raw;

    const std::vector<int> preds = train::predict_classes(bundle, pre::to_tensor(ds));

    std::ostringstream os;
    os << "source_id,predicted,label\n";
    for (std::size_t i = 0; i < ds.size(); ++i)
        os << ds.samples[i].source_id << "," << preds[i] << "," << ds.samples[i].label << "\n";
    CommandResult res;
    res.out_dir = dir;
    res.report_path = dir + "/predictions.csv";
    io::write_file_atomic(res.report_path, os.str());

    // score against available labels
    std::vector<int> sub_preds, sub_labels;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.samples[i].label >= 0) {
            sub_preds.push_back(preds[i]);
            sub_labels.push_back(ds.samples[i].label);
        }
    if (!sub_labels.empty()) {
        const int classes = bundle.prior.class_dim > 0
                                ? bundle.prior.class_dim
                                : (bundle.classifier ? bundle.classifier->spec().classes : 0);
        const auto scores = metrics::macro_f1(sub_preds, sub_labels, classes);
        io::write_file_atomic(dir + "/eval_report.csv", class_report_csv(scores));
    }
    write_resolved(cfg, dir);
    append_hash(dir, "input:bundle", bundle_path);
    append_hash(dir, "input:dataset", dataset_path);
    append_hash(dir, "predictions.csv", res.report_path);
    return res;
}

CommandResult cmd_reconstruct(RunConfig cfg, const std::string& bundle_path,
                              const std::string& dataset_path) {
    const std::string dir = cfg.get_string("out_dir");
    ensure_dir(dir);
    train::ModelBundle bundle = train::load_bundle(bundle_path);
    if (!bundle.recon_net)
        throw ConfigError("cmd_reconstruct: bundle does not contain a reconstruction network");
    const LabeledDataset ds = io::read_dataset(dataset_path);
    const auto index = static_cast<std::size_t>(cfg.get_int("recon.sample_index"));
    if (index >= ds.size()) throw ConfigError("cmd_reconstruct: sample index out of range");

    const double rate = cfg.get_double("synth.sample_rate");
    const std::vector<double> interp = recon::linear_interpolate(ds.samples[index], rate);
    const std::vector<double> restored = recon::apply_recon(bundle, interp);

    CommandResult res;
    res.out_dir = dir;
    res.report_path = dir + "/series_reconstructed.csv";
    io::write_series_csv(dir + "/series_interpolated.csv", interp, rate);
    io::write_series_csv(res.report_path, restored, rate);
    write_resolved(cfg, dir);
    append_hash(dir, "input:bundle", bundle_path);
    append_hash(dir, "input:dataset", dataset_path);
    append_hash(dir, "series_reconstructed.csv", res.report_path);
    io::write_file_atomic(dir + "/plots.py", kPlotScript);
    return res;
}

CommandResult cmd_eval(RunConfig cfg, const std::string& bundle_path,
                       const std::string& dataset_path) {
    const std::string dir = cfg.get_string("out_dir");
    ensure_dir(dir);
    train::ModelBundle bundle = train::load_bundle(bundle_path);
    const LabeledDataset raw = io::read_dataset(dataset_path);
    if (raw.empty()) throw DataError("cmd_eval: empty dataset");
    LabeledDataset ds = bundle.norm ? pre::apply_normalization(raw, *bundle.norm) : raw;
    const Tensor x = pre::to_tensor(ds);
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    const std::string protocol = cfg.get_string("eval.protocol");

    CommandResult res;
    res.out_dir = dir;
    res.report_path = dir + "/eval_report.csv";
    std::ostringstream summary;

    if (protocol == "classification") {
        const std::vector<int> labels = pre::labels_of(ds);
        for (int lab : labels)
            if (lab < 0) throw DataError("cmd_eval classification: dataset must be labeled");
        const std::vector<int> preds = train::predict_classes(bundle, x);
        const auto scores = metrics::macro_f1(preds, labels, bundle.prior.class_dim);
        io::write_file_atomic(res.report_path, class_report_csv(scores));
        summary << "protocol classification\nmF1 " << fmt6(scores.mf1) << "\n";
    } else if (protocol == "recon_error") {
        const auto rep = eval::relative_recon_error(bundle, x, mix_seed(seed, 21));
        std::ostringstream os;
        os << "metric,value\nrelative_error_percent," << fmt(rep.percent) << "\nmodel_se,"
           << fmt(rep.model_se) << "\nbaseline_se," << fmt(rep.baseline_se)
           << "\nbaseline_std_percent," << fmt(rep.baseline_std_percent) << "\n";
        io::write_file_atomic(res.report_path, os.str());
        summary << "protocol recon_error\nrelative error " << fmt6(rep.percent) << "%\n";
    } else if (protocol == "cas") {
        const std::vector<int> labels = pre::labels_of(ds);
        train::TrainConfig cc = cfg.train_config(models::Variant::saae);
        const auto score = eval::cas(bundle, x, labels, static_cast<int>(cfg.get_int("eval.n_generated")),
                                     cfg.classifier_spec(ds.n_t), cc,
                                     static_cast<int>(cfg.get_int("eval.repeats")), seed);
        std::ostringstream os;
        os << "run,mf1\n";
        for (std::size_t i = 0; i < score.runs.size(); ++i) os << i << "," << fmt(score.runs[i]) << "\n";
        os << "mean," << fmt(score.mean) << "\nstd," << fmt(score.stddev) << "\n";
        io::write_file_atomic(res.report_path, os.str());
        summary << "protocol cas\nCAS mF1 " << fmt6(score.mean) << " +- " << fmt6(score.stddev)
                << "\n";
    } else if (protocol == "distinguishability") {
        train::TrainConfig cc = cfg.train_config(models::Variant::saae);
        const auto r = eval::distinguishability_test(bundle, x, eval::SampleSource::prior,
                                                     static_cast<int>(cfg.get_int("eval.repeats")),
                                                     seed, cc);
        std::ostringstream os;
        os << "metric,mean,std\naccuracy," << fmt(r.accuracy_mean) << "," << fmt(r.accuracy_std)
           << "\nbce," << fmt(r.bce_mean) << "," << fmt(r.bce_std) << "\n";
        io::write_file_atomic(res.report_path, os.str());
        summary << "protocol distinguishability\naccuracy " << fmt6(r.accuracy_mean) << " bce "
                << fmt6(r.bce_mean) << "\n";
    } else if (protocol == "latent") {
        Rng rng(mix_seed(seed, 31));
        const Tensor z = train::sample_posterior(bundle, x, rng);
        auto [zp, yp] = obj::sample_prior(bundle.prior, z.dim(0), rng);
        const auto cmp = eval::latent_norm_distribution(z, zp, static_cast<int>(cfg.get_int("eval.bins")));
        std::ostringstream os;
        os << "norm_bin_center,encodings,prior\n";
        for (std::size_t b = 0; b < cmp.encodings.counts.size(); ++b)
            os << fmt(0.5 * (cmp.encodings.edges[b] + cmp.encodings.edges[b + 1])) << ","
               << cmp.encodings.counts[b] << "," << cmp.prior.counts[b] << "\n";
        io::write_file_atomic(dir + "/latent_norms.csv", os.str());
        const auto nn = eval::latent_neighbor_distances(z, static_cast<int>(cfg.get_int("eval.bins")));
        std::ostringstream os2;
        os2 << "distance_bin_center,count\n";
        for (std::size_t b = 0; b < nn.counts.size(); ++b)
            os2 << fmt(0.5 * (nn.edges[b] + nn.edges[b + 1])) << "," << nn.counts[b] << "\n";
        io::write_file_atomic(dir + "/latent_neighbors.csv", os2.str());
        std::ostringstream os3;
        os3 << "metric,value\nks_statistic," << fmt(cmp.ks) << "\n";
        io::write_file_atomic(res.report_path, os3.str());
        summary << "protocol latent\nKS " << fmt6(cmp.ks) << "\n";
    } else if (protocol == "grid") {
        const auto gridres = eval::grid_sample_2d(bundle, -1.5, 1.5, 25,
                                                  bundle.prior.class_dim > 0 ? 0 : -1);
        std::ostringstream os;
        os << "z0,z1";
        for (int t = 0; t < gridres.signals.dim(1); ++t)
            for (int c = 0; c < 6; ++c) os << ",v" << t << "_" << c;
        os << "\n";
        for (int i = 0; i < gridres.zs.dim(0); ++i) {
            os << fmt(gridres.zs.at2(i, 0)) << "," << fmt(gridres.zs.at2(i, 1));
            for (int t = 0; t < gridres.signals.dim(1); ++t)
                for (int c = 0; c < 6; ++c) os << "," << fmt(gridres.signals.at3(i, t, c));
            os << "\n";
        }
        io::write_file_atomic(res.report_path, os.str());
        summary << "protocol grid\npoints " << gridres.zs.dim(0) << "\n";
    } else {
        throw ConfigError("cmd_eval: unknown protocol '" + protocol + "'");
    }

    io::write_file_atomic(dir + "/eval_summary.txt", summary.str());
    write_resolved(cfg, dir);
    append_hash(dir, "input:bundle", bundle_path);
    append_hash(dir, "input:dataset", dataset_path);
    append_hash(dir, "eval_report.csv", res.report_path);
    io::write_file_atomic(dir + "/plots.py", kPlotScript);
    return res;
}

// ---- experiment reproduction --------------------------------------------------------

namespace {

struct SplitDataset {
    LabeledDataset train;
    LabeledDataset test;
};

SplitDataset split_holdout(const LabeledDataset& ds, double test_fraction, std::uint64_t seed) {
    std::vector<int> idx(ds.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(mix_seed(seed, 99));
    rng.shuffle(idx);
    const std::size_t n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(ds.size())));
    SplitDataset out;
    out.train.n_t = out.test.n_t = ds.n_t;
    out.train.num_classes = out.test.num_classes = ds.num_classes;
    out.train.seed = out.test.seed = ds.seed;
    out.train.source = ds.source;
    out.test.source = ds.source + "-holdout";
    for (std::size_t i = 0; i < idx.size(); ++i)
        (i < n_test ? out.test : out.train)
            .samples.push_back(ds.samples[static_cast<std::size_t>(idx[i])]);
    return out;
}

CommandResult repro_sinusoid(RunConfig cfg, bool vary) {
    const std::string dir = cfg.get_string("out_dir");
    ensure_dir(dir);
    // experiment presets (only where the caller did not pin a value)
    if (!cfg.is_set("synth.num_samples")) cfg.set("synth.num_samples", "33000");
    if (!cfg.is_set("train.label_count")) cfg.set("train.label_count", vary ? "1500" : "300");
    if (!cfg.is_set("train.epochs")) cfg.set("train.epochs", "40");
    if (!cfg.is_set("model.filters")) cfg.set("model.filters", "16,32,32,64");
    cfg.set("synth.vary_period_amplitude", vary ? "true" : "false");

    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    const LabeledDataset full = synth::generate_sinusoid_dataset(cfg.synth_config());
    const SplitDataset split = split_holdout(full, 1.0 / 11.0, seed);

    io::write_dataset(dir + "/dataset_train.respdata", split.train, cfg.get_bool("dataset.binary"));
    io::write_dataset(dir + "/dataset_test.respdata", split.test, cfg.get_bool("dataset.binary"));
    append_hash(dir, "dataset_train.respdata", dir + "/dataset_train.respdata");
    append_hash(dir, "dataset_test.respdata", dir + "/dataset_test.respdata");

    auto [train_norm, norm] = pre::normalize_features(split.train);
    const LabeledDataset test_norm = pre::apply_normalization(split.test, norm);

    train::TrainConfig tc = cfg.train_config(models::Variant::saae);
    const train::ModelSpecs specs = cfg.model_specs(models::Variant::saae, full.n_t);
    std::vector<int> pool(train_norm.size());
    std::iota(pool.begin(), pool.end(), 0);
    const std::vector<int> labeled = pick_labels(train_norm, pool, tc);
    train::ModelBundle bundle = train::train_saae(train_norm, labeled, tc, specs);
    bundle.norm = norm;
    bundle.thresholds = thresholds_from_synth(cfg);
    bundle.training_log_path = "training_log.csv";

    CommandResult res;
    res.out_dir = dir;
    res.bundle_path = dir + "/model.respbundle";
    write_training_log(bundle, dir + "/training_log.csv");
    train::save_bundle(bundle, res.bundle_path);
    append_hash(dir, "model.respbundle", res.bundle_path);
    append_hash(dir, "training_log.csv", dir + "/training_log.csv");

    // held-out evaluation: classification, CAS, latent match
    const Tensor test_x = pre::to_tensor(test_norm);
    const std::vector<int> test_labels = pre::labels_of(test_norm);
    const std::vector<int> preds = train::predict_classes(bundle, test_x);
    const auto scores = metrics::macro_f1(preds, test_labels, 3);

    train::TrainConfig cas_cfg = tc;
    cas_cfg.epochs = std::min(tc.epochs, 30);
    cas_cfg.lr_classification = 1e-3;
    const auto cas_score = eval::cas(bundle, test_x, test_labels,
                                     static_cast<int>(cfg.get_int("eval.n_generated")),
                                     cfg.classifier_spec(full.n_t), cas_cfg,
                                     static_cast<int>(cfg.get_int("eval.repeats")), seed);

    Rng lat_rng(mix_seed(seed, 31));
    const int n_lat = std::min<int>(static_cast<int>(train_norm.size()), 10000);
    std::vector<int> lat_idx(static_cast<std::size_t>(n_lat));
    std::iota(lat_idx.begin(), lat_idx.end(), 0);
    const Tensor z = train::sample_posterior(bundle, pre::to_tensor(train_norm, lat_idx), lat_rng);
    auto [zp, yp] = obj::sample_prior(bundle.prior, n_lat, lat_rng);
    const auto cmp = eval::latent_norm_distribution(z, zp, static_cast<int>(cfg.get_int("eval.bins")));

    std::ostringstream os;
    os << class_report_csv(scores);
    os << "cas_mf1_mean," << fmt(cas_score.mean) << "\ncas_mf1_std," << fmt(cas_score.stddev)
       << "\nlatent_norm_ks," << fmt(cmp.ks) << "\n";
    res.report_path = dir + "/eval_report.csv";
    io::write_file_atomic(res.report_path, os.str());
    std::ostringstream summary;
    summary << "experiment " << (vary ? "s2" : "s1") << "\nheld-out mF1 " << fmt6(scores.mf1)
            << "\nCAS mF1 " << fmt6(cas_score.mean) << " +- " << fmt6(cas_score.stddev)
            << "\nlatent norm KS " << fmt6(cmp.ks) << "\n";
    io::write_file_atomic(dir + "/eval_summary.txt", summary.str());

    std::ostringstream lat;
    lat << "norm_bin_center,encodings,prior\n";
    for (std::size_t b = 0; b < cmp.encodings.counts.size(); ++b)
        lat << fmt(0.5 * (cmp.encodings.edges[b] + cmp.encodings.edges[b + 1])) << ","
            << cmp.encodings.counts[b] << "," << cmp.prior.counts[b] << "\n";
    io::write_file_atomic(dir + "/latent_norms.csv", lat.str());

    write_resolved(cfg, dir);
    io::write_file_atomic(dir + "/plots.py", kPlotScript);
    return res;
}

CommandResult repro_recon(RunConfig cfg) {
    const std::string dir = cfg.get_string("out_dir");
    ensure_dir(dir);
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    const double rate = cfg.get_double("synth.sample_rate");

    // five training sources spanning the period range plus two held-out ones
    struct Source {
        std::string id;
        double period, amplitude;
        bool holdout;
    };
    const std::vector<Source> sources = {
        {"p0", 2.4, 5.0, false}, {"p1", 3.2, 12.0, false}, {"p2", 4.0, 8.0, false},
        {"p3", 4.8, 6.0, false}, {"p4", 5.6, 10.0, false}, {"h0", 3.6, 7.0, true},
        {"h1", 4.4, 9.0, true}};

    const int stride = static_cast<int>(cfg.get_int("recon.stride"));
    std::map<std::string, std::vector<recon::WindowPair>> pairs_by_source;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> series_by_source;
    std::uint64_t source_idx = 0;
    for (const Source& src : sources) {
        synth::SynthConfig sc = cfg.synth_config();
        sc.seed = mix_seed(seed, 1000 + source_idx++);
        sc.base_period = src.period;
        sc.base_amplitude = src.amplitude;
        sc.vary_period_amplitude = true;
        sc.num_samples = 1;
        sc.periods_per_sample = static_cast<int>(std::llround(600.0 / src.period));
        const synth::SampledSignal sig = synth::generate_signal(sc, 0);

        // knots from the generator truth give the aligned interpolated series
        BreathingVector v;
        v.source_id = src.id;
        for (const synth::PeriodTruth& p : sig.truth.periods) {
            PeriodTuple t;
            t.a_ee = sig.truth.slope * p.t_start;
            t.a_mi = sig.truth.slope * (p.t_start + 0.25 * p.period) + 0.5 * p.amplitude;
            t.a_ei = sig.truth.slope * (p.t_start + 0.50 * p.period) + p.amplitude;
            t.a_me = sig.truth.slope * (p.t_start + 0.75 * p.period) + 0.5 * p.amplitude;
            t.d_ee = 0.5 * p.period;
            t.d_ei = 0.5 * p.period;
            v.periods.push_back(t);
        }
        std::vector<double> interp = recon::linear_interpolate(v, rate);
        std::vector<double> real = sig.values;
        const std::size_t n = std::min(interp.size(), real.size());
        interp.resize(n);
        real.resize(n);
        series_by_source[src.id] = {real, interp};
        pairs_by_source[src.id] = recon::make_training_windows(real, interp, stride, src.id);
    }

    train::TrainConfig rc = cfg.train_config(models::Variant::vae);
    rc.lr_reconstruction = 1e-3;
    rc.lr_decay = 1e-6;
    rc.epochs = std::max(rc.epochs, 150);

    // patbr models from the extreme and middle training sources
    const std::vector<std::string> pat_sources = {"p0", "p2", "p4"};
    std::map<std::string, train::ModelBundle> pat_models;
    for (const std::string& id : pat_sources) {
        train::TrainConfig c = rc;
        c.seed = mix_seed(seed, 2000 + static_cast<std::uint64_t>(id[1] - '0'));
        pat_models[id] =
            recon::train_recon_net(pairs_by_source[id], "patbr", c, cfg.recon_spec(), 1.0);
    }
    std::vector<recon::WindowPair> pop_pairs;
    for (const Source& src : sources)
        if (!src.holdout)
            pop_pairs.insert(pop_pairs.end(), pairs_by_source[src.id].begin(),
                             pairs_by_source[src.id].end());
    train::TrainConfig pc = rc;
    pc.seed = mix_seed(seed, 3000);
    train::ModelBundle pop_model = recon::train_recon_net(
        pop_pairs, "popbr", pc, cfg.recon_spec(), cfg.get_double("recon.popbr_fraction"));

    // mean L1 per model per source
    std::ostringstream os;
    os << "model,source,holdout,mean_l1\n";
    auto eval_model = [&](const std::string& name, train::ModelBundle& m) {
        for (const Source& src : sources) {
            const auto& [real, interp] = series_by_source[src.id];
            const std::vector<double> rec = recon::apply_recon(m, interp);
            os << name << "," << src.id << "," << (src.holdout ? 1 : 0) << ","
               << fmt(recon::mean_l1(real, rec)) << "\n";
        }
    };
    for (auto& [id, m] : pat_models) eval_model("patbr-" + id, m);
    eval_model("popbr", pop_model);

    CommandResult res;
    res.out_dir = dir;
    res.report_path = dir + "/eval_report.csv";
    res.bundle_path = dir + "/model.respbundle";
    io::write_file_atomic(res.report_path, os.str());
    train::save_bundle(pop_model, res.bundle_path);
    write_training_log(pop_model, dir + "/training_log.csv");
    append_hash(dir, "model.respbundle", res.bundle_path);
    append_hash(dir, "eval_report.csv", res.report_path);

    // sample reconstruction for plotting
    const auto& [real, interp] = series_by_source["h0"];
    const std::vector<double> rec = recon::apply_recon(pop_model, interp);
    io::write_series_csv(dir + "/series_real.csv", real, rate);
    io::write_series_csv(dir + "/series_interp.csv", interp, rate);
    io::write_series_csv(dir + "/series_popbr.csv", rec, rate);

    io::write_file_atomic(dir + "/eval_summary.txt", "experiment recon\nsee eval_report.csv\n");
    write_resolved(cfg, dir);
    io::write_file_atomic(dir + "/plots.py", kPlotScript);
    return res;
}

}  // namespace

CommandResult cmd_repro(RunConfig cfg, const std::string& experiment) {
    if (experiment == "s1") return repro_sinusoid(std::move(cfg), false);
    if (experiment == "s2") return repro_sinusoid(std::move(cfg), true);
    if (experiment == "recon") return repro_recon(std::move(cfg));
    throw ConfigError("cmd_repro: unknown experiment '" + experiment + "' (expected s1|s2|recon)");
}

}  // namespace resp::cli
