#include "resp/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "resp/metrics.hpp"

namespace resp::recon {

using diff::Graph;
using diff::Mode;

std::vector<double> linear_interpolate(const BreathingVector& x, double sample_rate) {
    if (x.periods.empty()) throw DataError("linear_interpolate: empty vector");
    if (sample_rate <= 0) throw ConfigError("linear_interpolate: sample_rate must be > 0");

    // knot times/values: EE, MI, EI, ME per period, closing on the last EE level
    std::vector<double> kt, kv;
    kt.reserve(x.periods.size() * 4 + 1);
    kv.reserve(x.periods.size() * 4 + 1);
    double t = 0.0;
    for (const PeriodTuple& p : x.periods) {
        if (!(p.d_ee > 0.0) || !(p.d_ei > 0.0))
            throw DataError("linear_interpolate: nonpositive time gap");
        kt.push_back(t);
        kv.push_back(p.a_ee);
        kt.push_back(t + 0.5 * p.d_ee);
        kv.push_back(p.a_mi);
        kt.push_back(t + p.d_ee);
        kv.push_back(p.a_ei);
        kt.push_back(t + p.d_ee + 0.5 * p.d_ei);
        kv.push_back(p.a_me);
        t += p.d_ee + p.d_ei;
    }
    kt.push_back(t);
    kv.push_back(x.periods.back().a_ee);

    const auto n = static_cast<std::size_t>(std::llround(t * sample_rate)) + 1;
    std::vector<double> out(n);
    std::size_t seg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ti = std::min(static_cast<double>(i) / sample_rate, t);
        while (seg + 2 < kt.size() && ti > kt[seg + 1]) ++seg;
        const double t0 = kt[seg], t1 = kt[seg + 1];
        const double w = t1 > t0 ? (ti - t0) / (t1 - t0) : 0.0;
        out[i] = kv[seg] + w * (kv[seg + 1] - kv[seg]);
    }
    return out;
}

std::vector<WindowPair> make_training_windows(const std::vector<double>& real_series,
                                              const std::vector<double>& interp_series,
                                              int stride, const std::string& source_id) {
    if (real_series.size() != interp_series.size())
        throw DataError("make_training_windows: series must be aligned and equal length");
    if (static_cast<int>(real_series.size()) < kWindowInput)
        throw DataError("make_training_windows: series shorter than one window");
    if (stride < 1) throw ConfigError("make_training_windows: stride must be >= 1");

    std::vector<WindowPair> out;
    for (std::size_t s = 0; s + kWindowInput <= real_series.size();
         s += static_cast<std::size_t>(stride)) {
        WindowPair w;
        w.source_id = source_id;
        double lo = interp_series[s], hi = interp_series[s];
        for (int i = 0; i < kWindowInput; ++i) {
            lo = std::min(lo, interp_series[s + static_cast<std::size_t>(i)]);
            hi = std::max(hi, interp_series[s + static_cast<std::size_t>(i)]);
        }
        if (!(hi - lo > 1e-9))
            throw DataError("make_training_windows: degenerate normalization range");
        w.norm_min = lo;
        w.norm_max = hi;
        w.input.resize(kWindowInput);
        for (int i = 0; i < kWindowInput; ++i)
            w.input[static_cast<std::size_t>(i)] =
                (interp_series[s + static_cast<std::size_t>(i)] - lo) / (hi - lo);
        w.target.resize(kWindowOutput);
        for (int i = 0; i < kWindowOutput; ++i)
            w.target[static_cast<std::size_t>(i)] =
                (real_series[s + static_cast<std::size_t>(i)] - lo) / (hi - lo);
        out.push_back(std::move(w));
    }
    return out;
}

namespace {

Tensor pairs_to_tensor(const std::vector<WindowPair>& pairs, const std::vector<int>& idx,
                       bool inputs) {
    const int cols = inputs ? kWindowInput : kWindowOutput;
    Tensor t({static_cast<int>(idx.size()), cols});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const WindowPair& w = pairs[static_cast<std::size_t>(idx[r])];
        const std::vector<double>& src = inputs ? w.input : w.target;
        std::copy(src.begin(), src.end(), &t.data[r * static_cast<std::size_t>(cols)]);
    }
    return t;
}

}  // namespace

train::ModelBundle train_recon_net(const std::vector<WindowPair>& pairs, const std::string& mode,
                                   const train::TrainConfig& cfg, const ReconNetSpec& spec_in,
                                   double subset_fraction) {
    if (pairs.empty()) throw DataError("train_recon_net: no window pairs");
    ReconNetSpec spec = spec_in;
    spec.mode = mode;
    spec.validate();

    std::vector<int> pool(pairs.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<int>(i);

    Rng subset_rng(mix_seed(cfg.seed, 7));
    if (mode == "patbr") {
        const std::string& src = pairs.front().source_id;
        for (const WindowPair& w : pairs)
            if (w.source_id != src)
                throw DataError("train_recon_net: patbr requires a single source, found '" +
                                w.source_id + "' and '" + src + "'");
    } else {
        subset_rng.shuffle(pool);
        const std::size_t keep = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(subset_fraction * static_cast<double>(pool.size()))));
        pool.resize(keep);
    }

    Rng init_rng(mix_seed(cfg.seed, 1));
    Rng split_rng(mix_seed(cfg.seed, 2));
    Rng loop_rng(mix_seed(cfg.seed, 3));

    train::ModelBundle bundle;
    bundle.variant = "recon";
    bundle.seed = cfg.seed;
    bundle.recon_net = std::make_unique<models::ReconNet>(spec, init_rng);
    models::ReconNet& net = *bundle.recon_net;

    std::vector<int> local_train, local_val;
    {
        std::vector<int> idx(pool.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        split_rng.shuffle(idx);
        const std::size_t n_val = static_cast<std::size_t>(
            std::llround(cfg.validation_fraction * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < n_val ? local_val : local_train).push_back(pool[static_cast<std::size_t>(idx[i])]);
        if (local_train.empty()) throw DataError("train_recon_net: empty training split");
        if (local_val.empty()) local_val = local_train;
    }

    const Tensor val_x = pairs_to_tensor(pairs, local_val, true);
    const Tensor val_y = pairs_to_tensor(pairs, local_val, false);
    auto validation_se = [&]() {
        Graph g;
        const int out = net.forward(g, g.input(val_x));
        const int se = g.se_half_mean(out, g.input(val_y));
        return g.scalar(se);
    };

    diff::Adam opt(net.params(), cfg.lr_reconstruction);
    double best = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_params;
    for (const auto* p : net.params()) best_params.push_back(p->value);
    int since_best = 0;

    const int batch_size =
        std::min<int>(cfg.batch_size, std::max<int>(2, static_cast<int>(local_train.size())));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        opt.set_lr(cfg.lr_reconstruction / (1.0 + cfg.lr_decay * static_cast<double>(epoch)));
        auto batches = train::make_batches(local_train, batch_size, loop_rng);
        if (batches.empty()) batches.push_back(local_train);
        double se_sum = 0.0;
        for (const auto& b : batches) {
            net.zero_grads();
            Graph g;
            const int out = net.forward(g, g.input(pairs_to_tensor(pairs, b, true)));
            const int loss = g.se_half_mean(out, g.input(pairs_to_tensor(pairs, b, false)));
            g.backward(loss);
            opt.step();
            se_sum += g.scalar(loss);
        }
        train::TrainLogRow row;
        row.epoch = epoch;
        row.recon_se = se_sum / static_cast<double>(batches.size());
        row.val_recon_se = validation_se();
        row.val_metric = row.val_recon_se;
        row.lr = opt.lr();
        if (!std::isfinite(row.recon_se) || !std::isfinite(row.val_recon_se))
            throw NumericError("train_recon_net: training diverged");
        bundle.log.push_back(row);
        if (cfg.verbose)
            std::fprintf(stderr, "recon(%s) epoch %d se %.6f val %.6f\n", mode.c_str(), epoch,
                         row.recon_se, row.val_recon_se);
        if (row.val_recon_se < best - 1e-15) {
            best = row.val_recon_se;
            best_params.clear();
            for (const auto* p : net.params()) best_params.push_back(p->value);
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    if (cfg.epochs > 0) {
        auto ps = net.params();
        for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = best_params[i];
    }
    return bundle;
}

std::vector<double> apply_recon(train::ModelBundle& bundle, const std::vector<double>& interp) {
    if (!bundle.recon_net) throw ConfigError("apply_recon: bundle has no reconstruction net");
    if (static_cast<int>(interp.size()) < kWindowInput)
        throw DataError("apply_recon: series shorter than one window");
    models::ReconNet& net = *bundle.recon_net;

    const std::size_t n = interp.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t s = 0; s < n; s += kWindowOutput) {
        // edge-extend the tail to a full window
        std::vector<double> win(kWindowInput);
        for (int i = 0; i < kWindowInput; ++i) {
            const std::size_t idx = std::min(s + static_cast<std::size_t>(i), n - 1);
            win[static_cast<std::size_t>(i)] = interp[idx];
        }
        double lo = win[0], hi = win[0];
        for (double v : win) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!(hi - lo > 1e-9)) {
            // flat window: the net has nothing to reshape, pass it through
            for (std::size_t i = s; i < std::min(n, s + kWindowOutput); ++i) out[i] = interp[i];
            continue;
        }
        Tensor x({1, kWindowInput});
        for (int i = 0; i < kWindowInput; ++i)
            x.data[static_cast<std::size_t>(i)] = (win[static_cast<std::size_t>(i)] - lo) / (hi - lo);
        Graph g;
        const int y = net.forward(g, g.input(std::move(x)));
        const Tensor& pred = g.val(y);
        for (std::size_t i = s; i < std::min(n, s + kWindowOutput); ++i)
            out[i] = lo + (hi - lo) * pred.data[i - s];
    }
    return out;
}

double mean_l1(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) throw DataError("mean_l1: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

}  // namespace resp::recon
