#include "resp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace resp::metrics {

ClassScores macro_f1(const std::vector<int>& predictions, const std::vector<int>& labels,
                     int classes) {
    if (predictions.size() != labels.size())
        throw ShapeError("macro_f1: prediction/label count mismatch");
    if (classes < 1) throw ConfigError("macro_f1: classes must be >= 1");
    ClassScores s;
    s.confusion.assign(static_cast<std::size_t>(classes),
                       std::vector<long>(static_cast<std::size_t>(classes), 0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int lab = labels[i], pred = predictions[i];
        if (lab < 0 || lab >= classes || pred < 0 || pred >= classes)
            throw DataError("macro_f1: class index out of range");
        ++s.confusion[static_cast<std::size_t>(lab)][static_cast<std::size_t>(pred)];
    }
    s.precision.resize(static_cast<std::size_t>(classes));
    s.recall.resize(static_cast<std::size_t>(classes));
    s.f1.resize(static_cast<std::size_t>(classes));
    s.absent.resize(static_cast<std::size_t>(classes));
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) {
        long tp = s.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
        long pred_c = 0, true_c = 0;
        for (int k = 0; k < classes; ++k) {
            pred_c += s.confusion[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
            true_c += s.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
        }
        const double p = pred_c > 0 ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
        const double r = true_c > 0 ? static_cast<double>(tp) / static_cast<double>(true_c) : 0.0;
        s.precision[static_cast<std::size_t>(c)] = p;
        s.recall[static_cast<std::size_t>(c)] = r;
        s.f1[static_cast<std::size_t>(c)] = (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
        s.absent[static_cast<std::size_t>(c)] = (pred_c == 0 && true_c == 0);
        sum += s.f1[static_cast<std::size_t>(c)];
    }
    s.mf1 = sum / static_cast<double>(classes);
    return s;
}

double Histogram::mode_center() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < counts.size(); ++i)
        if (counts[i] > counts[best]) best = i;
    return 0.5 * (edges[best] + edges[best + 1]);
}

Histogram histogram(const std::vector<double>& values, int bins) {
    if (values.empty()) throw DataError("histogram: empty input");
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    double lo = *mn, hi = *mx;
    if (hi <= lo) hi = lo + 1e-12;
    return histogram(values, bins, lo, hi);
}

Histogram histogram(const std::vector<double>& values, int bins, double lo, double hi) {
    if (bins < 1) throw ConfigError("histogram: bins must be >= 1");
    if (!(hi > lo)) throw ConfigError("histogram: hi must exceed lo");
    Histogram h;
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i)
        h.edges[static_cast<std::size_t>(i)] =
            lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (double v : values) {
        int b = static_cast<int>((v - lo) / width);
        b = std::clamp(b, 0, bins - 1);
        ++h.counts[static_cast<std::size_t>(b)];
    }
    return h;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw DataError("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

std::vector<double> nn_l1_distances(const Tensor& points) {
    if (points.rank() != 2 || points.dim(0) < 2)
        throw DataError("nn_l1_distances: need a (n>=2, N) tensor");
    const int n = points.dim(0), dim = points.dim(1);

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return points.at2(a, 0) < points.at2(b, 0); });

    std::vector<double> out(static_cast<std::size_t>(n));
    for (int oi = 0; oi < n; ++oi) {
        const int i = order[static_cast<std::size_t>(oi)];
        double best = std::numeric_limits<double>::infinity();
        for (int dir = -1; dir <= 1; dir += 2) {
            for (int oj = oi + dir; oj >= 0 && oj < n; oj += dir) {
                const int j = order[static_cast<std::size_t>(oj)];
                const double gap = std::fabs(points.at2(j, 0) - points.at2(i, 0));
                if (gap >= best) break;  // every later candidate is at least this far in L1
                double d = 0.0;
                for (int k = 0; k < dim && d < best; ++k)
                    d += std::fabs(points.at2(i, k) - points.at2(j, k));
                best = std::min(best, d);
            }
        }
        out[static_cast<std::size_t>(i)] = best / static_cast<double>(dim);
    }
    return out;
}

std::vector<double> l2_norms(const Tensor& points) {
    if (points.rank() != 2) throw ShapeError("l2_norms: expected rank-2 tensor");
    std::vector<double> out(static_cast<std::size_t>(points.dim(0)));
    for (int i = 0; i < points.dim(0); ++i) {
        double s = 0.0;
        for (int k = 0; k < points.dim(1); ++k) s += points.at2(i, k) * points.at2(i, k);
        out[static_cast<std::size_t>(i)] = std::sqrt(s);
    }
    return out;
}

double binary_accuracy(const std::vector<double>& logits, const std::vector<int>& labels) {
    if (logits.size() != labels.size() || logits.empty())
        throw ShapeError("binary_accuracy: size mismatch");
    std::size_t ok = 0;
    for (std::size_t i = 0; i < logits.size(); ++i)
        if ((logits[i] > 0.0) == (labels[i] == 1)) ++ok;
    return static_cast<double>(ok) / static_cast<double>(logits.size());
}

double binary_cross_entropy(const std::vector<double>& logits, const std::vector<int>& labels) {
    if (logits.size() != labels.size() || logits.empty())
        throw ShapeError("binary_cross_entropy: size mismatch");
    auto softplus = [](double x) {
        return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    };
    double s = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i)
        s += labels[i] == 1 ? softplus(-logits[i]) : softplus(logits[i]);
    return s / static_cast<double>(logits.size());
}

}  // namespace resp::metrics
