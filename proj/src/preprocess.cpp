#include "resp/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace resp::pre {

namespace {

// Jacobi eigendecomposition of a symmetric 3x3 matrix. Returns eigenvalues
// (descending) and the matching unit eigenvectors as columns.
struct Eig3 {
    std::array<double, 3> values;
    std::array<std::array<double, 3>, 3> vectors;  // vectors[i] = i-th eigenvector
};

Eig3 jacobi3(std::array<std::array<double, 3>, 3> a) {
    std::array<std::array<double, 3>, 3> v = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = std::fabs(a[0][1]) + std::fabs(a[0][2]) + std::fabs(a[1][2]);
        if (off < 1e-15) break;
        for (int p = 0; p < 2; ++p)
            for (int q = p + 1; q < 3; ++q) {
                if (std::fabs(a[p][q]) < 1e-18) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < 3; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (int k = 0; k < 3; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
    }
    Eig3 e;
    std::array<int, 3> order = {0, 1, 2};
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return a[i][i] > a[j][j]; });
    for (int i = 0; i < 3; ++i) {
        e.values[static_cast<std::size_t>(i)] = a[order[static_cast<std::size_t>(i)]][order[static_cast<std::size_t>(i)]];
        for (int k = 0; k < 3; ++k)
            e.vectors[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] =
                v[k][order[static_cast<std::size_t>(i)]];
    }
    return e;
}

}  // namespace

PrincipalAxisSeries pca_project(const Marker3DSeries& series) {
    const std::size_t n = series.positions.size();
    if (n < 2) throw DataError("pca_project: need at least 2 samples");
    std::array<double, 3> mean = {0, 0, 0};
    for (const auto& p : series.positions) {
        for (int c = 0; c < 3; ++c) {
            if (!std::isfinite(p[static_cast<std::size_t>(c)]))
                throw DataError("pca_project: non-finite input");
            mean[static_cast<std::size_t>(c)] += p[static_cast<std::size_t>(c)];
        }
    }
    for (double& m : mean) m /= static_cast<double>(n);

    std::array<std::array<double, 3>, 3> cov = {{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}};
    for (const auto& p : series.positions)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                cov[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
                    (p[static_cast<std::size_t>(i)] - mean[static_cast<std::size_t>(i)]) *
                    (p[static_cast<std::size_t>(j)] - mean[static_cast<std::size_t>(j)]);
    for (auto& row : cov)
        for (double& vv : row) vv /= static_cast<double>(n);

    const double trace = cov[0][0] + cov[1][1] + cov[2][2];
    if (trace < 1e-12) throw DataError("pca_project: degenerate input (zero variance)");

    const Eig3 e = jacobi3(cov);
    std::array<double, 3> axis = e.vectors[0];

    PrincipalAxisSeries out;
    out.sample_rate = series.sample_rate;
    out.channel_means = mean;
    out.variance_retained = e.values[0] / trace;
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        for (int c = 0; c < 3; ++c)
            v += axis[static_cast<std::size_t>(c)] *
                 (series.positions[i][static_cast<std::size_t>(c)] - mean[static_cast<std::size_t>(c)]);
        out.values[i] = v;
    }

    // sign convention: inhale peaks positive
    double m1 = 0.0;
    for (double v : out.values) m1 += v;
    m1 /= static_cast<double>(n);
    double m2 = 0.0, m3 = 0.0;
    for (double v : out.values) {
        const double d = v - m1;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    const double skew = m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
    double sign = 1.0;
    if (std::fabs(skew) > 0.05) {
        sign = skew > 0 ? 1.0 : -1.0;
    } else {
        // symmetric signal: make the largest-magnitude axis component positive
        int big = 0;
        for (int c = 1; c < 3; ++c)
            if (std::fabs(axis[static_cast<std::size_t>(c)]) >
                std::fabs(axis[static_cast<std::size_t>(big)]))
                big = c;
        sign = axis[static_cast<std::size_t>(big)] >= 0 ? 1.0 : -1.0;
    }
    if (sign < 0) {
        for (double& v : out.values) v = -v;
        for (double& a : axis) a = -a;
    }
    out.projection_axis = axis;
    return out;
}

SegmentationResult segment_periods(const PrincipalAxisSeries& series,
                                   const SegmentationOptions& opts) {
    const std::vector<double>& x = series.values;
    const double rate = series.sample_rate;
    const std::size_t n = x.size();
    if (n < 8) throw DataError("segment_periods: series too short");

    // centered moving average; window shrinks at the boundaries
    int half = static_cast<int>(std::lround(0.5 * opts.smooth_window * rate));
    if (half < 0) half = 0;
    std::vector<double> s(n);
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= static_cast<std::size_t>(half) ? i - static_cast<std::size_t>(half) : 0;
        const std::size_t hi = std::min(n - 1, i + static_cast<std::size_t>(half));
        s[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
    }

    // local minima of the smoothed series (first index on plateaus)
    std::vector<std::size_t> cands;
    for (std::size_t i = 1; i + 1 < n; ++i)
        if (s[i] < s[i - 1] && s[i] <= s[i + 1]) cands.push_back(i);

    // enforce minimum separation, keeping the deeper minimum
    const double min_sep = opts.min_separation * rate;
    std::vector<std::size_t> kept;
    for (std::size_t c : cands) {
        if (kept.empty() || static_cast<double>(c - kept.back()) >= min_sep) {
            kept.push_back(c);
        } else if (s[c] < s[kept.back()]) {
            kept.back() = c;
        }
    }

    // refine each minimum to the raw-series argmin near the smoothed one
    const int refine = std::max(1, half);
    std::vector<std::size_t> ee;
    for (std::size_t k : kept) {
        std::size_t lo = k >= static_cast<std::size_t>(refine) ? k - static_cast<std::size_t>(refine) : 0;
        std::size_t hi = std::min(n - 1, k + static_cast<std::size_t>(refine));
        std::size_t best = lo;
        for (std::size_t i = lo + 1; i <= hi; ++i)
            if (x[i] < x[best]) best = i;
        if (ee.empty() || best > ee.back()) ee.push_back(best);
    }

    if (ee.size() < 2) throw DataError("segment_periods: fewer than 2 end-exhale minima detected");

    SegmentationResult res;
    res.ee_indices = ee;
    res.start_time = static_cast<double>(ee.front()) / rate;
    res.periods.reserve(ee.size() - 1);
    for (std::size_t p = 0; p + 1 < ee.size(); ++p) {
        const std::size_t e1 = ee[p], e2 = ee[p + 1];
        if (e2 <= e1 + 2) continue;  // degenerate period
        std::size_t ei = e1 + 1;
        for (std::size_t i = e1 + 1; i < e2; ++i)
            if (x[i] > x[ei]) ei = i;
        PeriodTuple t;
        t.a_ee = x[e1];
        t.a_ei = x[ei];
        t.d_ee = static_cast<double>(ei - e1) / rate;
        t.d_ei = static_cast<double>(e2 - ei) / rate;
        t.a_mi = x[(e1 + ei) / 2];
        t.a_me = x[(ei + e2) / 2];
        res.periods.push_back(t);
    }
    if (res.periods.empty()) throw DataError("segment_periods: no valid periods");
    return res;
}

std::vector<BreathingVector> assemble_vectors(const std::vector<PeriodTuple>& periods, int n_t,
                                              int stride, const std::string& source_id) {
    if (n_t < 1) throw ConfigError("assemble_vectors: n_t must be >= 1");
    if (stride < 1) throw ConfigError("assemble_vectors: stride must be >= 1");
    if (static_cast<int>(periods.size()) < n_t)
        throw DataError("assemble_vectors: insufficient periods (" +
                        std::to_string(periods.size()) + " < " + std::to_string(n_t) + ")");
    std::vector<BreathingVector> out;
    const int count = (static_cast<int>(periods.size()) - n_t) / stride + 1;
    out.reserve(static_cast<std::size_t>(count));
    for (int w = 0; w < count; ++w) {
        BreathingVector v;
        v.source_id = source_id;
        v.periods.assign(periods.begin() + static_cast<std::ptrdiff_t>(w) * stride,
                         periods.begin() + static_cast<std::ptrdiff_t>(w) * stride + n_t);
        out.push_back(std::move(v));
    }
    return out;
}

double baseline_slope(const BreathingVector& v) {
    const std::size_t n = v.periods.size();
    if (n < 2) throw DataError("baseline_slope: need at least 2 periods");
    double t = 0.0, mean_t = 0.0, mean_a = 0.0;
    std::vector<double> ts(n);
    for (std::size_t j = 0; j < n; ++j) {
        ts[j] = t;
        mean_t += t;
        mean_a += v.periods[j].a_ee;
        t += v.periods[j].duration();
    }
    mean_t /= static_cast<double>(n);
    mean_a /= static_cast<double>(n);
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double dt = ts[j] - mean_t;
        num += dt * (v.periods[j].a_ee - mean_a);
        den += dt * dt;
    }
    if (den <= 0.0) throw DataError("baseline_slope: degenerate time axis");
    return num / den;
}

namespace {
int classify_slope(double slope, const SlopeThresholds& th) {
    if (slope > th.upper) return static_cast<int>(ShiftClass::up);
    if (slope < th.lower) return static_cast<int>(ShiftClass::down);
    return static_cast<int>(ShiftClass::regular);
}
}  // namespace

std::pair<std::vector<BreathingVector>, SlopeThresholds> label_baseline_shift(
    std::vector<BreathingVector> dataset, double percentile) {
    if (dataset.empty()) throw DataError("label_baseline_shift: empty dataset");
    if (percentile <= 0.0 || percentile >= 0.5)
        throw ConfigError("label_baseline_shift: percentile must be in (0, 0.5)");
    std::vector<double> slopes(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) slopes[i] = baseline_slope(dataset[i]);
    std::vector<double> sorted = slopes;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    std::size_t k = static_cast<std::size_t>(
        std::ceil(percentile * static_cast<double>(n) - 1e-9));
    if (k >= n) k = n - 1;
    SlopeThresholds th;
    th.lower = sorted[k];
    th.upper = sorted[n - 1 - k];
    for (std::size_t i = 0; i < dataset.size(); ++i)
        dataset[i].label = classify_slope(slopes[i], th);
    return {std::move(dataset), th};
}

std::vector<BreathingVector> apply_thresholds(std::vector<BreathingVector> dataset,
                                              const SlopeThresholds& th) {
    for (BreathingVector& v : dataset) v.label = classify_slope(baseline_slope(v), th);
    return dataset;
}

std::pair<LabeledDataset, NormStats> normalize_features(const LabeledDataset& dataset) {
    if (dataset.empty()) throw DataError("normalize_features: empty dataset");
    NormStats st;
    st.mean.fill(0.0);
    std::array<double, 6> sq = {0, 0, 0, 0, 0, 0};
    std::size_t n = 0;
    for (const BreathingVector& v : dataset.samples)
        for (const PeriodTuple& p : v.periods) {
            const auto vals = p.values();
            for (int c = 0; c < 6; ++c) st.mean[static_cast<std::size_t>(c)] += vals[static_cast<std::size_t>(c)];
            ++n;
        }
    for (double& m : st.mean) m /= static_cast<double>(n);
    for (const BreathingVector& v : dataset.samples)
        for (const PeriodTuple& p : v.periods) {
            const auto vals = p.values();
            for (int c = 0; c < 6; ++c) {
                const double d = vals[static_cast<std::size_t>(c)] - st.mean[static_cast<std::size_t>(c)];
                sq[static_cast<std::size_t>(c)] += d * d;
            }
        }
    for (int c = 0; c < 6; ++c) {
        const double var = sq[static_cast<std::size_t>(c)] / static_cast<double>(n);
        if (var < 1e-24)
            throw DataError("normalize_features: zero-variance channel " + std::to_string(c));
        st.std[static_cast<std::size_t>(c)] = std::sqrt(var);
    }
    return {apply_normalization(dataset, st), st};
}

LabeledDataset apply_normalization(const LabeledDataset& dataset, const NormStats& st) {
    LabeledDataset out = dataset;
    for (BreathingVector& v : out.samples)
        for (PeriodTuple& p : v.periods) {
            auto vals = p.values();
            for (int c = 0; c < 6; ++c)
                vals[static_cast<std::size_t>(c)] =
                    (vals[static_cast<std::size_t>(c)] - st.mean[static_cast<std::size_t>(c)]) /
                    st.std[static_cast<std::size_t>(c)];
            p = PeriodTuple::from_values(vals);
        }
    return out;
}

LabeledDataset denormalize(const LabeledDataset& dataset, const NormStats& st) {
    LabeledDataset out = dataset;
    for (BreathingVector& v : out.samples)
        for (PeriodTuple& p : v.periods) {
            auto vals = p.values();
            for (int c = 0; c < 6; ++c)
                vals[static_cast<std::size_t>(c)] =
                    vals[static_cast<std::size_t>(c)] * st.std[static_cast<std::size_t>(c)] +
                    st.mean[static_cast<std::size_t>(c)];
            p = PeriodTuple::from_values(vals);
        }
    return out;
}

void normalize_tensor(Tensor& x, const NormStats& st) {
    if (x.rank() != 3 || x.dim(2) != 6) throw ShapeError("normalize_tensor: expected (B,T,6)");
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const std::size_t c = i % 6;
        x.data[i] = (x.data[i] - st.mean[c]) / st.std[c];
    }
}

void denormalize_tensor(Tensor& x, const NormStats& st) {
    if (x.rank() != 3 || x.dim(2) != 6) throw ShapeError("denormalize_tensor: expected (B,T,6)");
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const std::size_t c = i % 6;
        x.data[i] = x.data[i] * st.std[c] + st.mean[c];
    }
}

Tensor to_tensor(const LabeledDataset& dataset) {
    std::vector<int> idx(dataset.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    return to_tensor(dataset, idx);
}

Tensor to_tensor(const LabeledDataset& dataset, const std::vector<int>& indices) {
    if (dataset.empty()) throw DataError("to_tensor: empty dataset");
    const int n_t = dataset.n_t;
    Tensor x({static_cast<int>(indices.size()), n_t, 6});
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const BreathingVector& v = dataset.samples[static_cast<std::size_t>(indices[b])];
        if (v.n_t() != n_t) throw ShapeError("to_tensor: inconsistent vector length");
        for (int t = 0; t < n_t; ++t) {
            const auto vals = v.periods[static_cast<std::size_t>(t)].values();
            for (int c = 0; c < 6; ++c) x.at3(static_cast<int>(b), t, c) = vals[static_cast<std::size_t>(c)];
        }
    }
    return x;
}

std::vector<int> labels_of(const LabeledDataset& dataset) {
    std::vector<int> labels(dataset.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = dataset.samples[i].label;
    return labels;
}

BreathingVector vector_from_row(const Tensor& x, int row, const std::string& source_id, int label) {
    if (x.rank() != 3 || x.dim(2) != 6) throw ShapeError("vector_from_row: expected (B,T,6)");
    BreathingVector v;
    v.label = label;
    v.source_id = source_id;
    v.periods.resize(static_cast<std::size_t>(x.dim(1)));
    for (int t = 0; t < x.dim(1); ++t) {
        std::array<double, 6> vals;
        for (int c = 0; c < 6; ++c) vals[static_cast<std::size_t>(c)] = x.at3(row, t, c);
        v.periods[static_cast<std::size_t>(t)] = PeriodTuple::from_values(vals);
    }
    return v;
}

}  // namespace resp::pre
