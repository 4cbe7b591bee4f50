#pragma once

// Shared helpers and independent oracles for the test suites. Everything here
// must stay independent of the implementation paths it checks: naive loops,
// finite differences and closed forms only.

#include <cmath>
#include <vector>

#include "resp/rng.hpp"
#include "resp/tensor.hpp"

namespace testutil {

using resp::Rng;
using resp::Tensor;

inline Tensor random_tensor(const std::vector<int>& shape, Rng& rng, double scale = 1.0) {
    Tensor t(shape);
    for (double& v : t.data) v = scale * rng.normal();
    return t;
}

// naive triple-loop matrix multiply oracle: (r x k) * (k x c) + bias
inline Tensor naive_dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor y({x.dim(0), w.dim(1)});
    for (int r = 0; r < x.dim(0); ++r)
        for (int c = 0; c < w.dim(1); ++c) {
            double acc = b.data[static_cast<std::size_t>(c)];
            for (int k = 0; k < x.dim(1); ++k) acc += x.at2(r, k) * w.at2(k, c);
            y.at2(r, c) = acc;
        }
    return y;
}

// direct evaluation of the causal convolution sum, independent of the
// engine's loop structure
inline Tensor naive_conv1d(const Tensor& x, const Tensor& k, const Tensor& b, int dilation) {
    const int batch = x.dim(0), t_len = x.dim(1), ci = x.dim(2);
    const int kw = k.dim(0), co = k.dim(2);
    Tensor y({batch, t_len, co});
    for (int bi = 0; bi < batch; ++bi)
        for (int t = 0; t < t_len; ++t)
            for (int f = 0; f < co; ++f) {
                double acc = b.data[static_cast<std::size_t>(f)];
                for (int kk = 0; kk < kw; ++kk)
                    for (int h = 0; h < ci; ++h) {
                        const int tt = t - kk * dilation;
                        if (tt >= 0) acc += k.at3(kk, h, f) * x.at3(bi, tt, h);
                    }
                y.at3(bi, t, f) = acc;
            }
    return y;
}

// zero-interleave a kernel so dilation-d conv equals dilation-1 conv
inline Tensor interleave_kernel(const Tensor& k, int dilation) {
    const int kw = k.dim(0), ci = k.dim(1), co = k.dim(2);
    const int kw2 = (kw - 1) * dilation + 1;
    Tensor out({kw2, ci, co});
    for (int kk = 0; kk < kw; ++kk)
        for (int h = 0; h < ci; ++h)
            for (int f = 0; f < co; ++f) out.at3(kk * dilation, h, f) = k.at3(kk, h, f);
    return out;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

inline double chi_mean(int n) {
    // E||z|| for z ~ N(0, I_n): sqrt(2) * Gamma((n+1)/2) / Gamma(n/2)
    return std::sqrt(2.0) * std::exp(std::lgamma((n + 1) / 2.0) - std::lgamma(n / 2.0));
}

// chi-square statistic against uniform expected counts
inline double chi_square_uniform(const std::vector<long>& counts) {
    double total = 0.0;
    for (long c : counts) total += static_cast<double>(c);
    const double expected = total / static_cast<double>(counts.size());
    double stat = 0.0;
    for (long c : counts) {
        const double d = static_cast<double>(c) - expected;
        stat += d * d / expected;
    }
    return stat;
}

}  // namespace testutil
