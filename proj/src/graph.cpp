#include "resp/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace resp::diff {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double stable_softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

}  // namespace

int Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Graph::ensure_grad(int id) {
    Node& n = node(id);
    if (!n.has_grad) {
        n.grad = Tensor(n.value.shape);
        n.has_grad = true;
    }
    return n.grad;
}

void Graph::add_to_grad(int id, const Tensor& g) {
    Tensor& dst = ensure_grad(id);
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += g.data[i];
}

double Graph::scalar(int id) const {
    const Tensor& t = val(id);
    if (t.numel() != 1) throw ShapeError("scalar() on non-scalar node");
    return t.data[0];
}

const Tensor& Graph::grad(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad) throw Error("gradient not computed for node");
    return n.grad;
}

int Graph::input(Tensor x) {
    Node n;
    n.value = std::move(x);
    n.tag = "input";
    return push(std::move(n));
}

int Graph::param(Parameter& p) {
    Node n;
    n.value = p.value;
    n.needs_grad = true;
    n.source = &p;
    n.tag = p.name.c_str();
    params_.push_back(&p);
    return push(std::move(n));
}

// ---- dense -----------------------------------------------------------------

int Graph::dense(int x, int w, int b) {
    const Tensor& X = val(x);
    const Tensor& W = val(w);
    const Tensor& B = val(b);
    if (X.rank() != 2 || W.rank() != 2 || X.dim(1) != W.dim(0) || B.dim(0) != W.dim(1))
        throw ShapeError("dense: incompatible shapes " + X.shape_str() + " x " + W.shape_str());
    const int rows = X.dim(0), fi = X.dim(1), fo = W.dim(1);

    Node n;
    n.value = Tensor({rows, fo});
    for (int r = 0; r < rows; ++r) {
        const double* xr = &X.data[static_cast<std::size_t>(r) * fi];
        double* yr = &n.value.data[static_cast<std::size_t>(r) * fo];
        std::memcpy(yr, B.data.data(), sizeof(double) * static_cast<std::size_t>(fo));
        for (int i = 0; i < fi; ++i) {
            const double xv = xr[i];
            const double* wr = &W.data[static_cast<std::size_t>(i) * fo];
            for (int o = 0; o < fo; ++o) yr[o] += wr[o] * xv;
        }
    }
    n.in = {x, w, b};
    n.needs_grad = wants_grad(x) || wants_grad(w) || wants_grad(b);
    n.tag = "dense";
    n.backward_fn = [rows, fi, fo](Graph& g, int self) {
        const Tensor& dy = g.node(self).grad;
        const int x_ = g.node(self).in[0], w_ = g.node(self).in[1], b_ = g.node(self).in[2];
        const Tensor& X_ = g.val(x_);
        const Tensor& W_ = g.val(w_);
        if (g.wants_grad(x_)) {
            Tensor& dx = g.ensure_grad(x_);
            for (int r = 0; r < rows; ++r) {
                const double* dyr = &dy.data[static_cast<std::size_t>(r) * fo];
                double* dxr = &dx.data[static_cast<std::size_t>(r) * fi];
                for (int i = 0; i < fi; ++i) {
                    const double* wr = &W_.data[static_cast<std::size_t>(i) * fo];
                    double acc = 0.0;
                    for (int o = 0; o < fo; ++o) acc += dyr[o] * wr[o];
                    dxr[i] += acc;
                }
            }
        }
        if (g.wants_grad(w_)) {
            Tensor& dw = g.ensure_grad(w_);
            for (int r = 0; r < rows; ++r) {
                const double* xr = &X_.data[static_cast<std::size_t>(r) * fi];
                const double* dyr = &dy.data[static_cast<std::size_t>(r) * fo];
                for (int i = 0; i < fi; ++i) {
                    const double xv = xr[i];
                    double* dwr = &dw.data[static_cast<std::size_t>(i) * fo];
                    for (int o = 0; o < fo; ++o) dwr[o] += xv * dyr[o];
                }
            }
        }
        if (g.wants_grad(b_)) {
            Tensor& db = g.ensure_grad(b_);
            for (int r = 0; r < rows; ++r) {
                const double* dyr = &dy.data[static_cast<std::size_t>(r) * fo];
                for (int o = 0; o < fo; ++o) db.data[static_cast<std::size_t>(o)] += dyr[o];
            }
        }
    };
    return push(std::move(n));
}

// ---- conv1d ----------------------------------------------------------------
// out(b,t,f) = bias(f) + sum_{k,h} K(k,h,f) * x(b, t - k*dilation, h), zero for
// out-of-range time indices; output length equals input length.

int Graph::conv1d(int x, int kernel, int bias, int dilation) {
    const Tensor& X = val(x);
    const Tensor& K = val(kernel);
    const Tensor& B = val(bias);
    if (X.rank() != 3 || K.rank() != 3) throw ShapeError("conv1d: rank mismatch");
    if (dilation < 1) throw ConfigError("conv1d: dilation must be >= 1");
    const int batch = X.dim(0), T = X.dim(1), ci = X.dim(2);
    const int kw = K.dim(0), kci = K.dim(1), co = K.dim(2);
    if (kci != ci)
        throw ShapeError("conv1d: channel mismatch, input has " + std::to_string(ci) +
                         ", kernel expects " + std::to_string(kci));
    if (B.dim(0) != co) throw ShapeError("conv1d: bias size mismatch");

    Node n;
    n.value = Tensor({batch, T, co});
    for (int b = 0; b < batch; ++b) {
        for (int t = 0; t < T; ++t) {
            double* yr = &n.value.data[(static_cast<std::size_t>(b) * T + t) * co];
            std::memcpy(yr, B.data.data(), sizeof(double) * static_cast<std::size_t>(co));
            for (int k = 0; k < kw; ++k) {
                const int tt = t - k * dilation;
                if (tt < 0) break;
                const double* xr = &X.data[(static_cast<std::size_t>(b) * T + tt) * ci];
                const double* kr = &K.data[static_cast<std::size_t>(k) * ci * co];
                for (int h = 0; h < ci; ++h) {
                    const double xv = xr[h];
                    const double* kc = kr + static_cast<std::size_t>(h) * co;
                    for (int f = 0; f < co; ++f) yr[f] += kc[f] * xv;
                }
            }
        }
    }
    n.in = {x, kernel, bias};
    n.needs_grad = wants_grad(x) || wants_grad(kernel) || wants_grad(bias);
    n.tag = "conv1d";
    n.backward_fn = [batch, T, ci, kw, co, dilation](Graph& g, int self) {
        const Tensor& dy = g.node(self).grad;
        const int x_ = g.node(self).in[0], k_ = g.node(self).in[1], b_ = g.node(self).in[2];
        const Tensor& X_ = g.val(x_);
        const Tensor& K_ = g.val(k_);
        if (g.wants_grad(x_)) {
            Tensor& dx = g.ensure_grad(x_);
            for (int b = 0; b < batch; ++b) {
                for (int t = 0; t < T; ++t) {
                    const double* dyr = &dy.data[(static_cast<std::size_t>(b) * T + t) * co];
                    for (int k = 0; k < kw; ++k) {
                        const int tt = t - k * dilation;
                        if (tt < 0) break;
                        double* dxr = &dx.data[(static_cast<std::size_t>(b) * T + tt) * ci];
                        const double* kr = &K_.data[static_cast<std::size_t>(k) * ci * co];
                        for (int h = 0; h < ci; ++h) {
                            const double* kc = kr + static_cast<std::size_t>(h) * co;
                            double acc = 0.0;
                            for (int f = 0; f < co; ++f) acc += dyr[f] * kc[f];
                            dxr[h] += acc;
                        }
                    }
                }
            }
        }
        if (g.wants_grad(k_)) {
            Tensor& dk = g.ensure_grad(k_);
            for (int b = 0; b < batch; ++b) {
                for (int t = 0; t < T; ++t) {
                    const double* dyr = &dy.data[(static_cast<std::size_t>(b) * T + t) * co];
                    for (int k = 0; k < kw; ++k) {
                        const int tt = t - k * dilation;
                        if (tt < 0) break;
                        const double* xr = &X_.data[(static_cast<std::size_t>(b) * T + tt) * ci];
                        double* dkr = &dk.data[static_cast<std::size_t>(k) * ci * co];
                        for (int h = 0; h < ci; ++h) {
                            const double xv = xr[h];
                            double* dkc = dkr + static_cast<std::size_t>(h) * co;
                            for (int f = 0; f < co; ++f) dkc[f] += xv * dyr[f];
                        }
                    }
                }
            }
        }
        if (g.wants_grad(b_)) {
            Tensor& db = g.ensure_grad(b_);
            for (int b = 0; b < batch; ++b)
                for (int t = 0; t < T; ++t) {
                    const double* dyr = &dy.data[(static_cast<std::size_t>(b) * T + t) * co];
                    for (int f = 0; f < co; ++f) db.data[static_cast<std::size_t>(f)] += dyr[f];
                }
        }
    };
    return push(std::move(n));
}

// ---- shape ops ---------------------------------------------------------------

int Graph::flatten(int x) {
    const Tensor& X = val(x);
    if (X.rank() != 3) throw ShapeError("flatten expects rank-3 input");
    Node n;
    n.value = Tensor::from({X.dim(0), X.dim(1) * X.dim(2)}, X.data);
    n.in = {x, -1, -1};
    n.needs_grad = wants_grad(x);
    n.tag = "flatten";
    n.backward_fn = [](Graph& g, int self) {
        const int x_ = g.node(self).in[0];
        if (!g.wants_grad(x_)) return;
        Tensor& dx = g.ensure_grad(x_);
        const Tensor& dy = g.node(self).grad;
        for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dy.data[i];
    };
    return push(std::move(n));
}

int Graph::reshape3(int x, int t, int c) {
    const Tensor& X = val(x);
    if (X.rank() != 2 || X.dim(1) != t * c) throw ShapeError("reshape3: size mismatch");
    Node n;
    n.value = Tensor::from({X.dim(0), t, c}, X.data);
    n.in = {x, -1, -1};
    n.needs_grad = wants_grad(x);
    n.tag = "reshape3";
    n.backward_fn = [](Graph& g, int self) {
        const int x_ = g.node(self).in[0];
        if (!g.wants_grad(x_)) return;
        Tensor& dx = g.ensure_grad(x_);
        const Tensor& dy = g.node(self).grad;
        for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dy.data[i];
    };
    return push(std::move(n));
}

int Graph::concat_cols(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.dim(0) != B.dim(0))
        throw ShapeError("concat_cols: row mismatch");
    const int rows = A.dim(0), fa = A.dim(1), fb = B.dim(1);
    Node n;
    n.value = Tensor({rows, fa + fb});
    for (int r = 0; r < rows; ++r) {
        std::memcpy(&n.value.at2(r, 0), &A.data[static_cast<std::size_t>(r) * fa],
                    sizeof(double) * static_cast<std::size_t>(fa));
        std::memcpy(&n.value.at2(r, fa), &B.data[static_cast<std::size_t>(r) * fb],
                    sizeof(double) * static_cast<std::size_t>(fb));
    }
    n.in = {a, b, -1};
    n.needs_grad = wants_grad(a) || wants_grad(b);
    n.tag = "concat";
    n.backward_fn = [rows, fa, fb](Graph& g, int self) {
        const Tensor& dy = g.node(self).grad;
        const int a_ = g.node(self).in[0], b_ = g.node(self).in[1];
        if (g.wants_grad(a_)) {
            Tensor& da = g.ensure_grad(a_);
            for (int r = 0; r < rows; ++r)
                for (int i = 0; i < fa; ++i) da.at2(r, i) += dy.at2(r, i);
        }
        if (g.wants_grad(b_)) {
            Tensor& db = g.ensure_grad(b_);
            for (int r = 0; r < rows; ++r)
                for (int i = 0; i < fb; ++i) db.at2(r, i) += dy.at2(r, fa + i);
        }
    };
    return push(std::move(n));
}

// ---- pooling -----------------------------------------------------------------

int Graph::maxpool1d(int x, int pool) {
    const Tensor& X = val(x);
    if (X.rank() != 3) throw ShapeError("maxpool1d expects rank-3 input");
    if (pool < 1) throw ConfigError("maxpool1d: pool must be >= 1");
    const int batch = X.dim(0), T = X.dim(1), C = X.dim(2);
    if (pool > T) throw ShapeError("maxpool1d: pool exceeds time length");
    const int to = T / pool;

    Node n;
    n.value = Tensor({batch, to, C});
    std::vector<int> argmax(static_cast<std::size_t>(batch) * to * C);
    for (int b = 0; b < batch; ++b)
        for (int t = 0; t < to; ++t)
            for (int c = 0; c < C; ++c) {
                int best = t * pool;
                double bv = X.at3(b, best, c);
                for (int r = 1; r < pool; ++r) {
                    const double v = X.at3(b, t * pool + r, c);
                    if (v > bv) {  // ties keep the first index
                        bv = v;
                        best = t * pool + r;
                    }
                }
                n.value.at3(b, t, c) = bv;
                argmax[(static_cast<std::size_t>(b) * to + t) * C + c] = best;
            }
    n.in = {x, -1, -1};
    n.needs_grad = wants_grad(x);
    n.tag = "maxpool1d";
    n.backward_fn = [batch, to, C, argmax = std::move(argmax)](Graph& g, int self) {
        const int x_ = g.node(self).in[0];
        if (!g.wants_grad(x_)) return;
        Tensor& dx = g.ensure_grad(x_);
        const Tensor& dy = g.node(self).grad;
        for (int b = 0; b < batch; ++b)
            for (int t = 0; t < to; ++t)
                for (int c = 0; c < C; ++c)
                    dx.at3(b, argmax[(static_cast<std::size_t>(b) * to + t) * C + c], c) +=
                        dy.at3(b, t, c);
    };
    return push(std::move(n));
}

int Graph::upsample1d(int x, int factor) {
    const Tensor& X = val(x);
    if (X.rank() != 3) throw ShapeError("upsample1d expects rank-3 input");
    if (factor < 1) throw ConfigError("upsample1d: factor must be >= 1");
    const int batch = X.dim(0), T = X.dim(1), C = X.dim(2);

    Node n;
    n.value = Tensor({batch, T * factor, C});
    for (int b = 0; b < batch; ++b)
        for (int t = 0; t < T; ++t)
            for (int r = 0; r < factor; ++r)
                std::memcpy(&n.value.at3(b, t * factor + r, 0),
                            &X.data[(static_cast<std::size_t>(b) * T + t) * C],
                            sizeof(double) * static_cast<std::size_t>(C));
    n.in = {x, -1, -1};
    n.needs_grad = wants_grad(x);
    n.tag = "upsample1d";
    n.backward_fn = [batch, T, C, factor](Graph& g, int self) {
        const int x_ = g.node(self).in[0];
        if (!g.wants_grad(x_)) return;
        Tensor& dx = g.ensure_grad(x_);
        const Tensor& dy = g.node(self).grad;
        for (int b = 0; b < batch; ++b)
            for (int t = 0; t < T; ++t)
                for (int r = 0; r < factor; ++r)
                    for (int c = 0; c < C; ++c) dx.at3(b, t, c) += dy.at3(b, t * factor + r, c);
    };
    return push(std::move(n));
}

// ---- batchnorm -----------------------------------------------------------------
// Channel axis: last dim. Rank-3 inputs normalize over batch*time, rank-2 over
// batch. Running stats use the biased batch variance.

int Graph::batchnorm(int x, int gamma, int beta, BatchNormState& state, Mode mode,
                     double momentum, double eps) {
    const Tensor& X = val(x);
    const Tensor& G = val(gamma);
    const Tensor& Bt = val(beta);
    const int C = X.dim(X.rank() - 1);
    if (G.dim(0) != C || Bt.dim(0) != C) throw ShapeError("batchnorm: parameter size mismatch");
    if (mode == Mode::train && X.dim(0) < 2)
        throw DataError("batchnorm: train mode requires batch >= 2");
    const std::size_t n_per_c = X.numel() / static_cast<std::size_t>(C);

    if (!state.initialized) {
        state.running_mean = Tensor({C}, 0.0);
        state.running_var = Tensor({C}, 1.0);
        state.initialized = true;
    }

    std::vector<double> mean(static_cast<std::size_t>(C), 0.0),
        var(static_cast<std::size_t>(C), 0.0);
    if (mode == Mode::train) {
        for (std::size_t i = 0; i < X.data.size(); ++i) mean[i % C] += X.data[i];
        for (int c = 0; c < C; ++c) mean[static_cast<std::size_t>(c)] /= static_cast<double>(n_per_c);
        for (std::size_t i = 0; i < X.data.size(); ++i) {
            const double d = X.data[i] - mean[i % C];
            var[i % C] += d * d;
        }
        for (int c = 0; c < C; ++c) var[static_cast<std::size_t>(c)] /= static_cast<double>(n_per_c);
        for (int c = 0; c < C; ++c) {
            state.running_mean.data[static_cast<std::size_t>(c)] =
                momentum * state.running_mean.data[static_cast<std::size_t>(c)] +
                (1.0 - momentum) * mean[static_cast<std::size_t>(c)];
            state.running_var.data[static_cast<std::size_t>(c)] =
                momentum * state.running_var.data[static_cast<std::size_t>(c)] +
                (1.0 - momentum) * var[static_cast<std::size_t>(c)];
        }
    } else {
        for (int c = 0; c < C; ++c) {
            mean[static_cast<std::size_t>(c)] = state.running_mean.data[static_cast<std::size_t>(c)];
            var[static_cast<std::size_t>(c)] = state.running_var.data[static_cast<std::size_t>(c)];
        }
    }

    Node n;
    n.value = Tensor(X.shape);
    std::vector<double> inv_std(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c)
        inv_std[static_cast<std::size_t>(c)] =
            1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + eps);
    for (std::size_t i = 0; i < X.data.size(); ++i) {
        const std::size_t c = i % C;
        n.value.data[i] = G.data[c] * (X.data[i] - mean[c]) * inv_std[c] + Bt.data[c];
    }
    n.in = {x, gamma, beta};
    n.needs_grad = wants_grad(x) || wants_grad(gamma) || wants_grad(beta);
    n.tag = "batchnorm";
    const bool train_mode = (mode == Mode::train);
    n.backward_fn = [C, n_per_c, train_mode, mean = std::move(mean), inv_std = std::move(inv_std)](
                        Graph& g, int self) {
        const Tensor& dy = g.node(self).grad;
        const int x_ = g.node(self).in[0], g_ = g.node(self).in[1], b_ = g.node(self).in[2];
        const Tensor& X_ = g.val(x_);
        const Tensor& G_ = g.val(g_);
        const std::size_t sc = static_cast<std::size_t>(C);
        std::vector<double> sum_dy(sc, 0.0), sum_dy_xhat(sc, 0.0);
        for (std::size_t i = 0; i < X_.data.size(); ++i) {
            const std::size_t c = i % sc;
            const double xhat = (X_.data[i] - mean[c]) * inv_std[c];
            sum_dy[c] += dy.data[i];
            sum_dy_xhat[c] += dy.data[i] * xhat;
        }
        if (g.wants_grad(g_)) {
            Tensor& dg = g.ensure_grad(g_);
            for (std::size_t c = 0; c < sc; ++c) dg.data[c] += sum_dy_xhat[c];
        }
        if (g.wants_grad(b_)) {
            Tensor& db = g.ensure_grad(b_);
            for (std::size_t c = 0; c < sc; ++c) db.data[c] += sum_dy[c];
        }
        if (g.wants_grad(x_)) {
            Tensor& dx = g.ensure_grad(x_);
            const double inv_n = 1.0 / static_cast<double>(n_per_c);
            for (std::size_t i = 0; i < X_.data.size(); ++i) {
                const std::size_t c = i % sc;
                const double xhat = (X_.data[i] - mean[c]) * inv_std[c];
                if (train_mode) {
                    dx.data[i] += G_.data[c] * inv_std[c] *
                                  (dy.data[i] - inv_n * sum_dy[c] - inv_n * xhat * sum_dy_xhat[c]);
                } else {
                    dx.data[i] += G_.data[c] * inv_std[c] * dy.data[i];
                }
            }
        }
    };
    return push(std::move(n));
}

int Graph::dropout(int x, double p, Mode mode, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must be in [0,1)");
    const Tensor& X = val(x);
    Node n;
    n.in = {x, -1, -1};
    n.needs_grad = wants_grad(x);
    n.tag = "dropout";
    if (mode == Mode::infer || p == 0.0) {
        n.value = X;
        n.backward_fn = [](Graph& g, int self) {
            const int x_ = g.node(self).in[0];
            if (!g.wants_grad(x_)) return;
            Tensor& dx = g.ensure_grad(x_);
            const Tensor& dy = g.node(self).grad;
            for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dy.data[i];
        };
        return push(std::move(n));
    }
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(X.data.size());
    for (auto& m : mask) m = (rng.uniform() >= p) ? keep_scale : 0.0;
    n.value = Tensor(X.shape);
    for (std::size_t i = 0; i < X.data.size(); ++i) n.value.data[i] = X.data[i] * mask[i];
    n.backward_fn = [mask = std::move(mask)](Graph& g, int self) {
        const int x_ = g.node(self).in[0];
        if (!g.wants_grad(x_)) return;
        Tensor& dx = g.ensure_grad(x_);
        const Tensor& dy = g.node(self).grad;
        for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dy.data[i] * mask[i];
    };
    return push(std::move(n));
}

// ---- pointwise -------------------------------------------------------------

#define RESP_POINTWISE_OP(name, tag_str, FWD, DERIV)                                         \
    int Graph::name(int x) {                                                                 \
        const Tensor& X = val(x);                                                            \
        Node n;                                                                              \
        n.value = Tensor(X.shape);                                                           \
        for (std::size_t i = 0; i < X.data.size(); ++i) {                                    \
            const double xv = X.data[i];                                                     \
            n.value.data[i] = (FWD);                                                         \
        }                                                                                    \
        n.in = {x, -1, -1};                                                                  \
        n.needs_grad = wants_grad(x);                                                        \
        n.tag = tag_str;                                                                     \
        n.backward_fn = [](Graph& g, int self) {                                             \
            const int x_ = g.node(self).in[0];                                               \
            if (!g.wants_grad(x_)) return;                                                   \
            Tensor& dx = g.ensure_grad(x_);                                                  \
            const Tensor& dy = g.node(self).grad;                                            \
            const Tensor& X_ = g.val(x_);                                                    \
            const Tensor& Y_ = g.val(self);                                                  \
            (void)X_;                                                                        \
            (void)Y_;                                                                        \
            for (std::size_t i = 0; i < dx.data.size(); ++i) {                               \
                const double xv = X_.data[i];                                                \
                const double yv = Y_.data[i];                                                \
                (void)xv;                                                                    \
                (void)yv;                                                                    \
                dx.data[i] += dy.data[i] * (DERIV);                                          \
            }                                                                                \
        };                                                                                   \
        return push(std::move(n));                                                           \
    }

RESP_POINTWISE_OP(relu, "relu", xv > 0.0 ? xv : 0.0, xv > 0.0 ? 1.0 : 0.0)
RESP_POINTWISE_OP(sigmoid, "sigmoid", stable_sigmoid(xv), yv*(1.0 - yv))
RESP_POINTWISE_OP(tanh_act, "tanh", std::tanh(xv), 1.0 - yv* yv)
RESP_POINTWISE_OP(exp_, "exp", std::exp(xv), yv)
RESP_POINTWISE_OP(softplus, "softplus", stable_softplus(xv), stable_sigmoid(xv))
RESP_POINTWISE_OP(neg, "neg", -xv, -1.0)

#undef RESP_POINTWISE_OP

int Graph::leaky_relu(int x, double slope) {
    const Tensor& X = val(x);
    Node n;
    n.value = Tensor(X.shape);
    for (std::size_t i = 0; i < X.data.size(); ++i) {
        const double xv = X.data[i];
        n.value.data[i] = xv > 0.0 ? xv : slope * xv;
    }
    n.in = {x, -1, -1};
    n.needs_grad = wants_grad(x);
    n.tag = "leaky_relu";
    n.backward_fn = [slope](Graph& g, int self) {
        const int x_ = g.node(self).in[0];
        if (!g.wants_grad(x_)) return;
        Tensor& dx = g.ensure_grad(x_);
        const Tensor& dy = g.node(self).grad;
        const Tensor& X_ = g.val(x_);
        for (std::size_t i = 0; i < dx.data.size(); ++i)
            dx.data[i] += dy.data[i] * (X_.data[i] > 0.0 ? 1.0 : slope);
    };
    return push(std::move(n));
}

int Graph::scale(int x, double c) {
    const Tensor& X = val(x);
    Node n;
    n.value = Tensor(X.shape);
    for (std::size_t i = 0; i < X.data.size(); ++i) n.value.data[i] = c * X.data[i];
    n.in = {x, -1, -1};
    n.needs_grad = wants_grad(x);
    n.tag = "scale";
    n.backward_fn = [c](Graph& g, int self) {
        const int x_ = g.node(self).in[0];
        if (!g.wants_grad(x_)) return;
        Tensor& dx = g.ensure_grad(x_);
        const Tensor& dy = g.node(self).grad;
        for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += c * dy.data[i];
    };
    return push(std::move(n));
}

int Graph::softmax(int x) {
    const Tensor& X = val(x);
    if (X.rank() != 2) throw ShapeError("softmax expects rank-2 input");
    const int rows = X.dim(0), cols = X.dim(1);
    Node n;
    n.value = Tensor(X.shape);
    for (int r = 0; r < rows; ++r) {
        double mx = X.at2(r, 0);
        for (int c = 1; c < cols; ++c) mx = std::max(mx, X.at2(r, c));
        double sum = 0.0;
        for (int c = 0; c < cols; ++c) {
            const double e = std::exp(X.at2(r, c) - mx);
            n.value.at2(r, c) = e;
            sum += e;
        }
        for (int c = 0; c < cols; ++c) n.value.at2(r, c) /= sum;
    }
    n.in = {x, -1, -1};
    n.needs_grad = wants_grad(x);
    n.tag = "softmax";
    n.backward_fn = [rows, cols](Graph& g, int self) {
        const int x_ = g.node(self).in[0];
        if (!g.wants_grad(x_)) return;
        Tensor& dx = g.ensure_grad(x_);
        const Tensor& dy = g.node(self).grad;
        const Tensor& Y_ = g.val(self);
        for (int r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (int c = 0; c < cols; ++c) dot += dy.at2(r, c) * Y_.at2(r, c);
            for (int c = 0; c < cols; ++c)
                dx.at2(r, c) += Y_.at2(r, c) * (dy.at2(r, c) - dot);
        }
    };
    return push(std::move(n));
}

int Graph::add(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require_same_shape(A, B, "add");
    Node n;
    n.value = Tensor(A.shape);
    for (std::size_t i = 0; i < A.data.size(); ++i) n.value.data[i] = A.data[i] + B.data[i];
    n.in = {a, b, -1};
    n.needs_grad = wants_grad(a) || wants_grad(b);
    n.tag = "add";
    n.backward_fn = [](Graph& g, int self) {
        const Tensor& dy = g.node(self).grad;
        for (int side = 0; side < 2; ++side) {
            const int in = g.node(self).in[static_cast<std::size_t>(side)];
            if (!g.wants_grad(in)) continue;
            Tensor& d = g.ensure_grad(in);
            for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] += dy.data[i];
        }
    };
    return push(std::move(n));
}

int Graph::sub(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require_same_shape(A, B, "sub");
    Node n;
    n.value = Tensor(A.shape);
    for (std::size_t i = 0; i < A.data.size(); ++i) n.value.data[i] = A.data[i] - B.data[i];
    n.in = {a, b, -1};
    n.needs_grad = wants_grad(a) || wants_grad(b);
    n.tag = "sub";
    n.backward_fn = [](Graph& g, int self) {
        const Tensor& dy = g.node(self).grad;
        const int a_ = g.node(self).in[0], b_ = g.node(self).in[1];
        if (g.wants_grad(a_)) {
            Tensor& d = g.ensure_grad(a_);
            for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] += dy.data[i];
        }
        if (g.wants_grad(b_)) {
            Tensor& d = g.ensure_grad(b_);
            for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] -= dy.data[i];
        }
    };
    return push(std::move(n));
}

int Graph::mul(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require_same_shape(A, B, "mul");
    Node n;
    n.value = Tensor(A.shape);
    for (std::size_t i = 0; i < A.data.size(); ++i) n.value.data[i] = A.data[i] * B.data[i];
    n.in = {a, b, -1};
    n.needs_grad = wants_grad(a) || wants_grad(b);
    n.tag = "mul";
    n.backward_fn = [](Graph& g, int self) {
        const Tensor& dy = g.node(self).grad;
        const int a_ = g.node(self).in[0], b_ = g.node(self).in[1];
        const Tensor& A_ = g.val(a_);
        const Tensor& B_ = g.val(b_);
        if (g.wants_grad(a_)) {
            Tensor& d = g.ensure_grad(a_);
            for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] += dy.data[i] * B_.data[i];
        }
        if (g.wants_grad(b_)) {
            Tensor& d = g.ensure_grad(b_);
            for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] += dy.data[i] * A_.data[i];
        }
    };
    return push(std::move(n));
}

// ---- reductions / losses ----------------------------------------------------

int Graph::mean_all(int x) {
    const Tensor& X = val(x);
    const double inv_n = 1.0 / static_cast<double>(X.numel());
    double s = 0.0;
    for (double v : X.data) s += v;
    Node n;
    n.value = Tensor::scalar(s * inv_n);
    n.in = {x, -1, -1};
    n.needs_grad = wants_grad(x);
    n.tag = "mean";
    n.backward_fn = [inv_n](Graph& g, int self) {
        const int x_ = g.node(self).in[0];
        if (!g.wants_grad(x_)) return;
        Tensor& dx = g.ensure_grad(x_);
        const double d = g.node(self).grad.data[0] * inv_n;
        for (double& v : dx.data) v += d;
    };
    return push(std::move(n));
}

int Graph::sum_all(int x) {
    const Tensor& X = val(x);
    double s = 0.0;
    for (double v : X.data) s += v;
    Node n;
    n.value = Tensor::scalar(s);
    n.in = {x, -1, -1};
    n.needs_grad = wants_grad(x);
    n.tag = "sum";
    n.backward_fn = [](Graph& g, int self) {
        const int x_ = g.node(self).in[0];
        if (!g.wants_grad(x_)) return;
        Tensor& dx = g.ensure_grad(x_);
        const double d = g.node(self).grad.data[0];
        for (double& v : dx.data) v += d;
    };
    return push(std::move(n));
}

int Graph::se_half_mean(int pred, int target) {
    const Tensor& P = val(pred);
    const Tensor& T = val(target);
    require_same_shape(P, T, "se_half_mean");
    const int batch = P.dim(0);
    const double inv_b = 1.0 / static_cast<double>(batch);
    double s = 0.0;
    for (std::size_t i = 0; i < P.data.size(); ++i) {
        const double d = P.data[i] - T.data[i];
        s += 0.5 * d * d;
    }
    Node n;
    n.value = Tensor::scalar(s * inv_b);
    n.in = {pred, target, -1};
    n.needs_grad = wants_grad(pred) || wants_grad(target);
    n.tag = "se_half_mean";
    n.backward_fn = [inv_b](Graph& g, int self) {
        const int p_ = g.node(self).in[0], t_ = g.node(self).in[1];
        const double d = g.node(self).grad.data[0] * inv_b;
        const Tensor& P_ = g.val(p_);
        const Tensor& T_ = g.val(t_);
        if (g.wants_grad(p_)) {
            Tensor& dp = g.ensure_grad(p_);
            for (std::size_t i = 0; i < dp.data.size(); ++i)
                dp.data[i] += d * (P_.data[i] - T_.data[i]);
        }
        if (g.wants_grad(t_)) {
            Tensor& dt = g.ensure_grad(t_);
            for (std::size_t i = 0; i < dt.data.size(); ++i)
                dt.data[i] -= d * (P_.data[i] - T_.data[i]);
        }
    };
    return push(std::move(n));
}

int Graph::kl_gauss_mean(int mu, int logvar) {
    const Tensor& M = val(mu);
    const Tensor& L = val(logvar);
    require_same_shape(M, L, "kl_gauss_mean");
    const int batch = M.dim(0);
    const double inv_b = 1.0 / static_cast<double>(batch);
    double s = 0.0;
    for (std::size_t i = 0; i < M.data.size(); ++i)
        s += 0.5 * (std::exp(L.data[i]) + M.data[i] * M.data[i] - L.data[i] - 1.0);
    Node n;
    n.value = Tensor::scalar(s * inv_b);
    n.in = {mu, logvar, -1};
    n.needs_grad = wants_grad(mu) || wants_grad(logvar);
    n.tag = "kl_gauss";
    n.backward_fn = [inv_b](Graph& g, int self) {
        const int m_ = g.node(self).in[0], l_ = g.node(self).in[1];
        const double d = g.node(self).grad.data[0] * inv_b;
        const Tensor& M_ = g.val(m_);
        const Tensor& L_ = g.val(l_);
        if (g.wants_grad(m_)) {
            Tensor& dm = g.ensure_grad(m_);
            for (std::size_t i = 0; i < dm.data.size(); ++i) dm.data[i] += d * M_.data[i];
        }
        if (g.wants_grad(l_)) {
            Tensor& dl = g.ensure_grad(l_);
            for (std::size_t i = 0; i < dl.data.size(); ++i)
                dl.data[i] += d * 0.5 * (std::exp(L_.data[i]) - 1.0);
        }
    };
    return push(std::move(n));
}

int Graph::softmax_ce_mean(int logits, std::vector<int> labels) {
    const Tensor& Z = val(logits);
    if (Z.rank() != 2) throw ShapeError("softmax_ce_mean expects rank-2 logits");
    const int rows = Z.dim(0), cols = Z.dim(1);
    if (static_cast<int>(labels.size()) != rows)
        throw ShapeError("softmax_ce_mean: label count mismatch");
    for (int lab : labels)
        if (lab < 0 || lab >= cols) throw DataError("softmax_ce_mean: label out of range");
    const double inv_b = 1.0 / static_cast<double>(rows);

    // cache softmax probabilities for the backward pass
    std::vector<double> probs(Z.data.size());
    double loss = 0.0;
    for (int r = 0; r < rows; ++r) {
        double mx = Z.at2(r, 0);
        for (int c = 1; c < cols; ++c) mx = std::max(mx, Z.at2(r, c));
        double sum = 0.0;
        for (int c = 0; c < cols; ++c) {
            const double e = std::exp(Z.at2(r, c) - mx);
            probs[static_cast<std::size_t>(r) * cols + c] = e;
            sum += e;
        }
        for (int c = 0; c < cols; ++c) probs[static_cast<std::size_t>(r) * cols + c] /= sum;
        loss -= std::log(std::max(probs[static_cast<std::size_t>(r) * cols + labels[static_cast<std::size_t>(r)]],
                                  1e-300));
    }
    Node n;
    n.value = Tensor::scalar(loss * inv_b);
    n.in = {logits, -1, -1};
    n.needs_grad = wants_grad(logits);
    n.tag = "softmax_ce";
    n.backward_fn = [rows, cols, inv_b, probs = std::move(probs),
                     labels = std::move(labels)](Graph& g, int self) {
        const int z_ = g.node(self).in[0];
        if (!g.wants_grad(z_)) return;
        Tensor& dz = g.ensure_grad(z_);
        const double d = g.node(self).grad.data[0] * inv_b;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                dz.at2(r, c) += d * (probs[static_cast<std::size_t>(r) * cols + c] -
                                     (labels[static_cast<std::size_t>(r)] == c ? 1.0 : 0.0));
    };
    return push(std::move(n));
}

// ---- backward --------------------------------------------------------------

void Graph::backward(int loss) {
    if (backward_done_)
        throw Error("backward already ran on this graph; rebuild the graph before calling again");
    backward_done_ = true;
    const Tensor& L = val(loss);
    if (L.numel() != 1) throw ShapeError("backward: loss must be scalar");
    if (!std::isfinite(L.data[0])) throw NumericError("backward: loss is not finite");

    // mark nodes reachable from the loss
    std::vector<char> marked(nodes_.size(), 0);
    std::vector<int> stack{loss};
    marked[static_cast<std::size_t>(loss)] = 1;
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        for (int in : nodes_[static_cast<std::size_t>(id)].in)
            if (in >= 0 && !marked[static_cast<std::size_t>(in)]) {
                marked[static_cast<std::size_t>(in)] = 1;
                stack.push_back(in);
            }
    }

    ensure_grad(loss).data[0] = 1.0;
    for (int id = loss; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!marked[static_cast<std::size_t>(id)] || !n.needs_grad || !n.has_grad) continue;
        if (n.backward_fn) n.backward_fn(*this, id);
    }

    // publish gradients to parameters
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        Node& n = nodes_[id];
        if (!n.source) continue;
        n.source->grad_fresh = true;
        if (!n.has_grad) continue;  // unreachable parameter: gradient stays zero
        for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
            const double gv = n.grad.data[i];
            if (!std::isfinite(gv))
                throw NumericError("non-finite gradient in parameter '" + n.source->name + "'");
            n.source->grad.data[i] += gv;
        }
    }
}

// ---- init helpers ------------------------------------------------------------

Tensor he_uniform(const std::vector<int>& shape, int fan_in, Rng& rng) {
    Tensor t(shape);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& v : t.data) v = rng.uniform(-limit, limit);
    return t;
}

Tensor glorot_uniform(const std::vector<int>& shape, int fan_in, int fan_out, Rng& rng) {
    Tensor t(shape);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.data) v = rng.uniform(-limit, limit);
    return t;
}

// ---- Adam ---------------------------------------------------------------------

Adam::Adam(std::vector<Parameter*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Parameter* p : params_) {
        m_.emplace_back(p->value.shape);
        v_.emplace_back(p->value.shape);
    }
}

void Adam::step() {
    for (const Parameter* p : params_)
        if (!p->grad_fresh)
            throw Error("adam: gradients not populated for parameter '" + p->name + "'");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Parameter& p = *params_[pi];
        Tensor& m = m_[pi];
        Tensor& v = v_[pi];
        for (std::size_t i = 0; i < p.value.data.size(); ++i) {
            const double g = p.grad.data[i];
            if (!std::isfinite(g))
                throw NumericError("adam: non-finite gradient in parameter '" + p.name + "'");
            m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g;
            v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * g * g;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.value.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
        p.grad_fresh = false;
    }
}

// ---- finite differences --------------------------------------------------------

GradCheckReport grad_check(const std::function<double(bool)>& loss_fn,
                           const std::vector<Parameter*>& params, double eps) {
    for (Parameter* p : params) p->zero_grad();
    loss_fn(true);
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (Parameter* p : params) analytic.push_back(p->grad);

    GradCheckReport rep;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = *params[pi];
        for (std::size_t i = 0; i < p.value.data.size(); ++i) {
            const double orig = p.value.data[i];
            p.value.data[i] = orig + eps;
            const double lp = loss_fn(false);
            p.value.data[i] = orig - eps;
            const double lm = loss_fn(false);
            p.value.data[i] = orig;
            const double fd = (lp - lm) / (2.0 * eps);
            const double an = analytic[pi].data[i];
            const double rel = std::fabs(fd - an) / (std::fabs(fd) + std::fabs(an) + 1e-4);
            if (rel > rep.max_rel_error) {
                rep.max_rel_error = rel;
                rep.worst_param = p.name;
                rep.worst_index = i;
            }
        }
    }
    return rep;
}

}  // namespace resp::diff
