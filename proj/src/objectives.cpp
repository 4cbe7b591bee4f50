#include "resp/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

namespace resp::obj {

namespace {

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double mean_of(const Tensor& t, const std::function<double(double)>& f) {
    double s = 0.0;
    for (double v : t.data) s += f(v);
    return s / static_cast<double>(t.numel());
}

}  // namespace

void PriorSpec::validate() const {
    if (latent_dim < 1) throw ConfigError("prior: latent_dim must be >= 1");
    if (class_dim < 0) throw ConfigError("prior: class_dim must be >= 0");
    if (!class_probs.empty()) {
        if (static_cast<int>(class_probs.size()) != class_dim)
            throw ConfigError("prior: class_probs size mismatch");
        double s = 0.0;
        for (double p : class_probs) {
            if (p < 0.0) throw ConfigError("prior: negative class probability");
            s += p;
        }
        if (std::fabs(s - 1.0) > 1e-9) throw ConfigError("prior: class_probs must sum to 1");
    }
}

GenLossStyle gen_style_from_string(const std::string& s) {
    if (s == "nonsaturating") return GenLossStyle::nonsaturating;
    if (s == "saturating") return GenLossStyle::saturating;
    if (s == "logit") return GenLossStyle::logit;
    throw ConfigError("unknown generator loss style '" + s + "'");
}

const char* to_string(GenLossStyle s) {
    switch (s) {
        case GenLossStyle::nonsaturating: return "nonsaturating";
        case GenLossStyle::saturating: return "saturating";
        case GenLossStyle::logit: return "logit";
    }
    return "?";
}

bool LossReport::all_finite() const {
    return std::isfinite(reconstruction_se) && std::isfinite(kl) && std::isfinite(adversarial) &&
           std::isfinite(classification_ce) && std::isfinite(total);
}

double kl_gaussian(const Tensor& mu, const Tensor& sigma) {
    require_same_shape(mu, sigma, "kl_gaussian");
    if (mu.rank() != 2) throw ShapeError("kl_gaussian: expected (B,N)");
    for (double s : sigma.data)
        if (!(s > 0.0)) throw NumericError("kl_gaussian: sigma must be > 0");
    const int batch = mu.dim(0);
    double total = 0.0;
    for (std::size_t i = 0; i < mu.data.size(); ++i) {
        const double s2 = sigma.data[i] * sigma.data[i];
        total += 0.5 * (-(std::log(s2) + 1.0) + s2 + mu.data[i] * mu.data[i]);
    }
    return total / static_cast<double>(batch);
}

Tensor reparameterize(const Tensor& mu, const Tensor& sigma, const Tensor& eps) {
    require_same_shape(mu, sigma, "reparameterize");
    require_same_shape(mu, eps, "reparameterize");
    Tensor z(mu.shape);
    for (std::size_t i = 0; i < z.data.size(); ++i)
        z.data[i] = mu.data[i] + sigma.data[i] * eps.data[i];
    return z;
}

LossReport vae_loss(const Tensor& x, const Tensor& xhat, const Tensor& mu, const Tensor& sigma,
                    double beta_n) {
    require_same_shape(x, xhat, "vae_loss");
    if (beta_n < 0.0) throw ConfigError("vae_loss: beta_n must be >= 0");
    const int batch = x.dim(0);
    double se = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double d = x.data[i] - xhat.data[i];
        se += 0.5 * d * d;
    }
    se /= static_cast<double>(batch);
    LossReport r;
    r.reconstruction_se = se;
    r.kl = kl_gaussian(mu, sigma);
    r.beta_n = beta_n;
    r.total = se + beta_n * r.kl;
    return r;
}

double discriminator_loss(const Tensor& real_logits, const Tensor& fake_logits) {
    for (double v : real_logits.data)
        if (!std::isfinite(v)) throw NumericError("discriminator_loss: non-finite real logit");
    for (double v : fake_logits.data)
        if (!std::isfinite(v)) throw NumericError("discriminator_loss: non-finite fake logit");
    // -log S(r) = softplus(-r);  -log(1 - S(f)) = softplus(f)
    const double lr = mean_of(real_logits, [](double v) { return softplus(-v); });
    const double lf = mean_of(fake_logits, [](double v) { return softplus(v); });
    return lr + lf;
}

double generator_loss(const Tensor& fake_logits, GenLossStyle style) {
    switch (style) {
        case GenLossStyle::nonsaturating:
            return mean_of(fake_logits, [](double v) { return softplus(-v); });
        case GenLossStyle::saturating:
            return mean_of(fake_logits, [](double v) { return -softplus(v); });
        case GenLossStyle::logit:
            return -mean_of(fake_logits, [](double v) { return v; });
    }
    throw ConfigError("generator_loss: bad style");
}

double classification_loss(const Tensor& pi, const std::vector<int>& labels, double alpha) {
    if (pi.rank() != 2) throw ShapeError("classification_loss: expected (B,C)");
    const int batch = pi.dim(0), classes = pi.dim(1);
    if (static_cast<int>(labels.size()) != batch)
        throw ShapeError("classification_loss: label count mismatch");
    for (int r = 0; r < batch; ++r) {
        double s = 0.0;
        for (int c = 0; c < classes; ++c) {
            if (pi.at2(r, c) < -1e-12) throw DataError("classification_loss: negative probability");
            s += pi.at2(r, c);
        }
        if (std::fabs(s - 1.0) > 1e-6)
            throw DataError("classification_loss: probability rows must sum to 1");
    }
    static bool warned = false;
    double total = 0.0;
    for (int r = 0; r < batch; ++r) {
        const int lab = labels[static_cast<std::size_t>(r)];
        if (lab < 0 || lab >= classes) throw DataError("classification_loss: label out of range");
        double p = pi.at2(r, lab);
        if (p < 1e-12) {
            if (!warned) {
                std::fprintf(stderr,
                             "warning: classification_loss clamped a zero probability at 1e-12\n");
                warned = true;
            }
            p = 1e-12;
        }
        total -= std::log(p);
    }
    return alpha * total / static_cast<double>(batch);
}

std::pair<Tensor, Tensor> sample_prior(const PriorSpec& prior, int batch, Rng& rng) {
    prior.validate();
    if (batch < 1) throw ConfigError("sample_prior: batch must be >= 1");
    Tensor z({batch, prior.latent_dim});
    for (double& v : z.data) v = rng.normal();
    Tensor y;
    if (prior.class_dim > 0) {
        y = Tensor({batch, prior.class_dim});
        for (int b = 0; b < batch; ++b) {
            int cls;
            if (prior.class_probs.empty()) {
                cls = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(prior.class_dim)));
            } else {
                const double u = rng.uniform();
                double acc = 0.0;
                cls = prior.class_dim - 1;
                for (int c = 0; c < prior.class_dim; ++c) {
                    acc += prior.class_probs[static_cast<std::size_t>(c)];
                    if (u < acc) {
                        cls = c;
                        break;
                    }
                }
            }
            y.at2(b, cls) = 1.0;
        }
    }
    return {std::move(z), std::move(y)};
}

double optimal_discriminator_oracle(const std::function<double(double)>& p_density,
                                    const std::vector<double>& q_samples, double z, int bins) {
    if (q_samples.empty()) throw DataError("optimal_discriminator_oracle: empty support");
    if (bins < 1) throw ConfigError("optimal_discriminator_oracle: bins must be >= 1");
    const auto [mn_it, mx_it] = std::minmax_element(q_samples.begin(), q_samples.end());
    double lo = *mn_it, hi = *mx_it;
    if (hi <= lo) hi = lo + 1e-9;
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
    for (double s : q_samples) {
        int b = static_cast<int>((s - lo) / width);
        b = std::clamp(b, 0, bins - 1);
        counts[static_cast<std::size_t>(b)] += 1.0;
    }
    int zb = static_cast<int>((z - lo) / width);
    zb = std::clamp(zb, 0, bins - 1);
    const double q_hat = std::max(counts[static_cast<std::size_t>(zb)], 0.5) /
                         (static_cast<double>(q_samples.size()) * width);
    return std::log(p_density(z)) - std::log(q_hat);
}

}  // namespace resp::obj
