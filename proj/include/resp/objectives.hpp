#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "resp/rng.hpp"
#include "resp/tensor.hpp"

namespace resp::obj {

// Latent prior: z ~ N(0, I_N), and for joint models an independent
// categorical class variable y ~ Cat(c).
struct PriorSpec {
    int latent_dim = 15;
    int class_dim = 0;                 // 0 for vae/aae
    std::vector<double> class_probs;   // empty = uniform
    void validate() const;
};

enum class GenLossStyle { nonsaturating, saturating, logit };
GenLossStyle gen_style_from_string(const std::string& s);
const char* to_string(GenLossStyle s);

struct LossReport {
    double reconstruction_se = 0.0;
    double kl = 0.0;
    double adversarial = 0.0;
    double classification_ce = 0.0;
    double total = 0.0;
    double beta_n = 0.0;
    double alpha = 0.0;
    double recon_scale = 1.0;
    bool all_finite() const;
};

// Closed-form KL(N(mu, diag sigma^2) || N(0, I)), averaged over the batch.
// mu and sigma are (B, N); every sigma must be > 0.
double kl_gaussian(const Tensor& mu, const Tensor& sigma);

// z = mu + sigma .* eps
Tensor reparameterize(const Tensor& mu, const Tensor& sigma, const Tensor& eps);

// 0.5*||x - xhat||^2 + beta_n * KL, batch-averaged.
LossReport vae_loss(const Tensor& x, const Tensor& xhat, const Tensor& mu, const Tensor& sigma,
                    double beta_n);

// -E[log S(d(z_r))] - E[log(1 - S(d(z_f)))], with numerically stable
// log-sigmoids. Logit tensors may have any shape; the mean runs over all
// entries.
double discriminator_loss(const Tensor& real_logits, const Tensor& fake_logits);

double generator_loss(const Tensor& fake_logits, GenLossStyle style);

// alpha * mean(-log pi[true class]); pi rows must be positive and sum to 1.
double classification_loss(const Tensor& pi, const std::vector<int>& labels, double alpha);

// (z, y): z (B,N) gaussian, y (B,C) one-hot (empty tensor when class_dim==0).
std::pair<Tensor, Tensor> sample_prior(const PriorSpec& prior, int batch, Rng& rng);

// log p(z) - log q_hat(z) with q_hat a histogram estimate over the given
// samples; test-side reference for what a trained discriminator should learn.
double optimal_discriminator_oracle(const std::function<double(double)>& p_density,
                                    const std::vector<double>& q_samples, double z,
                                    int bins = 100);

}  // namespace resp::obj
