#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "resp/rng.hpp"
#include "resp/tensor.hpp"

namespace resp::diff {

using resp::Rng;
using resp::Tensor;

enum class Mode { train, infer };

// Named trainable tensor. Gradients are accumulated by Graph::backward and
// consumed by the optimizer; `grad_fresh` guards against stepping an
// optimizer on gradients that were never populated.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool grad_fresh = false;

    Parameter(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

    void zero_grad() {
        grad.fill(0.0);
        grad_fresh = false;
    }
    std::size_t numel() const { return value.numel(); }
};

// Running statistics of a batchnorm layer. Inference state, serialized with
// the model but never touched by the optimizer.
struct BatchNormState {
    Tensor running_mean;
    Tensor running_var;
    bool initialized = false;
};

// Reverse-mode computation graph. Ops execute eagerly and record a backward
// closure; node creation order is a topological order, so backward() simply
// walks the node list in reverse from the loss. A graph instance is built for
// one forward/backward pair and then discarded.
class Graph {
public:
    int input(Tensor x);
    int param(Parameter& p);

    // linear algebra
    int dense(int x, int w, int b);
    int conv1d(int x, int kernel, int bias, int dilation);

    // shape
    int flatten(int x);                       // (B,T,C) -> (B,T*C)
    int reshape3(int x, int t, int c);        // (B,T*C) -> (B,T,C)
    int concat_cols(int a, int b);            // (B,Fa)+(B,Fb) -> (B,Fa+Fb)

    // pooling / resampling
    int maxpool1d(int x, int pool);
    int upsample1d(int x, int factor);

    // normalization / regularization
    int batchnorm(int x, int gamma, int beta, BatchNormState& state, Mode mode,
                  double momentum = 0.9, double eps = 1e-5);
    int dropout(int x, double p, Mode mode, Rng& rng);

    // pointwise
    int relu(int x);
    int leaky_relu(int x, double slope);
    int sigmoid(int x);
    int tanh_act(int x);
    int softmax(int x);  // rank-2, row-wise
    int exp_(int x);
    int softplus(int x);
    int neg(int x);
    int scale(int x, double c);
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);

    // reductions / losses (all scalar outputs, batch-mean reductions)
    int mean_all(int x);
    int sum_all(int x);
    int se_half_mean(int pred, int target);            // (1/B) sum_b 0.5*||pred_b - target_b||^2
    int kl_gauss_mean(int mu, int logvar);             // (1/B) sum_b KL(N(mu,sigma^2)||N(0,I))
    int softmax_ce_mean(int logits, std::vector<int> labels);

    // Reverse-mode accumulation from a scalar loss. Fills the gradient of
    // every parameter registered on this graph (unreached ones stay zero).
    // A second call without a fresh graph is an error.
    void backward(int loss);

    const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    double scalar(int id) const;
    const Tensor& grad(int id) const;
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool has_grad = false;
        bool needs_grad = false;
        std::array<int, 3> in = {-1, -1, -1};
        Parameter* source = nullptr;
        std::function<void(Graph&, int)> backward_fn;
        const char* tag = "";
    };

    int push(Node n);
    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    Tensor& ensure_grad(int id);
    void add_to_grad(int id, const Tensor& g);
    bool wants_grad(int id) const {
        return id >= 0 && nodes_[static_cast<std::size_t>(id)].needs_grad;
    }

    std::vector<Node> nodes_;
    std::vector<Parameter*> params_;
    bool backward_done_ = false;
};

// ---- initialization ----------------------------------------------------

// He-uniform: layers feeding (leaky) ReLU.
Tensor he_uniform(const std::vector<int>& shape, int fan_in, Rng& rng);
// Glorot-uniform: linear / sigmoid / softmax heads.
Tensor glorot_uniform(const std::vector<int>& shape, int fan_in, int fan_out, Rng& rng);

// ---- optimizer -----------------------------------------------------------

// Bias-corrected Adam over a fixed parameter subset. Each training phase owns
// its own instance, so moments never mix across objectives.
class Adam {
public:
    explicit Adam(std::vector<Parameter*> params, double lr, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);

    void step();
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    long steps() const { return t_; }
    const std::vector<Parameter*>& params() const { return params_; }

private:
    std::vector<Parameter*> params_;
    std::vector<Tensor> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

// ---- finite-difference checking -------------------------------------------

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    bool passed(double tol) const { return max_rel_error < tol; }
};

// Central finite differences on every coordinate of every listed parameter.
// `loss_fn(do_backward)` must rebuild the forward pass from scratch (with any
// internal randomness re-seeded) and run backward() when asked.
GradCheckReport grad_check(const std::function<double(bool)>& loss_fn,
                           const std::vector<Parameter*>& params, double eps = 1e-5);

}  // namespace resp::diff
