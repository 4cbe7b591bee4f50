#pragma once

#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "resp/graph.hpp"

namespace resp::models {

using diff::BatchNormState;
using diff::Graph;
using diff::Mode;
using diff::Parameter;

enum class Variant { vae, aae, saae };
Variant variant_from_string(const std::string& s);
const char* to_string(Variant v);

// Pool sizes for a 4-stage conv trunk on n_t time steps: halve while the grid
// still has at least 6 steps (25 -> 12 -> 6 -> 3 -> 3).
std::vector<int> encoder_pools(int n_t, int stages = 4);
int pooled_length(int n_t, int stages = 4);

struct EncoderSpec {
    Variant variant = Variant::vae;
    int n_t = 25;
    int in_channels = 6;
    std::vector<int> filters = {32, 64, 64, 128};
    int kernel = 5;
    int dense_units = 128;
    int latent_dim = 15;
    int class_dim = 0;   // saae only
    int noise_dim = 1;   // aae/saae universal-approximator noise
    double dropout = 0.1;
    double leaky_slope = 0.1;
    void validate() const;
};

struct DecoderSpec {
    int n_t = 25;
    int out_channels = 6;
    std::vector<int> filters = {128, 64, 64, 32};
    std::vector<int> dilations = {1, 2, 4, 8};
    int kernel = 5;
    int dense_units = 128;
    int input_dim = 15;  // N for vae/aae, N+C for saae
    double dropout = 0.3;
    double leaky_slope = 0.1;
    void validate() const;
};

struct DiscriminatorSpec {
    int input_dim = 15;  // N for aae, N+C for saae (joint space)
    std::vector<int> hidden = {128, 128, 128, 128};
    double leaky_slope = 0.1;
    void validate() const;
};

struct ClassifierSpec {
    enum class Arch { feedforward, cnn };
    Arch arch = Arch::cnn;
    int n_t = 25;
    int in_channels = 6;
    int classes = 3;
    std::vector<int> filters = {32, 64, 64, 128};  // cnn trunk
    int kernel = 5;
    std::vector<int> hidden = {128, 128};          // dense stack / cnn head
    double dropout = 0.1;
    double leaky_slope = 0.1;
    void validate() const;
};
ClassifierSpec::Arch classifier_arch_from_string(const std::string& s);
const char* to_string(ClassifierSpec::Arch a);

struct ReconNetSpec {
    int input_len = 120;
    int output_len = 100;
    std::vector<int> hidden = {256, 256, 256};
    double leaky_slope = 0.1;
    std::string mode = "popbr";  // patbr | popbr
    void validate() const;
};

// ---- layer building blocks --------------------------------------------------

struct DenseLayer {
    Parameter w, b;
    DenseLayer(const std::string& name, int in, int out, bool he_init, Rng& rng);
    int apply(Graph& g, int x) { return g.dense(x, g.param(w), g.param(b)); }
};

struct ConvLayer {
    Parameter k, b;
    int dilation;
    ConvLayer(const std::string& name, int kernel, int in_ch, int out_ch, int dilation, Rng& rng);
    int apply(Graph& g, int x) { return g.conv1d(x, g.param(k), g.param(b), dilation); }
};

struct BatchNormLayer {
    Parameter gamma, beta;
    BatchNormState state;
    BatchNormLayer(const std::string& name, int channels);
    int apply(Graph& g, int x, Mode mode) {
        return g.batchnorm(x, g.param(gamma), g.param(beta), state, mode);
    }
};

// ---- networks ----------------------------------------------------------------

class Network {
public:
    virtual ~Network() = default;
    Network() = default;
    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;

    std::vector<Parameter*> params() { return params_; }
    std::vector<BatchNormState*> bn_states() { return bn_states_; }
    std::size_t param_count() const;
    void zero_grads();

protected:
    void register_dense(DenseLayer& l) {
        params_.push_back(&l.w);
        params_.push_back(&l.b);
    }
    void register_conv(ConvLayer& l) {
        params_.push_back(&l.k);
        params_.push_back(&l.b);
    }
    void register_bn(BatchNormLayer& l) {
        params_.push_back(&l.gamma);
        params_.push_back(&l.beta);
        bn_states_.push_back(&l.state);
    }

    std::vector<Parameter*> params_;
    std::vector<BatchNormState*> bn_states_;
};

// 4 conv blocks (conv -> maxpool -> leaky relu -> batchnorm -> dropout), a
// dense body, and variant-specific heads.
class Encoder : public Network {
public:
    Encoder(EncoderSpec spec, Rng& init_rng);

    struct Out {
        int features = -1;   // dense body output
        int mu = -1, logvar = -1;  // vae heads
        int z = -1;                // aae/saae latent head
        int pi_logits = -1, pi = -1;  // saae class head
    };
    // x: (B, n_t, 6). eta: (B, noise_dim) input node, required for aae/saae.
    Out forward(Graph& g, int x, Mode mode, Rng& rng, int eta = -1);

    const EncoderSpec& spec() const { return spec_; }

private:
    EncoderSpec spec_;
    std::vector<int> pools_;
    std::deque<ConvLayer> convs_;
    std::deque<BatchNormLayer> bns_;
    std::deque<DenseLayer> dense_;  // body then heads
};

// dense body then 4 blocks (upsample -> dilated conv -> leaky relu ->
// batchnorm -> dropout) and a final linear map onto the (n_t, 6) grid.
class Decoder : public Network {
public:
    Decoder(DecoderSpec spec, Rng& init_rng);
    int forward(Graph& g, int zy, Mode mode, Rng& rng);
    const DecoderSpec& spec() const { return spec_; }

private:
    DecoderSpec spec_;
    std::vector<int> up_factors_;
    int t0_ = 0;
    std::deque<ConvLayer> convs_;
    std::deque<BatchNormLayer> bns_;
    std::deque<DenseLayer> dense_;
};

// 4 leaky-relu dense layers and one linear logit.
class Discriminator : public Network {
public:
    Discriminator(DiscriminatorSpec spec, Rng& init_rng);
    int forward(Graph& g, int zy);
    const DiscriminatorSpec& spec() const { return spec_; }

private:
    DiscriminatorSpec spec_;
    std::deque<DenseLayer> dense_;
};

class Classifier : public Network {
public:
    Classifier(ClassifierSpec spec, Rng& init_rng);
    int forward_logits(Graph& g, int x, Mode mode, Rng& rng);
    const ClassifierSpec& spec() const { return spec_; }

private:
    ClassifierSpec spec_;
    std::vector<int> pools_;
    std::deque<ConvLayer> convs_;
    std::deque<BatchNormLayer> bns_;
    std::deque<DenseLayer> dense_;
};

// Feed-forward regression net for window-based series reconstruction.
class ReconNet : public Network {
public:
    ReconNet(ReconNetSpec spec, Rng& init_rng);
    int forward(Graph& g, int x);
    const ReconNetSpec& spec() const { return spec_; }

private:
    ReconNetSpec spec_;
    std::deque<DenseLayer> dense_;
};

// ---- tensor-level convenience (inference) -------------------------------------

struct EncodeResult {
    Tensor mu, sigma;  // vae
    Tensor z;          // aae/saae
    Tensor pi;         // saae
};
// eta == nullptr uses zeros (the mean of the noise prior), making the call
// deterministic.
EncodeResult encode(Encoder& enc, const Tensor& x, Mode mode, Rng& rng,
                    const Tensor* eta = nullptr);
Tensor decode(Decoder& dec, const Tensor& z, const Tensor* y, Mode mode, Rng& rng);

}  // namespace resp::models
