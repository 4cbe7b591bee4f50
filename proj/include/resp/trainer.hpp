#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "resp/common.hpp"
#include "resp/models.hpp"
#include "resp/objectives.hpp"

namespace resp::train {

using models::Variant;

struct TrainConfig {
    int epochs = 50;
    int batch_size = 256;
    double lr_reconstruction = 1e-4;
    double lr_discriminator = 2e-4;
    double lr_classification = 1e-4;
    double lr_decay = 0.0;  // per-epoch: lr / (1 + decay * epoch)
    double beta_n = 0.02;
    double alpha = 5.0;
    double recon_scale = 4.0;
    double label_fraction = 1.0;
    int label_count = 0;  // overrides label_fraction when > 0
    std::uint64_t seed = 0;
    double validation_fraction = 0.1;
    int patience = 20;
    obj::GenLossStyle gen_style = obj::GenLossStyle::nonsaturating;
    bool verbose = false;

    void validate() const;
    // per-variant learning rates: vae 1e-4; aae 2e-4 recon / 1e-4 regularization;
    // saae 1e-4 recon+class / 2e-4 regularization
    static TrainConfig defaults_for(Variant v);
};

struct TrainLogRow {
    int epoch = 0;
    double recon_se = 0.0;
    double kl = 0.0;
    double disc_loss = 0.0;
    double gen_loss = 0.0;
    double class_ce = 0.0;
    double val_metric = 0.0;
    double val_recon_se = 0.0;
    double disc_acc = 0.0;
    double lr = 0.0;
};

struct ModelBundle {
    std::string variant;  // vae | aae | saae | classifier | recon
    std::unique_ptr<models::Encoder> encoder;
    std::unique_ptr<models::Decoder> decoder;
    std::unique_ptr<models::Discriminator> discriminator;
    std::unique_ptr<models::Classifier> classifier;
    std::unique_ptr<models::ReconNet> recon_net;
    obj::PriorSpec prior;
    std::optional<NormStats> norm;
    std::optional<SlopeThresholds> thresholds;
    std::uint64_t seed = 0;
    std::string training_log_path;
    std::vector<TrainLogRow> log;
};

// Consistent encoder/decoder/discriminator specs for one model variant.
struct ModelSpecs {
    models::EncoderSpec encoder;
    models::DecoderSpec decoder;
    models::DiscriminatorSpec discriminator;
};
ModelSpecs make_specs(Variant variant, int n_t, int latent_dim, int classes,
                      const std::vector<int>& enc_filters = {32, 64, 64, 128},
                      int dense_units = 128, int noise_dim = 1, int kernel = 5);

// ---- batching -----------------------------------------------------------------

// Shuffled disjoint batches covering every index exactly once; a final batch
// smaller than batch_size is dropped (train-mode batchnorm needs batch >= 2).
std::vector<std::vector<int>> make_batches(const std::vector<int>& indices, int batch_size,
                                           Rng& rng);

// Cycles through a (small) labeled index set, reshuffling at each wrap, so
// label sets smaller than a batch are revisited.
class LabelCycler {
public:
    LabelCycler(std::vector<int> indices, Rng* rng);
    std::vector<int> next(int count);

private:
    std::vector<int> indices_;
    std::size_t pos_ = 0;
    Rng* rng_;
};

// Stratified label subset: `count` indices drawn class-proportionally from the
// pool. Every class must contribute at least one example.
std::vector<int> stratified_label_subset(const LabeledDataset& data, const std::vector<int>& pool,
                                         int count, Rng& rng);

// Emits a warning when the discriminator stays above 99% accuracy for 5
// consecutive epochs (regularization no longer shapes the posterior).
class CollapseMonitor {
public:
    bool update(double accuracy);
    bool collapsed() const { return collapsed_; }

private:
    int consecutive_ = 0;
    bool collapsed_ = false;
};

// ---- training entry points -------------------------------------------------------

ModelBundle train_vae(const LabeledDataset& data, const TrainConfig& cfg, const ModelSpecs& specs);
ModelBundle train_aae(const LabeledDataset& data, const TrainConfig& cfg, const ModelSpecs& specs);
ModelBundle train_saae(const LabeledDataset& data, const std::vector<int>& labeled_indices,
                       const TrainConfig& cfg, const ModelSpecs& specs);
ModelBundle train_classifier(const LabeledDataset& data, const std::vector<int>& labeled_indices,
                             const models::ClassifierSpec& spec, const TrainConfig& cfg);

// Phase-level trainer behind train_aae/train_saae; public so the per-phase
// update scoping (which parameters each phase may move) stays testable.
class AdversarialTrainer {
public:
    AdversarialTrainer(Variant variant, const LabeledDataset& data,
                       std::vector<int> labeled_indices, const TrainConfig& cfg,
                       const ModelSpecs& specs);

    double step_reconstruction(const std::vector<int>& batch);
    // returns {loss, accuracy}
    std::pair<double, double> step_discriminator(const std::vector<int>& batch);
    double step_generator(const std::vector<int>& batch);
    double step_classification();

    // returns {metric, recon_se}; metric is mF1 for saae, -recon_se otherwise
    std::pair<double, double> validate();

    ModelBundle run();

    models::Encoder& encoder() { return *encoder_; }
    models::Decoder& decoder() { return *decoder_; }
    models::Discriminator& discriminator() { return *discriminator_; }
    const std::vector<int>& train_indices() const { return train_idx_; }

private:
    Tensor batch_x(const std::vector<int>& batch) const;

    Variant variant_;
    const LabeledDataset& data_;
    TrainConfig cfg_;
    obj::PriorSpec prior_;
    Tensor all_x_;
    std::vector<int> labels_;
    std::vector<int> train_idx_, val_idx_, labeled_idx_;
    std::unique_ptr<models::Encoder> encoder_;
    std::unique_ptr<models::Decoder> decoder_;
    std::unique_ptr<models::Discriminator> discriminator_;
    std::unique_ptr<diff::Adam> opt_recon_, opt_disc_, opt_gen_, opt_class_;
    std::unique_ptr<LabelCycler> cycler_;
    Rng loop_rng_;
};

// ---- bundle-level inference helpers -------------------------------------------------

// Class predictions from a trained bundle on (already normalized) inputs.
// saae: argmax of the class head (eta = 0); classifier: argmax logits.
std::vector<int> predict_classes(ModelBundle& bundle, const Tensor& x);

// encode -> decode roundtrip in infer mode (vae uses the posterior mean,
// aae/saae use eta = 0).
Tensor reconstruct_tensor(ModelBundle& bundle, const Tensor& x);

// Mean of 0.5*||x - xhat||^2 per sample.
double mean_recon_se(ModelBundle& bundle, const Tensor& x);

// Decode n prior samples (normalized units). class_index -1 samples y from
// the categorical prior; >= 0 pins the class.
Tensor generate_tensor(ModelBundle& bundle, int n, int class_index, Rng& rng,
                       std::vector<int>* labels_out = nullptr);

// Posterior samples z = g(x, eta) with eta ~ N(0,1), in infer mode.
Tensor sample_posterior(ModelBundle& bundle, const Tensor& x, Rng& rng);

// ---- misc helpers --------------------------------------------------------------------

Tensor gather_rows(const Tensor& x, const std::vector<int>& indices);
Tensor randn(const std::vector<int>& shape, Rng& rng);

}  // namespace resp::train
