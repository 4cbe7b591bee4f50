#pragma once

#include <string>
#include <vector>

#include "resp/metrics.hpp"
#include "resp/trainer.hpp"

namespace resp::eval {

using metrics::ClassScores;
using metrics::Histogram;

// Per-class precision/recall/F1 and the macro average.
ClassScores macro_f1(const std::vector<int>& predictions, const std::vector<int>& labels,
                     int classes);

struct ReconErrorReport {
    double percent = 0.0;            // model SE / random-init SE * 100
    double model_se = 0.0;
    double baseline_se = 0.0;        // first baseline seed
    double baseline_std_percent = 0.0;  // spread of the baseline SE over 3 seeds
};
// Mean reconstruction SE normalized so a randomly initialized model of the
// same architecture scores 100%. `data` must be normalized like the training
// set was.
ReconErrorReport relative_recon_error(train::ModelBundle& model, const Tensor& x,
                                      std::uint64_t baseline_seed);

struct RepeatedScore {
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> runs;
};

// Classification Accuracy Score: train a fresh classifier purely on generated
// labeled samples, evaluate mF1 on the real test set; repeated over
// independent seeds.
RepeatedScore cas(train::ModelBundle& generative, const Tensor& real_test_x,
                  const std::vector<int>& real_test_labels, int n_generated,
                  const models::ClassifierSpec& classifier_spec, const train::TrainConfig& cls_cfg,
                  int repeats, std::uint64_t seed);

struct DistinguishabilityResult {
    double accuracy_mean = 0.0, accuracy_std = 0.0;
    double bce_mean = 0.0, bce_std = 0.0;
};
enum class SampleSource { prior, posterior_vicinity };
// Binary classifier separating reconstructed real data from decoded samples;
// the harder it is to tell them apart (lower accuracy, higher BCE), the better
// the generative model.
DistinguishabilityResult distinguishability_test(train::ModelBundle& bundle, const Tensor& x,
                                                 SampleSource source, int repeats,
                                                 std::uint64_t seed,
                                                 const train::TrainConfig& cls_cfg,
                                                 double vicinity_radius = 0.1);

// Nearest-neighbour L1 distance per encoding, normalized by the latent
// dimensionality, as a histogram.
Histogram latent_neighbor_distances(const Tensor& encodings, int bins = 50);

struct NormComparison {
    Histogram encodings;
    Histogram prior;
    double ks = 0.0;
};
NormComparison latent_norm_distribution(const Tensor& encodings, const Tensor& prior_samples,
                                        int bins = 50);

struct GridSample {
    Tensor zs;       // (points*points, 2)
    Tensor signals;  // (points*points, n_t, 6)
};
// Decode a points x points grid over [lo,hi]^2; requires latent_dim == 2.
// class_index pins the class head for joint models.
GridSample grid_sample_2d(train::ModelBundle& bundle, double lo = -1.5, double hi = 1.5,
                          int points = 25, int class_index = -1);

}  // namespace resp::eval
