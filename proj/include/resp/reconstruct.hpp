#pragma once

#include <string>
#include <vector>

#include "resp/common.hpp"
#include "resp/trainer.hpp"

namespace resp::recon {

using models::ReconNetSpec;

// One training pair for the window-based reconstruction net: 120 interpolated
// position values in, the first 100 real values out, both scaled to [0,1]
// with the input window's min/max.
struct WindowPair {
    std::vector<double> input;   // 120 values, normalized
    std::vector<double> target;  // 100 values, normalized
    double norm_min = 0.0;
    double norm_max = 1.0;
    std::string source_id;
};

inline constexpr int kWindowInput = 120;
inline constexpr int kWindowOutput = 100;

// Piecewise-linear series through the four stage points of every period,
// sampled on the uniform grid. The last period closes on its own end-exhale
// level.
std::vector<double> linear_interpolate(const BreathingVector& x, double sample_rate);

std::vector<WindowPair> make_training_windows(const std::vector<double>& real_series,
                                              const std::vector<double>& interp_series,
                                              int stride = kWindowOutput,
                                              const std::string& source_id = "");

// patbr requires all pairs to share one source_id; popbr trains on a
// deterministic `subset_fraction` subsample of the (multi-source) pairs.
train::ModelBundle train_recon_net(const std::vector<WindowPair>& pairs, const std::string& mode,
                                   const train::TrainConfig& cfg, const ReconNetSpec& spec = {},
                                   double subset_fraction = 0.1);

// Slides over the interpolated series in steps of 100, feeds 120-value
// normalized windows and concatenates the denormalized 100-value outputs.
// The tail is edge-extended to a full window and truncated after inference.
std::vector<double> apply_recon(train::ModelBundle& bundle, const std::vector<double>& interp);

// Mean absolute error between two aligned series.
double mean_l1(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace resp::recon
