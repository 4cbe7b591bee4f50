#pragma once

#include <string>

#include "resp/trainer.hpp"

namespace resp::train {

// Single-file container: magic, length-prefixed JSON header (specs, prior,
// normalization stats, slope thresholds, version), then length-prefixed named
// float64 blocks for every parameter and batchnorm running statistic.
// Reload reproduces inference outputs bit-identically.
void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

}  // namespace resp::train
