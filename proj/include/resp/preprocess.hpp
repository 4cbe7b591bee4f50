#pragma once

#include <utility>
#include <vector>

#include "resp/common.hpp"
#include "resp/tensor.hpp"

namespace resp::pre {

// Projects a 3-D marker trace onto its main axis of movement (eigenvector of
// the channel covariance with the largest eigenvalue). The axis sign is chosen
// so inhale peaks come out positive: positive skewness wins, with the largest
// axis component as the tie-break for symmetric signals.
PrincipalAxisSeries pca_project(const Marker3DSeries& series);

struct SegmentationOptions {
    double smooth_window = 0.5;   // s, moving-average window for minima search
    double min_separation = 1.5;  // s, minimum gap between end-exhale points
};

struct SegmentationResult {
    std::vector<PeriodTuple> periods;
    double start_time = 0.0;               // time of the first detected EE point
    std::vector<std::size_t> ee_indices;   // sample indices of EE points
};

// Splits a 1-D trace into breathing periods between consecutive end-exhale
// minima and discretizes each period into its six-value tuple.
SegmentationResult segment_periods(const PrincipalAxisSeries& series,
                                   const SegmentationOptions& opts = {});

// Sliding windows of n_t consecutive tuples advancing by stride.
std::vector<BreathingVector> assemble_vectors(const std::vector<PeriodTuple>& periods, int n_t,
                                              int stride, const std::string& source_id = "");

// Least-squares slope of the end-exhale positions against cumulative time.
double baseline_slope(const BreathingVector& v);

// Labels every vector from the empirical slope percentiles of this dataset
// and returns the thresholds so held-out data can reuse them.
std::pair<std::vector<BreathingVector>, SlopeThresholds> label_baseline_shift(
    std::vector<BreathingVector> dataset, double percentile = 0.075);

// Labels with previously computed thresholds; never recomputes percentiles.
std::vector<BreathingVector> apply_thresholds(std::vector<BreathingVector> dataset,
                                              const SlopeThresholds& thresholds);

// Per-channel z-score normalization using this dataset's statistics.
std::pair<LabeledDataset, NormStats> normalize_features(const LabeledDataset& dataset);
LabeledDataset apply_normalization(const LabeledDataset& dataset, const NormStats& stats);
LabeledDataset denormalize(const LabeledDataset& dataset, const NormStats& stats);

// Tensor-level variants used around network inputs/outputs, (B, N_T, 6).
void normalize_tensor(Tensor& x, const NormStats& stats);
void denormalize_tensor(Tensor& x, const NormStats& stats);

// Dataset <-> tensor conversion; x has shape (B, N_T, 6).
Tensor to_tensor(const LabeledDataset& dataset);
Tensor to_tensor(const LabeledDataset& dataset, const std::vector<int>& indices);
std::vector<int> labels_of(const LabeledDataset& dataset);
BreathingVector vector_from_row(const Tensor& x, int row, const std::string& source_id = "",
                                int label = -1);

}  // namespace resp::pre
