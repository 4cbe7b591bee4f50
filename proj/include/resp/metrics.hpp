#pragma once

#include <vector>

#include "resp/tensor.hpp"

namespace resp::metrics {

struct ClassScores {
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f1;
    std::vector<bool> absent;  // class missing from both predictions and labels
    double mf1 = 0.0;
    std::vector<std::vector<long>> confusion;  // confusion[label][pred]
};

// Per-class precision/recall/F1 with F1 = 2pr/(p+r) (0 when p+r = 0) and the
// unweighted macro average.
ClassScores macro_f1(const std::vector<int>& predictions, const std::vector<int>& labels,
                     int classes);

struct Histogram {
    std::vector<double> edges;   // bins+1 edges
    std::vector<long> counts;    // bins
    double mode_center() const;  // center of the fullest bin
};

Histogram histogram(const std::vector<double>& values, int bins);
Histogram histogram(const std::vector<double>& values, int bins, double lo, double hi);

// Two-sample Kolmogorov-Smirnov statistic: sup |ECDF_a - ECDF_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

// Per-point nearest-neighbour L1 distance over rows of a (n, N) tensor,
// normalized by N. Sort-and-prune on the first coordinate instead of the
// quadratic scan.
std::vector<double> nn_l1_distances(const Tensor& points);

// Row-wise L2 norms of a (n, N) tensor.
std::vector<double> l2_norms(const Tensor& points);

// Fraction of correct binary calls given logits (>0 means class 1).
double binary_accuracy(const std::vector<double>& logits, const std::vector<int>& labels);
// Mean binary cross-entropy from logits.
double binary_cross_entropy(const std::vector<double>& logits, const std::vector<int>& labels);

}  // namespace resp::metrics
