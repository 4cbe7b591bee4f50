#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace resp {

// Error hierarchy used across the library. Every failure surfaces as one of
// these so the CLI can map them onto machine-readable error lines.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};
struct ConfigError : Error {
    using Error::Error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

// Baseline-shift classes. The index order is shared by the synthesizer, the
// percentile labeler and every classifier head.
enum class ShiftClass : int { down = 0, regular = 1, up = 2 };
inline const char* shift_class_name(int c) {
    switch (c) {
        case 0: return "down";
        case 1: return "regular";
        case 2: return "up";
        default: return "?";
    }
}

// One breathing period: four amplitudes (mm) and the two non-redundant time
// gaps (s). The mid-inhale/mid-exhale points sit at half the corresponding
// gap, so their times are not stored.
struct PeriodTuple {
    double a_ee = 0.0;   // end-exhale position (period start)
    double d_ee = 0.0;   // time from EE to EI (inhale duration)
    double a_mi = 0.0;   // position at the inhale midpoint
    double a_ei = 0.0;   // end-inhale position (peak)
    double d_ei = 0.0;   // time from EI to the next EE (exhale duration)
    double a_me = 0.0;   // position at the exhale midpoint

    static constexpr int kChannels = 6;

    std::array<double, 6> values() const { return {a_ee, d_ee, a_mi, a_ei, d_ei, a_me}; }
    static PeriodTuple from_values(const std::array<double, 6>& v) {
        return PeriodTuple{v[0], v[1], v[2], v[3], v[4], v[5]};
    }
    double duration() const { return d_ee + d_ei; }
};

// A model sample: n_t consecutive periods plus an optional class label.
struct BreathingVector {
    std::vector<PeriodTuple> periods;
    int label = -1;  // class index in [0, classes) or -1 for unlabeled
    std::string source_id;

    int n_t() const { return static_cast<int>(periods.size()); }
};

struct LabeledDataset {
    int n_t = 0;
    int num_classes = 0;
    std::uint64_t seed = 0;
    std::string source;
    std::vector<BreathingVector> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

// Raw 3-D marker trace sampled on a uniform grid.
struct Marker3DSeries {
    double sample_rate = 26.0;  // Hz
    std::vector<std::array<double, 3>> positions;  // mm
    double duration = 0.0;  // s

    std::size_t size() const { return positions.size(); }
};

// 1-D trace obtained by projecting a marker series onto its main axis.
struct PrincipalAxisSeries {
    double sample_rate = 26.0;
    std::vector<double> values;  // mm
    double variance_retained = 1.0;
    std::array<double, 3> projection_axis = {1.0, 0.0, 0.0};
    std::array<double, 3> channel_means = {0.0, 0.0, 0.0};
};

// Per-channel affine normalization statistics (over the 6 tuple channels).
struct NormStats {
    std::array<double, 6> mean = {0, 0, 0, 0, 0, 0};
    std::array<double, 6> std = {1, 1, 1, 1, 1, 1};
};

// Slope thresholds separating the three baseline-shift classes, persisted so
// held-out data is labeled with the same cut points as the reference set.
struct SlopeThresholds {
    double lower = 0.0;  // slope < lower  -> down
    double upper = 0.0;  // slope > upper  -> up
};

}  // namespace resp
