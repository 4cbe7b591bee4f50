#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "resp/common.hpp"
#include "resp/rng.hpp"

namespace resp::synth {

struct SlopeRange {
    double lo = 0.0;
    double hi = 0.0;  // mm/s, open interval (lo, hi)
};

// Configuration of the sinusoidal breathing generator. The waveform of one
// period is A * sin^2(pi*t/T) on top of a linear baseline m*t; the slope m is
// drawn from one of three disjoint class ranges and determines the label.
struct SynthConfig {
    std::uint64_t seed = 1234;
    int num_samples = 1000;
    int periods_per_sample = 25;  // N_T
    double sample_rate = 26.0;    // Hz
    double base_amplitude = 10.0; // mm
    double base_period = 4.0;     // s
    // index order matches ShiftClass: down, regular, up
    std::array<SlopeRange, 3> slope_classes = {
        SlopeRange{-0.02, -0.005}, SlopeRange{-0.002, 0.002}, SlopeRange{0.005, 0.02}};
    double period_jitter = 0.1;     // fractional std of per-period duration
    double amplitude_jitter = 0.1;  // fractional std of per-period amplitude
    double noise_sigma = 0.05;      // mm, measurement noise on amplitudes
    bool vary_period_amplitude = false;  // false = slope-only (S1), true = S2

    void validate() const;
};

// Ground truth of one generated period; kept so segmentation can be checked
// against the generator instead of against itself.
struct PeriodTruth {
    double t_start = 0.0;
    double period = 0.0;
    double amplitude = 0.0;
};

struct SignalTruth {
    std::vector<PeriodTruth> periods;
    double slope = 0.0;
    int label = 1;
};

// Direct tuple-space generation of num_samples breathing vectors. The tuple
// entries are the analytic stage values of the waveform; amplitudes carry
// i.i.d. gaussian noise and, when noise is enabled, the time gaps carry a
// half-sample-step quantization jitter so no feature channel is constant.
LabeledDataset generate_sinusoid_dataset(const SynthConfig& config);

// Ground truth for sample `index` of the dataset above (same sub-seed).
SignalTruth sample_truth(const SynthConfig& config, std::uint64_t index);

// One sample's waveform on the uniform grid, with its truth. Used to exercise
// the series-based pipeline (peak detection, interpolation).
struct SampledSignal {
    std::vector<double> values;  // mm
    double sample_rate = 26.0;
    SignalTruth truth;
};
SampledSignal generate_signal(const SynthConfig& config, std::uint64_t index);

// Correlated 3-D marker trace: a shared 1-D breathing signal scaled by a fixed
// direction vector plus small independent per-channel noise. For marker traces
// num_samples counts breathing periods.
Marker3DSeries generate_marker_series(const SynthConfig& config,
                                      std::array<double, 3> direction = {0.80, 0.52, 0.30});

}  // namespace resp::synth
