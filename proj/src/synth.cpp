#include "resp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace resp::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;

double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

double jitter_factor(Rng& rng, double sigma) {
    if (sigma <= 0.0) return 1.0;
    return clip(std::exp(rng.normal(0.0, sigma)), 0.5, 2.0);
}

// Draw class, slope and the per-period (t_start, period, amplitude) sequence
// for one sample. All per-sample randomness comes from its own sub-seeded rng
// so samples are independent of generation order.
SignalTruth draw_truth(const SynthConfig& c, Rng& rng) {
    SignalTruth truth;
    const int cls = static_cast<int>(rng.uniform_index(3));
    truth.label = cls;
    const SlopeRange& r = c.slope_classes[static_cast<std::size_t>(cls)];
    truth.slope = rng.uniform(r.lo, r.hi);
    truth.periods.reserve(static_cast<std::size_t>(c.periods_per_sample));
    double t = 0.0;
    for (int j = 0; j < c.periods_per_sample; ++j) {
        PeriodTruth p;
        p.t_start = t;
        if (c.vary_period_amplitude) {
            p.period = c.base_period * jitter_factor(rng, c.period_jitter);
            p.amplitude = c.base_amplitude * jitter_factor(rng, c.amplitude_jitter);
        } else {
            p.period = c.base_period;
            p.amplitude = c.base_amplitude;
        }
        t += p.period;
        truth.periods.push_back(p);
    }
    return truth;
}

}  // namespace

void SynthConfig::validate() const {
    if (num_samples < 1) throw ConfigError("synth: num_samples must be >= 1");
    if (periods_per_sample < 1) throw ConfigError("synth: periods_per_sample must be >= 1");
    if (sample_rate <= 0.0) throw ConfigError("synth: sample_rate must be > 0");
    if (base_period <= 0.0 || base_amplitude <= 0.0)
        throw ConfigError("synth: base period/amplitude must be > 0");
    if (period_jitter < 0.0 || amplitude_jitter < 0.0)
        throw ConfigError("synth: jitter must be >= 0");
    if (noise_sigma < 0.0) throw ConfigError("synth: noise_sigma must be >= 0");
    for (const SlopeRange& r : slope_classes)
        if (!(r.lo < r.hi)) throw ConfigError("synth: slope range must satisfy lo < hi");
    // the three class intervals must not overlap
    std::array<SlopeRange, 3> s = slope_classes;
    std::sort(s.begin(), s.end(), [](const SlopeRange& a, const SlopeRange& b) { return a.lo < b.lo; });
    for (int i = 0; i + 1 < 3; ++i)
        if (s[static_cast<std::size_t>(i)].hi > s[static_cast<std::size_t>(i + 1)].lo)
            throw ConfigError("synth: slope class ranges overlap");
}

SignalTruth sample_truth(const SynthConfig& c, std::uint64_t index) {
    c.validate();
    Rng rng(mix_seed(c.seed, index));
    return draw_truth(c, rng);
}

LabeledDataset generate_sinusoid_dataset(const SynthConfig& c) {
    c.validate();
    LabeledDataset ds;
    ds.n_t = c.periods_per_sample;
    ds.num_classes = 3;
    ds.seed = c.seed;
    ds.source = c.vary_period_amplitude ? "synth-s2" : "synth-s1";
    ds.samples.reserve(static_cast<std::size_t>(c.num_samples));

    const double time_noise = c.noise_sigma > 0.0 ? 0.5 / c.sample_rate : 0.0;

    for (int i = 0; i < c.num_samples; ++i) {
        Rng rng(mix_seed(c.seed, static_cast<std::uint64_t>(i)));
        const SignalTruth truth = draw_truth(c, rng);
        BreathingVector v;
        v.label = truth.label;
        v.source_id = ds.source + "-" + std::to_string(i);
        v.periods.reserve(truth.periods.size());
        const double m = truth.slope;
        for (const PeriodTruth& p : truth.periods) {
            PeriodTuple tup;
            // stage values of m*t + A*sin^2(pi*(t - t0)/T) at t0, t0+T/4, t0+T/2, t0+3T/4
            tup.a_ee = m * p.t_start;
            tup.a_mi = m * (p.t_start + 0.25 * p.period) + 0.5 * p.amplitude;
            tup.a_ei = m * (p.t_start + 0.50 * p.period) + p.amplitude;
            tup.a_me = m * (p.t_start + 0.75 * p.period) + 0.5 * p.amplitude;
            tup.d_ee = 0.5 * p.period;
            tup.d_ei = 0.5 * p.period;
            if (c.noise_sigma > 0.0) {
                tup.a_ee += rng.normal(0.0, c.noise_sigma);
                tup.a_mi += rng.normal(0.0, c.noise_sigma);
                tup.a_ei += rng.normal(0.0, c.noise_sigma);
                tup.a_me += rng.normal(0.0, c.noise_sigma);
                // half-sample-step quantization jitter on the time gaps
                tup.d_ee += rng.uniform(-time_noise, time_noise);
                tup.d_ei += rng.uniform(-time_noise, time_noise);
            }
            v.periods.push_back(tup);
        }
        ds.samples.push_back(std::move(v));
    }
    return ds;
}

SampledSignal generate_signal(const SynthConfig& c, std::uint64_t index) {
    c.validate();
    Rng rng(mix_seed(c.seed, index));
    SampledSignal out;
    out.sample_rate = c.sample_rate;
    out.truth = draw_truth(c, rng);

    double duration = 0.0;
    for (const PeriodTruth& p : out.truth.periods) duration += p.period;
    const auto n = static_cast<std::size_t>(std::llround(duration * c.sample_rate));
    out.values.resize(n);

    std::size_t pj = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / c.sample_rate;
        while (pj + 1 < out.truth.periods.size() &&
               t >= out.truth.periods[pj].t_start + out.truth.periods[pj].period)
            ++pj;
        const PeriodTruth& p = out.truth.periods[pj];
        const double phase = kPi * (t - p.t_start) / p.period;
        const double s = std::sin(phase);
        double v = out.truth.slope * t + p.amplitude * s * s;
        if (c.noise_sigma > 0.0) v += rng.normal(0.0, c.noise_sigma);
        out.values[i] = v;
    }
    return out;
}

Marker3DSeries generate_marker_series(const SynthConfig& c, std::array<double, 3> direction) {
    c.validate();
    if (c.num_samples < 10)
        throw ConfigError("marker series: need at least 10 periods (num_samples >= 10)");
    const double norm = std::sqrt(direction[0] * direction[0] + direction[1] * direction[1] +
                                  direction[2] * direction[2]);
    if (norm <= 0.0) throw ConfigError("marker series: direction must be nonzero");
    for (double& d : direction) d /= norm;

    // one long trace of num_samples periods; amplitude noise goes on the
    // channels independently, not on the shared signal
    SynthConfig shared = c;
    shared.periods_per_sample = c.num_samples;
    shared.noise_sigma = 0.0;
    SampledSignal sig = generate_signal(shared, 0);

    Rng noise_rng(mix_seed(c.seed, 0x6d61726bULL));
    Marker3DSeries series;
    series.sample_rate = c.sample_rate;
    series.duration = static_cast<double>(sig.values.size()) / c.sample_rate;
    series.positions.resize(sig.values.size());
    for (std::size_t i = 0; i < sig.values.size(); ++i) {
        for (int ch = 0; ch < 3; ++ch) {
            double v = direction[static_cast<std::size_t>(ch)] * sig.values[i];
            if (c.noise_sigma > 0.0) v += noise_rng.normal(0.0, c.noise_sigma);
            series.positions[i][static_cast<std::size_t>(ch)] = v;
        }
    }
    return series;
}

}  // namespace resp::synth
