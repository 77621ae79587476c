#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

namespace noems {

/// Pulsed quantum-dot emitter. Per pulse: two photons with probability
/// multiphoton_prob, one with emission_prob - multiphoton_prob, else none.
struct EmitterModel {
    double pulse_rate_hz = 76e6;
    double emission_prob = 0.5;
    double multiphoton_prob = 0.0;
    double lifetime_ns = 1.0;
    std::uint64_t rng_seed = 1;
    /// Coherent-light toggle: a continuous Poisson process at the same mean
    /// photon rate, (emission_prob + multiphoton_prob) * pulse_rate_hz.
    bool poissonian = false;

    double mean_photons_per_pulse() const { return emission_prob + multiphoton_prob; }
    double period_ps() const { return 1e12 / pulse_rate_hz; }
    /// Pulsed g2(0) of the photon-number distribution, 2 p2 / mu^2.
    double expected_g2_zero() const;
    /// Throws std::invalid_argument on out-of-range parameters.
    void validate() const;
};

/// Multiphoton probability giving a target g2(0) at fixed emission_prob.
double multiphoton_prob_for_g2(double emission_prob, double g2_zero);

struct TimeTag {
    std::int64_t t_ps;
    std::uint32_t channel;
    bool operator==(const TimeTag&) const = default;
};

struct TimeTagStream {
    std::vector<TimeTag> tags;  // time ordered
    std::uint64_t pulses = 0;   // excitation pulses covered (0 for a continuous source)
    double period_ps = 0.0;     // pulse period, 0 for a continuous source
    std::int64_t span_ps = 0;   // acquisition length

    /// Throws std::invalid_argument on negative or unordered tags, or a
    /// repeated timestamp within one channel.
    void validate() const;
    std::size_t count(std::uint32_t channel) const;
};

/// Streams shorter than this many pulses give poor statistics.
inline constexpr std::uint64_t min_recommended_pulses = 10'000;

/// Deterministic under rng_seed. Emission delays are exponential with the
/// lifetime, truncated to half a pulse period so each photon stays in its
/// pulse window. Tags land on channel 0.
TimeTagStream generate_stream(const EmitterModel& em, double duration_s);

/// Independent Bernoulli assignment of each tag to port 3 with probability
/// i3_fraction; returns (port 3, port 4) on channels 3 and 4.
std::pair<TimeTagStream, TimeTagStream> route_stream(const TimeTagStream& s, double i3_fraction, std::uint64_t seed);
TimeTagStream merge_streams(const TimeTagStream& a, const TimeTagStream& b);

struct G2Options {
    double bin_ps = 1000.0;
    double window_ps = 50'000.0;            // histogram half-width
    double normalization_delay_ps = 1e9;    // 1 ms
    int normalization_peaks = 10;           // pulse peaks each side of the delay
    double period_ps = 0.0;                 // overrides the stream's pulse period when > 0
};

struct G2Histogram {
    double bin_ps = 0.0;
    std::vector<double> tau_ps;
    std::vector<std::uint64_t> counts;  // ordered pairs, symmetric in tau
    std::vector<double> g2;
    std::vector<double> g2_error;
    double normalization = 0.0;  // long-delay counts per bin
    double g2_zero = 0.0;
    double g2_zero_error = 0.0;
};

/// All-pairs coincidences of every tag against every later and earlier tag,
/// regardless of channel. Bins are centred on k * bin_ps. For a pulsed
/// stream g2_zero is the central period integral over the mean integral of
/// the pulse peaks near +/- the normalization delay; for a continuous
/// stream it is the central bin over the long-delay mean.
/// std::invalid_argument on an empty stream, a window beyond the span, or a
/// span shorter than ten normalization delays.
G2Histogram g2_histogram(const TimeTagStream& s, const G2Options& options = {});

/// CSV `tau_ps,counts,g2`.
void write_histogram_csv(std::ostream& out, const G2Histogram& h);

/// CSV `t_ps,channel`.
void write_tags_csv(std::ostream& out, const TimeTagStream& s);
TimeTagStream read_tags_csv(std::istream& in);
/// Per-channel blocks: magic `TTAG0001`, uint32 channel, uint32 count, then
/// count little-endian int64 timestamps.
void write_tags_binary(std::ostream& out, const TimeTagStream& s);
TimeTagStream read_tags_binary(std::istream& in);

}  // namespace noems
