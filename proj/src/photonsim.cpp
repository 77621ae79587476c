#include "noems/photonsim.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "noems/csv.hpp"
#include "noems/errors.hpp"

namespace noems {

namespace {

constexpr std::array<char, 8> tag_magic{'T', 'T', 'A', 'G', '0', '0', '0', '1'};

template <class T>
void put_le(std::ostream& out, T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t k = 0; k < sizeof(T); ++k) {
        out.put(static_cast<char>(u & 0xff));
        u >>= 8;
    }
}

template <class T>
bool get_le(std::istream& in, T& value) {
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) {
        const int c = in.get();
        if (c == std::char_traits<char>::eof()) return false;
        u |= static_cast<U>(static_cast<unsigned char>(c)) << (8 * k);
    }
    value = static_cast<T>(u);
    return true;
}

void sort_tags(std::vector<TimeTag>& tags) {
    std::stable_sort(tags.begin(), tags.end(), [](const TimeTag& a, const TimeTag& b) {
        return a.t_ps != b.t_ps ? a.t_ps < b.t_ps : a.channel < b.channel;
    });
}

// Sign-symmetric bin index of a positive delay.
long long bin_index(std::int64_t delta, double bin) {
    return static_cast<long long>(std::floor((static_cast<double>(delta) + bin / 2.0) / bin));
}

}  // namespace

double EmitterModel::expected_g2_zero() const {
    const double mu = mean_photons_per_pulse();
    return mu > 0.0 ? 2.0 * multiphoton_prob / (mu * mu) : 0.0;
}

void EmitterModel::validate() const {
    if (!(pulse_rate_hz > 0.0)) throw std::invalid_argument("pulse rate must be > 0");
    if (!(lifetime_ns > 0.0)) throw std::invalid_argument("lifetime must be > 0");
    if (!(emission_prob >= 0.0 && emission_prob <= 1.0)) throw std::invalid_argument("emission_prob outside [0, 1]");
    if (!(multiphoton_prob >= 0.0 && multiphoton_prob <= 1.0))
        throw std::invalid_argument("multiphoton_prob outside [0, 1]");
    if (multiphoton_prob > emission_prob) throw std::invalid_argument("multiphoton_prob exceeds emission_prob");
}

double multiphoton_prob_for_g2(double emission_prob, double g2_zero) {
    if (!(emission_prob > 0.0 && emission_prob <= 1.0)) throw std::invalid_argument("emission_prob outside (0, 1]");
    if (!(g2_zero >= 0.0)) throw std::invalid_argument("g2(0) must be >= 0");
    if (g2_zero == 0.0) return 0.0;
    // 2 p = g (e + p)^2, smaller root.
    const double b = 2.0 - 2.0 * g2_zero * emission_prob;
    const double disc = b * b - 4.0 * g2_zero * g2_zero * emission_prob * emission_prob;
    if (disc < 0.0) throw std::invalid_argument("g2(0) unreachable at this emission probability");
    const double p = (b - std::sqrt(disc)) / (2.0 * g2_zero);
    if (p > emission_prob) throw std::invalid_argument("g2(0) needs multiphoton_prob above emission_prob");
    return p;
}

void TimeTagStream::validate() const {
    std::map<std::uint32_t, std::int64_t> last;
    std::int64_t prev = 0;
    for (const auto& t : tags) {
        if (t.t_ps < 0) throw std::invalid_argument("negative timestamp " + std::to_string(t.t_ps));
        if (t.t_ps < prev) throw std::invalid_argument("timestamps out of order at " + std::to_string(t.t_ps));
        prev = t.t_ps;
        const auto it = last.find(t.channel);
        if (it != last.end() && it->second >= t.t_ps)
            throw std::invalid_argument("repeated timestamp " + std::to_string(t.t_ps) + " on channel " +
                                        std::to_string(t.channel));
        last[t.channel] = t.t_ps;
    }
}

std::size_t TimeTagStream::count(std::uint32_t channel) const {
    return static_cast<std::size_t>(
        std::count_if(tags.begin(), tags.end(), [channel](const TimeTag& t) { return t.channel == channel; }));
}

TimeTagStream generate_stream(const EmitterModel& em, double duration_s) {
    em.validate();
    if (!(duration_s >= 0.0)) throw std::invalid_argument("duration must be >= 0");
    TimeTagStream s;
    s.span_ps = std::llround(duration_s * 1e12);
    std::mt19937_64 rng(em.rng_seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    if (em.poissonian) {
        const double rate_per_ps = em.mean_photons_per_pulse() * em.pulse_rate_hz * 1e-12;
        if (rate_per_ps <= 0.0) return s;
        std::exponential_distribution<double> gap(rate_per_ps);
        double t = 0.0;
        while (true) {
            t += gap(rng);
            std::int64_t tp = std::llround(t);
            if (tp >= s.span_ps) break;
            if (!s.tags.empty() && tp <= s.tags.back().t_ps) tp = s.tags.back().t_ps + 1;
            s.tags.push_back({tp, 0});
        }
        return s;
    }

    const double period = em.period_ps();
    s.period_ps = period;
    s.pulses = static_cast<std::uint64_t>(std::floor(duration_s * em.pulse_rate_hz));
    s.span_ps = std::max<std::int64_t>(s.span_ps, std::llround(static_cast<double>(s.pulses) * period));
    std::exponential_distribution<double> delay(1.0 / (em.lifetime_ns * 1e3));
    const double cutoff = period / 2.0;
    auto draw_delay = [&] {
        double d;
        do d = delay(rng);
        while (d >= cutoff);
        return std::llround(d);
    };
    s.tags.reserve(static_cast<std::size_t>(static_cast<double>(s.pulses) * em.mean_photons_per_pulse() * 1.01));
    for (std::uint64_t k = 0; k < s.pulses; ++k) {
        const double u = uniform(rng);
        const int photons = u < em.multiphoton_prob ? 2 : (u < em.emission_prob ? 1 : 0);
        if (photons == 0) continue;
        const std::int64_t t0 = std::llround(static_cast<double>(k) * period);
        std::int64_t a = t0 + draw_delay();
        if (photons == 1) {
            s.tags.push_back({a, 0});
            continue;
        }
        std::int64_t b = t0 + draw_delay();
        if (b < a) std::swap(a, b);
        if (b == a) ++b;
        s.tags.push_back({a, 0});
        s.tags.push_back({b, 0});
    }
    return s;
}

std::pair<TimeTagStream, TimeTagStream> route_stream(const TimeTagStream& s, double i3_fraction, std::uint64_t seed) {
    if (!(i3_fraction >= 0.0 && i3_fraction <= 1.0))
        throw std::invalid_argument("port-3 fraction outside [0, 1]: " + csv::number(i3_fraction));
    std::pair<TimeTagStream, TimeTagStream> out;
    for (auto* part : {&out.first, &out.second}) {
        part->pulses = s.pulses;
        part->period_ps = s.period_ps;
        part->span_ps = s.span_ps;
    }
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution to_port3(i3_fraction);
    for (const auto& t : s.tags) {
        if (to_port3(rng))
            out.first.tags.push_back({t.t_ps, 3});
        else
            out.second.tags.push_back({t.t_ps, 4});
    }
    return out;
}

TimeTagStream merge_streams(const TimeTagStream& a, const TimeTagStream& b) {
    TimeTagStream out;
    out.pulses = std::max(a.pulses, b.pulses);
    out.period_ps = a.period_ps > 0.0 ? a.period_ps : b.period_ps;
    out.span_ps = std::max(a.span_ps, b.span_ps);
    out.tags.reserve(a.tags.size() + b.tags.size());
    std::merge(a.tags.begin(), a.tags.end(), b.tags.begin(), b.tags.end(), std::back_inserter(out.tags),
               [](const TimeTag& x, const TimeTag& y) {
                   return x.t_ps != y.t_ps ? x.t_ps < y.t_ps : x.channel < y.channel;
               });
    return out;
}

G2Histogram g2_histogram(const TimeTagStream& s, const G2Options& options) {
    if (s.tags.empty()) throw std::invalid_argument("g2 of an empty stream");
    if (!(options.bin_ps > 0.0) || !(options.window_ps > 0.0) || !(options.normalization_delay_ps > 0.0))
        throw std::invalid_argument("bin, window and normalization delay must be > 0");
    if (options.normalization_peaks < 0) throw std::invalid_argument("normalization_peaks must be >= 0");
    const auto span = static_cast<double>(std::max(s.span_ps, s.tags.back().t_ps - s.tags.front().t_ps));
    if (options.window_ps > span) throw std::invalid_argument("histogram window exceeds the stream span");
    if (span < 10.0 * options.normalization_delay_ps)
        throw std::invalid_argument("stream span " + csv::number(span) + " ps is shorter than ten normalization delays");

    const double period = options.period_ps > 0.0 ? options.period_ps : s.period_ps;
    const bool pulsed = period > 0.0;
    const double bin = options.bin_ps;
    const long long half_bins = std::llround(options.window_ps / bin);
    const double edge = (static_cast<double>(half_bins) + 0.5) * bin;
    const double central_edge = pulsed ? period / 2.0 : 0.0;

    // Long-delay band on the positive side.
    double band_lo;
    double band_hi;
    double band_width;
    if (pulsed) {
        const double centre = std::round(options.normalization_delay_ps / period) * period;
        const double half = (options.normalization_peaks + 0.5) * period;
        band_lo = centre - half;
        band_hi = centre + half;
        band_width = 2.0 * half;
    } else {
        band_lo = options.normalization_delay_ps - options.window_ps;
        band_hi = options.normalization_delay_ps + options.window_ps;
        band_width = band_hi - band_lo;
    }
    if (band_lo <= std::max(edge, central_edge)) throw std::invalid_argument("normalization delay inside the window");

    G2Histogram h;
    h.bin_ps = bin;
    const auto nbins = static_cast<std::size_t>(2 * half_bins + 1);
    h.counts.assign(nbins, 0);
    std::uint64_t central_pairs = 0;
    std::uint64_t band_pairs = 0;
    const std::size_t n = s.tags.size();
    const double near_edge = std::max(edge, central_edge);
    std::size_t lo = 0;
    std::size_t hi = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::int64_t ti = s.tags[i].t_ps;
        for (std::size_t j = i + 1; j < n; ++j) {
            const std::int64_t delta = s.tags[j].t_ps - ti;
            const auto d = static_cast<double>(delta);
            if (d >= near_edge) break;
            if (d < central_edge) ++central_pairs;
            if (d < edge) {
                const long long b = bin_index(delta, bin);
                if (b <= half_bins) {
                    h.counts[static_cast<std::size_t>(half_bins + b)] += 1;
                    h.counts[static_cast<std::size_t>(half_bins - b)] += 1;
                }
            }
        }
        lo = std::max(lo, i + 1);
        while (lo < n && static_cast<double>(s.tags[lo].t_ps - ti) < band_lo) ++lo;
        hi = std::max(hi, lo);
        while (hi < n && static_cast<double>(s.tags[hi].t_ps - ti) < band_hi) ++hi;
        band_pairs += hi - lo;
    }

    // Pairs at delay tau scale with the overlap span - |tau|; normalization
    // is referred to zero delay.
    const double band_centre = (band_lo + band_hi) / 2.0;
    if (band_hi >= span) throw std::invalid_argument("normalization band exceeds the stream span");
    const double to_zero = span / (span - band_centre);
    h.normalization = static_cast<double>(band_pairs) * bin / band_width * to_zero;
    const double band_rel = band_pairs > 0 ? 1.0 / std::sqrt(static_cast<double>(band_pairs)) : 1.0;
    h.tau_ps.resize(nbins);
    h.g2.resize(nbins);
    h.g2_error.resize(nbins);
    for (std::size_t k = 0; k < nbins; ++k) {
        const long long b = static_cast<long long>(k) - half_bins;
        h.tau_ps[k] = static_cast<double>(b) * bin;
        const auto c = static_cast<double>(h.counts[k]);
        // The zero bin holds two ordered counts per pair.
        const double var = (b == 0 ? 2.0 : 1.0) * std::max(c, 1.0);
        const double expected = h.normalization * (span - std::abs(h.tau_ps[k])) / span;
        if (expected > 0.0) {
            h.g2[k] = c / expected;
            h.g2_error[k] = std::hypot(std::sqrt(var) / expected, h.g2[k] * band_rel);
        } else {
            h.g2[k] = std::numeric_limits<double>::quiet_NaN();
            h.g2_error[k] = std::numeric_limits<double>::quiet_NaN();
        }
    }

    if (pulsed) {
        const double mean_peak =
            static_cast<double>(band_pairs) / (2.0 * options.normalization_peaks + 1.0) * to_zero;
        if (mean_peak > 0.0) {
            const double central = 2.0 * static_cast<double>(central_pairs);
            h.g2_zero = central / mean_peak;
            const double sigma_c = 2.0 * std::sqrt(std::max(static_cast<double>(central_pairs), 1.0));
            h.g2_zero_error = std::hypot(sigma_c / mean_peak, h.g2_zero * band_rel);
        } else {
            h.g2_zero = h.g2_zero_error = std::numeric_limits<double>::quiet_NaN();
        }
    } else {
        h.g2_zero = h.g2[static_cast<std::size_t>(half_bins)];
        h.g2_zero_error = h.g2_error[static_cast<std::size_t>(half_bins)];
    }
    return h;
}

void write_histogram_csv(std::ostream& out, const G2Histogram& h) {
    out << "tau_ps,counts,g2\n";
    for (std::size_t k = 0; k < h.counts.size(); ++k)
        out << csv::number(h.tau_ps[k]) << ',' << csv::number(static_cast<long long>(h.counts[k])) << ','
            << csv::number(h.g2[k]) << '\n';
}

void write_tags_csv(std::ostream& out, const TimeTagStream& s) {
    out << "t_ps,channel\n";
    for (const auto& t : s.tags)
        out << csv::number(static_cast<long long>(t.t_ps)) << ',' << csv::number(static_cast<long long>(t.channel))
            << '\n';
}

TimeTagStream read_tags_csv(std::istream& in) {
    TimeTagStream s;
    for (const auto& row : csv::read(in, "t_ps,channel")) {
        const long long t = csv::to_int(row, 0);
        const long long ch = csv::to_int(row, 1);
        if (t < 0) throw ParseError("negative timestamp", row.line, 1);
        if (ch < 0 || ch > 0xffffffffLL) throw ParseError("channel out of range", row.line, 1);
        s.tags.push_back({t, static_cast<std::uint32_t>(ch)});
    }
    sort_tags(s.tags);
    if (!s.tags.empty()) s.span_ps = s.tags.back().t_ps + 1;
    s.validate();
    return s;
}

void write_tags_binary(std::ostream& out, const TimeTagStream& s) {
    std::map<std::uint32_t, std::vector<std::int64_t>> by_channel;
    for (const auto& t : s.tags) by_channel[t.channel].push_back(t.t_ps);
    for (const auto& [channel, times] : by_channel) {
        if (times.size() > 0xffffffffULL) throw std::length_error("too many tags for one channel block");
        out.write(tag_magic.data(), tag_magic.size());
        put_le<std::uint32_t>(out, channel);
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(times.size()));
        for (std::int64_t t : times) put_le<std::int64_t>(out, t);
    }
}

TimeTagStream read_tags_binary(std::istream& in) {
    TimeTagStream s;
    std::size_t block = 0;
    while (true) {
        std::array<char, 8> magic{};
        in.read(magic.data(), magic.size());
        if (in.gcount() == 0) break;
        ++block;
        if (in.gcount() != static_cast<std::streamsize>(magic.size()) || magic != tag_magic)
            throw ParseError("block " + std::to_string(block) + ": bad time-tag magic");
        std::uint32_t channel = 0;
        std::uint32_t count = 0;
        if (!get_le(in, channel) || !get_le(in, count))
            throw ParseError("block " + std::to_string(block) + ": truncated header");
        for (std::uint32_t k = 0; k < count; ++k) {
            std::int64_t t = 0;
            if (!get_le(in, t)) throw ParseError("block " + std::to_string(block) + ": truncated timestamps");
            if (t < 0) throw ParseError("block " + std::to_string(block) + ": negative timestamp");
            s.tags.push_back({t, channel});
        }
    }
    sort_tags(s.tags);
    if (!s.tags.empty()) s.span_ps = s.tags.back().t_ps + 1;
    s.validate();
    return s;
}

}  // namespace noems
