#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "noems/circuit.hpp"
#include "noems/errors.hpp"
#include "noems/photonsim.hpp"

using namespace noems;

namespace {

EmitterModel emitter(double e, double p, std::uint64_t seed = 1) {
    EmitterModel em;
    em.emission_prob = e;
    em.multiphoton_prob = p;
    em.rng_seed = seed;
    return em;
}

double duration_for(const EmitterModel& em, double pulses) { return pulses / em.pulse_rate_hz; }

G2Options short_normalization() {
    G2Options o;
    o.normalization_delay_ps = 1e8;
    o.window_ps = 20'000.0;
    return o;
}

}  // namespace

TEST_SUITE("photonsim") {

TEST_CASE("multiphoton probability and expected g2") {
    const double p = multiphoton_prob_for_g2(0.5, 0.007);
    const EmitterModel em = emitter(0.5, p);
    CHECK(em.expected_g2_zero() == doctest::Approx(0.007).epsilon(1e-12));
    CHECK(2.0 * p / std::pow(0.5 + p, 2) == doctest::Approx(0.007).epsilon(1e-12));
    CHECK(multiphoton_prob_for_g2(0.5, 0.0) == 0.0);
    CHECK_THROWS_AS(emitter(0.5, 0.6).validate(), std::invalid_argument);
    CHECK_THROWS_AS(emitter(1.5, 0.0).validate(), std::invalid_argument);
}

TEST_CASE("single photons never share a pulse window") {
    const auto em = emitter(0.7, 0.0);
    const auto s = generate_stream(em, duration_for(em, 100'000));
    s.validate();
    std::set<std::int64_t> windows;
    const double period = em.period_ps();
    for (const auto& t : s.tags) {
        // Pulse instants are rounded to whole picoseconds.
        const auto k = static_cast<std::int64_t>(std::floor((t.t_ps + 0.5) / period));
        CHECK(windows.insert(k).second);
        CHECK(t.t_ps - k * period < 0.5 * period);
    }
    const double n = 100'000.0;
    CHECK(std::abs(static_cast<double>(s.tags.size()) - 0.7 * n) < 5.0 * std::sqrt(n * 0.7 * 0.3));
}

TEST_CASE("unit emission gives one tag per pulse") {
    const auto em = emitter(1.0, 0.0);
    const auto s = generate_stream(em, duration_for(em, 100'000));
    CHECK(s.pulses == 100'000);
    CHECK(s.tags.size() == 100'000);
}

TEST_CASE("coherent source has exponential gaps") {
    auto em = emitter(0.5, 0.0, 11);
    em.poissonian = true;
    const auto s = generate_stream(em, 2e-3);
    CHECK(s.period_ps == 0.0);
    std::vector<double> gaps;
    for (std::size_t k = 1; k < s.tags.size(); ++k) gaps.push_back(double(s.tags[k].t_ps - s.tags[k - 1].t_ps));
    std::sort(gaps.begin(), gaps.end());
    const double rate = 0.5 * em.pulse_rate_hz * 1e-12;
    double d = 0.0;
    const double n = static_cast<double>(gaps.size());
    for (std::size_t k = 0; k < gaps.size(); ++k) {
        const double cdf = 1.0 - std::exp(-rate * gaps[k]);
        d = std::max({d, std::abs((k + 1) / n - cdf), std::abs(k / n - cdf)});
    }
    CHECK(d * std::sqrt(n) < 1.628);
}

TEST_CASE("routing fractions") {
    const auto em = emitter(0.5, 0.0);
    const auto s = generate_stream(em, duration_for(em, 200'000));
    const auto [all3, none4] = route_stream(s, 1.0, 5);
    CHECK(all3.tags.size() == s.tags.size());
    CHECK(none4.tags.empty());
    for (const auto& t : all3.tags) CHECK(t.channel == 3);

    const auto [a, b] = route_stream(s, 0.5, 5);
    const double n = static_cast<double>(s.tags.size());
    CHECK(std::abs(static_cast<double>(a.tags.size()) - 0.5 * n) < 3.0 * std::sqrt(0.25 * n));
    CHECK(a.tags.size() + b.tags.size() == s.tags.size());

    CHECK_THROWS_AS(route_stream(s, 1.5, 5), std::invalid_argument);
    CHECK_THROWS_AS(route_stream(s, -0.1, 5), std::invalid_argument);
}

TEST_CASE("routed counts follow the circuit fringe") {
    const Netlist nl = load_netlist(NOEMS_DATA_DIR "/mzi.pic");
    const auto em = emitter(0.5, 0.0);
    const auto s = generate_stream(em, duration_for(em, 200'000));
    const double n = static_cast<double>(s.tags.size());
    for (double v : {0.0, 4.0, 7.0, 10.0}) {
        const auto p = evaluate(nl, 950.0, v, 1);
        const double f = p.i3 / (p.i3 + p.i4);
        const auto routed = route_stream(s, f, 9);
        const double got = static_cast<double>(routed.first.tags.size());
        CHECK(std::abs(got - f * n) < 4.0 * std::sqrt(n * f * (1.0 - f)) + 1.0);
    }
}

TEST_CASE("g2 vanishes without multiphoton events") {
    const auto em = emitter(0.5, 0.0);
    const auto s = generate_stream(em, duration_for(em, 200'000));
    const auto h = g2_histogram(s, short_normalization());
    CHECK(h.g2_zero == 0.0);
    CHECK(h.g2_zero_error > 0.0);
    CHECK(h.normalization > 0.0);
}

TEST_CASE("coherent light is flat") {
    auto em = emitter(0.5, 0.0, 21);
    em.poissonian = true;
    const auto s = generate_stream(em, 1e-2);
    G2Options o;
    o.normalization_delay_ps = 1e8;
    o.window_ps = 10'000.0;
    const auto h = g2_histogram(s, o);
    int outliers = 0;
    for (std::size_t k = 0; k < h.g2.size(); ++k)
        if (std::abs(h.g2[k] - 1.0) > 3.0 * h.g2_error[k]) ++outliers;
    CHECK(outliers <= 2);
    CHECK(std::abs(h.g2_zero - 1.0) < 4.0 * h.g2_zero_error);
}

TEST_CASE("target g2 of 0.007 is recovered") {
    const auto em = emitter(0.5, multiphoton_prob_for_g2(0.5, 0.007), 3);
    const auto s = generate_stream(em, duration_for(em, 1'000'000));
    const auto h = g2_histogram(s);
    CHECK(std::abs(h.g2_zero - 0.007) < 4.0 * h.g2_zero_error);
    CHECK(h.g2_zero_error < 0.001);
}

TEST_CASE("histograms are symmetric and routing does not change them") {
    const auto em = emitter(0.5, 0.05, 4);
    const auto s = generate_stream(em, duration_for(em, 200'000));
    const auto h = g2_histogram(s, short_normalization());
    for (std::size_t k = 0; k < h.counts.size(); ++k) CHECK(h.counts[k] == h.counts[h.counts.size() - 1 - k]);
    const auto [a, b] = route_stream(s, 0.4, 8);
    const auto merged = merge_streams(a, b);
    REQUIRE(merged.tags.size() == s.tags.size());
    for (std::size_t k = 0; k < s.tags.size(); ++k) CHECK(merged.tags[k].t_ps == s.tags[k].t_ps);
    const auto hm = g2_histogram(merged, short_normalization());
    CHECK(hm.counts == h.counts);
}

TEST_CASE("streams are deterministic in the seed") {
    const auto a = generate_stream(emitter(0.5, 0.01, 7), 1e-4);
    const auto b = generate_stream(emitter(0.5, 0.01, 7), 1e-4);
    const auto c = generate_stream(emitter(0.5, 0.01, 8), 1e-4);
    CHECK(a.tags == b.tags);
    CHECK(a.tags != c.tags);
    CHECK(route_stream(a, 0.3, 2).first.tags == route_stream(b, 0.3, 2).first.tags);
}

TEST_CASE("tag files round trip") {
    const auto s = generate_stream(emitter(0.5, 0.02, 2), 2e-4);
    const auto [a, b] = route_stream(s, 0.5, 3);
    const auto merged = merge_streams(a, b);

    std::stringstream csv;
    write_tags_csv(csv, merged);
    CHECK(csv.str().rfind("t_ps,channel\n", 0) == 0);
    CHECK(read_tags_csv(csv).tags == merged.tags);

    std::stringstream bin(std::ios::in | std::ios::out | std::ios::binary);
    write_tags_binary(bin, merged);
    CHECK(bin.str().substr(0, 8) == "TTAG0001");
    CHECK(read_tags_binary(bin).tags == merged.tags);

    std::stringstream bad(std::string("TTAG0002\0\0\0\0\0\0\0\0", 16));
    CHECK_THROWS_AS(read_tags_binary(bad), ParseError);
}

TEST_CASE("invalid streams and histogram settings") {
    TimeTagStream unordered;
    unordered.tags = {{10, 0}, {5, 0}};
    CHECK_THROWS_AS(unordered.validate(), std::invalid_argument);
    TimeTagStream repeated;
    repeated.tags = {{5, 0}, {5, 0}};
    CHECK_THROWS_AS(repeated.validate(), std::invalid_argument);
    CHECK_THROWS_AS(g2_histogram(TimeTagStream{}), std::invalid_argument);
    const auto s = generate_stream(emitter(0.5, 0.0), 1e-4);
    CHECK_THROWS_AS(g2_histogram(s), std::invalid_argument);
    G2Options wide = short_normalization();
    wide.window_ps = 1e12;
    CHECK_THROWS_AS(g2_histogram(s, wide), std::invalid_argument);
}

}  // TEST_SUITE
