#include "dastm/detect/detector.hpp"
#include "dastm/detect/prominence.hpp"
#include "dastm/error.hpp"
#include "dastm/sim/scene.hpp"

#include "oracles/brute_prominence.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace dastm;
using namespace dastm::detect;

namespace {

constexpr double kFs = 100.0;

// Random walk quantized to a coarse grid so plateaus and ties are common.
std::vector<double> rough_series(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> step(0.0, 1.0);
    std::vector<double> x(n);
    double v = 0.0;
    for (auto& s : x) {
        v += step(rng);
        s = std::round(v * 2.0) / 2.0;
    }
    return x;
}

void check_against_oracle(const std::vector<double>& x, double window_s, ProminenceMode mode) {
    const auto got = prominence_scan(x, kFs, window_s, Polarity::Peak, mode);
    const std::size_t half = mode == ProminenceMode::Global
                                 ? x.size()
                                 : static_cast<std::size_t>(std::llround(window_s * kFs / 2.0));
    const auto want = oracle::brute_prominence(x, half);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].index == want[i].index);
        CHECK(std::abs(got[i].prominence - want[i].prominence) <= 1e-12);
    }
}

CalibrationTable flat_table(std::size_t channels, double t) {
    std::vector<ChannelCalibration> e;
    for (std::size_t k = 0; k < channels; ++k) e.push_back({k, static_cast<double>(k), t, {}});
    return CalibrationTable(std::move(e));
}

// One vehicle at 10 m/s over a 1 m channel line; channel 30 arrives at 5 s.
sim::Recording single_vehicle(double noise, std::size_t flip_from = SIZE_MAX) {
    sim::SceneConfig s;
    s.record = RecordInfo{kFs, 0.0, 1.0, 10.0};
    s.duration_s = 12.0;
    std::vector<ChannelCalibration> e;
    for (std::size_t k = 0; k < 60; ++k) e.push_back({k, static_cast<double>(k), k >= flip_from ? -5000.0 : 5000.0, {}});
    s.sensors = CalibrationTable(std::move(e));
    s.noise_sigma = noise;
    s.wheel.amplitude_ratio = 0.0;
    s.vehicles.push_back({sim::VehicleSpec{1.47, 2.7, 2, ""},
                          sim::Trajectory::constant_speed(Direction::Outbound, 3.0, 2.0, 0.0, 10.0)});
    return sim::synthesize(s, 31);
}

bool same_detections(const std::vector<Detection>& a, const std::vector<Detection>& b, double prominence_scale) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].channel != b[i].channel || std::abs(a[i].time_s - b[i].time_s) > 1e-9) return false;
        if (std::abs(a[i].prominence * prominence_scale - b[i].prominence) > 1e-9 * std::abs(b[i].prominence)) return false;
    }
    return true;
}

} // namespace

TEST_SUITE("detect") {

TEST_CASE("triangle peak has its height as prominence, ramps have none") {
    std::vector<double> tri(201, 0.0);
    for (int i = 0; i <= 200; ++i) tri[static_cast<std::size_t>(i)] = std::max(0.0, 7.0 - 0.1 * std::abs(i - 100));
    const auto p = prominence_scan(tri, kFs, 10.0, Polarity::Peak);
    REQUIRE(p.size() == 1);
    CHECK(p[0].index == 100);
    CHECK(p[0].prominence == doctest::Approx(7.0));
    CHECK(p[0].time_s == doctest::Approx(1.0));

    std::vector<double> ramp(500);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 0.3 * static_cast<double>(i);
    CHECK(prominence_scan(ramp, kFs, 1.0, Polarity::Peak).empty());
    CHECK(prominence_scan(ramp, kFs, 1.0, Polarity::Valley).empty());
    CHECK(prominence_scan(std::vector<double>{}, kFs, 1.0, Polarity::Peak).empty());
}

TEST_CASE("valleys are peaks of the negated series") {
    std::mt19937_64 rng(4);
    const auto x = rough_series(rng, 3000);
    std::vector<double> neg(x.size());
    std::transform(x.begin(), x.end(), neg.begin(), [](double v) { return -v; });
    const auto v = prominence_scan(x, kFs, 1.0, Polarity::Valley);
    const auto p = prominence_scan(neg, kFs, 1.0, Polarity::Peak);
    REQUIRE(v.size() == p.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(v[i].index == p[i].index);
        CHECK(v[i].prominence == p[i].prominence);
        CHECK(v[i].time_s == p[i].time_s);
    }
}

TEST_CASE("prominence scan matches the brute-force oracle") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 20; ++trial) {
        auto x = rough_series(rng, 2000);
        if (trial % 2) {
            for (auto& v : x) v += n01(rng);  // continuous values: no ties
        }
        for (double w : {0.05, 1.0, 3.3}) check_against_oracle(x, w, ProminenceMode::Windowed);
        check_against_oracle(x, 1.0, ProminenceMode::Global);
    }
}

TEST_CASE("prominence_at agrees with the scan at each extremum") {
    std::mt19937_64 rng(8);
    const auto x = rough_series(rng, 1500);
    for (const auto& e : prominence_scan(x, kFs, 1.0, Polarity::Peak)) {
        CHECK(prominence_at(x, e.index, 50, Polarity::Peak) == e.prominence);
    }
}

TEST_CASE("parabolic refinement recovers an off-grid vertex") {
    std::vector<double> x(21);
    const double vertex = 10.3;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 5.0 - 0.2 * (static_cast<double>(i) - vertex) * (static_cast<double>(i) - vertex);
    CHECK(parabolic_offset(x, 10) == doctest::Approx(0.3));
    const auto p = prominence_scan(x, kFs, 1.0, Polarity::Peak);
    REQUIRE(p.size() == 1);
    CHECK(p[0].time_s == doctest::Approx(vertex / kFs));
    CHECK(parabolic_offset(x, 0) == 0.0);
    const std::vector<double> flat{1.0, 1.0, 1.0};
    CHECK(parabolic_offset(flat, 1) == 0.0);
}

TEST_CASE("single vehicle gives one detection at its arrival, as a valley on flipped channels") {
    const auto rec = single_vehicle(10.0, 30);
    const auto& table = rec.truth.sensors;
    DetectorConfig cfg;
    for (std::size_t k : {15, 25, 35, 45}) {
        const auto got = per_sensor_detect(rec.das.channel(k), kFs, *table.find(k), table, cfg);
        REQUIRE(got.detections.size() == 1);
        const auto& d = got.detections[0];
        const auto it = std::find_if(rec.truth.arrivals.begin(), rec.truth.arrivals.end(),
                                     [&](const sim::ArrivalTruth& a) { return a.channel == k; });
        REQUIRE(it != rec.truth.arrivals.end());
        CHECK(std::abs(d.time_s - it->time_s) <= 1.0 / kFs);
        CHECK(d.channel == k);
        CHECK(d.polarity == (k >= 30 ? Polarity::Valley : Polarity::Peak));
    }
}

TEST_CASE("threshold and signal scale together") {
    const auto rec = single_vehicle(10.0);
    std::vector<ChannelCalibration> e = rec.truth.sensors.entries();
    e[0].transmissibility = 1000.0;  // keeps T0 fixed when channel 20 doubles
    const CalibrationTable base(e);
    e[20].transmissibility = 10000.0;
    const CalibrationTable doubled(e);
    DetectorConfig cfg;
    cfg.r0 = 0.5;
    const auto ch = rec.das.channel_copy(20);
    std::vector<double> twice(ch.size());
    std::transform(ch.begin(), ch.end(), twice.begin(), [](double v) { return 2.0 * v; });
    const auto a = per_sensor_detect(ch, kFs, base[20], base, cfg).detections;
    const auto b = per_sensor_detect(twice, kFs, doubled[20], doubled, cfg).detections;
    CHECK(!a.empty());
    CHECK(same_detections(a, b, 2.0));
}

TEST_CASE("property: polarity symmetry, amplitude equivariance and r0 monotonicity") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u(0.1, 50.0);
    const auto table = flat_table(4, 300.0);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> x(2000);
        double drift = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            drift += 0.3 * n01(rng);
            x[i] = drift + 4.0 * n01(rng) + 60.0 * std::exp(-0.5 * std::pow((static_cast<double>(i) - 900.0) / 40.0, 2));
        }
        DetectorConfig cfg;
        cfg.r0 = u(rng) / 10.0;

        std::vector<ChannelCalibration> neg_e = table.entries();
        neg_e[1].transmissibility = -300.0;
        const CalibrationTable neg_table(neg_e);
        std::vector<double> minus(x.size());
        std::transform(x.begin(), x.end(), minus.begin(), [](double v) { return -v; });
        const auto pos = per_sensor_detect(x, kFs, table[1], table, cfg).detections;
        const auto neg = per_sensor_detect(minus, kFs, neg_table[1], neg_table, cfg).detections;
        REQUIRE(pos.size() == neg.size());
        for (std::size_t i = 0; i < pos.size(); ++i) {
            CHECK(pos[i].time_s == neg[i].time_s);
            CHECK(pos[i].prominence == neg[i].prominence);
            CHECK(neg[i].polarity == Polarity::Valley);
        }

        const double a = u(rng);
        std::vector<double> scaled(x.size());
        std::transform(x.begin(), x.end(), scaled.begin(), [a](double v) { return a * v; });
        DetectorConfig scaled_cfg = cfg;
        scaled_cfg.r0 = a * cfg.r0;
        const auto sc = per_sensor_detect(scaled, kFs, table[1], table, scaled_cfg).detections;
        CHECK(same_detections(pos, sc, a));

        DetectorConfig higher = cfg;
        higher.r0 = cfg.r0 * (1.0 + u(rng));
        const auto hi = per_sensor_detect(x, kFs, table[1], table, higher).detections;
        CHECK(hi.size() <= pos.size());
        for (const auto& d : hi) {
            CHECK(std::any_of(pos.begin(), pos.end(), [&](const Detection& p) { return p.time_s == d.time_s; }));
        }
    }
}

TEST_CASE("nearby events merge into the most prominent one") {
    std::vector<double> x(1000, 0.0);
    auto bump = [&](double center, double height) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] += height * std::exp(-0.5 * std::pow((static_cast<double>(i) - center) / 2.0, 2));
        }
    };
    bump(400.0, 50.0);
    bump(412.0, 80.0);  // 0.12 s later
    bump(700.0, 60.0);
    const auto table = flat_table(1, 100.0);
    DetectorConfig cfg;
    cfg.span_s = 0.05;
    const auto got = per_sensor_detect(x, kFs, table[0], table, cfg).detections;
    REQUIRE(got.size() == 2);
    CHECK(got[0].time_s == doctest::Approx(4.12).epsilon(1e-3));
    CHECK(got[1].time_s == doctest::Approx(7.0).epsilon(1e-3));
}

TEST_CASE("spooled channels are skipped and reported") {
    const auto rec = single_vehicle(10.0);
    std::vector<ChannelCalibration> e = rec.truth.sensors.entries();
    e[10].transmissibility.reset();
    e[11].transmissibility.reset();
    const CalibrationTable table(e);
    const auto one = per_sensor_detect(rec.das.channel(10), kFs, table[10], table, DetectorConfig{});
    CHECK(one.skipped_spooled);
    CHECK(one.detections.empty());
    const auto all = detect_all(rec.das, table, DetectorConfig{});
    CHECK(all.skipped_channels == std::vector<std::size_t>{10, 11});
    // r0 sits just above smoothed noise, so a stray small event is allowed
    std::vector<int> strong(60, 0);
    for (const auto& d : all.detections) strong[d.channel] += d.prominence > 1000.0 ? 1 : 0;
    for (std::size_t k = 0; k < 60; ++k) CHECK(strong[k] == (k == 10 || k == 11 ? 0 : 1));
    CHECK(std::is_sorted(all.detections.begin(), all.detections.end(), [](const Detection& a, const Detection& b) {
        return a.channel != b.channel ? a.channel < b.channel : a.time_s < b.time_s;
    }));
}

TEST_CASE("detector configuration is validated") {
    DetectorConfig c;
    c.r0 = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = DetectorConfig{};
    c.window_s = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = DetectorConfig{};
    CHECK_NOTHROW(c.validate());
}

}
