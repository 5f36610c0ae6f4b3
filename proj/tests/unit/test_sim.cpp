#include "dastm/error.hpp"
#include "dastm/sim/driving_test.hpp"
#include "dastm/sim/kernel.hpp"
#include "dastm/sim/scene.hpp"
#include "dastm/sim/traffic.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace dastm;
using namespace dastm::sim;

namespace {

// Straight coupled fiber, 1 m channels starting at road 0, alternating sign
// where requested.
CalibrationTable line_sensors(std::size_t count, double t, std::size_t flipped_from = SIZE_MAX) {
    std::vector<ChannelCalibration> e;
    for (std::size_t k = 0; k < count; ++k) {
        e.push_back({k, static_cast<double>(k), k >= flipped_from ? -t : t, {}});
    }
    return CalibrationTable(std::move(e));
}

SceneConfig quiet_scene(std::size_t channels, double duration_s) {
    SceneConfig s;
    s.record = RecordInfo{100.0, 0.0, 1.0, 10.0};
    s.duration_s = duration_s;
    s.sensors = line_sensors(channels, 1000.0);
    s.wheel.amplitude_ratio = 0.0;
    return s;
}

std::size_t argmax(std::span<const double> x) {
    return static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
}

} // namespace

TEST_SUITE("sim") {

TEST_CASE("kernel is even, linear in weight and decays with offset") {
    for (double d : {1.0, 5.0, 20.0}) {
        CHECK(quasistatic_kernel(d, 3.0, 1.5, 1.0) == quasistatic_kernel(-d, 3.0, 1.5, 1.0));
    }
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.1, 40.0);
    for (int i = 0; i < 200; ++i) {
        const double d = u(rng) - 20.0, lane = u(rng), w = u(rng);
        const double one = quasistatic_kernel(d, lane, 1.5, w);
        CHECK(quasistatic_kernel(d, lane, 1.5, 2.0 * w) == doctest::Approx(2.0 * one).epsilon(1e-14));
    }
    CHECK(quasistatic_kernel(0.0, 6.0, 1.5, 1.0) < quasistatic_kernel(0.0, 3.0, 1.5, 1.0));
    CHECK(kernel_peak(6.0, 1.5, 10.0) < kernel_peak(3.0, 1.5, 10.0));
    CHECK_THROWS_AS((void)quasistatic_kernel(0.0, 0.0, 1.5, 1.0), PreconditionError);
    CHECK_THROWS_AS((void)quasistatic_kernel(0.0, -1.0, 1.5, 1.0), PreconditionError);
    CHECK_THROWS_AS((void)quasistatic_kernel(0.0, 3.0, 0.0, 1.0), PreconditionError);
}

TEST_CASE("closed-form gauge average matches numerical averaging of the point kernel") {
    for (double d : {0.0, 3.0, 12.0}) {
        const int n = 20000;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += quasistatic_kernel(d - 5.0 + 10.0 * (i + 0.5) / n, 3.0, 1.5, 1.0);
        CHECK(gauge_averaged_kernel(d, 3.0, 1.5, 10.0) == doctest::Approx(acc / n).epsilon(1e-6));
    }
    CHECK(gauge_averaged_kernel(2.0, 3.0, 1.5, 0.0) == quasistatic_kernel(2.0, 3.0, 1.5, 1.0));
}

TEST_CASE("gauge_average: constant, linear and narrow-impulse fields") {
    SampledField c{0.0, 0.5, std::vector<double>(401, 4.0)};
    const ChannelGrid grid{20.0, 2.0, 70};
    for (double v : gauge_average(c, grid, 10.0)) CHECK(v == doctest::Approx(4.0));

    SampledField lin{0.0, 0.5, {}};
    for (int i = 0; i <= 400; ++i) lin.values.push_back(0.7 * 0.5 * i);
    const auto l = gauge_average(lin, grid, 10.0);
    for (std::size_t k = 0; k < l.size(); ++k) CHECK(l[k] == doctest::Approx(0.7 * (20.0 + 2.0 * static_cast<double>(k))));

    // One-sample-wide impulse: the channels that see it span one gauge length.
    SampledField imp{0.0, 0.1, std::vector<double>(2001, 0.0)};
    imp.values[1000] = 1.0;  // at 100 m
    const ChannelGrid fine{50.0, 0.1, 1001};
    const auto p = gauge_average(imp, fine, 10.0);
    const double top = *std::max_element(p.begin(), p.end());
    std::size_t width = 0;
    for (double v : p) width += v > 0.5 * top ? 1 : 0;
    const double plateau_m = static_cast<double>(width) * fine.spacing_m;
    MESSAGE("measured plateau width for a 10 m gauge: " << plateau_m << " m");
    CHECK(std::abs(plateau_m - 10.0) <= 0.3);

    CHECK_THROWS_AS((void)gauge_average(c, ChannelGrid{20.0, 12.0, 5}, 10.0), PreconditionError);
}

TEST_CASE("trajectories are monotone in the travel direction and invertible") {
    const auto out = Trajectory::constant_speed(Direction::Outbound, 3.0, 2.0, 0.0, 10.0);
    CHECK(out.position_at(4.0) == doctest::Approx(20.0));
    CHECK(out.time_at(55.0) == doctest::Approx(7.5));
    const auto in = Trajectory::constant_speed(Direction::Inbound, 6.0, 0.0, 400.0, 8.0);
    CHECK(in.position_at(10.0) == doctest::Approx(320.0));
    CHECK(in.time_at(320.0) == doctest::Approx(10.0));
    CHECK_THROWS(Trajectory({{0.0, 0.0}, {1.0, -1.0}}, Direction::Outbound, 3.0));
    CHECK_THROWS(Trajectory({{0.0, 0.0}, {1.0, 1.0}}, Direction::Outbound, 0.0));
}

TEST_CASE("single noise-free vehicle peaks at its ground-truth arrival") {
    auto scene = quiet_scene(120, 20.0);
    scene.sensors = line_sensors(120, 1000.0, 80);
    scene.vehicles.push_back({VehicleSpec{1.5, 2.7, 2, "car"}, Trajectory::constant_speed(Direction::Outbound, 3.0, 2.0, -20.0, 10.0)});
    const auto rec = synthesize(scene, 1);
    const double fs = scene.record.sample_rate_hz;
    std::size_t checked = 0;
    for (const auto& a : rec.truth.arrivals) {
        if (a.channel < 20 || a.channel >= 110) continue;
        const auto ch = rec.das.channel(a.channel);
        std::size_t idx;
        if (a.channel >= 80) {
            idx = static_cast<std::size_t>(std::min_element(ch.begin(), ch.end()) - ch.begin());
            CHECK(ch[idx] < 0.0);
        } else {
            idx = argmax(ch);
        }
        CHECK(std::abs(static_cast<double>(idx) / fs - a.time_s) <= 1.0 / fs + 1e-12);
        // Arrival agrees with the trajectory inverse.
        const double expect = rec.truth.trajectories[0].time_at(rec.truth.sensors.find(a.channel)->road_position_m);
        CHECK(std::abs(a.time_s - expect) <= 1.0 / fs);
        ++checked;
    }
    CHECK(checked == 90);
    // Peak equals |T| x weight at the reference lane.
    CHECK(rec.das.channel(50)[argmax(rec.das.channel(50))] == doctest::Approx(1500.0).epsilon(1e-3));
}

TEST_CASE("superposition: crossing vehicles add exactly") {
    auto scene = quiet_scene(200, 24.0);
    const VehicleSpec car{1.4, 2.7, 2, ""};
    const SceneVehicle a{car, Trajectory::constant_speed(Direction::Outbound, 3.0, 2.0, 0.0, 10.0)};
    const SceneVehicle b{car, Trajectory::constant_speed(Direction::Inbound, 3.0, 2.0, 199.0, 10.0)};
    auto s1 = scene, s2 = scene, both = scene;
    s1.vehicles = {a};
    s2.vehicles = {b};
    both.vehicles = {a, b};
    const auto r1 = synthesize(s1, 9), r2 = synthesize(s2, 9), rb = synthesize(both, 9);
    const std::size_t k = 100;  // both arrive at 11.95 s
    for (std::size_t i = 0; i < rb.das.sample_count(); ++i) {
        CHECK(rb.das.channel(k)[i] == doctest::Approx(r1.das.channel(k)[i] + r2.das.channel(k)[i]).epsilon(1e-12));
    }
}

TEST_CASE("property: synthesis is deterministic in the seed") {
    auto scene = quiet_scene(150, 30.0);
    scene.noise_sigma = 10.0;
    scene.drift_amplitude = 5.0;
    scene.wheel.amplitude_ratio = 0.3;
    scene.road_features = {40.0, 90.0};
    TrafficConfig tc;
    tc.vehicle_count = 6;
    tc.road_end_m = 149.0;
    tc.last_entry_s = 15.0;
    scene.vehicles = generate_traffic(tc, 5);
    const auto a = synthesize(scene, 77), b = synthesize(scene, 77), c = synthesize(scene, 78);
    CHECK(a.das.data() == b.das.data());
    CHECK(a.das.data() != c.das.data());
    CHECK(generate_traffic(tc, 5).size() == 6);
}

TEST_CASE("property: doubling weight doubles the noise-free quasi-static response") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> w(0.8, 30.0);
    for (int trial = 0; trial < 5; ++trial) {
        auto scene = quiet_scene(80, 14.0);
        const double tons = w(rng);
        const auto traj = Trajectory::constant_speed(trial % 2 ? Direction::Inbound : Direction::Outbound,
                                                     3.0 + trial, 1.0, trial % 2 ? 79.0 : 0.0, 9.0);
        auto heavy = scene;
        scene.vehicles.push_back({VehicleSpec{tons, 2.7, 2, ""}, traj});
        heavy.vehicles.push_back({VehicleSpec{2.0 * tons, 2.7, 2, ""}, traj});
        const auto r1 = synthesize(scene, 4), r2 = synthesize(heavy, 4);
        for (std::size_t k = 10; k < 70; k += 7) {
            const auto c1 = r1.das.channel(k), c2 = r2.das.channel(k);
            const double p1 = c1[argmax(c1)], p2 = c2[argmax(c2)];
            CHECK(p2 == doctest::Approx(2.0 * p1).epsilon(1e-6));
        }
    }
}

TEST_CASE("spooled channels carry noise only and overlapping spools are rejected") {
    auto scene = quiet_scene(100, 12.0);
    scene.spool_segments = {{40, 10.0}};
    scene.vehicles.push_back({VehicleSpec{}, Trajectory::constant_speed(Direction::Outbound, 3.0, 1.0, 0.0, 10.0)});
    const auto rec = synthesize(scene, 3);
    for (std::size_t k = 40; k < 50; ++k) {
        for (double v : rec.das.channel(k)) CHECK(v == 0.0);
    }
    CHECK(std::none_of(rec.truth.arrivals.begin(), rec.truth.arrivals.end(),
                       [](const ArrivalTruth& a) { return a.channel >= 40 && a.channel < 50; }));
    CHECK_THROWS_AS((void)spool_channels({{10, 10.0}, {15, 5.0}}, 100, 1.0), ConfigError);
    scene.spool_segments = {{10, 10.0}, {15, 5.0}};
    CHECK_THROWS_AS((void)synthesize(scene, 3), ConfigError);
}

TEST_CASE("ground-truth sensor table respects the layout") {
    FiberLayout layout;
    layout.channel_count = 300;
    layout.spools = {{100, 20.0}};
    const auto t = build_sensor_table(layout, 8);
    REQUIRE(t.size() == 300);
    double prev = -1e9;
    std::size_t flipped = 0;
    for (const auto& e : t.entries()) {
        CHECK(e.road_position_m >= prev);
        prev = e.road_position_m;
        if (e.channel >= 100 && e.channel < 120) {
            CHECK(e.spooled());
            continue;
        }
        REQUIRE(e.transmissibility);
        CHECK(std::abs(*e.transmissibility) >= layout.transmissibility_min - 1e-9);
        CHECK(std::abs(*e.transmissibility) <= layout.transmissibility_max + 1e-9);
        flipped += *e.transmissibility < 0 ? 1 : 0;
    }
    CHECK(flipped > 0);
    CHECK(t.find(120)->road_position_m == doctest::Approx(t.find(99)->road_position_m + 1.0));
}

TEST_CASE("driving test logs a clock offset between taps and GPS") {
    DrivingTestConfig cfg;
    FiberLayout layout;
    layout.channel_count = 120;
    layout.first_channel_road_m = 50.0;
    cfg.sensors = build_sensor_table(layout, 2, &cfg.centerline);
    cfg.runs = 2;
    const auto dt = synthesize_driving_test(cfg, 6);
    REQUIRE(dt.runs.size() == 2);
    REQUIRE(dt.gps.size() == 2);
    REQUIRE(dt.tap_reference_times_s.size() == cfg.tap_count);
    for (std::size_t i = 0; i < cfg.tap_count; ++i) {
        CHECK(dt.tap_reference_times_s[i] - dt.tap_das_times_s[i] == doctest::Approx(cfg.clock_offset_s));
    }
    for (const auto& run : dt.gps) {
        for (std::size_t i = 1; i < run.size(); ++i) CHECK(run[i].time_s > run[i - 1].time_s);
    }
}

}
