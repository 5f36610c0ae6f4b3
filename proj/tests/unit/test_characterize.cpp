#include "dastm/characterize/characterize.hpp"
#include "dastm/detect/detector.hpp"
#include "dastm/error.hpp"
#include "dastm/sim/scene.hpp"
#include "dastm/track/tracker.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace dastm;
using namespace dastm::characterize;

TEST_SUITE_BEGIN("characterize");

namespace {

constexpr double kFs = 250.0;

// Decaying 8 Hz burst starting at each impulse time.
std::vector<double> axle_bursts(const std::vector<double>& times, double duration_s, double amplitude = 1.0) {
    std::vector<double> s(static_cast<std::size_t>(duration_s * kFs), 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double t = static_cast<double>(i) / kFs;
        for (double t0 : times) {
            if (t < t0) continue;
            const double u = t - t0;
            s[i] += amplitude * std::exp(-u / 0.03) * std::sin(2.0 * std::numbers::pi * 8.0 * u);
        }
    }
    return s;
}

track::TrackPoint point(std::size_t channel, double x, double t, double speed, std::optional<double> prominence) {
    track::TrackPoint p;
    p.channel = channel;
    p.x_m = x;
    p.smoothed.mean << t, 1.0 / speed;
    p.smoothed.cov = Eigen::Matrix2d::Identity() * 1e-4;
    p.filtered = p.smoothed;
    if (prominence) {
        p.detection = Detection{channel, t, *prominence, Polarity::Peak};
        p.detection_id = channel;
    }
    return p;
}

CalibrationTable varied_table(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mag(264.0, 21704.0);
    std::bernoulli_distribution flip(0.2);
    std::vector<ChannelCalibration> e;
    for (std::size_t k = 0; k < count; ++k) {
        const double t = mag(rng);
        e.push_back({k, static_cast<double>(k), flip(rng) ? -t : t, {}});
    }
    return CalibrationTable(std::move(e));
}

// Track with P_k = W |T_k| (times a per-channel factor) at every channel.
track::VehicleTrack weighted_track(const CalibrationTable& table, double w, const std::vector<double>& factors = {}) {
    track::VehicleTrack trk;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& e = table[i];
        const double f = factors.empty() ? 1.0 : factors[i];
        const auto p = e.spooled() ? std::optional<double>(123.0)
                                   : std::optional<double>(w * std::abs(*e.transmissibility) * f);
        trk.points.push_back(point(e.channel, e.road_position_m, e.road_position_m / 10.0, 10.0, p));
    }
    return trk;
}

} // namespace

TEST_CASE("autocorrelation lag of two axle bursts times speed gives the wheelbase") {
    for (double v : {10.0, 20.0}) {
        CAPTURE(v);
        const double tau = 3.0 / v;
        const auto s = axle_bursts({1.0, 1.0 + tau}, 2.0);
        const auto lag = autocorrelation_lag(s, kFs, 1.5 / v, 12.0 / v);
        REQUIRE(lag);
        CHECK(std::abs(*lag * v - 3.0) <= v / kFs);
    }
}

TEST_CASE("autocorrelation lag ignores amplitude and rejects empty or uncorrelated input") {
    const auto s = axle_bursts({0.5, 0.8}, 1.5);
    auto scaled = s;
    for (auto& x : scaled) x *= 37.5;
    const auto a = autocorrelation_lag(s, kFs, 0.15, 1.2);
    const auto b = autocorrelation_lag(scaled, kFs, 0.15, 1.2);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(*a == doctest::Approx(*b).epsilon(1e-12));

    const std::vector<double> zeros(300, 0.0);
    CHECK_FALSE(autocorrelation_lag(zeros, kFs, 0.15, 1.2));
    // a single burst has no second lobe anywhere near the zero-lag value
    const auto single = axle_bursts({0.5}, 1.5);
    CHECK_FALSE(autocorrelation_lag(single, kFs, 0.15, 1.2, 0.2));
    CHECK_THROWS_AS((void)autocorrelation_lag(s, kFs, 0.0, 1.2), PreconditionError);
    CHECK_THROWS_AS((void)autocorrelation_lag(s, kFs, 0.5, 0.4), PreconditionError);
}

TEST_CASE("weight inverts the prominence construction exactly and scales linearly") {
    const auto table = varied_table(200, 5);
    const auto est = estimate_weight(weighted_track(table, 1.47), table);
    REQUIRE(est);
    CHECK(est->channels == 200);
    CHECK(std::abs(est->value - 1.47) <= 1e-9);
    CHECK(est->spread <= 1e-9);

    const auto doubled = estimate_weight(weighted_track(table, 2.94), table);
    REQUIRE(doubled);
    CHECK(std::abs(doubled->value / est->value - 2.0) <= 1e-6);
}

TEST_CASE("weight averaging suppresses per-channel multiplicative noise") {
    const auto table = varied_table(200, 9);
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n01;
    std::vector<double> f;
    for (std::size_t i = 0; i < 200; ++i) f.push_back(1.0 + 0.2 * n01(rng));
    const auto est = estimate_weight(weighted_track(table, 1.47, f), table);
    REQUIRE(est);
    CHECK(std::abs(est->value - 1.47) / 1.47 <= 0.03);
    // sample standard deviation of the ratios, computed separately
    double mean = 0.0;
    for (double x : f) mean += 1.47 * x;
    mean /= 200.0;
    double ss = 0.0;
    for (double x : f) ss += (1.47 * x - mean) * (1.47 * x - mean);
    CHECK(est->spread == doctest::Approx(std::sqrt(ss / 199.0)).epsilon(1e-9));
}

TEST_CASE("weight is invariant to channel order and skips spooled or unassociated channels") {
    auto table = varied_table(60, 3);
    auto trk = weighted_track(table, 2.0, std::vector<double>(60, 1.0));
    for (std::size_t i = 0; i < 60; ++i) trk.points[i].detection->prominence *= 1.0 + 0.01 * static_cast<double>(i % 7);
    const auto base = estimate_weight(trk, table);
    REQUIRE(base);
    auto shuffled = trk;
    std::mt19937_64 rng(4);
    std::shuffle(shuffled.points.begin(), shuffled.points.end(), rng);
    const auto perm = estimate_weight(shuffled, table);
    REQUIRE(perm);
    CHECK(perm->value == doctest::Approx(base->value).epsilon(1e-12));

    table.set_transmissibility(10, std::nullopt);
    table.set_transmissibility(11, std::nullopt);
    trk.points[20].detection.reset();
    const auto skipped = estimate_weight(trk, table);
    REQUIRE(skipped);
    CHECK(skipped->channels == 57);

    CHECK_FALSE(estimate_weight(trk, table, 58));
    track::VehicleTrack empty;
    CHECK_FALSE(estimate_weight(empty, table));
}

TEST_CASE("crosstalk channels are those an opposite-lane track occupies at the same time") {
    track::VehicleTrack out;
    out.id = 1;
    out.direction = Direction::Outbound;
    track::VehicleTrack in;
    in.id = 2;
    in.direction = Direction::Inbound;
    track::VehicleTrack same;
    same.id = 3;
    same.direction = Direction::Outbound;
    // outbound from x=0 at t=0, inbound from x=100 at t=0; both 10 m/s, meeting at x=50, t=5
    for (std::size_t k = 0; k <= 100; ++k) {
        const double x = static_cast<double>(k);
        out.points.push_back(point(k, x, x / 10.0, 10.0, 100.0));
        in.points.push_back(point(100 - k, 100.0 - x, x / 10.0, 10.0, 100.0));
        same.points.push_back(point(k, x, x / 10.0 + 0.5, 10.0, 100.0));
    }
    const std::vector<track::VehicleTrack> all{out, in, same};
    const auto hits = crosstalk_channels(out, all, 25.0);
    // inbound reaches channel k at (100-k)/10; gap |2k-100|/10 s at 10 m/s is under 25 m for 38 <= k <= 62
    std::vector<std::size_t> expect;
    for (std::size_t k = 0; k <= 100; ++k) {
        if (std::abs(2.0 * static_cast<double>(k) - 100.0) < 25.0) expect.push_back(k);
    }
    CHECK(hits == expect);
    CHECK_THROWS_AS((void)crosstalk_channels(out, all, 0.0), PreconditionError);

    const auto dropped = drop_channels(out, hits);
    CHECK(dropped.associated_count() == 101 - hits.size());
    CHECK(dropped.points.size() == out.points.size());
}

TEST_CASE("characterize config validation") {
    CharacterizeConfig c;
    CHECK_NOTHROW(c.validate());
    auto bad = c;
    bad.wheelbase.max_wheelbase_m = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.wheelbase.min_correlation = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.prominence_half_window_m = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.min_weight_channels = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

namespace {

sim::SceneConfig feature_scene() {
    sim::SceneConfig scene;
    scene.record = RecordInfo{kFs, 0.0, 1.0, 10.0};
    scene.duration_s = 30.0;
    std::vector<ChannelCalibration> e;
    for (std::size_t k = 0; k < 160; ++k) e.push_back({k, static_cast<double>(k), 3000.0, {}});
    scene.sensors = CalibrationTable(e);
    scene.road_features = {80.0};
    scene.noise_sigma = 10.0;
    return scene;
}

std::vector<std::size_t> channels_near(const CalibrationTable& t, double x, double radius) {
    std::vector<std::size_t> out;
    for (const auto& e : t.entries()) {
        if (std::abs(e.road_position_m - x) <= radius) out.push_back(e.channel);
    }
    return out;
}

} // namespace

TEST_CASE("simulated fleet wheelbases are recovered within 4 percent") {
    const auto scene = feature_scene();
    const auto features = channels_near(scene.sensors, 80.0, 2.0);
    std::uint64_t seed = 40;
    for (double wb : {2.7, 3.4, 7.5}) {
        for (double v : {8.0, 15.0}) {
            CAPTURE(wb);
            CAPTURE(v);
            auto s = scene;
            const auto traj = sim::Trajectory::constant_speed(Direction::Outbound, 3.0, 3.0, 0.0, v);
            s.vehicles = {{sim::VehicleSpec{2.0, wb, 2, ""}, traj}};
            const auto rec = sim::synthesize(s, ++seed);
            track::VehicleTrack trk;
            for (const auto& e : s.sensors.entries()) {
                trk.points.push_back(point(e.channel, e.road_position_m, traj.time_at(e.road_position_m), v, 100.0));
            }
            const auto est = estimate_wheelbase(trk, rec.das, features);
            REQUIRE(est);
            CHECK(est->channels >= 3);
            CHECK(std::abs(est->value - wb) / wb <= 0.04);
        }
    }
}

TEST_CASE("wheelbase is absent without feature channels or signal") {
    const auto scene = feature_scene();
    const auto rec = sim::synthesize(scene, 2);  // no vehicles
    track::VehicleTrack trk;
    for (const auto& e : scene.sensors.entries()) {
        trk.points.push_back(point(e.channel, e.road_position_m, 5.0 + e.road_position_m / 10.0, 10.0, 100.0));
    }
    CHECK_FALSE(estimate_wheelbase(trk, rec.das, channels_near(scene.sensors, 80.0, 2.0)));
    CHECK_FALSE(estimate_wheelbase(trk, rec.das, {}));
    WheelbaseConfig bad;
    bad.min_wheelbase_m = 0.0;
    const std::vector<std::size_t> none;
    CHECK_THROWS_AS((void)estimate_wheelbase(trk, rec.das, none, bad), PreconditionError);
}

TEST_CASE("characterize_track recovers weight and wheelbase after detection and tracking") {
    auto scene = feature_scene();
    scene.vehicles = {{sim::VehicleSpec{1.8, 3.4, 2, ""},
                       sim::Trajectory::constant_speed(Direction::Outbound, 3.0, 3.0, 0.0, 12.0)}};
    const auto rec = sim::synthesize(scene, 77);
    detect::DetectorConfig dcfg;
    dcfg.r0 = 50.0;
    const auto dets = detect::detect_all(rec.das, rec.truth.sensors, dcfg).detections;
    const std::vector<track::Segment> all{{0, 159}};
    const auto res = track::track_multi(dets, rec.truth.sensors, all, track::TrackerConfig{});
    REQUIRE(res.tracks.size() == 1);
    const auto c = characterize_track(res.tracks[0], res.tracks, rec.das, rec.truth.sensors,
                                      channels_near(rec.truth.sensors, 80.0, 2.0));
    CHECK(c.track_id == res.tracks[0].id);
    REQUIRE(c.weight_tons);
    REQUIRE(c.wheelbase_m);
    CHECK(std::abs(c.weight_tons->value - 1.8) / 1.8 <= 0.12);
    CHECK(std::abs(c.wheelbase_m->value - 3.4) / 3.4 <= 0.04);
    CHECK(c.weight_tons->spread >= 0.0);
    CHECK(c.wheelbase_m->spread >= 0.0);
}

TEST_SUITE_END();
