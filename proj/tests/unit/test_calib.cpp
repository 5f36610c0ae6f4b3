#include "dastm/calib/calibration.hpp"
#include "dastm/error.hpp"
#include "dastm/sim/driving_test.hpp"
#include "dastm/sim/kernel.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace dastm;
using namespace dastm::calib;

namespace {

const GeoPoint kOrigin{37.3382, -121.8863};

// Coupled channels every metre from road 50 m with constant |T|; channels in
// [flip_from, flip_to) are flipped.
CalibrationTable truth_line(std::size_t count, double t, std::size_t flip_from = 0, std::size_t flip_to = 0) {
    std::vector<ChannelCalibration> e;
    for (std::size_t k = 0; k < count; ++k) {
        const bool flip = k >= flip_from && k < flip_to;
        e.push_back({k, 50.0 + static_cast<double>(k), flip ? -t : t, {}});
    }
    return CalibrationTable(std::move(e));
}

sim::DrivingTestConfig quiet_drive(const CalibrationTable& truth) {
    sim::DrivingTestConfig cfg;
    cfg.sensors = truth;
    cfg.centerline = Centerline::straight(kOrigin, 60.0, 400.0);
    cfg.record = RecordInfo{250.0, 0.0, 1.0, 10.0};
    cfg.runs = 1;
    cfg.gps_sigma_m = 0.0;
    cfg.noise_sigma = 0.0;
    cfg.drift_amplitude = 0.0;
    return cfg;
}

struct Located {
    std::vector<ChannelLocation> locations;
    std::vector<GpsTrack> tracks;
};

Located locate(const sim::DrivingTest& dt, std::size_t runs, double offset_s, const GeolocationConfig& g = {}) {
    std::vector<ChannelMatrix> records;
    Located out;
    for (std::size_t r = 0; r < runs; ++r) {
        records.push_back(dt.runs[r].das);
        out.tracks.emplace_back(dt.gps[r], dt.centerline);
    }
    out.locations = geolocate_channels(records, out.tracks, offset_s, g);
    return out;
}

} // namespace

TEST_SUITE("calib") {

TEST_CASE("clock sync averages the tap offsets") {
    const std::vector<TapEvent> one{{10.0, 12.5}};
    const auto a = sync_clocks(one);
    CHECK(a.offset_s == doctest::Approx(2.5));
    CHECK_FALSE(a.spread_s.has_value());
    const std::vector<TapEvent> two{{10.0, 12.5}, {20.0, 22.7}};
    const auto b = sync_clocks(two);
    CHECK(b.offset_s == doctest::Approx(2.6));
    REQUIRE(b.spread_s);
    CHECK(*b.spread_s == doctest::Approx(0.2));
    CHECK_THROWS_AS((void)sync_clocks(std::vector<TapEvent>{}), PreconditionError);
    const std::vector<TapEvent> bad{{std::nan(""), 1.0}};
    CHECK_THROWS_AS((void)sync_clocks(bad), DataError);
}

TEST_CASE("tap test recovers an injected clock offset to within one sample") {
    auto cfg = quiet_drive(truth_line(60, 5000.0));
    cfg.noise_sigma = 10.0;
    const auto dt = sim::synthesize_driving_test(cfg, 4);
    const auto das = locate_taps(dt.tap_record, cfg.tap_channel, cfg.tap_count);
    REQUIRE(das.size() == cfg.tap_count);
    std::vector<TapEvent> taps;
    for (std::size_t i = 0; i < das.size(); ++i) taps.push_back({das[i], dt.tap_reference_times_s[i]});
    const auto sync = sync_clocks(taps);
    CHECK(std::abs(sync.offset_s - 3.21) <= 1.0 / cfg.record.sample_rate_hz);
}

TEST_CASE("noise-free drive places a channel within half a metre") {
    const auto cfg = quiet_drive(truth_line(120, 5000.0));
    const auto dt = sim::synthesize_driving_test(cfg, 1);
    const auto loc = locate(dt, 1, cfg.clock_offset_s);
    REQUIRE(loc.locations.size() == 120);
    const auto& ch = loc.locations[50];  // road 100 m
    REQUIRE(ch.road_position_m);
    CHECK(std::abs(*ch.road_position_m - 100.0) <= 0.5);
    std::size_t ok = 0;
    for (const auto& l : loc.locations) {
        if (l.road_position_m && std::abs(*l.road_position_m - (50.0 + static_cast<double>(l.channel))) <= 0.5) ++ok;
    }
    CHECK(ok >= 114);
}

TEST_CASE("transmissibility magnitude and sign come back from the drive") {
    // At 5 m/s the gauge-averaged bell lasts about 2 s, well inside the 1 Hz
    // low-pass. Faster drives read the prominence through filter ringing.
    auto cfg = quiet_drive(truth_line(120, 5000.0, 70, 90));
    cfg.speed_mps = 5.0;
    const auto dt = sim::synthesize_driving_test(cfg, 1);
    const auto loc = locate(dt, 1, cfg.clock_offset_s);
    const auto t = estimate_transmissibility(loc.locations, cfg.vehicle.weight_tons);
    std::size_t within = 0, checked = 0;
    for (std::size_t k = 20; k < 100; ++k) {
        REQUIRE(t[k]);
        const bool flipped = k >= 70 && k < 90;
        if (k == 70 || k == 89 || k == 69 || k == 90) continue;  // sign boundary blends neighbouring gauges
        CHECK((*t[k] < 0.0) == flipped);
        ++checked;
        if (std::abs(std::abs(*t[k]) - 5000.0) <= 50.0) ++within;
    }
    MESSAGE("channels within 1% of |T|=5000: " << within << " of " << checked);
    CHECK(within >= checked * 9 / 10);
    CHECK(std::abs(*t[40] - 5000.0) <= 50.0);
    CHECK_THROWS_AS((void)estimate_transmissibility(loc.locations, 0.0), PreconditionError);
}

TEST_CASE("spooled channels are flagged") {
    auto truth = truth_line(160, 5000.0);
    for (std::size_t k = 60; k < 80; ++k) truth.set_transmissibility(k, std::nullopt);
    auto cfg = quiet_drive(truth);
    cfg.spool_segments = {{60, 20.0}};
    cfg.noise_sigma = 10.0;
    cfg.runs = 2;
    const auto dt = sim::synthesize_driving_test(cfg, 2);
    const auto loc = locate(dt, 2, cfg.clock_offset_s);
    for (std::size_t k = 62; k < 78; ++k) CHECK(loc.locations[k].spooled());
    std::size_t coupled_ok = 0;
    for (std::size_t k = 10; k < 50; ++k) coupled_ok += loc.locations[k].spooled() ? 0 : 1;
    CHECK(coupled_ok == 40);
}

TEST_CASE("geolocation does not depend on the clock offset once synced") {
    auto cfg = quiet_drive(truth_line(100, 5000.0));
    cfg.noise_sigma = 10.0;
    cfg.gps_sigma_m = 0.5;
    std::vector<double> first;
    for (double offset : {0.0, 3.21, -17.5, 250.0}) {
        cfg.clock_offset_s = offset;
        const auto dt = sim::synthesize_driving_test(cfg, 8);
        const auto das = locate_taps(dt.tap_record, cfg.tap_channel, cfg.tap_count);
        std::vector<TapEvent> taps;
        for (std::size_t i = 0; i < das.size(); ++i) taps.push_back({das[i], dt.tap_reference_times_s[i]});
        const auto loc = locate(dt, 1, sync_clocks(taps).offset_s);
        std::vector<double> pos;
        for (const auto& l : loc.locations) pos.push_back(l.road_position_m.value_or(-1.0));
        if (first.empty()) {
            first = pos;
            continue;
        }
        for (std::size_t k = 0; k < pos.size(); ++k) CHECK(pos[k] == doctest::Approx(first[k]).epsilon(1e-3));
    }
}

TEST_CASE("averaging runs shrinks GPS-driven position error") {
    // Per-channel absolute error accumulated over seeds, for R = 1..4 runs.
    constexpr std::size_t channels = 100, seeds = 12;
    std::vector<std::vector<double>> err(4, std::vector<double>(channels, 0.0));
    std::vector<std::vector<std::size_t>> n(4, std::vector<std::size_t>(channels, 0));
    GeolocationConfig g;
    g.enforce_monotone = false;
    g.spool_tolerance_m = 50.0;
    for (std::size_t s = 0; s < seeds; ++s) {
        auto cfg = quiet_drive(truth_line(channels, 5000.0));
        cfg.runs = 4;
        cfg.gps_sigma_m = 2.0;
        const auto dt = sim::synthesize_driving_test(cfg, 100 + s);
        for (std::size_t r = 1; r <= 4; ++r) {
            const auto loc = locate(dt, r, cfg.clock_offset_s, g);
            for (std::size_t k = 0; k < channels; ++k) {
                if (!loc.locations[k].road_position_m) continue;
                err[r - 1][k] += std::abs(*loc.locations[k].road_position_m - (50.0 + static_cast<double>(k)));
                ++n[r - 1][k];
            }
        }
    }
    std::vector<double> mean(4, 0.0);
    std::size_t better = 0, compared = 0;
    for (std::size_t k = 0; k < channels; ++k) {
        if (n[0][k] == 0 || n[1][k] == 0) continue;
        ++compared;
        if (err[1][k] / static_cast<double>(n[1][k]) < err[0][k] / static_cast<double>(n[0][k])) ++better;
    }
    for (std::size_t r = 0; r < 4; ++r) {
        double total = 0.0, count = 0.0;
        for (std::size_t k = 0; k < channels; ++k) {
            total += err[r][k];
            count += static_cast<double>(n[r][k]);
        }
        mean[r] = total / count;
    }
    MESSAGE("mean position error for 1..4 runs: " << mean[0] << " " << mean[1] << " " << mean[2] << " " << mean[3]);
    MESSAGE("channels where two runs beat one: " << better << " of " << compared);
    CHECK(better >= compared * 9 / 10);
    CHECK(mean[1] < mean[0]);
    CHECK(mean[2] < mean[1]);
    CHECK(mean[3] < mean[2]);
}

TEST_CASE("lane extrapolation follows the kernel peak ratio") {
    CHECK(extrapolate_lane(5000.0, 3.0, 3.0, 1.5) == doctest::Approx(5000.0));
    CHECK(extrapolate_lane(-5000.0, 3.0, 3.0, 1.5) == doctest::Approx(-5000.0));
    CHECK(std::abs(extrapolate_lane(5000.0, 3.0, 6.0, 1.5)) < 5000.0);
    CHECK(extrapolate_lane(-5000.0, 3.0, 6.0, 1.5) < 0.0);
    CHECK_THROWS_AS((void)extrapolate_lane(1.0, 0.0, 6.0, 1.5), PreconditionError);
    CHECK_THROWS_AS((void)extrapolate_lane(1.0, 3.0, -6.0, 1.5), PreconditionError);
}

TEST_CASE("far-lane transmissibility extrapolated from a near-lane drive") {
    auto cfg = quiet_drive(truth_line(120, 5000.0, 80, 100));
    cfg.noise_sigma = 10.0;
    cfg.runs = 2;
    const auto dt = sim::synthesize_driving_test(cfg, 12);
    const auto loc = locate(dt, 2, cfg.clock_offset_s);
    const auto t = estimate_transmissibility(loc.locations, cfg.vehicle.weight_tons);

    // Measured far-lane response per ton from a noise-free pass at 6 m.
    sim::SceneConfig far;
    far.record = cfg.record;
    far.duration_s = 20.0;
    far.sensors = cfg.sensors;
    far.wheel.amplitude_ratio = 0.0;
    far.vehicles.push_back({sim::VehicleSpec{1.0, 2.7, 2, ""},
                            sim::Trajectory::constant_speed(Direction::Inbound, 6.0, 2.0, 175.0, 10.0)});
    const auto rec = sim::synthesize(far, 1);
    std::size_t ok = 0, checked = 0;
    for (std::size_t k = 10; k < 110; ++k) {
        if (!t[k] || (k >= 78 && k < 102)) continue;
        const auto ch = rec.das.channel(k);
        const auto [lo, hi] = std::minmax_element(ch.begin(), ch.end());
        const double truth_far = std::abs(*hi) > std::abs(*lo) ? *hi : *lo;
        const double predicted = extrapolate_lane(*t[k], 3.0, 6.0, 1.5, cfg.record.gauge_length_m);
        ++checked;
        if (std::abs(predicted / truth_far - 1.0) <= 0.15) ++ok;
    }
    CHECK(checked > 60);
    CHECK(ok == checked);
}

TEST_CASE("isotonic fit pools adjacent violators") {
    const std::vector<double> a{1.0, 3.0, 2.0, 4.0};
    const auto fa = isotonic_fit(a);
    CHECK(fa == std::vector<double>{1.0, 2.5, 2.5, 4.0});
    const std::vector<double> b{5.0, 4.0, 3.0};
    for (double v : isotonic_fit(b)) CHECK(v == doctest::Approx(4.0));
    const std::vector<double> w{3.0, 1.0};
    const std::vector<double> c{2.0, 0.0};
    for (double v : isotonic_fit(c, w)) CHECK(v == doctest::Approx(1.5));

    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    std::vector<double> x(200);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.1 * static_cast<double>(i) + n01(rng);
    const auto f = isotonic_fit(x);
    double sx = 0.0, sf = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i > 0) CHECK(f[i] >= f[i - 1]);
        sx += x[i];
        sf += f[i];
    }
    CHECK(sf == doctest::Approx(sx));
}

TEST_CASE("GPS track validation and interpolation") {
    const auto line = Centerline::straight(kOrigin, 0.0, 200.0);
    std::vector<GpsFix> fixes{{0.0, line.point_at(10.0)}, {1.0, line.point_at(20.0)}, {2.0, line.point_at(30.0)}};
    const GpsTrack track(fixes, line);
    CHECK(track.position_at(0.5).value() == doctest::Approx(15.0).epsilon(1e-6));
    CHECK_FALSE(track.position_at(2.5).has_value());
    CHECK(track.typical_speed_mps() == doctest::Approx(10.0).epsilon(1e-6));
    std::vector<GpsFix> back{{1.0, line.point_at(10.0)}, {1.0, line.point_at(20.0)}};
    CHECK_THROWS_AS(GpsTrack(back, line), DataError);
    CHECK_THROWS_AS(GpsTrack({fixes[0]}, line), DataError);
}

TEST_CASE("full calibration through a spooled fiber") {
    sim::FiberLayout layout;
    layout.channel_count = 200;
    layout.first_channel_road_m = 50.0;
    layout.spools = {{80, 30.0}};
    sim::DrivingTestConfig cfg;
    cfg.centerline = Centerline::straight(kOrigin, 60.0, 400.0);
    cfg.sensors = sim::build_sensor_table(layout, 5, &cfg.centerline);
    cfg.spool_segments = layout.spools;
    cfg.runs = 3;
    const auto dt = sim::synthesize_driving_test(cfg, 21);

    CalibrationInputs in{{}, dt.gps, {}, cfg.centerline, cfg.vehicle.weight_tons, {}};
    for (const auto& r : dt.runs) in.runs.push_back(r.das);
    const auto das = locate_taps(dt.tap_record, cfg.tap_channel, cfg.tap_count);
    for (std::size_t i = 0; i < das.size(); ++i) in.taps.push_back({das[i], dt.tap_reference_times_s[i]});
    const auto res = calibrate(in);
    REQUIRE(res.table.size() == 200);
    std::size_t coupled = 0, pos_ok = 0, t_ok = 0, flag_ok = 0;
    for (const auto& e : dt.truth.entries()) {
        const auto* c = res.table.find(e.channel);
        REQUIRE(c);
        flag_ok += e.spooled() == c->spooled() ? 1 : 0;
        if (e.spooled()) continue;
        ++coupled;
        pos_ok += std::abs(c->road_position_m - e.road_position_m) <= 1.0 ? 1 : 0;
        t_ok += c->transmissibility && std::abs(*c->transmissibility / *e.transmissibility - 1.0) <= 0.05 ? 1 : 0;
        CHECK(c->geo.has_value());
    }
    MESSAGE("positions " << pos_ok << "/" << coupled << ", T " << t_ok << "/" << coupled << ", flags " << flag_ok << "/200");
    CHECK(pos_ok >= coupled * 95 / 100);
    CHECK(t_ok >= coupled * 95 / 100);
    CHECK(flag_ok >= 190);
    double prev = -1e9;
    for (const auto& e : res.table.entries()) {
        CHECK(e.road_position_m >= prev);
        prev = e.road_position_m;
    }
}

}
