#include "dastm/sim/driving_test.hpp"

#include "dastm/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dastm::sim {

DrivingTest synthesize_driving_test(const DrivingTestConfig& config, std::uint64_t seed) {
    if (config.runs == 0) throw ConfigError("driving test needs at least one run");
    if (!(config.speed_mps > 0.0) || !(config.gps_rate_hz > 0.0) || config.gps_sigma_m < 0.0) {
        throw ConfigError("driving test speed, GPS rate and GPS noise must be valid");
    }
    if (config.sensors.size() == 0) throw ConfigError("driving test has no sensors");
    config.vehicle.validate();

    double lo = config.sensors[0].road_position_m;
    double hi = lo;
    for (const auto& e : config.sensors.entries()) {
        lo = std::min(lo, e.road_position_m);
        hi = std::max(hi, e.road_position_m);
    }
    const double start_pos = lo - config.lead_m;
    const double drive_s = (hi - lo + 2.0 * config.lead_m) / config.speed_mps;

    SceneConfig base;
    base.record = config.record;
    base.sensors = config.sensors;
    base.spool_segments = config.spool_segments;
    base.noise_sigma = config.noise_sigma;
    base.drift_amplitude = config.drift_amplitude;
    base.reference_lane_offset_m = config.lane_offset_m;
    base.wheel = config.wheel;
    base.road_features = config.road_features;

    std::mt19937_64 gps_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> gps_noise(0.0, 1.0);

    std::vector<Recording> runs;
    std::vector<std::vector<GpsFix>> gps;
    for (std::size_t r = 0; r < config.runs; ++r) {
        SceneConfig scene = base;
        scene.record.start_time = config.record.start_time + static_cast<double>(r + 1) * config.run_gap_s;
        scene.duration_s = drive_s;
        scene.vehicles = config.background;
        auto traj = Trajectory::constant_speed(Direction::Outbound, config.lane_offset_m, 0.0, start_pos,
                                               config.speed_mps);
        scene.vehicles.insert(scene.vehicles.begin(), SceneVehicle{config.vehicle, traj});
        runs.push_back(synthesize(scene, seed + 1 + r));

        // fixes on the reference clock, phase not aligned with the DAS samples
        std::vector<GpsFix> fixes;
        const double ref_start = scene.record.start_time + config.clock_offset_s;
        const double phase = std::uniform_real_distribution<double>(0.0, 1.0 / config.gps_rate_hz)(gps_rng);
        for (double t = phase; t <= drive_s; t += 1.0 / config.gps_rate_hz) {
            const auto [east, north] = config.centerline.to_local(config.centerline.point_at(traj.position_at(t)));
            const double de = config.gps_sigma_m * gps_noise(gps_rng);
            const double dn = config.gps_sigma_m * gps_noise(gps_rng);
            fixes.push_back({ref_start + t, config.centerline.from_local(east + de, north + dn)});
        }
        gps.push_back(std::move(fixes));
    }

    SceneConfig taps = base;
    taps.duration_s = 4.0 + 2.0 * static_cast<double>(config.tap_count);
    taps.record.start_time = config.record.start_time;
    taps.drift_amplitude = 0.0;
    taps.taps.channel = config.tap_channel;
    taps.taps.amplitude = config.tap_amplitude;
    std::vector<double> das_times;
    std::vector<double> ref_times;
    std::uniform_real_distribution<double> jitter(0.0, 1.0);
    for (std::size_t i = 0; i < config.tap_count; ++i) {
        // on the sample grid so the true tap time is exactly representable
        const double t = std::round((2.0 + 2.0 * static_cast<double>(i) + jitter(gps_rng)) *
                                    config.record.sample_rate_hz) /
                         config.record.sample_rate_hz;
        taps.taps.times_s.push_back(t);
        das_times.push_back(taps.record.start_time + t);
        ref_times.push_back(taps.record.start_time + t + config.clock_offset_s);
    }
    auto tap_rec = synthesize(taps, seed + 1000003);

    return DrivingTest{std::move(runs), std::move(gps), std::move(tap_rec.das), std::move(ref_times),
                       std::move(das_times), config.centerline, config.sensors, config.clock_offset_s};
}

} // namespace dastm::sim
