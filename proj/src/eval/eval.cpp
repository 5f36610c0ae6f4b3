#include "dastm/eval/eval.hpp"

#include "dastm/calib/calibration.hpp"
#include "dastm/characterize/characterize.hpp"
#include "dastm/core/io.hpp"
#include "dastm/core/parallel.hpp"
#include "dastm/error.hpp"
#include "dastm/eval/metrics.hpp"
#include "dastm/sim/driving_test.hpp"
#include "dastm/sim/kernel.hpp"
#include "dastm/sim/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace dastm::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kKmhPerMps = 3.6;
constexpr double kRoadOrigin = 50.0;  // road position of channel 0 along the centerline
const GeoPoint kCenterlineOrigin{37.3382, -121.8863};

using Metrics = std::map<std::string, double>;

struct CalibratedFiber {
    CalibrationTable truth;
    CalibrationTable calibrated;
    std::vector<sim::SpoolSegment> spools;
    Metrics metrics;
};

CalibratedFiber calibrate_fiber(const sim::FiberLayout& layout, const EvalConfig& cfg, std::uint64_t seed) {
    const double road_length = layout.first_channel_road_m +
                               layout.road_per_fiber * layout.channel_spacing_m * static_cast<double>(layout.channel_count);
    const auto centerline = Centerline::straight(kCenterlineOrigin, 60.0, road_length + 2.0 * kRoadOrigin);
    CalibratedFiber out;
    out.truth = sim::build_sensor_table(layout, seed, &centerline);
    out.spools = layout.spools;

    sim::DrivingTestConfig drive;
    drive.sensors = out.truth;
    drive.spool_segments = layout.spools;
    drive.centerline = centerline;
    drive.record = cfg.record;
    drive.runs = cfg.calibration_runs;
    drive.lane_offset_m = cfg.near_lane_offset_m;
    drive.vehicle.weight_tons = cfg.test_vehicle_tons;
    drive.gps_sigma_m = cfg.gps_sigma_m;
    drive.clock_offset_s = cfg.clock_offset_s;
    drive.noise_sigma = cfg.noise_sigma;
    drive.drift_amplitude = cfg.drift_amplitude;
    const auto test = sim::synthesize_driving_test(drive, seed + 17);

    calib::CalibrationInputs inputs{{}, {}, {}, centerline, cfg.test_vehicle_tons, cfg.geolocation};
    for (const auto& r : test.runs) inputs.runs.push_back(r.das);
    inputs.gps = test.gps;
    const auto tap_times = calib::locate_taps(test.tap_record, drive.tap_channel, drive.tap_count);
    for (std::size_t i = 0; i < tap_times.size(); ++i) {
        inputs.taps.push_back({tap_times[i], test.tap_reference_times_s[i]});
    }
    const auto result = calib::calibrate(inputs);
    out.calibrated = result.table;

    std::size_t coupled = 0, pos_ok = 0, t_ok = 0, agree = 0;
    for (const auto& e : out.truth.entries()) {
        const auto* c = out.calibrated.find(e.channel);
        if (!c) continue;
        if (e.spooled() == c->spooled()) ++agree;
        if (e.spooled()) continue;
        ++coupled;
        if (std::abs(c->road_position_m - e.road_position_m) <= 1.0) ++pos_ok;
        if (c->transmissibility && std::abs(*c->transmissibility / *e.transmissibility - 1.0) <= 0.05) ++t_ok;
    }
    out.metrics["calib_position_within_1m"] = static_cast<double>(pos_ok) / static_cast<double>(coupled);
    out.metrics["calib_transmissibility_within_5pct"] = static_cast<double>(t_ok) / static_cast<double>(coupled);
    out.metrics["calib_spool_flag_accuracy"] =
        static_cast<double>(agree) / static_cast<double>(out.truth.size());
    out.metrics["calib_clock_offset_error_s"] = std::abs(result.clock.offset_s - cfg.clock_offset_s);
    return out;
}

sim::FiberLayout base_layout(const EvalConfig& cfg, std::size_t channels) {
    sim::FiberLayout layout;
    layout.channel_count = channels;
    layout.channel_spacing_m = cfg.record.channel_spacing_m;
    layout.first_channel_road_m = kRoadOrigin;
    return layout;
}

std::pair<double, double> road_extent(const CalibrationTable& truth) {
    double lo = truth[0].road_position_m;
    double hi = lo;
    for (const auto& e : truth.entries()) {
        lo = std::min(lo, e.road_position_m);
        hi = std::max(hi, e.road_position_m);
    }
    return {lo, hi};
}

std::vector<double> features_on_road(const EvalConfig& cfg, const CalibrationTable& truth) {
    const auto [lo, hi] = road_extent(truth);
    std::vector<double> out;
    for (double f : cfg.road_features_m) {
        const double abs = kRoadOrigin + f;
        if (abs > lo + 5.0 && abs < hi - 5.0) out.push_back(abs);
    }
    return out;
}

sim::TrafficConfig traffic_for(const EvalConfig& cfg, const CalibrationTable& truth, std::size_t count,
                               double window_s) {
    const auto [lo, hi] = road_extent(truth);
    sim::TrafficConfig t;
    t.vehicle_count = count;
    t.road_start_m = lo;
    t.road_end_m = hi;
    t.first_entry_s = 3.0;
    t.last_entry_s = 3.0 + window_s;
    t.min_headway_s = cfg.min_headway_s;
    t.speed_min_mps = cfg.speed_min_mps;
    t.speed_max_mps = cfg.speed_max_mps;
    t.speed_variation = cfg.speed_variation;
    t.near_lane_offset_m = cfg.near_lane_offset_m;
    t.far_lane_offset_m = cfg.far_lane_offset_m;
    return t;
}

sim::Recording simulate_scene(const EvalConfig& cfg, const CalibratedFiber& fiber,
                              std::vector<sim::SceneVehicle> vehicles, std::uint64_t seed) {
    const auto [lo, hi] = road_extent(fiber.truth);
    double end = 0.0;
    for (const auto& v : vehicles) {
        const auto& tr = v.trajectory;
        end = std::max(end, tr.direction() == Direction::Outbound ? tr.time_at(hi) : tr.time_at(lo));
    }
    sim::SceneConfig scene;
    scene.record = cfg.record;
    scene.duration_s = end + 4.0;
    scene.sensors = fiber.truth;
    scene.spool_segments = fiber.spools;
    scene.vehicles = std::move(vehicles);
    scene.road_features = features_on_road(cfg, fiber.truth);
    scene.noise_sigma = cfg.noise_sigma;
    scene.drift_amplitude = cfg.drift_amplitude;
    scene.reference_lane_offset_m = cfg.near_lane_offset_m;
    scene.depth_m = cfg.depth_m;
    return sim::synthesize(scene, seed);
}

struct ScoreOptions {
    bool baseline = true;
    bool characterize = true;
};

Metrics score_scene(const ChannelMatrix& das, const CalibrationTable& truth, const CalibrationTable& calibrated,
                    std::span<const sim::Trajectory> trajectories, std::span<const sim::VehicleSpec> specs,
                    const std::vector<double>& features, const EvalConfig& cfg, ScoreOptions options) {
    Metrics m;
    const double tol = cfg.match_tolerance_s;
    const auto det = detect::detect_all(das, calibrated, cfg.detector);
    const auto arrivals = truth_arrivals(trajectories, truth, das.duration_s());
    const auto dm = match_detections(arrivals, det.detections, tol);
    m["detection_precision"] = dm.precision();
    m["detection_recall"] = dm.recall();
    std::size_t lane_hits[2] = {0, 0}, lane_total[2] = {0, 0};
    for (std::size_t i = 0; i < arrivals.size(); ++i) {
        const int lane = trajectories[arrivals[i].vehicle].direction() == Direction::Outbound ? 0 : 1;
        ++lane_total[lane];
        if (dm.truth_to_detection[i]) ++lane_hits[lane];
    }
    m["near_lane_recall"] = lane_total[0] ? static_cast<double>(lane_hits[0]) / static_cast<double>(lane_total[0]) : kNaN;
    m["far_lane_recall"] = lane_total[1] ? static_cast<double>(lane_hits[1]) / static_cast<double>(lane_total[1]) : kNaN;

    const std::vector<track::Segment> segments{{calibrated[0].channel, calibrated[calibrated.size() - 1].channel}};
    const auto tracks = track::track_multi(det.detections, calibrated, segments, cfg.tracker);
    const auto matches = match_tracks(tracks.tracks, arrivals, tol);

    std::map<std::size_t, std::size_t> arrivals_per_vehicle;
    for (const auto& a : arrivals) ++arrivals_per_vehicle[a.vehicle];
    std::set<std::size_t> found;
    std::size_t matched_tracks = 0;
    for (const auto& mt : matches) {
        if (mt) {
            found.insert(*mt);
            ++matched_tracks;
        }
    }
    std::size_t eligible = 0, eligible_found = 0;
    for (const auto& [v, n] : arrivals_per_vehicle) {
        if (n < cfg.tracker.min_track_channels) continue;
        ++eligible;
        if (found.count(v)) ++eligible_found;
    }
    m["vehicle_precision"] =
        tracks.tracks.empty() ? kNaN : static_cast<double>(matched_tracks) / static_cast<double>(tracks.tracks.size());
    m["vehicle_recall"] = eligible ? static_cast<double>(eligible_found) / static_cast<double>(eligible) : kNaN;

    const auto kin = kinematic_errors(tracks.tracks, matches, trajectories);
    m["position_mae_m"] = kin.position_mae_m;
    m["speed_mae_kmh"] = kin.speed_mae_mps * kKmhPerMps;

    if (options.baseline) {
        auto base_cfg = cfg.tracker;
        base_cfg.baseline = true;
        base_cfg.nominal_spacing_m = das.info().channel_spacing_m;
        const auto base = track::track_multi(det.detections, calibrated, segments, base_cfg);
        const auto base_matches = match_tracks(base.tracks, arrivals, tol);
        const auto bk = kinematic_errors(base.tracks, base_matches, trajectories);
        m["baseline_position_mae_m"] = bk.position_mae_m;
        m["baseline_speed_mae_kmh"] = bk.speed_mae_mps * kKmhPerMps;
    }

    // Crosstalk: far-lane arrivals with a near-lane arrival at the same channel within tolerance.
    std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> near_times;
    for (const auto& a : arrivals) {
        if (trajectories[a.vehicle].direction() == Direction::Outbound) near_times[{a.channel, 0}].push_back(a.time_s);
    }
    std::map<std::size_t, const track::VehicleTrack*> best_track;
    for (std::size_t t = 0; t < tracks.tracks.size(); ++t) {
        if (!matches[t]) continue;
        auto& slot = best_track[*matches[t]];
        if (!slot || tracks.tracks[t].associated_count() > slot->associated_count()) slot = &tracks.tracks[t];
    }
    std::size_t events = 0, det_hits = 0, track_hits = 0;
    std::set<std::size_t> far_vehicles, crosstalk_vehicles;
    for (std::size_t i = 0; i < arrivals.size(); ++i) {
        const auto& a = arrivals[i];
        if (trajectories[a.vehicle].direction() != Direction::Inbound) continue;
        far_vehicles.insert(a.vehicle);
        auto it = near_times.find({a.channel, 0});
        if (it == near_times.end()) continue;
        const bool overlap = std::any_of(it->second.begin(), it->second.end(),
                                         [&](double t) { return std::abs(t - a.time_s) <= tol; });
        if (!overlap) continue;
        ++events;
        crosstalk_vehicles.insert(a.vehicle);
        if (dm.truth_to_detection[i]) ++det_hits;
        bool tracked = false;
        for (std::size_t t = 0; t < tracks.tracks.size() && !tracked; ++t) {
            if (!matches[t] || *matches[t] != a.vehicle) continue;
            for (const auto& p : tracks.tracks[t].points) {
                if (p.channel == a.channel && std::abs(p.time_s() - a.time_s) <= tol) {
                    tracked = true;
                    break;
                }
            }
        }
        if (tracked) ++track_hits;
    }
    m["crosstalk_vehicle_share"] =
        far_vehicles.empty() ? kNaN
                             : static_cast<double>(crosstalk_vehicles.size()) / static_cast<double>(far_vehicles.size());
    m["crosstalk_detection_recall"] = events ? static_cast<double>(det_hits) / static_cast<double>(events) : kNaN;
    m["crosstalk_track_recall"] = events ? static_cast<double>(track_hits) / static_cast<double>(events) : kNaN;

    if (options.characterize) {
        const double gauge = das.info().gauge_length_m;
        const auto far_table = calibrated.scaled(
            calib::extrapolate_lane(1.0, cfg.near_lane_offset_m, cfg.far_lane_offset_m, cfg.depth_m, gauge));
        std::vector<std::size_t> feature_channels;
        for (const auto& e : calibrated.entries()) {
            if (e.spooled()) continue;
            for (double f : features) {
                if (std::abs(e.road_position_m - f) <= cfg.feature_radius_m) feature_channels.push_back(e.channel);
            }
        }
        PercentErrors wheelbase, weight;
        for (const auto& [v, trk] : best_track) {
            const auto& table = trk->direction == Direction::Outbound ? calibrated : far_table;
            const auto c = characterize::characterize_track(*trk, tracks.tracks, das, table, feature_channels,
                                                            cfg.characterize);
            if (c.weight_tons) {
                weight.errors_pct.push_back(100.0 * (c.weight_tons->value - specs[v].weight_tons) / specs[v].weight_tons);
            }
            if (c.wheelbase_m) {
                wheelbase.errors_pct.push_back(100.0 * (c.wheelbase_m->value - specs[v].wheelbase_m) /
                                               specs[v].wheelbase_m);
            }
        }
        // vehicles without an estimate count as misses
        const std::size_t n = eligible;
        auto coverage = [n](const PercentErrors& pe, double bound) {
            if (n == 0) return kNaN;
            const double within = pe.errors_pct.empty() ? 0.0 : pe.share_within(bound) * static_cast<double>(pe.errors_pct.size());
            return within / static_cast<double>(n);
        };
        m["wheelbase_within_4pct"] = coverage(wheelbase, 4.0);
        m["wheelbase_abs_pe_p95"] = wheelbase.abs_percentile(0.95);
        m["wheelbase_pe_ci95"] = wheelbase.interval95();
        m["weight_within_12pct"] = coverage(weight, 12.0);
        m["weight_abs_pe_p95"] = weight.abs_percentile(0.95);
        m["weight_pe_ci95"] = weight.interval95();
    }
    return m;
}

std::vector<sim::Trajectory> trajectories_of(const std::vector<sim::SceneVehicle>& vehicles) {
    std::vector<sim::Trajectory> out;
    for (const auto& v : vehicles) out.push_back(v.trajectory);
    return out;
}

std::vector<sim::VehicleSpec> specs_of(const std::vector<sim::SceneVehicle>& vehicles) {
    std::vector<sim::VehicleSpec> out;
    for (const auto& v : vehicles) out.push_back(v.spec);
    return out;
}

std::vector<sim::SceneVehicle> crosstalk_vehicles(const EvalConfig& cfg, const CalibrationTable& truth,
                                                  std::uint64_t seed) {
    const auto [lo, hi] = road_extent(truth);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto speed = [&] { return cfg.speed_min_mps + unif(rng) * (cfg.speed_max_mps - cfg.speed_min_mps); };
    const double slot = (hi - lo) / cfg.speed_min_mps + 6.0;
    const auto classes = sim::default_vehicle_classes();
    std::vector<sim::SceneVehicle> out;
    const std::size_t n = cfg.crosstalk_far_vehicles;
    for (std::size_t i = 0; i < n; ++i) {
        const double entry = 3.0 + static_cast<double>(i) * slot;
        sim::VehicleSpec far{1.2 + unif(rng) * 1.3, 2.5 + unif(rng) * 0.8, 2, "far"};
        out.push_back({far, sim::Trajectory::constant_speed(Direction::Inbound, cfg.far_lane_offset_m, entry, hi,
                                                            speed())});
        // spread the crossing passes evenly over the far-lane vehicles
        const auto before = static_cast<std::size_t>(std::floor(static_cast<double>(i) * cfg.crosstalk_fraction));
        const auto after = static_cast<std::size_t>(std::floor(static_cast<double>(i + 1) * cfg.crosstalk_fraction));
        if (after > before) {
            sim::VehicleSpec near{1.6 + unif(rng) * 1.0, 2.7 + unif(rng) * 0.5, 2, "near"};
            const double offset = (unif(rng) - 0.5) * 4.0;
            out.push_back({near, sim::Trajectory::constant_speed(Direction::Outbound, cfg.near_lane_offset_m,
                                                                 entry + offset, lo, speed())});
        }
    }
    return out;
}

std::vector<sim::SceneVehicle> fleet_vehicles(const EvalConfig& cfg, const CalibrationTable& truth,
                                              std::uint64_t seed) {
    const std::size_t n = cfg.fleet_per_type * cfg.fleet_types.size();
    auto vehicles = sim::generate_traffic(traffic_for(cfg, truth, n, cfg.traffic_window_s), seed);
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
        vehicles[i].spec = cfg.fleet_types[i % cfg.fleet_types.size()];
    }
    return vehicles;
}

void put_all(Metrics& into, const Metrics& from) {
    for (const auto& [k, v] : from) into[k] = v;
}

} // namespace

void EvalConfig::validate() const {
    if (channel_count < 20) throw ConfigError("eval channel_count must be at least 20");
    if (!(noise_sigma >= 0.0) || !(drift_amplitude >= 0.0)) throw ConfigError("eval noise levels must be non-negative");
    if (!(near_lane_offset_m > 0.0) || !(far_lane_offset_m > 0.0) || !(depth_m > 0.0)) {
        throw ConfigError("eval lane offsets and depth must be positive");
    }
    if (!(speed_min_mps > 0.0) || speed_max_mps < speed_min_mps) throw ConfigError("eval speed range invalid");
    for (auto d : decimation) {
        if (d < 1) throw ConfigError("decimation factors must be >= 1");
    }
    if (!(crosstalk_fraction >= 0.0 && crosstalk_fraction <= 1.0)) {
        throw ConfigError("eval crosstalk_fraction must lie in [0, 1]");
    }
    if (fleet_types.empty()) throw ConfigError("eval fleet_types must not be empty");
    for (const auto& t : fleet_types) t.validate();
    static const std::set<std::string> known{"nominal", "spool", "crosstalk", "fleet", "spacing"};
    for (const auto& s : scenarios) {
        if (!known.count(s)) throw ConfigError("unknown eval scenario '" + s + "'");
    }
    detector.validate();
    tracker.validate();
    geolocation.validate();
    characterize.validate();
}

std::optional<double> MetricsReport::value(const std::string& scenario, const std::string& metric) const {
    for (const auto& r : rows) {
        if (r.scenario == scenario && r.metric == metric) return r.value;
    }
    return std::nullopt;
}

std::vector<std::string> MetricsReport::scenarios() const {
    std::vector<std::string> out;
    for (const auto& r : rows) {
        if (out.empty() || out.back() != r.scenario) out.push_back(r.scenario);
    }
    return out;
}

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{
        "calib_position_within_1m",   "calib_transmissibility_within_5pct", "calib_spool_flag_accuracy",
        "calib_clock_offset_error_s", "detection_precision",                "detection_recall",
        "near_lane_recall",           "far_lane_recall",                    "vehicle_precision",
        "vehicle_recall",             "position_mae_m",                     "speed_mae_kmh",
        "baseline_position_mae_m",    "baseline_speed_mae_kmh",             "wheelbase_within_4pct",
        "wheelbase_abs_pe_p95",       "wheelbase_pe_ci95",                  "weight_within_12pct",
        "weight_abs_pe_p95",          "weight_pe_ci95",                     "crosstalk_vehicle_share",
        "crosstalk_detection_recall", "crosstalk_track_recall",
    };
    return names;
}

std::vector<std::string> expand_scenarios(const EvalConfig& config) {
    std::vector<std::string> out;
    for (const auto& s : config.scenarios) {
        if (s == "spacing") {
            for (auto d : config.decimation) {
                std::ostringstream name;
                name << "spacing_" << io::format_number(config.record.channel_spacing_m * static_cast<double>(d))
                     << "m";
                out.push_back(name.str());
            }
        } else {
            out.push_back(s);
        }
    }
    return out;
}

MetricsReport run_eval(const EvalConfig& config) {
    config.validate();
    const std::uint64_t seed = config.seed;
    auto wants = [&](const std::string& s) {
        return std::find(config.scenarios.begin(), config.scenarios.end(), s) != config.scenarios.end();
    };

    // The nominal recording is shared by the nominal scene and the spacing sweep.
    std::optional<CalibratedFiber> nominal_fiber;
    std::optional<sim::Recording> nominal_rec;
    std::vector<sim::SceneVehicle> nominal_vehicles;
    std::string nominal_error;
    if (wants("nominal") || wants("spacing")) {
        try {
            nominal_fiber = calibrate_fiber(base_layout(config, config.channel_count), config, seed * 1000 + 1);
            nominal_vehicles = sim::generate_traffic(
                traffic_for(config, nominal_fiber->truth, config.traffic_vehicles, config.traffic_window_s),
                seed * 1000 + 2);
            nominal_rec = simulate_scene(config, *nominal_fiber, nominal_vehicles, seed * 1000 + 3);
        } catch (const std::exception& e) {
            nominal_error = e.what();
        }
    }
    auto need_nominal = [&] {
        if (!nominal_rec) throw DataError("nominal scene unavailable: " + nominal_error);
    };

    std::vector<std::pair<std::string, std::function<Metrics()>>> jobs;
    if (wants("nominal")) {
        jobs.emplace_back("nominal", [&] {
            need_nominal();
            Metrics m = nominal_fiber->metrics;
            put_all(m, score_scene(nominal_rec->das, nominal_fiber->truth, nominal_fiber->calibrated,
                                   trajectories_of(nominal_vehicles), specs_of(nominal_vehicles),
                                   features_on_road(config, nominal_fiber->truth), config, {}));
            return m;
        });
    }
    if (wants("spool")) {
        jobs.emplace_back("spool", [&] {
            auto layout = base_layout(config, config.channel_count);
            layout.spools = {{config.spool_first_channel, config.spool_slack_m}};
            layout.road_per_fiber = config.spool_road_per_fiber;
            const auto fiber = calibrate_fiber(layout, config, seed * 1000 + 11);
            const auto vehicles = sim::generate_traffic(
                traffic_for(config, fiber.truth, config.spool_vehicles, config.traffic_window_s), seed * 1000 + 12);
            const auto rec = simulate_scene(config, fiber, vehicles, seed * 1000 + 13);
            Metrics m = fiber.metrics;
            put_all(m, score_scene(rec.das, fiber.truth, fiber.calibrated, trajectories_of(vehicles),
                                   specs_of(vehicles), features_on_road(config, fiber.truth), config, {}));
            return m;
        });
    }
    if (wants("crosstalk")) {
        jobs.emplace_back("crosstalk", [&] {
            const auto fiber = calibrate_fiber(base_layout(config, config.crosstalk_channels), config, seed * 1000 + 21);
            const auto vehicles = crosstalk_vehicles(config, fiber.truth, seed * 1000 + 22);
            const auto rec = simulate_scene(config, fiber, vehicles, seed * 1000 + 23);
            Metrics m = fiber.metrics;
            put_all(m, score_scene(rec.das, fiber.truth, fiber.calibrated, trajectories_of(vehicles),
                                   specs_of(vehicles), features_on_road(config, fiber.truth), config,
                                   {.baseline = false, .characterize = false}));
            return m;
        });
    }
    if (wants("fleet")) {
        jobs.emplace_back("fleet", [&] {
            const auto fiber = calibrate_fiber(base_layout(config, config.channel_count), config, seed * 1000 + 31);
            const auto vehicles = fleet_vehicles(config, fiber.truth, seed * 1000 + 32);
            const auto rec = simulate_scene(config, fiber, vehicles, seed * 1000 + 33);
            Metrics m = fiber.metrics;
            put_all(m, score_scene(rec.das, fiber.truth, fiber.calibrated, trajectories_of(vehicles),
                                   specs_of(vehicles), features_on_road(config, fiber.truth), config,
                                   {.baseline = false, .characterize = true}));
            return m;
        });
    }
    if (wants("spacing")) {
        EvalConfig sweep;
        sweep.record = config.record;
        sweep.decimation = config.decimation;
        sweep.scenarios = {"spacing"};
        const auto names = expand_scenarios(sweep);
        for (std::size_t i = 0; i < config.decimation.size(); ++i) {
            const auto f = config.decimation[i];
            jobs.emplace_back(names[i], [&, f] {
                need_nominal();
                const auto das = nominal_rec->das.decimate_channels(f);
                return score_scene(das, nominal_fiber->truth.decimated(f), nominal_fiber->calibrated.decimated(f),
                                   trajectories_of(nominal_vehicles), specs_of(nominal_vehicles), {}, config,
                                   {.baseline = false, .characterize = false});
            });
        }
    }

    // Scenarios are independent; a failing one leaves NaN rows and a message.
    std::vector<Metrics> results(jobs.size());
    std::vector<std::string> errors(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        try {
            results[i] = jobs[i].second();
        } catch (const std::exception& e) {
            errors[i] = jobs[i].first + ": " + e.what();
        }
    });

    MetricsReport report;
    for (const auto& e : errors) {
        if (!e.empty()) report.failures.push_back(e);
    }
    for (const auto& name : expand_scenarios(config)) {
        const auto job = std::find_if(jobs.begin(), jobs.end(), [&](const auto& j) { return j.first == name; });
        const auto& m = results[static_cast<std::size_t>(job - jobs.begin())];
        for (const auto& metric : metric_names()) {
            auto it = m.find(metric);
            report.rows.push_back({name, metric, it == m.end() ? kNaN : it->second});
        }
    }
    return report;
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report) {
    io::TextTable table;
    table.header = {"scenario", "metric", "value"};
    for (const auto& r : report.rows) table.rows.push_back({r.scenario, r.metric, io::format_number(r.value)});
    io::write_table(path, table);
}

std::vector<std::filesystem::path> emit_plots(const MetricsReport& report, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    const auto csv = out_dir / "metrics.csv";
    write_metrics_csv(csv, report);
    written.push_back(csv);

    // Grouped bars of the unit-interval quality metrics, one group per scenario.
    const std::vector<std::string> shown{"detection_precision", "detection_recall", "vehicle_precision",
                                         "vehicle_recall", "crosstalk_detection_recall", "crosstalk_track_recall"};
    const char* colors[] = {"#4c72b0", "#55a868", "#c44e52", "#8172b2", "#ccb974", "#64b5cd"};
    const auto scenarios = report.scenarios();
    if (scenarios.empty()) return written;
    const double group_w = 120.0;
    const double bar_w = group_w / static_cast<double>(shown.size() + 1);
    const double height = 240.0;
    const double width = 60.0 + group_w * static_cast<double>(scenarios.size()) + 220.0;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height + 80
        << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
    svg << "<line x1=\"50\" y1=\"20\" x2=\"50\" y2=\"" << 20 + height << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"50\" y1=\"" << 20 + height << "\" x2=\"" << width - 200 << "\" y2=\"" << 20 + height
        << "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double y = 20 + height - height * tick / 4.0;
        svg << "<text x=\"45\" y=\"" << y + 3 << "\" text-anchor=\"end\">" << tick * 0.25 << "</text>\n";
    }
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        const double x0 = 55.0 + group_w * static_cast<double>(s);
        for (std::size_t k = 0; k < shown.size(); ++k) {
            const auto v = report.value(scenarios[s], shown[k]);
            if (!v || !std::isfinite(*v)) continue;
            const double h = height * std::clamp(*v, 0.0, 1.0);
            svg << "<rect x=\"" << x0 + bar_w * static_cast<double>(k) << "\" y=\"" << 20 + height - h
                << "\" width=\"" << bar_w * 0.9 << "\" height=\"" << h << "\" fill=\"" << colors[k] << "\"/>\n";
        }
        svg << "<text x=\"" << x0 + group_w / 2 - 10 << "\" y=\"" << height + 35 << "\" text-anchor=\"middle\">"
            << scenarios[s] << "</text>\n";
    }
    for (std::size_t k = 0; k < shown.size(); ++k) {
        const double y = 30.0 + 16.0 * static_cast<double>(k);
        svg << "<rect x=\"" << width - 190 << "\" y=\"" << y - 9 << "\" width=\"10\" height=\"10\" fill=\""
            << colors[k] << "\"/><text x=\"" << width - 175 << "\" y=\"" << y << "\">" << shown[k] << "</text>\n";
    }
    svg << "</svg>\n";
    const auto svg_path = out_dir / "summary.svg";
    std::ofstream out(svg_path);
    if (out << svg.str()) written.push_back(svg_path);
    return written;
}

} // namespace dastm::eval
