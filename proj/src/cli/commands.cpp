#include "dastm/cli/commands.hpp"

#include "dastm/calib/calibration.hpp"
#include "dastm/characterize/characterize.hpp"
#include "dastm/cli/artifacts.hpp"
#include "dastm/cli/config.hpp"
#include "dastm/core/io.hpp"
#include "dastm/detect/detector.hpp"
#include "dastm/error.hpp"
#include "dastm/eval/eval.hpp"
#include "dastm/sim/driving_test.hpp"
#include "dastm/sim/scene.hpp"
#include "dastm/sim/traffic.hpp"
#include "dastm/track/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace dastm::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kSections{"simulate", "calibrate", "detect", "track", "characterize", "eval"};

// Road position of channel 0 when the config does not place the fiber.
constexpr double kDefaultRoadOrigin = 50.0;
// Feature offsets from the first channel, as in the evaluation scenes.
const std::vector<double> kDefaultFeatureOffsets{60.0, 160.0, 260.0, 340.0};

/// Loaded config plus the section of the running command. The root keeps the
/// JSON alive for every Section view.
class Context {
public:
    Context(const CommandOptions& options, const std::string& command)
        : root_(options.config ? load_json(*options.config) : Json::object()),
          config_dir_(options.config ? options.config->parent_path() : fs::path{}),
          out_(options.out),
          section_name_(command) {
        Section top(root_, "");
        std::uint64_t seed = 1;
        top.read("seed", seed);
        seed_ = options.seed.value_or(seed);
        seed_overridden_ = options.seed.has_value();
        for (const auto& name : kSections) {
            if (name != command) (void)top.raw(name);
        }
        section_json_ = top.raw(command);
        top.finish();
    }

    [[nodiscard]] Section section() const {
        static const Json empty;
        return Section(section_json_ ? *section_json_ : empty, section_name_);
    }

    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] bool seed_overridden() const { return seed_overridden_; }
    [[nodiscard]] const fs::path& out() const { return out_; }

    /// Path named by `key`, relative to the config file, or the default
    /// artifact name in the output directory.
    [[nodiscard]] fs::path input(Section& s, const std::string& key, const std::string& default_name) const {
        if (!s.has(key)) return out_ / default_name;
        std::string p;
        s.read(key, p);
        return resolve(p);
    }

    [[nodiscard]] fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : config_dir_ / path;
    }

private:
    Json root_;
    fs::path config_dir_;
    fs::path out_;
    std::string section_name_;
    const Json* section_json_ = nullptr;
    std::uint64_t seed_ = 1;
    bool seed_overridden_ = false;
};

void require_files(std::initializer_list<fs::path> paths) {
    for (const auto& p : paths) {
        if (!fs::exists(p)) throw ConfigError("referenced file not found: " + p.string());
    }
}

std::pair<double, double> road_extent(const CalibrationTable& table) {
    double lo = table[0].road_position_m, hi = lo;
    for (const auto& e : table.entries()) {
        lo = std::min(lo, e.road_position_m);
        hi = std::max(hi, e.road_position_m);
    }
    return {lo, hi};
}

Direction parse_direction_key(Section& s, const std::string& key, Direction fallback) {
    if (!s.has(key)) return fallback;
    std::string d;
    s.read(key, d);
    try {
        return parse_direction(d);
    } catch (const Error&) {
        throw ConfigError("config key '" + s.path_of(key) + "' must be \"outbound\" or \"inbound\"");
    }
}

std::vector<sim::SceneVehicle> explicit_vehicles(const Json& list, const std::string& path, double lo, double hi) {
    if (!list.is_array()) throw ConfigError("config key '" + path + "' must be an array of vehicle objects");
    std::vector<sim::SceneVehicle> out;
    for (std::size_t i = 0; i < list.size(); ++i) {
        Section v(list[i], path + "[" + std::to_string(i) + "]");
        sim::VehicleSpec spec;
        v.read("weight_tons", spec.weight_tons);
        v.read("wheelbase_m", spec.wheelbase_m);
        v.read("axle_count", spec.axle_count);
        v.read("label", spec.label);
        spec.validate();
        const auto dir = parse_direction_key(v, "direction", Direction::Outbound);
        double lane = dir == Direction::Outbound ? 3.0 : 6.0;
        double entry = 3.0, speed = 10.0;
        v.read("lane_offset_m", lane);
        v.read("entry_time_s", entry);
        v.read("speed_mps", speed);
        v.finish();
        if (!(speed > 0.0)) throw ConfigError("config key '" + v.path_of("speed_mps") + "' must be positive");
        out.push_back({spec, sim::Trajectory::constant_speed(dir, lane, entry, dir == Direction::Outbound ? lo : hi,
                                                             speed)});
    }
    return out;
}

fs::path write_matrix(const fs::path& path, const ChannelMatrix& m, Outputs& outputs) {
    io::write_channel_matrix(path, m);
    outputs.push_back(path);
    return path;
}

} // namespace

Outputs run_simulate(const CommandOptions& options) {
    const Context ctx(options, "simulate");
    auto s = ctx.section();
    const std::uint64_t seed = ctx.seed();

    const auto record = parse_record(s.child("record"));
    sim::FiberLayout fiber_base;
    fiber_base.first_channel_road_m = kDefaultRoadOrigin;
    fiber_base.channel_spacing_m = record.channel_spacing_m;
    const auto layout = parse_fiber(s.child("fiber"), fiber_base);
    if (layout.channel_spacing_m != record.channel_spacing_m) {
        throw ConfigError("fiber.channel_spacing_m must equal record.channel_spacing_m");
    }
    const double fiber_road = layout.road_per_fiber * layout.channel_spacing_m * static_cast<double>(layout.channel_count);
    const Centerline centerline = s.has("centerline")
                                      ? parse_centerline(s.child("centerline"))
                                      : Centerline::straight({37.3382, -121.8863}, 60.0,
                                                             layout.first_channel_road_m + fiber_road + 100.0);
    const auto truth = sim::build_sensor_table(layout, seed, &centerline);
    const auto [lo, hi] = road_extent(truth);

    std::vector<sim::SceneVehicle> vehicles;
    if (s.has("vehicles") && s.has("traffic")) throw ConfigError("give either vehicles or traffic, not both");
    if (const auto* list = s.raw("vehicles")) {
        vehicles = explicit_vehicles(*list, s.path_of("vehicles"), lo, hi);
    } else {
        sim::TrafficConfig t;
        t.road_start_m = lo;
        t.road_end_m = hi;
        t.first_entry_s = 3.0;
        t.last_entry_s = 63.0;
        t.min_headway_s = 4.0;
        t.speed_variation = 0.08;
        vehicles = sim::generate_traffic(parse_traffic(s.child("traffic"), t), seed);
    }

    sim::SceneConfig scene;
    scene.record = record;
    scene.sensors = truth;
    scene.spool_segments = layout.spools;
    for (double f : kDefaultFeatureOffsets) {
        const double x = layout.first_channel_road_m + f;
        if (x > lo + 5.0 && x < hi - 5.0) scene.road_features.push_back(x);
    }
    s.read("road_features_m", scene.road_features);
    scene.noise_sigma = 10.0;
    scene.drift_amplitude = 5.0;
    s.read("noise_sigma", scene.noise_sigma);
    s.read("drift_amplitude", scene.drift_amplitude);
    s.read("reference_lane_offset_m", scene.reference_lane_offset_m);
    s.read("depth_m", scene.depth_m);
    double end = 0.0;
    for (const auto& v : vehicles) {
        const auto& tr = v.trajectory;
        end = std::max(end, tr.direction() == Direction::Outbound ? tr.time_at(hi) : tr.time_at(lo));
    }
    scene.duration_s = end + 4.0;
    s.read("duration_s", scene.duration_s);
    scene.vehicles = std::move(vehicles);

    auto d = s.child("driving_test");
    bool drive_enabled = true;
    d.read("enabled", drive_enabled);
    sim::DrivingTestConfig drive;
    drive.record = record;
    drive.noise_sigma = scene.noise_sigma;
    drive.drift_amplitude = scene.drift_amplitude;
    drive.lane_offset_m = scene.reference_lane_offset_m;
    d.read("runs", drive.runs);
    d.read("speed_mps", drive.speed_mps);
    d.read("lane_offset_m", drive.lane_offset_m);
    d.read("test_weight_tons", drive.vehicle.weight_tons);
    d.read("gps_sigma_m", drive.gps_sigma_m);
    d.read("gps_rate_hz", drive.gps_rate_hz);
    d.read("clock_offset_s", drive.clock_offset_s);
    d.read("tap_count", drive.tap_count);
    d.read("tap_channel", drive.tap_channel);
    d.finish();
    s.finish();
    scene.validate();

    Outputs outputs;
    const auto rec = sim::synthesize(scene, seed);
    const fs::path out = ctx.out();
    write_matrix(out / "das.bin", rec.das, outputs);
    io::write_calibration(out / "truth_calibration.csv", truth);
    write_vehicle_truth(out / "truth_vehicles.csv", rec.truth.vehicles);
    write_trajectories(out / "truth_trajectories.csv", rec.truth.trajectories);
    write_arrivals(out / "truth_arrivals.csv", rec.truth.arrivals, rec.truth.vehicles);
    write_centerline(out / "centerline.csv", centerline);
    write_column(out / "road_features.csv", "road_m", scene.road_features);
    for (const char* f : {"truth_calibration.csv", "truth_vehicles.csv", "truth_trajectories.csv",
                          "truth_arrivals.csv", "centerline.csv", "road_features.csv"}) {
        outputs.push_back(out / f);
    }

    if (drive_enabled) {
        drive.sensors = truth;
        drive.spool_segments = layout.spools;
        drive.centerline = centerline;
        drive.road_features = scene.road_features;
        const auto test = sim::synthesize_driving_test(drive, seed + 17);
        for (std::size_t i = 0; i < test.runs.size(); ++i) {
            write_matrix(out / "drive" / ("run_" + std::to_string(i) + ".bin"), test.runs[i].das, outputs);
        }
        write_gps(out / "drive" / "gps.csv", test.gps);
        write_matrix(out / "drive" / "tap_record.bin", test.tap_record, outputs);
        write_column(out / "drive" / "tap_reference.csv", "reference_time_s", test.tap_reference_times_s);
        outputs.push_back(out / "drive" / "gps.csv");
        outputs.push_back(out / "drive" / "tap_reference.csv");
    }
    return outputs;
}

Outputs run_calibrate(const CommandOptions& options) {
    const Context ctx(options, "calibrate");
    auto s = ctx.section();
    std::vector<fs::path> run_paths;
    if (s.has("runs")) {
        std::vector<std::string> names;
        s.read("runs", names);
        for (const auto& n : names) run_paths.push_back(ctx.resolve(n));
    } else {
        for (std::size_t i = 0;; ++i) {
            auto p = ctx.out() / "drive" / ("run_" + std::to_string(i) + ".bin");
            if (!fs::exists(p)) break;
            run_paths.push_back(std::move(p));
        }
    }
    if (run_paths.empty()) throw ConfigError("no calibration runs given or found");
    const auto gps_path = ctx.input(s, "gps", "drive/gps.csv");
    const auto centerline_path = ctx.input(s, "centerline", "centerline.csv");
    const bool tap_table = s.has("taps");
    const auto taps_path = tap_table ? ctx.input(s, "taps", "taps.csv") : fs::path{};
    const auto tap_record_path = tap_table ? fs::path{} : ctx.input(s, "tap_record", "drive/tap_record.bin");
    const auto tap_reference_path = tap_table ? fs::path{} : ctx.input(s, "tap_reference", "drive/tap_reference.csv");
    std::size_t tap_channel = 0;
    double tap_separation_s = 0.5;
    s.read("tap_channel", tap_channel);
    s.read("tap_min_separation_s", tap_separation_s);
    double weight = 1.47;
    s.read("test_weight_tons", weight);
    const auto geolocation = parse_geolocation(s.child("geolocation"));
    s.finish();
    if (!(weight > 0.0)) throw ConfigError("test_weight_tons must be positive");
    for (const auto& p : run_paths) require_files({p});
    require_files({gps_path, centerline_path});
    if (tap_table) {
        require_files({taps_path});
    } else {
        require_files({tap_record_path, tap_reference_path});
    }

    calib::CalibrationInputs inputs{{}, read_gps(gps_path), {}, read_centerline(centerline_path), weight, geolocation};
    for (const auto& p : run_paths) inputs.runs.push_back(io::read_channel_matrix(p));
    if (inputs.gps.size() != inputs.runs.size()) {
        throw DataError("" + std::to_string(inputs.runs.size()) + " runs but GPS logs for " +
                        std::to_string(inputs.gps.size()));
    }
    if (tap_table) {
        inputs.taps = read_taps(taps_path);
    } else {
        const auto reference = read_column(tap_reference_path, "reference_time_s");
        const auto record = io::read_channel_matrix(tap_record_path);
        if (tap_channel >= record.channel_count()) throw DataError("tap channel outside the tap record");
        const auto found = calib::locate_taps(record, tap_channel, reference.size(), tap_separation_s);
        if (found.size() != reference.size()) {
            throw DataError("located " + std::to_string(found.size()) + " taps, reference lists " +
                            std::to_string(reference.size()));
        }
        for (std::size_t i = 0; i < found.size(); ++i) inputs.taps.push_back({found[i], reference[i]});
    }
    const auto result = calib::calibrate(inputs);

    const fs::path out = ctx.out();
    io::write_calibration(out / "calibration.csv", result.table);
    std::size_t spooled = 0;
    for (const auto& e : result.table.entries()) spooled += e.spooled() ? 1 : 0;
    io::write_key_values(out / "clock.txt",
                         {{"offset_s", io::format_number(result.clock.offset_s)},
                          {"spread_s", io::format_number(result.clock.spread_s.value_or(std::nan("")))},
                          {"channels", std::to_string(result.table.size())},
                          {"spooled_channels", std::to_string(spooled)}});
    return {out / "calibration.csv", out / "clock.txt"};
}

Outputs run_detect(const CommandOptions& options) {
    const Context ctx(options, "detect");
    auto s = ctx.section();
    const auto das_path = ctx.input(s, "das", "das.bin");
    const auto calibration_path = ctx.input(s, "calibration", "calibration.csv");
    const auto config = parse_detector(s.child("detector"));
    s.finish();
    require_files({das_path, calibration_path});

    const auto das = io::read_channel_matrix(das_path);
    const auto table = io::read_calibration(calibration_path);
    if (table.size() == 0) throw DataError("calibration table is empty");
    const auto result = detect::detect_all(das, table, config);
    const fs::path out = ctx.out();
    io::write_detections(out / "detections.csv", result.detections);
    std::vector<double> skipped(result.skipped_channels.begin(), result.skipped_channels.end());
    write_column(out / "skipped_channels.csv", "channel", skipped);
    return {out / "detections.csv", out / "skipped_channels.csv"};
}

Outputs run_track(const CommandOptions& options) {
    const Context ctx(options, "track");
    auto s = ctx.section();
    const auto detections_path = ctx.input(s, "detections", "detections.csv");
    const auto calibration_path = ctx.input(s, "calibration", "calibration.csv");
    std::optional<std::vector<track::Segment>> segments;
    if (const auto* j = s.raw("segments")) segments = parse_segments(*j, s.path_of("segments"));
    const auto config = parse_tracker(s.child("tracker"));
    s.finish();
    require_files({detections_path, calibration_path});

    const auto detections = io::read_detections(detections_path);
    const auto table = io::read_calibration(calibration_path);
    if (table.size() == 0) throw DataError("calibration table is empty");
    if (!segments) segments = std::vector<track::Segment>{{table[0].channel, table[table.size() - 1].channel}};
    const auto result = track::track_multi(detections, table, *segments, config);

    const fs::path out = ctx.out();
    write_tracks(out / "tracks.csv", result.tracks);
    std::vector<double> residue(result.residue.begin(), result.residue.end());
    write_column(out / "track_residue.csv", "detection", residue);
    return {out / "tracks.csv", out / "track_residue.csv"};
}

Outputs run_characterize(const CommandOptions& options) {
    const Context ctx(options, "characterize");
    auto s = ctx.section();
    const auto tracks_path = ctx.input(s, "tracks", "tracks.csv");
    const auto detections_path = ctx.input(s, "detections", "detections.csv");
    const auto das_path = ctx.input(s, "das", "das.bin");
    const auto calibration_path = ctx.input(s, "calibration", "calibration.csv");
    std::vector<double> features;
    const bool inline_features = s.has("road_features_m");
    s.read("road_features_m", features);
    const auto features_path = inline_features ? fs::path{} : ctx.input(s, "road_features", "road_features.csv");
    double radius = 2.0, calibration_lane = 3.0, outbound_lane = 3.0, inbound_lane = 6.0, depth = 1.5;
    s.read("feature_radius_m", radius);
    s.read("calibration_lane_offset_m", calibration_lane);
    s.read("outbound_lane_offset_m", outbound_lane);
    s.read("inbound_lane_offset_m", inbound_lane);
    s.read("depth_m", depth);
    const auto config = parse_characterize(s.child("characterize"));
    s.finish();
    if (!(radius >= 0.0)) throw ConfigError("feature_radius_m must be non-negative");
    if (!(calibration_lane > 0.0) || !(outbound_lane > 0.0) || !(inbound_lane > 0.0) || !(depth > 0.0)) {
        throw ConfigError("lane offsets and depth must be positive");
    }
    require_files({tracks_path, detections_path, das_path, calibration_path});
    // Without a feature list the wheelbase is skipped; weight needs no features.
    if (!inline_features && fs::exists(features_path)) features = read_column(features_path, "road_m");

    const auto detections = io::read_detections(detections_path);
    const auto tracks = read_tracks(tracks_path, detections);
    const auto das = io::read_channel_matrix(das_path);
    const auto table = io::read_calibration(calibration_path);
    if (table.size() == 0) throw DataError("calibration table is empty");
    const double gauge = das.info().gauge_length_m;
    const auto lane_table = [&](double lane) {
        return table.scaled(calib::extrapolate_lane(1.0, calibration_lane, lane, depth, gauge));
    };
    const auto outbound_table = lane_table(outbound_lane);
    const auto inbound_table = lane_table(inbound_lane);
    std::vector<std::size_t> feature_channels;
    for (const auto& e : table.entries()) {
        if (e.spooled()) continue;
        const bool near = std::any_of(features.begin(), features.end(),
                                      [&](double f) { return std::abs(e.road_position_m - f) <= radius; });
        if (near) feature_channels.push_back(e.channel);
    }

    std::vector<characterize::VehicleCharacter> characters;
    for (const auto& trk : tracks) {
        const auto& lane = trk.direction == Direction::Outbound ? outbound_table : inbound_table;
        characters.push_back(characterize::characterize_track(trk, tracks, das, lane, feature_channels, config));
    }
    const fs::path out = ctx.out();
    write_characterization(out / "vehicles.csv", tracks, characters);
    return {out / "vehicles.csv"};
}

Outputs run_eval_command(const CommandOptions& options) {
    const Context ctx(options, "eval");
    eval::EvalConfig base;
    base.seed = ctx.seed();
    auto config = parse_eval(ctx.section(), base);
    if (ctx.seed_overridden()) config.seed = ctx.seed();
    const auto report = eval::run_eval(config);
    const auto written = eval::emit_plots(report, ctx.out());
    if (!report.failures.empty()) {
        std::string msg = std::to_string(report.failures.size()) + " scenario(s) failed; partial report written";
        for (const auto& f : report.failures) msg += "\n  " + f;
        throw DataError(msg);
    }
    return written;
}

const std::vector<std::string>& command_names() { return kSections; }

Outputs run_command(const std::string& name, const CommandOptions& options) {
    static const std::map<std::string, std::function<Outputs(const CommandOptions&)>> table{
        {"simulate", run_simulate},   {"calibrate", run_calibrate},         {"detect", run_detect},
        {"track", run_track},         {"characterize", run_characterize},   {"eval", run_eval_command}};
    const auto it = table.find(name);
    if (it == table.end()) throw ConfigError("unknown command '" + name + "'");
    return it->second(options);
}

int exit_code_for(const std::exception_ptr& error) {
    try {
        std::rethrow_exception(error);
    } catch (const ConfigError&) {
        return 2;
    } catch (const DataError&) {
        return 3;
    } catch (const PreconditionError&) {
        return 3;
    } catch (const fs::filesystem_error&) {
        return 3;
    } catch (...) {
        return 1;
    }
}

} // namespace dastm::cli
