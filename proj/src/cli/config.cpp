#include "dastm/cli/config.hpp"

#include "dastm/error.hpp"

#include <algorithm>
#include <fstream>

namespace dastm::cli {

namespace {

const Json& null_json() {
    static const Json j;
    return j;
}

[[noreturn]] void type_error(const std::string& path, const char* expected) {
    throw ConfigError("config key '" + path + "' must be " + expected);
}

std::vector<double> number_list(const Json& j, const std::string& path) {
    if (!j.is_array()) type_error(path, "an array of numbers");
    std::vector<double> out;
    for (const auto& e : j) {
        if (!e.is_number()) type_error(path, "an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

GeoPoint geo_point(const Json& j, const std::string& path) {
    const auto v = number_list(j, path);
    if (v.size() != 2) type_error(path, "a [lat, lon] pair");
    return {v[0], v[1]};
}

detect::ProminenceMode parse_mode(const std::string& s, const std::string& path) {
    if (s == "windowed") return detect::ProminenceMode::Windowed;
    if (s == "global") return detect::ProminenceMode::Global;
    throw ConfigError("config key '" + path + "' must be \"windowed\" or \"global\"");
}

track::InnovationForm parse_innovation(const std::string& s, const std::string& path) {
    if (s == "variance") return track::InnovationForm::Variance;
    if (s == "literal_std") return track::InnovationForm::LiteralStd;
    throw ConfigError("config key '" + path + "' must be \"variance\" or \"literal_std\"");
}

} // namespace

Json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("malformed config " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config " + path.string() + " must hold a JSON object");
    return j;
}

Section::Section(const Json& json, std::string path) : json_(&json), path_(std::move(path)) {
    if (!json.is_null() && !json.is_object()) {
        throw ConfigError("config key '" + (path_.empty() ? std::string("<root>") : path_) + "' must be an object");
    }
}

std::string Section::path_of(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

bool Section::has(const std::string& key) const { return json_->is_object() && json_->contains(key); }

const Json& Section::value(const std::string& key) {
    used_.push_back(key);
    return json_->at(key);
}

void Section::read(const std::string& key, double& out) {
    if (!has(key)) return;
    const auto& v = value(key);
    if (!v.is_number()) type_error(path_of(key), "a number");
    out = v.get<double>();
}

std::uint64_t Section::read_unsigned(const std::string& key) {
    const auto& v = value(key);
    if (!v.is_number_unsigned()) type_error(path_of(key), "a non-negative integer");
    return v.get<std::uint64_t>();
}

void Section::throw_range(const std::string& key) const { type_error(path_of(key), "a smaller integer"); }

void Section::read(const std::string& key, int& out) {
    if (!has(key)) return;
    const auto& v = value(key);
    if (!v.is_number_integer()) type_error(path_of(key), "an integer");
    out = v.get<int>();
}

void Section::read(const std::string& key, bool& out) {
    if (!has(key)) return;
    const auto& v = value(key);
    if (!v.is_boolean()) type_error(path_of(key), "true or false");
    out = v.get<bool>();
}

void Section::read(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const auto& v = value(key);
    if (!v.is_string()) type_error(path_of(key), "a string");
    out = v.get<std::string>();
}

void Section::read(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    out = number_list(value(key), path_of(key));
}

void Section::read(const std::string& key, std::vector<std::size_t>& out) {
    if (!has(key)) return;
    const auto& v = value(key);
    if (!v.is_array()) type_error(path_of(key), "an array of non-negative integers");
    out.clear();
    for (const auto& e : v) {
        if (!e.is_number_unsigned()) type_error(path_of(key), "an array of non-negative integers");
        out.push_back(e.get<std::size_t>());
    }
}

void Section::read(const std::string& key, std::vector<std::string>& out) {
    if (!has(key)) return;
    const auto& v = value(key);
    if (!v.is_array()) type_error(path_of(key), "an array of strings");
    out.clear();
    for (const auto& e : v) {
        if (!e.is_string()) type_error(path_of(key), "an array of strings");
        out.push_back(e.get<std::string>());
    }
}

Section Section::child(const std::string& key) {
    if (!has(key)) return Section(null_json(), path_of(key));
    return Section(value(key), path_of(key));
}

const Json* Section::raw(const std::string& key) {
    if (!has(key)) return nullptr;
    return &value(key);
}

void Section::finish() const {
    if (!json_->is_object()) return;
    for (const auto& item : json_->items()) {
        if (std::find(used_.begin(), used_.end(), item.key()) == used_.end()) {
            throw ConfigError("unknown config key '" + path_of(item.key()) + "'");
        }
    }
}

RecordInfo parse_record(Section s, RecordInfo base) {
    s.read("sample_rate_hz", base.sample_rate_hz);
    s.read("start_time", base.start_time);
    s.read("channel_spacing_m", base.channel_spacing_m);
    s.read("gauge_length_m", base.gauge_length_m);
    s.finish();
    if (!(base.sample_rate_hz > 0.0) || !(base.channel_spacing_m > 0.0) || !(base.gauge_length_m > 0.0)) {
        throw ConfigError("record sample rate, channel spacing and gauge length must be positive");
    }
    return base;
}

detect::DetectorConfig parse_detector(Section s, detect::DetectorConfig base) {
    s.read("r0", base.r0);
    s.read("window_s", base.window_s);
    s.read("span_s", base.span_s);
    s.read("merge_s", base.merge_s);
    if (s.has("mode")) {
        std::string mode;
        s.read("mode", mode);
        base.mode = parse_mode(mode, s.path_of("mode"));
    }
    s.finish();
    base.validate();
    return base;
}

track::MotionModel parse_motion_model(Section s, track::MotionModel base) {
    s.read("sigma_tddot", base.sigma_tddot);
    s.read("sigma_z", base.sigma_z);
    if (s.has("innovation")) {
        std::string form;
        s.read("innovation", form);
        base.innovation = parse_innovation(form, s.path_of("innovation"));
    }
    s.finish();
    base.validate();
    return base;
}

track::TrackerConfig parse_tracker(Section s, track::TrackerConfig base) {
    base.model = parse_motion_model(s.child("model"), base.model);
    s.read("gate_sigmas", base.gate_sigmas);
    s.read("max_miss_gap_m", base.max_miss_gap_m);
    s.read("min_track_channels", base.min_track_channels);
    s.read("init_time_std_s", base.init_time_std_s);
    s.read("init_slowness_std", base.init_slowness_std);
    s.read("seed_channels", base.seed_channels);
    s.read("min_seed_support", base.min_seed_support);
    s.read("seed_tolerance_s", base.seed_tolerance_s);
    s.read("min_slowness", base.min_slowness);
    s.read("max_slowness", base.max_slowness);
    s.read("merge_overlap", base.merge_overlap);
    s.read("stitch_tolerance_s", base.stitch_tolerance_s);
    s.read("baseline", base.baseline);
    s.read("nominal_spacing_m", base.nominal_spacing_m);
    s.finish();
    base.validate();
    return base;
}

calib::GeolocationConfig parse_geolocation(Section s, calib::GeolocationConfig base) {
    s.read("spool_tolerance_m", base.spool_tolerance_m);
    s.read("floor_mad_factor", base.floor_mad_factor);
    s.read("search_window_s", base.search_window_s);
    s.read("outlier_mads", base.outlier_mads);
    s.read("prominence_half_window_m", base.prominence_half_window_m);
    s.read("prediction_half_width", base.prediction_half_width);
    s.read("enforce_monotone", base.enforce_monotone);
    s.finish();
    base.validate();
    return base;
}

characterize::CharacterizeConfig parse_characterize(Section s, characterize::CharacterizeConfig base) {
    auto w = s.child("wheelbase");
    w.read("min_wheelbase_m", base.wheelbase.min_wheelbase_m);
    w.read("max_wheelbase_m", base.wheelbase.max_wheelbase_m);
    w.read("min_correlation", base.wheelbase.min_correlation);
    w.read("window_pad_s", base.wheelbase.window_pad_s);
    w.read("min_snr", base.wheelbase.min_snr);
    w.finish();
    s.read("prominence_half_window_m", base.prominence_half_window_m);
    s.read("crosstalk_guard_m", base.crosstalk_guard_m);
    s.read("min_weight_channels", base.min_weight_channels);
    s.finish();
    base.validate();
    return base;
}

sim::FiberLayout parse_fiber(Section s, sim::FiberLayout base) {
    s.read("channel_count", base.channel_count);
    s.read("channel_spacing_m", base.channel_spacing_m);
    s.read("first_channel_road_m", base.first_channel_road_m);
    s.read("road_per_fiber", base.road_per_fiber);
    if (const auto* spools = s.raw("spools")) {
        if (!spools->is_array()) type_error(s.path_of("spools"), "an array of objects");
        base.spools.clear();
        for (std::size_t i = 0; i < spools->size(); ++i) {
            Section sp((*spools)[i], s.path_of("spools[" + std::to_string(i) + "]"));
            sim::SpoolSegment seg;
            sp.read("first_channel", seg.first_channel);
            sp.read("slack_length_m", seg.slack_length_m);
            sp.finish();
            base.spools.push_back(seg);
        }
    }
    s.read("transmissibility_min", base.transmissibility_min);
    s.read("transmissibility_max", base.transmissibility_max);
    s.read("flipped_fraction", base.flipped_fraction);
    s.read("mean_flip_run_channels", base.mean_flip_run_channels);
    s.read("correlation_channels", base.correlation_channels);
    s.finish();
    if (base.channel_count == 0 || !(base.channel_spacing_m > 0.0) || !(base.road_per_fiber > 0.0)) {
        throw ConfigError("fiber channel_count, channel_spacing_m and road_per_fiber must be positive");
    }
    if (!(base.transmissibility_min > 0.0) || base.transmissibility_max < base.transmissibility_min) {
        throw ConfigError("fiber transmissibility range must be positive and ordered");
    }
    if (!(base.flipped_fraction >= 0.0 && base.flipped_fraction <= 1.0)) {
        throw ConfigError("fiber flipped_fraction must lie in [0, 1]");
    }
    (void)sim::spool_channels(base.spools, base.channel_count, base.channel_spacing_m);
    return base;
}

sim::VehicleSpec parse_vehicle_spec(Section s, sim::VehicleSpec base) {
    s.read("weight_tons", base.weight_tons);
    s.read("wheelbase_m", base.wheelbase_m);
    s.read("axle_count", base.axle_count);
    s.read("label", base.label);
    s.finish();
    base.validate();
    return base;
}

sim::TrafficConfig parse_traffic(Section s, sim::TrafficConfig base) {
    s.read("vehicle_count", base.vehicle_count);
    s.read("outbound_fraction", base.outbound_fraction);
    s.read("road_start_m", base.road_start_m);
    s.read("road_end_m", base.road_end_m);
    s.read("first_entry_s", base.first_entry_s);
    s.read("last_entry_s", base.last_entry_s);
    s.read("min_headway_s", base.min_headway_s);
    s.read("speed_min_mps", base.speed_min_mps);
    s.read("speed_max_mps", base.speed_max_mps);
    s.read("speed_variation", base.speed_variation);
    s.read("speed_segment_m", base.speed_segment_m);
    s.read("speed_correlation", base.speed_correlation);
    s.read("near_lane_offset_m", base.near_lane_offset_m);
    s.read("far_lane_offset_m", base.far_lane_offset_m);
    if (const auto* classes = s.raw("classes")) {
        if (!classes->is_array() || classes->empty()) type_error(s.path_of("classes"), "a non-empty array of objects");
        base.classes.clear();
        for (std::size_t i = 0; i < classes->size(); ++i) {
            Section c((*classes)[i], s.path_of("classes[" + std::to_string(i) + "]"));
            sim::VehicleClass vc;
            c.read("label", vc.label);
            c.read("share", vc.share);
            c.read("weight_min_tons", vc.weight_min_tons);
            c.read("weight_max_tons", vc.weight_max_tons);
            c.read("wheelbase_min_m", vc.wheelbase_min_m);
            c.read("wheelbase_max_m", vc.wheelbase_max_m);
            c.finish();
            base.classes.push_back(vc);
        }
    }
    s.finish();
    return base;
}

std::vector<track::Segment> parse_segments(const Json& json, const std::string& path) {
    if (!json.is_array()) type_error(path, "an array of {first_channel, last_channel} objects");
    std::vector<track::Segment> out;
    for (std::size_t i = 0; i < json.size(); ++i) {
        Section s(json[i], path + "[" + std::to_string(i) + "]");
        if (!s.has("first_channel") || !s.has("last_channel")) {
            throw ConfigError("config key '" + path + "[" + std::to_string(i) +
                              "]' needs first_channel and last_channel");
        }
        track::Segment seg;
        s.read("first_channel", seg.first_channel);
        s.read("last_channel", seg.last_channel);
        s.finish();
        if (seg.last_channel < seg.first_channel) {
            throw ConfigError("config key '" + path + "[" + std::to_string(i) + "]' has last_channel < first_channel");
        }
        out.push_back(seg);
    }
    return out;
}

Centerline parse_centerline(Section s) {
    if (s.has("vertices")) {
        const auto* v = s.raw("vertices");
        if (!v->is_array() || v->size() < 2) type_error(s.path_of("vertices"), "an array of at least two [lat, lon] pairs");
        std::vector<GeoPoint> pts;
        for (std::size_t i = 0; i < v->size(); ++i) {
            pts.push_back(geo_point((*v)[i], s.path_of("vertices[" + std::to_string(i) + "]")));
        }
        s.finish();
        try {
            return Centerline(std::move(pts));
        } catch (const Error& e) {
            throw ConfigError(std::string("centerline: ") + e.what());
        }
    }
    GeoPoint origin{37.3382, -121.8863};
    if (const auto* o = s.raw("origin")) origin = geo_point(*o, s.path_of("origin"));
    double bearing = 60.0, length = 1000.0;
    s.read("bearing_deg", bearing);
    s.read("length_m", length);
    s.finish();
    if (!(length > 0.0)) throw ConfigError("centerline length_m must be positive");
    return Centerline::straight(origin, bearing, length);
}

eval::EvalConfig parse_eval(Section s, eval::EvalConfig base) {
    s.read("seed", base.seed);
    base.record = parse_record(s.child("record"), base.record);
    s.read("channel_count", base.channel_count);
    s.read("noise_sigma", base.noise_sigma);
    s.read("drift_amplitude", base.drift_amplitude);
    s.read("near_lane_offset_m", base.near_lane_offset_m);
    s.read("far_lane_offset_m", base.far_lane_offset_m);
    s.read("depth_m", base.depth_m);
    s.read("speed_min_mps", base.speed_min_mps);
    s.read("speed_max_mps", base.speed_max_mps);
    s.read("speed_variation", base.speed_variation);
    s.read("min_headway_s", base.min_headway_s);
    s.read("road_features_m", base.road_features_m);
    s.read("feature_radius_m", base.feature_radius_m);
    s.read("traffic_vehicles", base.traffic_vehicles);
    s.read("traffic_window_s", base.traffic_window_s);
    s.read("spool_first_channel", base.spool_first_channel);
    s.read("spool_slack_m", base.spool_slack_m);
    s.read("spool_road_per_fiber", base.spool_road_per_fiber);
    s.read("spool_vehicles", base.spool_vehicles);
    s.read("crosstalk_channels", base.crosstalk_channels);
    s.read("crosstalk_far_vehicles", base.crosstalk_far_vehicles);
    s.read("crosstalk_fraction", base.crosstalk_fraction);
    if (const auto* types = s.raw("fleet_types")) {
        if (!types->is_array()) type_error(s.path_of("fleet_types"), "an array of vehicle objects");
        base.fleet_types.clear();
        for (std::size_t i = 0; i < types->size(); ++i) {
            base.fleet_types.push_back(
                parse_vehicle_spec(Section((*types)[i], s.path_of("fleet_types[" + std::to_string(i) + "]"))));
        }
    }
    s.read("fleet_per_type", base.fleet_per_type);
    s.read("decimation", base.decimation);
    s.read("scenarios", base.scenarios);
    s.read("calibration_runs", base.calibration_runs);
    s.read("gps_sigma_m", base.gps_sigma_m);
    s.read("clock_offset_s", base.clock_offset_s);
    s.read("test_vehicle_tons", base.test_vehicle_tons);
    base.detector = parse_detector(s.child("detector"), base.detector);
    base.tracker = parse_tracker(s.child("tracker"), base.tracker);
    base.geolocation = parse_geolocation(s.child("geolocation"), base.geolocation);
    base.characterize = parse_characterize(s.child("characterize"), base.characterize);
    s.read("match_tolerance_s", base.match_tolerance_s);
    s.finish();
    base.validate();
    return base;
}

} // namespace dastm::cli
