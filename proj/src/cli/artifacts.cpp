#include "dastm/cli/artifacts.hpp"

#include "dastm/core/io.hpp"
#include "dastm/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace dastm::cli {

namespace {

using io::format_number;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t index_at(const io::TextTable& t, std::size_t row, const std::string& column) {
    const double v = t.number(row, column);
    if (!(v >= 0.0) || v != std::floor(v)) {
        throw DataError("column '" + column + "' row " + std::to_string(row) + " must be a non-negative integer");
    }
    return static_cast<std::size_t>(v);
}

double finite_at(const io::TextTable& t, std::size_t row, const std::string& column) {
    const double v = t.number(row, column);
    if (!std::isfinite(v)) throw DataError("column '" + column + "' row " + std::to_string(row) + " must be finite");
    return v;
}

std::string index_text(std::size_t v) { return std::to_string(v); }

} // namespace

void write_centerline(const std::filesystem::path& path, const Centerline& centerline) {
    io::TextTable t;
    t.header = {"lat", "lon"};
    for (const auto& v : centerline.vertices()) t.rows.push_back({format_number(v.lat), format_number(v.lon)});
    io::write_table(path, t);
}

Centerline read_centerline(const std::filesystem::path& path) {
    const auto t = io::read_table(path);
    std::vector<GeoPoint> pts;
    for (std::size_t r = 0; r < t.rows.size(); ++r) pts.push_back({finite_at(t, r, "lat"), finite_at(t, r, "lon")});
    if (pts.size() < 2) throw DataError("centerline '" + path.string() + "' needs at least two vertices");
    try {
        return Centerline(std::move(pts));
    } catch (const Error& e) {
        throw DataError(e.what());
    }
}

void write_gps(const std::filesystem::path& path, const std::vector<std::vector<GpsFix>>& runs) {
    io::TextTable t;
    t.header = {"run", "time_s", "lat", "lon"};
    for (std::size_t r = 0; r < runs.size(); ++r) {
        for (const auto& f : runs[r]) {
            t.rows.push_back({index_text(r), format_number(f.time_s), format_number(f.position.lat),
                              format_number(f.position.lon)});
        }
    }
    io::write_table(path, t);
}

std::vector<std::vector<GpsFix>> read_gps(const std::filesystem::path& path) {
    const auto t = io::read_table(path);
    std::vector<std::vector<GpsFix>> runs;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto run = index_at(t, r, "run");
        if (run >= runs.size()) runs.resize(run + 1);
        runs[run].push_back({finite_at(t, r, "time_s"), {finite_at(t, r, "lat"), finite_at(t, r, "lon")}});
    }
    for (std::size_t r = 0; r < runs.size(); ++r) {
        if (runs[r].empty()) throw DataError("gps log '" + path.string() + "' has no fixes for run " + index_text(r));
    }
    return runs;
}

void write_taps(const std::filesystem::path& path, const std::vector<calib::TapEvent>& taps) {
    io::TextTable t;
    t.header = {"das_time_s", "reference_time_s"};
    for (const auto& tap : taps) t.rows.push_back({format_number(tap.das_time_s), format_number(tap.reference_time_s)});
    io::write_table(path, t);
}

std::vector<calib::TapEvent> read_taps(const std::filesystem::path& path) {
    const auto t = io::read_table(path);
    std::vector<calib::TapEvent> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out.push_back({finite_at(t, r, "das_time_s"), finite_at(t, r, "reference_time_s")});
    }
    return out;
}

void write_column(const std::filesystem::path& path, const std::string& column, const std::vector<double>& values) {
    io::TextTable t;
    t.header = {column};
    for (double v : values) t.rows.push_back({format_number(v)});
    io::write_table(path, t);
}

std::vector<double> read_column(const std::filesystem::path& path, const std::string& column) {
    const auto t = io::read_table(path);
    std::vector<double> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) out.push_back(finite_at(t, r, column));
    return out;
}

void write_vehicle_truth(const std::filesystem::path& path, const std::vector<sim::VehicleTruth>& vehicles) {
    io::TextTable t;
    t.header = {"vehicle", "label", "direction", "lane_offset_m", "weight_tons", "wheelbase_m", "axle_count"};
    for (const auto& v : vehicles) {
        t.rows.push_back({index_text(v.id), v.spec.label.empty() ? "-" : v.spec.label,
                          std::string(to_string(v.direction)), format_number(v.lane_offset_m),
                          format_number(v.spec.weight_tons), format_number(v.spec.wheelbase_m),
                          std::to_string(v.spec.axle_count)});
    }
    io::write_table(path, t);
}

std::vector<sim::VehicleTruth> read_vehicle_truth(const std::filesystem::path& path) {
    const auto t = io::read_table(path);
    std::vector<sim::VehicleTruth> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        sim::VehicleTruth v;
        v.id = index_at(t, r, "vehicle");
        v.spec.label = t.text(r, "label") == "-" ? "" : t.text(r, "label");
        v.direction = parse_direction(t.text(r, "direction"));
        v.lane_offset_m = finite_at(t, r, "lane_offset_m");
        v.spec.weight_tons = finite_at(t, r, "weight_tons");
        v.spec.wheelbase_m = finite_at(t, r, "wheelbase_m");
        v.spec.axle_count = static_cast<int>(index_at(t, r, "axle_count"));
        out.push_back(v);
    }
    return out;
}

void write_trajectories(const std::filesystem::path& path, const std::vector<sim::Trajectory>& trajectories) {
    io::TextTable t;
    t.header = {"vehicle", "time_s", "road_m"};
    for (std::size_t v = 0; v < trajectories.size(); ++v) {
        for (const auto& [time, road] : trajectories[v].knots()) {
            t.rows.push_back({index_text(v), format_number(time), format_number(road)});
        }
    }
    io::write_table(path, t);
}

std::vector<sim::Trajectory> read_trajectories(const std::filesystem::path& path,
                                               const std::vector<sim::VehicleTruth>& truth) {
    const auto t = io::read_table(path);
    std::vector<std::vector<std::pair<double, double>>> knots(truth.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto v = index_at(t, r, "vehicle");
        if (v >= truth.size()) throw DataError("trajectory row " + index_text(r) + " names an unknown vehicle");
        knots[v].emplace_back(finite_at(t, r, "time_s"), finite_at(t, r, "road_m"));
    }
    std::vector<sim::Trajectory> out;
    for (std::size_t v = 0; v < truth.size(); ++v) {
        try {
            out.emplace_back(std::move(knots[v]), truth[v].direction, truth[v].lane_offset_m);
        } catch (const ConfigError& e) {
            throw DataError("trajectory of vehicle " + index_text(v) + ": " + e.what());
        }
    }
    return out;
}

void write_arrivals(const std::filesystem::path& path, const std::vector<sim::ArrivalTruth>& arrivals,
                    const std::vector<sim::VehicleTruth>& vehicles) {
    io::TextTable t;
    t.header = {"vehicle", "channel", "time_s", "weight_tons", "wheelbase_m"};
    for (const auto& a : arrivals) {
        if (a.vehicle >= vehicles.size()) throw PreconditionError("write_arrivals: arrival of an unknown vehicle");
        const auto& spec = vehicles[a.vehicle].spec;
        t.rows.push_back({index_text(a.vehicle), index_text(a.channel), format_number(a.time_s),
                          format_number(spec.weight_tons), format_number(spec.wheelbase_m)});
    }
    io::write_table(path, t);
}

void write_tracks(const std::filesystem::path& path, const std::vector<track::VehicleTrack>& tracks) {
    io::TextTable t;
    t.header = {"track",  "direction", "channel",         "x_m",          "dx_m",           "time_s",
                "slowness", "var_t",   "cov_t_slowness", "var_slowness", "filtered_time_s", "filtered_slowness",
                "speed_kmh", "detection", "residual_s"};
    for (const auto& trk : tracks) {
        for (const auto& p : trk.points) {
            const auto& s = p.smoothed;
            t.rows.push_back({index_text(trk.id), std::string(to_string(trk.direction)), index_text(p.channel),
                              format_number(p.x_m), format_number(p.dx_m), format_number(s.mean(0)),
                              format_number(s.mean(1)), format_number(s.cov(0, 0)), format_number(s.cov(0, 1)),
                              format_number(s.cov(1, 1)), format_number(p.filtered.mean(0)),
                              format_number(p.filtered.mean(1)), format_number(3.6 * p.speed_mps()),
                              p.detection_id ? index_text(*p.detection_id) : "-1", format_number(trk.residual_s)});
        }
    }
    io::write_table(path, t);
}

std::vector<track::VehicleTrack> read_tracks(const std::filesystem::path& path,
                                             const std::vector<Detection>& detections) {
    const auto t = io::read_table(path);
    std::vector<track::VehicleTrack> out;
    std::map<std::size_t, std::size_t> slot;  // track id -> index in out
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto id = index_at(t, r, "track");
        const auto dir = parse_direction(t.text(r, "direction"));
        auto [it, inserted] = slot.emplace(id, out.size());
        if (inserted) {
            out.emplace_back();
            out.back().id = id;
            out.back().direction = dir;
            out.back().residual_s = t.number(r, "residual_s");
        } else if (it->second != out.size() - 1) {
            throw DataError("tracks file '" + path.string() + "': rows of track " + index_text(id) + " are not contiguous");
        } else if (out.back().direction != dir) {
            throw DataError("tracks file '" + path.string() + "': track " + index_text(id) + " changes direction");
        }
        track::TrackPoint p;
        p.channel = index_at(t, r, "channel");
        p.x_m = finite_at(t, r, "x_m");
        p.dx_m = finite_at(t, r, "dx_m");
        p.smoothed.channel = p.channel;
        p.smoothed.mean << finite_at(t, r, "time_s"), finite_at(t, r, "slowness");
        const double c01 = finite_at(t, r, "cov_t_slowness");
        p.smoothed.cov << finite_at(t, r, "var_t"), c01, c01, finite_at(t, r, "var_slowness");
        p.filtered = p.smoothed;
        p.filtered.mean << finite_at(t, r, "filtered_time_s"), finite_at(t, r, "filtered_slowness");
        const double det = t.number(r, "detection");
        if (det != -1.0) {
            const auto d = index_at(t, r, "detection");
            if (d >= detections.size()) {
                throw DataError("tracks file '" + path.string() + "' row " + index_text(r) +
                                " references detection " + index_text(d) + " beyond the detection list");
            }
            if (detections[d].channel != p.channel) {
                throw DataError("tracks file '" + path.string() + "' row " + index_text(r) +
                                " references a detection on another channel");
            }
            p.detection = detections[d];
            p.detection_id = d;
        }
        out.back().points.push_back(std::move(p));
    }
    return out;
}

void write_characterization(const std::filesystem::path& path, const std::vector<track::VehicleTrack>& tracks,
                            const std::vector<characterize::VehicleCharacter>& characters) {
    if (tracks.size() != characters.size()) throw PreconditionError("write_characterization: size mismatch");
    io::TextTable t;
    t.header = {"track",       "direction",          "first_channel",   "last_channel",
                "associated",  "speed_kmh",          "weight_tons",     "weight_spread_tons",
                "weight_channels", "wheelbase_m",    "wheelbase_spread_m", "wheelbase_channels"};
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        const auto& trk = tracks[i];
        const auto& c = characters[i];
        std::vector<double> speeds;
        for (const auto& p : trk.points) {
            const double v = p.speed_mps();
            if (std::isfinite(v)) speeds.push_back(v);
        }
        double speed = kNaN;
        if (!speeds.empty()) {
            const auto mid = speeds.begin() + static_cast<std::ptrdiff_t>(speeds.size() / 2);
            std::nth_element(speeds.begin(), mid, speeds.end());
            speed = 3.6 * *mid;
        }
        auto est = [](const std::optional<characterize::Estimate>& e) {
            return std::vector<std::string>{format_number(e ? e->value : kNaN), format_number(e ? e->spread : kNaN),
                                            index_text(e ? e->channels : 0)};
        };
        std::vector<std::string> row{index_text(trk.id), std::string(to_string(trk.direction)),
                                     trk.points.empty() ? "-1" : index_text(trk.points.front().channel),
                                     trk.points.empty() ? "-1" : index_text(trk.points.back().channel),
                                     index_text(trk.associated_count()), format_number(speed)};
        for (auto& s : est(c.weight_tons)) row.push_back(std::move(s));
        for (auto& s : est(c.wheelbase_m)) row.push_back(std::move(s));
        t.rows.push_back(std::move(row));
    }
    io::write_table(path, t);
}

} // namespace dastm::cli
