#pragma once

#include "dastm/calib/calibration.hpp"
#include "dastm/characterize/characterize.hpp"
#include "dastm/core/geo.hpp"
#include "dastm/core/types.hpp"
#include "dastm/detect/detector.hpp"
#include "dastm/eval/eval.hpp"
#include "dastm/sim/scene.hpp"
#include "dastm/sim/traffic.hpp"
#include "dastm/track/tracker.hpp"

#include <json.hpp>

#include <concepts>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace dastm::cli {

using Json = nlohmann::json;

/// Parsed JSON object from disk. Throws ConfigError when the file is missing,
/// malformed or not an object.
[[nodiscard]] Json load_json(const std::filesystem::path& path);

/// Typed view of one JSON object. Reads overwrite the target only when the key
/// is present; a value of the wrong type is a ConfigError naming the key path.
/// `finish` rejects keys nobody read, so misspelled options fail loudly.
class Section {
public:
    /// `json` may be null, which behaves like an empty object.
    Section(const Json& json, std::string path);

    [[nodiscard]] bool has(const std::string& key) const;

    void read(const std::string& key, double& out);
    template <std::unsigned_integral T>
    void read(const std::string& key, T& out) {
        if (!has(key)) return;
        const auto v = read_unsigned(key);
        if (v > std::numeric_limits<T>::max()) throw_range(key);
        out = static_cast<T>(v);
    }
    void read(const std::string& key, int& out);
    void read(const std::string& key, bool& out);
    void read(const std::string& key, std::string& out);
    void read(const std::string& key, std::vector<double>& out);
    void read(const std::string& key, std::vector<std::size_t>& out);
    void read(const std::string& key, std::vector<std::string>& out);

    /// Nested object (empty when absent); marks the key as read.
    [[nodiscard]] Section child(const std::string& key);
    /// Raw value, or nullptr when absent; marks the key as read.
    [[nodiscard]] const Json* raw(const std::string& key);

    [[nodiscard]] std::string path_of(const std::string& key) const;
    void finish() const;

private:
    const Json& value(const std::string& key);
    std::uint64_t read_unsigned(const std::string& key);
    [[noreturn]] void throw_range(const std::string& key) const;

    const Json* json_;
    std::string path_;
    std::vector<std::string> used_;
};

// Each parser starts from `base` and overwrites the keys present.
[[nodiscard]] RecordInfo parse_record(Section s, RecordInfo base = {});
[[nodiscard]] detect::DetectorConfig parse_detector(Section s, detect::DetectorConfig base = {});
[[nodiscard]] track::MotionModel parse_motion_model(Section s, track::MotionModel base = {});
[[nodiscard]] track::TrackerConfig parse_tracker(Section s, track::TrackerConfig base = {});
[[nodiscard]] calib::GeolocationConfig parse_geolocation(Section s, calib::GeolocationConfig base = {});
[[nodiscard]] characterize::CharacterizeConfig parse_characterize(Section s,
                                                                  characterize::CharacterizeConfig base = {});
[[nodiscard]] sim::FiberLayout parse_fiber(Section s, sim::FiberLayout base = {});
[[nodiscard]] sim::TrafficConfig parse_traffic(Section s, sim::TrafficConfig base = {});
[[nodiscard]] sim::VehicleSpec parse_vehicle_spec(Section s, sim::VehicleSpec base = {});
[[nodiscard]] std::vector<track::Segment> parse_segments(const Json& json, const std::string& path);
[[nodiscard]] eval::EvalConfig parse_eval(Section s, eval::EvalConfig base = {});

/// Either {"vertices": [[lat, lon], ...]} or {"origin": [lat, lon],
/// "bearing_deg": b, "length_m": l}.
[[nodiscard]] Centerline parse_centerline(Section s);

} // namespace dastm::cli
