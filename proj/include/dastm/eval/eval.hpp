#pragma once

#include "dastm/calib/calibration.hpp"
#include "dastm/core/types.hpp"
#include "dastm/detect/detector.hpp"
#include "dastm/characterize/characterize.hpp"
#include "dastm/sim/scene.hpp"
#include "dastm/track/tracker.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dastm::eval {

/// Synthetic experiment matrix. Every scenario calibrates its own fiber from a
/// simulated driving test before detection, tracking and characterization.
struct EvalConfig {
    std::uint64_t seed = 1;
    RecordInfo record;
    std::size_t channel_count = 400;
    double noise_sigma = 10.0;
    double drift_amplitude = 5.0;
    double near_lane_offset_m = 3.0;  ///< outbound lane, also the calibration lane
    double far_lane_offset_m = 6.0;   ///< inbound lane
    double depth_m = 1.5;
    double speed_min_mps = 8.0;
    double speed_max_mps = 12.0;
    double speed_variation = 0.08;  ///< relative per-segment speed std of simulated traffic
    double min_headway_s = 4.0;
    std::vector<double> road_features_m = {60.0, 160.0, 260.0, 340.0};
    double feature_radius_m = 2.0;  ///< channels this close to a feature feed the wheelbase estimate

    std::size_t traffic_vehicles = 20;
    double traffic_window_s = 300.0;  // entry window; denser traffic turns most far-lane passes into crosstalk

    std::size_t spool_first_channel = 150;
    double spool_slack_m = 100.0;
    double spool_road_per_fiber = 0.9;
    std::size_t spool_vehicles = 12;

    std::size_t crosstalk_channels = 200;
    std::size_t crosstalk_far_vehicles = 10;
    double crosstalk_fraction = 0.4;

    std::vector<sim::VehicleSpec> fleet_types = {{1.47, 2.7, 2, "sedan"}, {2.5, 3.4, 2, "pickup"},
                                                 {12.0, 7.5, 2, "bus"}};
    std::size_t fleet_per_type = 8;

    std::vector<std::size_t> decimation = {1, 2, 5, 10};
    std::vector<std::string> scenarios = {"nominal", "spool", "crosstalk", "fleet", "spacing"};

    std::size_t calibration_runs = 4;
    double gps_sigma_m = 0.5;
    double clock_offset_s = 3.21;
    double test_vehicle_tons = 1.47;

    detect::DetectorConfig detector;
    track::TrackerConfig tracker;
    calib::GeolocationConfig geolocation;
    characterize::CharacterizeConfig characterize;
    double match_tolerance_s = 0.5;

    /// Throws ConfigError.
    void validate() const;
};

struct MetricRow {
    std::string scenario;
    std::string metric;
    double value = 0.0;
};

struct MetricsReport {
    std::vector<MetricRow> rows;
    std::vector<std::string> failures;  ///< "scenario: message" for scenarios that threw

    [[nodiscard]] std::optional<double> value(const std::string& scenario, const std::string& metric) const;
    [[nodiscard]] std::vector<std::string> scenarios() const;
};

/// Metrics emitted for every scenario, in order; NaN where not applicable.
[[nodiscard]] const std::vector<std::string>& metric_names();

/// Scenario names run for a config: the spacing sweep expands to one entry
/// per decimation factor ("spacing_<n>m").
[[nodiscard]] std::vector<std::string> expand_scenarios(const EvalConfig& config);

/// Runs the requested scenarios. A scenario that throws contributes NaN rows
/// and a failure entry; the others still run.
[[nodiscard]] MetricsReport run_eval(const EvalConfig& config);

/// scenario,metric,value rows under a header. Deterministic formatting.
void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report);

/// metrics.csv plus a best-effort SVG chart of the headline metrics. Returns
/// the files written.
std::vector<std::filesystem::path> emit_plots(const MetricsReport& report, const std::filesystem::path& out_dir);

} // namespace dastm::eval
