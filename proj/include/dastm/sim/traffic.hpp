#pragma once

#include "dastm/sim/scene.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dastm::sim {

/// Uniform ranges for one vehicle class.
struct VehicleClass {
    std::string label;
    double share = 1.0;  ///< relative frequency
    double weight_min_tons = 1.2;
    double weight_max_tons = 1.8;
    double wheelbase_min_m = 2.5;
    double wheelbase_max_m = 2.9;
};

/// Sedans, SUVs, vans and trucks with typical curb weights and wheelbases.
[[nodiscard]] std::vector<VehicleClass> default_vehicle_classes();

/// Two-way traffic on a straight road stretch. Outbound
/// vehicles use the near lane and enter at `road_start_m`; inbound vehicles use
/// the far lane and enter at `road_end_m`.
struct TrafficConfig {
    std::size_t vehicle_count = 20;
    double outbound_fraction = 0.5;
    double road_start_m = 0.0;
    double road_end_m = 400.0;
    double first_entry_s = 0.0;
    double last_entry_s = 60.0;
    double min_headway_s = 3.0;  ///< same-direction spacing of entry times
    double speed_min_mps = 8.0;
    double speed_max_mps = 12.0;
    /// Relative std of the speed on each `speed_segment_m` stretch; 0 gives
    /// constant-speed vehicles. Successive segments correlate by `speed_correlation`.
    double speed_variation = 0.0;
    double speed_segment_m = 20.0;
    double speed_correlation = 0.7;
    double near_lane_offset_m = 3.0;
    double far_lane_offset_m = 6.0;
    std::vector<VehicleClass> classes = default_vehicle_classes();
};

/// Deterministic in (config, seed). Same-direction vehicles keep at least
/// `min_headway_s` at every point of the stretch, so nobody overtakes.
/// Throws ConfigError when the entry window cannot fit the requested vehicles
/// at the minimum headway.
[[nodiscard]] std::vector<SceneVehicle> generate_traffic(const TrafficConfig& config, std::uint64_t seed);

} // namespace dastm::sim
