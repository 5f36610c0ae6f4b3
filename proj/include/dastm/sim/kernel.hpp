#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dastm::sim {

inline constexpr double kDefaultDepthM = 1.5;

/// Fiber strain under a point load of `weight_tons` at horizontal distance
/// `distance_along_road_m` along the road and `lane_offset_m` across it, for a
/// fiber buried at `depth_m`: the Boussinesq vertical stress 3 z^3 / (2 pi R^5)
/// per ton. Even in distance, linear in weight, decreasing in lane offset.
/// Throws PreconditionError for non-positive offset or depth.
[[nodiscard]] double quasistatic_kernel(double distance_along_road_m, double lane_offset_m, double depth_m,
                                        double weight_tons);

/// Per-ton kernel averaged over a gauge window of `gauge_length_m` centred at
/// `distance_along_road_m` (closed form). A zero gauge returns the point kernel.
[[nodiscard]] double gauge_averaged_kernel(double distance_along_road_m, double lane_offset_m, double depth_m,
                                           double gauge_length_m);

/// Per-ton peak of the gauge-averaged kernel (at zero distance).
[[nodiscard]] double kernel_peak(double lane_offset_m, double depth_m, double gauge_length_m = 0.0);

/// Point field sampled on a regular grid along the fiber.
struct SampledField {
    double origin_m = 0.0;
    double step_m = 1.0;
    std::vector<double> values;
};

/// Channel centres on a regular grid.
struct ChannelGrid {
    double first_m = 0.0;
    double spacing_m = 1.0;
    std::size_t count = 0;
};

/// Mean of the piecewise-linear field over each channel's gauge window.
/// Requires gauge_length >= channel spacing and windows inside the field.
[[nodiscard]] std::vector<double> gauge_average(const SampledField& field, const ChannelGrid& channels,
                                                double gauge_length_m);

} // namespace dastm::sim
