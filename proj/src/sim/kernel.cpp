#include "dastm/sim/kernel.hpp"

#include "dastm/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dastm::sim {

namespace {

void check_geometry(double lane_offset_m, double depth_m) {
    if (!(lane_offset_m > 0.0) || !(depth_m > 0.0)) {
        throw PreconditionError("kernel: lane offset and depth must be positive");
    }
}

// Antiderivative of (s^2 + h^2)^(-5/2).
double antiderivative(double s, double h2) {
    const double r2 = s * s + h2;
    return s * (2.0 * s * s + 3.0 * h2) / (3.0 * h2 * h2 * r2 * std::sqrt(r2));
}

} // namespace

double quasistatic_kernel(double distance_along_road_m, double lane_offset_m, double depth_m, double weight_tons) {
    check_geometry(lane_offset_m, depth_m);
    const double r2 = distance_along_road_m * distance_along_road_m + lane_offset_m * lane_offset_m + depth_m * depth_m;
    const double r5 = r2 * r2 * std::sqrt(r2);
    return weight_tons * 3.0 * depth_m * depth_m * depth_m / (2.0 * std::numbers::pi * r5);
}

double gauge_averaged_kernel(double distance_along_road_m, double lane_offset_m, double depth_m,
                             double gauge_length_m) {
    check_geometry(lane_offset_m, depth_m);
    if (gauge_length_m < 0.0) throw PreconditionError("kernel: gauge length must be non-negative");
    if (gauge_length_m == 0.0) return quasistatic_kernel(distance_along_road_m, lane_offset_m, depth_m, 1.0);
    const double h2 = lane_offset_m * lane_offset_m + depth_m * depth_m;
    const double half = gauge_length_m / 2.0;
    const double integral =
        antiderivative(distance_along_road_m + half, h2) - antiderivative(distance_along_road_m - half, h2);
    return 3.0 * depth_m * depth_m * depth_m / (2.0 * std::numbers::pi) * integral / gauge_length_m;
}

double kernel_peak(double lane_offset_m, double depth_m, double gauge_length_m) {
    return gauge_averaged_kernel(0.0, lane_offset_m, depth_m, gauge_length_m);
}

std::vector<double> gauge_average(const SampledField& field, const ChannelGrid& channels, double gauge_length_m) {
    if (field.values.size() < 2 || !(field.step_m > 0.0)) {
        throw PreconditionError("gauge_average: field needs at least two samples and a positive step");
    }
    if (!(channels.spacing_m > 0.0) || gauge_length_m < channels.spacing_m) {
        throw PreconditionError("gauge_average: gauge length must be at least the channel spacing");
    }
    const double field_end = field.origin_m + field.step_m * static_cast<double>(field.values.size() - 1);
    const double half = gauge_length_m / 2.0;
    const double eps = 1e-9 * field.step_m;

    // Integral of the piecewise-linear interpolant from the field origin to x.
    auto value_at = [&](double x) {
        const double u = (x - field.origin_m) / field.step_m;
        const auto i = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(u))), field.values.size() - 2);
        const double f = u - static_cast<double>(i);
        return field.values[i] + f * (field.values[i + 1] - field.values[i]);
    };
    std::vector<double> prefix(field.values.size(), 0.0);
    for (std::size_t i = 1; i < field.values.size(); ++i) {
        prefix[i] = prefix[i - 1] + 0.5 * field.step_m * (field.values[i - 1] + field.values[i]);
    }
    auto integral_to = [&](double x) {
        const double u = (x - field.origin_m) / field.step_m;
        const auto i = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(u))), field.values.size() - 2);
        const double xi = field.origin_m + field.step_m * static_cast<double>(i);
        return prefix[i] + 0.5 * (x - xi) * (field.values[i] + value_at(x));
    };

    std::vector<double> out(channels.count);
    for (std::size_t k = 0; k < channels.count; ++k) {
        const double c = channels.first_m + channels.spacing_m * static_cast<double>(k);
        if (c - half < field.origin_m - eps || c + half > field_end + eps) {
            throw PreconditionError("gauge_average: channel gauge window extends beyond the sampled field");
        }
        out[k] = (integral_to(c + half) - integral_to(c - half)) / gauge_length_m;
    }
    return out;
}

} // namespace dastm::sim
