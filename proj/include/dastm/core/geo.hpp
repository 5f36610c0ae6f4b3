#pragma once

#include "dastm/core/types.hpp"

#include <vector>

namespace dastm {

/// One receiver fix: time in the reference (GPS) clock and position.
struct GpsFix {
    double time_s = 0.0;
    GeoPoint position;
};

/// Road centerline as a lat/lon polyline. Road position is arc length from the
/// first vertex, measured in a local equirectangular frame anchored there.
class Centerline {
public:
    explicit Centerline(std::vector<GeoPoint> vertices);

    /// Straight road of `length_m` starting at `origin`, heading `bearing_deg` clockwise from north.
    static Centerline straight(GeoPoint origin, double bearing_deg, double length_m);

    [[nodiscard]] double length_m() const { return cumulative_.back(); }
    [[nodiscard]] const std::vector<GeoPoint>& vertices() const { return vertices_; }

    /// Point at road position s; positions beyond either end extend the end segments.
    [[nodiscard]] GeoPoint point_at(double road_position_m) const;

    /// Road position of the nearest point on the polyline (end segments extended).
    [[nodiscard]] double project(GeoPoint p) const;

    /// Local metric frame: east/north metres relative to the first vertex.
    [[nodiscard]] std::pair<double, double> to_local(GeoPoint p) const;
    [[nodiscard]] GeoPoint from_local(double east_m, double north_m) const;

private:
    std::vector<GeoPoint> vertices_;
    std::vector<std::pair<double, double>> local_;
    std::vector<double> cumulative_;
    double metres_per_deg_lat_ = 0.0;
    double metres_per_deg_lon_ = 0.0;
};

} // namespace dastm
