#include "dastm/core/geo.hpp"

#include "dastm/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace dastm {

namespace {
constexpr double kEarthRadiusM = 6371008.8;
}

Centerline::Centerline(std::vector<GeoPoint> vertices) : vertices_(std::move(vertices)) {
    if (vertices_.size() < 2) throw ConfigError("road centerline needs at least two vertices");
    const double lat0 = vertices_.front().lat * std::numbers::pi / 180.0;
    metres_per_deg_lat_ = kEarthRadiusM * std::numbers::pi / 180.0;
    metres_per_deg_lon_ = metres_per_deg_lat_ * std::cos(lat0);
    cumulative_.push_back(0.0);
    for (const auto& v : vertices_) local_.push_back(to_local(v));
    for (std::size_t i = 1; i < local_.size(); ++i) {
        const double seg = std::hypot(local_[i].first - local_[i - 1].first, local_[i].second - local_[i - 1].second);
        if (!(seg > 0.0)) throw ConfigError("road centerline has repeated vertices");
        cumulative_.push_back(cumulative_.back() + seg);
    }
}

Centerline Centerline::straight(GeoPoint origin, double bearing_deg, double length_m) {
    const double b = bearing_deg * std::numbers::pi / 180.0;
    const double m_lat = kEarthRadiusM * std::numbers::pi / 180.0;
    const double m_lon = m_lat * std::cos(origin.lat * std::numbers::pi / 180.0);
    GeoPoint end{origin.lat + length_m * std::cos(b) / m_lat, origin.lon + length_m * std::sin(b) / m_lon};
    return Centerline({origin, end});
}

std::pair<double, double> Centerline::to_local(GeoPoint p) const {
    return {(p.lon - vertices_.front().lon) * metres_per_deg_lon_, (p.lat - vertices_.front().lat) * metres_per_deg_lat_};
}

GeoPoint Centerline::from_local(double east_m, double north_m) const {
    return {vertices_.front().lat + north_m / metres_per_deg_lat_, vertices_.front().lon + east_m / metres_per_deg_lon_};
}

GeoPoint Centerline::point_at(double s) const {
    std::size_t seg = 0;
    while (seg + 2 < cumulative_.size() && s > cumulative_[seg + 1]) ++seg;
    const double len = cumulative_[seg + 1] - cumulative_[seg];
    const double u = (s - cumulative_[seg]) / len;
    const auto& a = local_[seg];
    const auto& b = local_[seg + 1];
    return from_local(a.first + u * (b.first - a.first), a.second + u * (b.second - a.second));
}

double Centerline::project(GeoPoint p) const {
    const auto q = to_local(p);
    double best_d2 = std::numeric_limits<double>::infinity();
    double best_s = 0.0;
    const std::size_t last = local_.size() - 2;
    for (std::size_t i = 0; i + 1 < local_.size(); ++i) {
        const auto& a = local_[i];
        const auto& b = local_[i + 1];
        const double ex = b.first - a.first, ey = b.second - a.second;
        const double len2 = ex * ex + ey * ey;
        double u = ((q.first - a.first) * ex + (q.second - a.second) * ey) / len2;
        if (i > 0) u = std::max(u, 0.0);
        if (i < last) u = std::min(u, 1.0);
        const double px = a.first + u * ex - q.first, py = a.second + u * ey - q.second;
        const double d2 = px * px + py * py;
        if (d2 < best_d2) {
            best_d2 = d2;
            best_s = cumulative_[i] + u * std::sqrt(len2);
        }
    }
    return best_s;
}

} // namespace dastm
