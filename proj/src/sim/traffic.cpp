#include "dastm/sim/traffic.hpp"

#include "dastm/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dastm::sim {

std::vector<VehicleClass> default_vehicle_classes() {
    return {
        {"sedan", 0.45, 1.2, 1.8, 2.5, 2.9},
        {"suv", 0.30, 1.8, 2.6, 2.7, 3.1},
        {"van", 0.15, 2.4, 3.5, 3.2, 3.7},
        {"truck", 0.10, 8.0, 15.0, 5.0, 7.5},
    };
}

std::vector<SceneVehicle> generate_traffic(const TrafficConfig& config, std::uint64_t seed) {
    if (config.classes.empty()) throw ConfigError("traffic needs at least one vehicle class");
    if (!(config.road_end_m > config.road_start_m)) throw ConfigError("traffic road_end_m must exceed road_start_m");
    if (!(config.speed_min_mps > 0.0) || config.speed_max_mps < config.speed_min_mps) {
        throw ConfigError("traffic speed range must be positive and ordered");
    }
    if (!(config.speed_variation >= 0.0) || config.speed_variation >= 0.5 || !(config.speed_segment_m > 0.0) ||
        !(std::abs(config.speed_correlation) < 1.0)) {
        throw ConfigError("traffic speed variation must lie in [0, 0.5) with a positive segment length");
    }
    if (config.outbound_fraction < 0.0 || config.outbound_fraction > 1.0) {
        throw ConfigError("traffic outbound_fraction must lie in [0, 1]");
    }
    std::vector<double> shares;
    for (const auto& c : config.classes) {
        if (!(c.share >= 0.0) || !(c.weight_min_tons > 0.0) || c.weight_max_tons < c.weight_min_tons ||
            !(c.wheelbase_min_m > 0.0) || c.wheelbase_max_m < c.wheelbase_min_m) {
            throw ConfigError("vehicle class '" + c.label + "' has an invalid range");
        }
        shares.push_back(c.share);
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::discrete_distribution<std::size_t> pick_class(shares.begin(), shares.end());
    const double length = config.road_end_m - config.road_start_m;

    const auto outbound =
        static_cast<std::size_t>(std::llround(config.outbound_fraction * static_cast<double>(config.vehicle_count)));
    std::vector<SceneVehicle> out;
    for (Direction dir : {Direction::Outbound, Direction::Inbound}) {
        const std::size_t n = dir == Direction::Outbound ? outbound : config.vehicle_count - outbound;
        if (n == 0) continue;
        const double slack = config.last_entry_s - config.first_entry_s -
                             static_cast<double>(n - 1) * config.min_headway_s;
        if (slack < 0.0) throw ConfigError("traffic entry window too short for the requested headway");
        std::vector<double> offsets(n);
        for (auto& o : offsets) o = unif(rng) * slack;
        std::sort(offsets.begin(), offsets.end());

        std::vector<double> prev_offsets;  // travel time of the previous vehicle to each road meter
        double prev_entry = 0.0;
        std::normal_distribution<double> gauss(0.0, 1.0);
        const auto meters = static_cast<std::size_t>(std::ceil(length));
        for (std::size_t i = 0; i < n; ++i) {
            const auto& cls = config.classes[pick_class(rng)];
            VehicleSpec spec;
            spec.label = cls.label;
            spec.weight_tons = cls.weight_min_tons + unif(rng) * (cls.weight_max_tons - cls.weight_min_tons);
            spec.wheelbase_m = cls.wheelbase_min_m + unif(rng) * (cls.wheelbase_max_m - cls.wheelbase_min_m);
            const double speed = config.speed_min_mps + unif(rng) * (config.speed_max_mps - config.speed_min_mps);

            // speed profile: one AR(1) factor per segment, knots at segment ends
            std::vector<std::pair<double, double>> rel;  // (time since entry, distance travelled)
            rel.emplace_back(0.0, 0.0);
            double z = gauss(rng);
            const double rho = config.speed_correlation;
            for (double d = 0.0; d < length;) {
                const double step = std::min(config.speed_segment_m, length - d);
                const double v = speed * std::max(0.5, 1.0 + config.speed_variation * z);
                rel.emplace_back(rel.back().first + step / v, d + step);
                d += step;
                z = rho * z + std::sqrt(1.0 - rho * rho) * gauss(rng);
            }
            auto travel_time = [&](double dist) {
                auto it = std::lower_bound(rel.begin(), rel.end(), dist,
                                           [](const auto& k, double x) { return k.second < x; });
                if (it == rel.begin()) return 0.0;
                if (it == rel.end()) return rel.back().first;
                const auto& a = *(it - 1);
                const auto& b = *it;
                return a.first + (dist - a.second) / (b.second - a.second) * (b.first - a.first);
            };
            std::vector<double> offsets_here(meters + 1);
            for (std::size_t m = 0; m <= meters; ++m) {
                offsets_here[m] = travel_time(std::min(length, static_cast<double>(m)));
            }

            double entry = config.first_entry_s + offsets[i] + static_cast<double>(i) * config.min_headway_s;
            if (i > 0) {
                for (std::size_t m = 0; m <= meters; ++m) {
                    entry = std::max(entry, prev_entry + prev_offsets[m] + config.min_headway_s - offsets_here[m]);
                }
            }
            prev_entry = entry;
            prev_offsets = std::move(offsets_here);

            const bool out_dir = dir == Direction::Outbound;
            const double sign = out_dir ? 1.0 : -1.0;
            const double start = out_dir ? config.road_start_m : config.road_end_m;
            std::vector<std::pair<double, double>> knots;
            for (const auto& [t, d] : rel) knots.emplace_back(entry + t, start + sign * d);
            out.push_back({spec, Trajectory(std::move(knots), dir,
                                            out_dir ? config.near_lane_offset_m : config.far_lane_offset_m)});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const SceneVehicle& a, const SceneVehicle& b) {
        return a.trajectory.knots().front().first < b.trajectory.knots().front().first;
    });
    return out;
}

} // namespace dastm::sim
