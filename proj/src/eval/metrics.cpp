#include "dastm/eval/metrics.hpp"

#include "dastm/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace dastm::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

} // namespace

std::vector<TruthArrival> truth_arrivals(std::span<const sim::Trajectory> trajectories,
                                         const CalibrationTable& truth_table, double duration_s, double margin_s) {
    std::vector<TruthArrival> out;
    for (std::size_t v = 0; v < trajectories.size(); ++v) {
        for (const auto& e : truth_table.entries()) {
            if (e.spooled()) continue;
            const double t = trajectories[v].time_at(e.road_position_m);
            if (t >= margin_s && t <= duration_s - margin_s) out.push_back({v, e.channel, t});
        }
    }
    return out;
}

double DetectionMatch::precision() const {
    return detections == 0 ? kNaN : static_cast<double>(matched) / static_cast<double>(detections);
}

double DetectionMatch::recall() const {
    return arrivals == 0 ? kNaN : static_cast<double>(matched) / static_cast<double>(arrivals);
}

DetectionMatch match_detections(std::span<const TruthArrival> arrivals, std::span<const Detection> detections,
                                double tolerance_s) {
    DetectionMatch m;
    m.truth_to_detection.assign(arrivals.size(), std::nullopt);
    m.arrivals = arrivals.size();
    m.detections = detections.size();
    std::map<std::size_t, std::vector<std::size_t>> truth_at, det_at;
    for (std::size_t i = 0; i < arrivals.size(); ++i) truth_at[arrivals[i].channel].push_back(i);
    for (std::size_t i = 0; i < detections.size(); ++i) det_at[detections[i].channel].push_back(i);
    struct Pair {
        double gap;
        std::size_t truth;
        std::size_t det;
    };
    for (const auto& [channel, truths] : truth_at) {
        auto it = det_at.find(channel);
        if (it == det_at.end()) continue;
        std::vector<Pair> pairs;
        for (std::size_t ti : truths) {
            for (std::size_t di : it->second) {
                const double gap = std::abs(arrivals[ti].time_s - detections[di].time_s);
                if (gap <= tolerance_s) pairs.push_back({gap, ti, di});
            }
        }
        std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
            return std::tie(a.gap, a.truth, a.det) < std::tie(b.gap, b.truth, b.det);
        });
        std::map<std::size_t, bool> det_used;
        for (const auto& p : pairs) {
            if (m.truth_to_detection[p.truth] || det_used[p.det]) continue;
            m.truth_to_detection[p.truth] = p.det;
            det_used[p.det] = true;
            ++m.matched;
        }
    }
    return m;
}

std::vector<std::optional<std::size_t>> match_tracks(std::span<const track::VehicleTrack> tracks,
                                                     std::span<const TruthArrival> arrivals, double tolerance_s,
                                                     double min_share) {
    std::map<std::pair<std::size_t, std::size_t>, double> arrival_of;  // (vehicle, channel) -> time
    std::size_t vehicles = 0;
    for (const auto& a : arrivals) {
        arrival_of[{a.vehicle, a.channel}] = a.time_s;
        vehicles = std::max(vehicles, a.vehicle + 1);
    }
    std::vector<std::optional<std::size_t>> out(tracks.size());
    for (std::size_t t = 0; t < tracks.size(); ++t) {
        std::vector<std::size_t> votes(vehicles, 0);
        std::size_t associated = 0;
        for (const auto& p : tracks[t].points) {
            if (!p.detection) continue;
            ++associated;
            for (std::size_t v = 0; v < vehicles; ++v) {
                auto it = arrival_of.find({v, p.channel});
                if (it != arrival_of.end() && std::abs(it->second - p.detection->time_s) <= tolerance_s) ++votes[v];
            }
        }
        if (associated == 0 || vehicles == 0) continue;
        const auto best = static_cast<std::size_t>(std::distance(votes.begin(), std::max_element(votes.begin(), votes.end())));
        if (static_cast<double>(votes[best]) >= min_share * static_cast<double>(associated)) out[t] = best;
    }
    return out;
}

KinematicErrors kinematic_errors(std::span<const track::VehicleTrack> tracks,
                                 std::span<const std::optional<std::size_t>> matches,
                                 std::span<const sim::Trajectory> trajectories, double sample_period_s) {
    if (!(sample_period_s > 0.0)) throw PreconditionError("kinematic_errors: sample period must be positive");
    KinematicErrors e;
    double pos = 0.0;
    double spd = 0.0;
    std::size_t n_speed = 0;
    struct Sample {
        double t, x, v;
    };
    for (std::size_t t = 0; t < tracks.size(); ++t) {
        if (!matches[t]) continue;
        const auto& traj = trajectories[*matches[t]];
        std::vector<Sample> s;
        for (const auto& p : tracks[t].points) s.push_back({p.time_s(), p.x_m, p.speed_mps()});
        std::sort(s.begin(), s.end(), [](const Sample& a, const Sample& b) { return a.t < b.t; });
        if (s.size() < 2) continue;
        // track state interpolated at instants of a fixed clock, as a GPS logger would sample it
        std::size_t j = 0;
        for (double time = std::ceil(s.front().t / sample_period_s) * sample_period_s; time <= s.back().t;
             time += sample_period_s) {
            while (j + 2 < s.size() && s[j + 1].t < time) ++j;
            const auto& a = s[j];
            const auto& b = s[j + 1];
            const double w = b.t > a.t ? std::clamp((time - a.t) / (b.t - a.t), 0.0, 1.0) : 0.0;
            const double x = a.x + w * (b.x - a.x);
            pos += std::abs(x - traj.position_at(time));
            ++e.points;
            const double v = a.v + w * (b.v - a.v);
            if (std::isfinite(v)) {
                spd += std::abs(v - traj.speed_at(time));
                ++n_speed;
            }
        }
    }
    e.position_mae_m = e.points ? pos / static_cast<double>(e.points) : kNaN;
    e.speed_mae_mps = n_speed ? spd / static_cast<double>(n_speed) : kNaN;
    return e;
}

double PercentErrors::share_within(double bound_pct) const {
    if (errors_pct.empty()) return kNaN;
    const auto n = std::count_if(errors_pct.begin(), errors_pct.end(),
                                 [&](double e) { return std::abs(e) <= bound_pct; });
    return static_cast<double>(n) / static_cast<double>(errors_pct.size());
}

double PercentErrors::abs_percentile(double q) const {
    if (errors_pct.empty()) return kNaN;
    std::vector<double> a;
    for (double e : errors_pct) a.push_back(std::abs(e));
    std::sort(a.begin(), a.end());
    const double pos = q * static_cast<double>(a.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(a.size() - 1, lo + 1);
    return a[lo] + (pos - static_cast<double>(lo)) * (a[hi] - a[lo]);
}

double PercentErrors::mean() const {
    if (errors_pct.empty()) return kNaN;
    return std::accumulate(errors_pct.begin(), errors_pct.end(), 0.0) / static_cast<double>(errors_pct.size());
}

double PercentErrors::interval95() const {
    if (errors_pct.size() < 2) return kNaN;
    const double m = mean();
    double ss = 0.0;
    for (double e : errors_pct) ss += (e - m) * (e - m);
    return 1.96 * std::sqrt(ss / static_cast<double>(errors_pct.size() - 1));
}

} // namespace dastm::eval
