#include "dastm/track/tracker.hpp"

#include "dastm/core/parallel.hpp"
#include "dastm/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <tuple>

namespace dastm::track {

namespace {

using Index = std::vector<std::vector<std::size_t>>;  // channel -> detection ids sorted by time

Index index_by_channel(std::span<const Detection> detections) {
    std::size_t channels = 0;
    for (const auto& d : detections) channels = std::max(channels, d.channel + 1);
    Index idx(channels);
    for (std::size_t i = 0; i < detections.size(); ++i) idx[detections[i].channel].push_back(i);
    for (auto& v : idx) {
        std::stable_sort(v.begin(), v.end(),
                         [&](std::size_t a, std::size_t b) { return detections[a].time_s < detections[b].time_s; });
    }
    return idx;
}

const std::vector<std::size_t>& ids_at(const Index& idx, std::size_t channel) {
    static const std::vector<std::size_t> empty;
    return channel < idx.size() ? idx[channel] : empty;
}

// Chain index of the i-th channel visited when travelling in `dir`.
std::size_t travel_index(const Chain& chain, Direction dir, std::size_t i) {
    return dir == Direction::Outbound ? i : chain.size() - 1 - i;
}

double median_of(std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

std::optional<VehicleTrack> run_track(std::span<const Detection> detections, const Index& idx,
                                      const std::vector<char>* available, const Chain& chain, const TrackInit& init,
                                      const TrackerConfig& config) {
    if (init.start >= chain.size()) throw PreconditionError("track_single: start outside the chain");
    const auto& model = config.model;
    const bool outbound = init.direction == Direction::Outbound;
    const std::size_t steps = outbound ? chain.size() - init.start : init.start + 1;

    std::vector<TrackPoint> points;
    double missed_m = 0.0;  // road distance since the last association
    std::optional<std::size_t> last_assoc;
    std::vector<Detection> cands;
    std::vector<std::size_t> cand_ids;
    for (std::size_t s = 0; s < steps; ++s) {
        const std::size_t ci = outbound ? init.start + s : init.start - s;
        TrackPoint pt;
        pt.channel = chain.channels[ci];
        pt.x_m = chain.positions[ci];
        StateEstimate pred;
        if (points.empty()) {
            pred.mean << init.time_s, init.slowness;
            pred.cov << config.init_time_std_s * config.init_time_std_s, 0.0, 0.0,
                config.init_slowness_std * config.init_slowness_std;
        } else {
            pt.dx_m = std::abs(pt.x_m - points.back().x_m);
            pred = predict(points.back().filtered, pt.dx_m, model);
        }
        pred.channel = pt.channel;

        cands.clear();
        cand_ids.clear();
        for (std::size_t id : ids_at(idx, pt.channel)) {
            if (available && !(*available)[id]) continue;
            cands.push_back(detections[id]);
            cand_ids.push_back(id);
        }
        const auto pick = associate(pred, cands, model, config.gate_sigmas);
        std::optional<StateEstimate> post;
        if (pick) {
            // a vehicle cannot reverse or exceed the speed bounds; such an update means the
            // gate caught another vehicle's arrival
            post = update(pred, cands[*pick].time_s, model);
            const double slowness = post->mean(1);
            if (slowness < config.min_slowness || slowness > config.max_slowness) post.reset();
        }
        if (post) {
            pt.filtered = *post;
            pt.detection = cands[*pick];
            pt.detection_id = cand_ids[*pick];
            missed_m = 0.0;
            last_assoc = points.size();
        } else {
            pt.filtered = pred;
            missed_m += points.empty() ? 0.0 : pt.dx_m;
        }
        points.push_back(std::move(pt));
        if (missed_m >= config.max_miss_gap_m) break;
    }
    if (!last_assoc) return std::nullopt;
    points.resize(*last_assoc + 1);

    const auto associated = static_cast<std::size_t>(
        std::count_if(points.begin(), points.end(), [](const TrackPoint& p) { return p.detection.has_value(); }));
    if (associated < config.min_track_channels) return std::nullopt;

    VehicleTrack track;
    track.direction = init.direction;
    std::vector<StateEstimate> filtered;
    std::vector<double> dxs;
    for (std::size_t i = 0; i < points.size(); ++i) {
        filtered.push_back(points[i].filtered);
        if (i > 0) dxs.push_back(points[i].dx_m);
    }
    const auto smoothed = rts_smooth(filtered, model, dxs);
    double sq = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        points[i].smoothed = smoothed[i];
        if (points[i].detection) {
            const double r = points[i].detection->time_s - smoothed[i].mean(0);
            sq += r * r;
            ++n;
        }
    }
    track.residual_s = std::sqrt(sq / static_cast<double>(n));
    track.points = std::move(points);
    return track;
}

struct Seed {
    std::size_t support = 0;
    std::size_t window = 0;
    double anchor_time = 0.0;
    TrackInit init;
    std::vector<std::size_t> members;
};

// Best line through available detections on any run of seed_channels
// consecutive chain channels, or empty when none reaches min_seed_support.
std::optional<Seed> find_seed(std::span<const Detection> detections, const Index& idx,
                              const std::vector<char>& usable, const Chain& chain, Direction dir,
                              const TrackerConfig& config) {
    const std::size_t n = chain.size();
    const std::size_t e = std::min(config.seed_channels, n);
    if (e < 2 || e < config.min_seed_support) return std::nullopt;
    const std::size_t ends = std::max<std::size_t>(1, std::min<std::size_t>(3, e / 2));
    const std::size_t stride = std::max<std::size_t>(1, e / 2);
    std::optional<Seed> best;

    auto travel_pos = [&](std::size_t i) { return chain.positions[travel_index(chain, dir, i)]; };
    auto travel_ch = [&](std::size_t i) { return chain.channels[travel_index(chain, dir, i)]; };

    std::vector<std::size_t> starts;
    for (std::size_t w = 0; w + e <= n; w += stride) starts.push_back(w);
    if (starts.empty() || starts.back() + e < n) starts.push_back(n - e);

    for (std::size_t w : starts) {
        for (std::size_t ai = 0; ai < ends; ++ai) {
            const std::size_t ia = w + ai;
            for (std::size_t da : ids_at(idx, travel_ch(ia))) {
                if (!usable[da]) continue;
                const double ta = detections[da].time_s;
                for (std::size_t bi = e - ends; bi < e; ++bi) {
                    const std::size_t ib = w + bi;
                    if (ib <= ia) continue;
                    const double ds = std::abs(travel_pos(ib) - travel_pos(ia));
                    if (!(ds > 0.0)) continue;
                    for (std::size_t db : ids_at(idx, travel_ch(ib))) {
                        if (!usable[db]) continue;
                        const double slope = (detections[db].time_s - ta) / ds;
                        if (slope < config.min_slowness || slope > config.max_slowness) continue;
                        std::vector<std::size_t> members;
                        for (std::size_t j = w; j < w + e; ++j) {
                            const double expect = ta + slope * std::abs(travel_pos(j) - travel_pos(ia));
                            std::optional<std::size_t> nearest;
                            double gap = config.seed_tolerance_s;
                            for (std::size_t d : ids_at(idx, travel_ch(j))) {
                                if (!usable[d]) continue;
                                const double g = std::abs(detections[d].time_s - expect);
                                if (g <= gap) {
                                    gap = g;
                                    nearest = d;
                                }
                            }
                            if (nearest) members.push_back(*nearest);
                        }
                        const std::size_t support = members.size();
                        const bool better =
                            !best || support > best->support ||
                            (support == best->support &&
                             std::tie(w, ta) < std::tie(best->window, best->anchor_time));
                        if (support >= config.min_seed_support && better) {
                            Seed s;
                            s.support = support;
                            s.window = w;
                            s.anchor_time = ta;
                            s.members = std::move(members);
                            best = std::move(s);
                        }
                    }
                }
            }
        }
    }
    if (!best) return best;

    // Start at the first member; slowness from the median of pairwise slopes.
    std::map<std::size_t, std::size_t> chain_of;
    for (std::size_t i = 0; i < n; ++i) chain_of[chain.channels[i]] = i;
    std::vector<double> slopes;
    const auto& m = best->members;
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = i + 1; j < m.size(); ++j) {
            const double ds =
                std::abs(chain.positions[chain_of[detections[m[j]].channel]] -
                         chain.positions[chain_of[detections[m[i]].channel]]);
            if (ds > 0.0) slopes.push_back((detections[m[j]].time_s - detections[m[i]].time_s) / ds);
        }
    }
    best->init.direction = dir;
    best->init.start = chain_of[detections[m.front()].channel];
    best->init.time_s = detections[m.front()].time_s;
    best->init.slowness = slopes.empty() ? 0.1 : std::clamp(median_of(slopes), config.min_slowness, config.max_slowness);
    return best;
}

// Joins fragments of one vehicle split where its detections were unusable,
// typically where an opposite-direction vehicle crosses. B continues A when it
// starts within max_miss_gap_m past A's end and either fragment's slowness
// carries one end time onto the other within the tolerance. Each fragment
// keeps its own filtered and smoothed states.
void stitch_fragments(std::vector<VehicleTrack>& tracks, const TrackerConfig& config) {
    if (!(config.stitch_tolerance_s > 0.0)) return;
    while (true) {
        std::optional<std::pair<std::size_t, std::size_t>> best;
        double best_miss = config.stitch_tolerance_s;
        for (std::size_t a = 0; a < tracks.size(); ++a) {
            const auto& end = tracks[a].points.back();
            for (std::size_t b = 0; b < tracks.size(); ++b) {
                if (a == b) continue;
                const auto& start = tracks[b].points.front();
                const double gap = tracks[a].direction == Direction::Outbound ? start.x_m - end.x_m : end.x_m - start.x_m;
                if (!(gap > 0.0) || gap > config.max_miss_gap_m) continue;
                const double dt = start.time_s() - end.time_s();
                if (!(dt > 0.0)) continue;
                const double miss = std::min(std::abs(dt - end.smoothed.mean(1) * gap),
                                             std::abs(dt - start.smoothed.mean(1) * gap));
                if (miss <= best_miss) {
                    best_miss = miss;
                    best = {a, b};
                }
            }
        }
        if (!best) return;
        auto& head = tracks[best->first];
        auto& tail = tracks[best->second];
        const double gap = std::abs(tail.points.front().x_m - head.points.back().x_m);
        const auto n_head = static_cast<double>(head.associated_count());
        const auto n_tail = static_cast<double>(tail.associated_count());
        head.residual_s = std::sqrt((head.residual_s * head.residual_s * n_head + tail.residual_s * tail.residual_s * n_tail) /
                                    (n_head + n_tail));
        tail.points.front().dx_m = gap;
        head.points.insert(head.points.end(), tail.points.begin(), tail.points.end());
        tracks.erase(tracks.begin() + static_cast<std::ptrdiff_t>(best->second));
    }
}

std::vector<VehicleTrack> track_direction(std::span<const Detection> detections, const Index& idx,
                                          const std::vector<char>& in_segment, const Chain& chain, Direction dir,
                                          const TrackerConfig& config) {
    std::vector<char> available = in_segment;
    std::vector<char> seedable = in_segment;
    std::vector<VehicleTrack> tracks;
    while (true) {
        const auto seed = find_seed(detections, idx, seedable, chain, dir, config);
        if (!seed) break;
        auto track = run_track(detections, idx, &available, chain, seed->init, config);
        if (track) {
            for (std::size_t id : track->detection_ids()) available[id] = seedable[id] = 0;
            tracks.push_back(std::move(*track));
        }
        for (std::size_t id : seed->members) seedable[id] = 0;
    }
    stitch_fragments(tracks, config);
    return tracks;
}

} // namespace

void TrackerConfig::validate() const {
    model.validate();
    if (!(gate_sigmas > 0.0)) throw ConfigError("tracker gate_sigmas must be positive");
    if (!(max_miss_gap_m > 0.0)) throw ConfigError("tracker max_miss_gap_m must be positive");
    if (min_track_channels == 0) throw ConfigError("tracker min_track_channels must be at least 1");
    if (!(init_time_std_s > 0.0) || !(init_slowness_std > 0.0)) throw ConfigError("tracker prior stds must be positive");
    if (seed_channels < 2 || min_seed_support < 2 || min_seed_support > seed_channels) {
        throw ConfigError("tracker seed_channels and min_seed_support must satisfy 2 <= support <= channels");
    }
    if (!(seed_tolerance_s > 0.0) || !(min_slowness > 0.0) || !(max_slowness > min_slowness)) {
        throw ConfigError("tracker seed tolerance and slowness bounds out of range");
    }
    if (!(merge_overlap > 0.0 && merge_overlap <= 1.0)) throw ConfigError("tracker merge_overlap must lie in (0, 1]");
    if (!(nominal_spacing_m > 0.0)) throw ConfigError("tracker nominal_spacing_m must be positive");
    if (!(stitch_tolerance_s >= 0.0)) throw ConfigError("tracker stitch_tolerance_s must be non-negative");
}

double TrackPoint::speed_mps() const {
    const double s = smoothed.mean(1);
    return s > 0.0 ? 1.0 / s : std::numeric_limits<double>::quiet_NaN();
}

std::size_t VehicleTrack::associated_count() const {
    return static_cast<std::size_t>(
        std::count_if(points.begin(), points.end(), [](const TrackPoint& p) { return p.detection.has_value(); }));
}

std::vector<std::size_t> VehicleTrack::detection_ids() const {
    std::vector<std::size_t> out;
    for (const auto& p : points) {
        if (p.detection_id) out.push_back(*p.detection_id);
    }
    return out;
}

Chain build_chain(const CalibrationTable& table, std::size_t first_channel, std::size_t last_channel, bool baseline,
                  double nominal_spacing_m) {
    if (last_channel < first_channel) throw PreconditionError("build_chain: empty channel range");
    Chain chain;
    std::optional<double> origin;
    for (const auto& e : table.entries()) {
        if (e.channel < first_channel || e.channel > last_channel) continue;
        if (baseline) {
            if (!origin) origin = e.road_position_m - nominal_spacing_m * static_cast<double>(e.channel);
            chain.channels.push_back(e.channel);
            chain.positions.push_back(*origin + nominal_spacing_m * static_cast<double>(e.channel));
            continue;
        }
        if (e.spooled()) continue;
        if (!chain.positions.empty() && !(e.road_position_m > chain.positions.back())) continue;
        chain.channels.push_back(e.channel);
        chain.positions.push_back(e.road_position_m);
    }
    return chain;
}

std::optional<VehicleTrack> track_single(std::span<const Detection> detections, const Chain& chain,
                                         const TrackInit& init, const TrackerConfig& config) {
    config.validate();
    const auto idx = index_by_channel(detections);
    return run_track(detections, idx, nullptr, chain, init, config);
}

MultiTrackResult track_multi(std::span<const Detection> detections, const CalibrationTable& table,
                             std::span<const Segment> segments, const TrackerConfig& config) {
    config.validate();
    if (table.size() == 0) throw PreconditionError("track_multi: empty calibration table");
    std::vector<Segment> segs(segments.begin(), segments.end());
    std::sort(segs.begin(), segs.end(),
              [](const Segment& a, const Segment& b) { return a.first_channel < b.first_channel; });
    const std::size_t lo = table[0].channel;
    const std::size_t hi = table[table.size() - 1].channel;
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const bool contiguous = i == 0 ? segs[i].first_channel == lo : segs[i].first_channel == segs[i - 1].last_channel + 1;
        if (segs[i].last_channel < segs[i].first_channel || !contiguous) {
            throw PreconditionError("track_multi: segments must partition channels " + std::to_string(lo) + ".." +
                                    std::to_string(hi));
        }
    }
    if (segs.empty() || segs.back().last_channel != hi) {
        throw PreconditionError("track_multi: segments must partition channels " + std::to_string(lo) + ".." +
                                std::to_string(hi));
    }

    const auto idx = index_by_channel(detections);
    struct Job {
        std::size_t segment;
        Direction direction;
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < segs.size(); ++s) {
        jobs.push_back({s, Direction::Outbound});
        jobs.push_back({s, Direction::Inbound});
    }
    std::vector<std::vector<VehicleTrack>> found(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t j) {
        const auto& seg = segs[jobs[j].segment];
        const Chain chain =
            build_chain(table, seg.first_channel, seg.last_channel, config.baseline, config.nominal_spacing_m);
        if (chain.size() < 2) return;
        std::vector<char> in_segment(detections.size(), 0);
        for (std::size_t i = 0; i < detections.size(); ++i) {
            in_segment[i] = detections[i].channel >= seg.first_channel && detections[i].channel <= seg.last_channel;
        }
        found[j] = track_direction(detections, idx, in_segment, chain, jobs[j].direction, config);
    });

    std::vector<VehicleTrack> all;
    for (auto& f : found) {
        for (auto& t : f) all.push_back(std::move(t));
    }

    // Drop the higher-residual member of any pair sharing too many detections.
    std::vector<std::vector<std::size_t>> ids;
    for (auto& t : all) {
        auto v = t.detection_ids();
        std::sort(v.begin(), v.end());
        ids.push_back(std::move(v));
    }
    std::vector<char> keep(all.size(), 1);
    for (std::size_t a = 0; a < all.size(); ++a) {
        for (std::size_t b = a + 1; b < all.size(); ++b) {
            if (!keep[a] || !keep[b]) continue;
            std::vector<std::size_t> common;
            std::set_intersection(ids[a].begin(), ids[a].end(), ids[b].begin(), ids[b].end(),
                                  std::back_inserter(common));
            const auto smaller = std::min(ids[a].size(), ids[b].size());
            if (static_cast<double>(common.size()) > config.merge_overlap * static_cast<double>(smaller)) {
                if (all[a].residual_s <= all[b].residual_s) keep[b] = 0;
                else keep[a] = 0;
            }
        }
    }

    MultiTrackResult out;
    std::vector<char> used(detections.size(), 0);
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (!keep[i]) continue;
        for (std::size_t id : ids[i]) used[id] = 1;
        out.tracks.push_back(std::move(all[i]));
    }
    std::stable_sort(out.tracks.begin(), out.tracks.end(), [](const VehicleTrack& a, const VehicleTrack& b) {
        return a.points.front().time_s() < b.points.front().time_s();
    });
    for (std::size_t i = 0; i < out.tracks.size(); ++i) out.tracks[i].id = i;
    for (std::size_t i = 0; i < detections.size(); ++i) {
        if (!used[i]) out.residue.push_back(i);
    }
    return out;
}

} // namespace dastm::track
