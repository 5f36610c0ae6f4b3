#include "dastm/calib/calibration.hpp"

#include "dastm/core/filters.hpp"
#include "dastm/core/parallel.hpp"
#include "dastm/detect/prominence.hpp"
#include "dastm/error.hpp"
#include "dastm/sim/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace dastm::calib {

namespace {

double median_of(std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

double mad_of(const std::vector<double>& v) {
    const double m = median_of(v);
    std::vector<double> dev(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - m);
    return median_of(std::move(dev));
}

struct Candidate {
    double time_s = 0.0;  // relative to record start
    double prominence = 0.0;  // signed
};

// Quasi-static extrema of one channel whose prominence over the road-length
// reference window clears the residual-noise floor.
std::vector<Candidate> channel_candidates(std::span<const double> series, double fs, double window_s,
                                          double floor_factor) {
    const auto lp = lowpass_quasistatic(series, fs);
    std::vector<double> resid(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) resid[i] = series[i] - lp[i];
    const double floor = floor_factor * mad_of(resid);
    std::vector<Candidate> out;
    for (Polarity pol : {Polarity::Peak, Polarity::Valley}) {
        const double sign = pol == Polarity::Peak ? 1.0 : -1.0;
        for (const auto& e : detect::prominence_scan(lp, fs, window_s, pol)) {
            if (e.prominence >= floor && e.prominence > 0.0) out.push_back({e.time_s, sign * e.prominence});
        }
    }
    return out;
}

} // namespace

GpsTrack::GpsTrack(std::vector<GpsFix> fixes, const Centerline& centerline) : fixes_(std::move(fixes)) {
    if (fixes_.size() < 2) throw DataError("GPS track needs at least two fixes");
    for (std::size_t i = 0; i < fixes_.size(); ++i) {
        const auto& f = fixes_[i];
        if (!std::isfinite(f.time_s) || !std::isfinite(f.position.lat) || !std::isfinite(f.position.lon)) {
            throw DataError("GPS fix " + std::to_string(i) + " is not finite");
        }
        if (i > 0 && !(f.time_s > fixes_[i - 1].time_s)) {
            throw DataError("GPS fix times must increase strictly (fix " + std::to_string(i) + ")");
        }
        projected_.emplace_back(f.time_s, centerline.project(f.position));
    }
}

std::optional<double> GpsTrack::position_at(double time_s) const {
    if (!(time_s >= start_time() && time_s <= end_time())) return std::nullopt;
    auto it = std::upper_bound(projected_.begin(), projected_.end(), time_s,
                               [](double t, const auto& p) { return t < p.first; });
    if (it == projected_.end()) return projected_.back().second;
    const auto& [t1, x1] = *it;
    const auto& [t0, x0] = *std::prev(it);
    return x0 + (x1 - x0) * (time_s - t0) / (t1 - t0);
}

double GpsTrack::typical_speed_mps() const {
    std::vector<double> speeds;
    for (std::size_t i = 1; i < projected_.size(); ++i) {
        speeds.push_back(std::abs(projected_[i].second - projected_[i - 1].second) /
                         (projected_[i].first - projected_[i - 1].first));
    }
    return median_of(std::move(speeds));
}

ClockSync sync_clocks(std::span<const TapEvent> taps) {
    if (taps.empty()) throw PreconditionError("sync_clocks: need at least one tap");
    double sum = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    for (std::size_t i = 0; i < taps.size(); ++i) {
        if (!std::isfinite(taps[i].das_time_s) || !std::isfinite(taps[i].reference_time_s)) {
            throw DataError("sync_clocks: tap " + std::to_string(i) + " has a non-finite time");
        }
        const double d = taps[i].reference_time_s - taps[i].das_time_s;
        sum += d;
        lo = i == 0 ? d : std::min(lo, d);
        hi = i == 0 ? d : std::max(hi, d);
    }
    ClockSync out;
    out.offset_s = sum / static_cast<double>(taps.size());
    if (taps.size() >= 2) out.spread_s = hi - lo;
    return out;
}

std::vector<double> locate_taps(const ChannelMatrix& das, std::size_t channel, std::size_t count,
                                double min_separation_s) {
    if (channel >= das.channel_count()) throw PreconditionError("locate_taps: channel outside the record");
    const double fs = das.sample_rate_hz();
    const auto hp = highpass_wheel(das.channel(channel), fs);
    std::vector<std::size_t> order(hp.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(hp[a]) > std::abs(hp[b]); });
    const auto sep = static_cast<double>(min_separation_s * fs);
    std::vector<std::size_t> picked;
    for (std::size_t i : order) {
        if (picked.size() == count) break;
        const bool close = std::any_of(picked.begin(), picked.end(), [&](std::size_t p) {
            return std::abs(static_cast<double>(p) - static_cast<double>(i)) < sep;
        });
        if (!close) picked.push_back(i);
    }
    if (picked.size() < count) throw DataError("locate_taps: found fewer impulses than requested");
    std::sort(picked.begin(), picked.end());
    std::vector<double> out;
    for (auto i : picked) out.push_back(das.info().start_time + static_cast<double>(i) / fs);
    return out;
}

void GeolocationConfig::validate() const {
    if (!(spool_tolerance_m > 0.0) || !(floor_mad_factor >= 0.0) || !(search_window_s > 0.0) ||
        !(outlier_mads > 0.0) || !(prominence_half_window_m > 0.0)) {
        throw ConfigError("geolocation parameters must be positive");
    }
}

std::vector<ChannelLocation> geolocate_channels(std::span<const ChannelMatrix> runs, std::span<const GpsTrack> tracks,
                                                double offset_s, const GeolocationConfig& config) {
    config.validate();
    if (runs.empty()) throw PreconditionError("geolocate_channels: need at least one run");
    if (runs.size() != tracks.size()) throw PreconditionError("geolocate_channels: one GPS track per run required");
    const std::size_t channels = runs.front().channel_count();
    for (const auto& r : runs) {
        if (r.channel_count() != channels) throw DataError("geolocate_channels: runs differ in channel count");
    }

    std::vector<ChannelLocation> locs(channels);
    for (std::size_t k = 0; k < channels; ++k) {
        locs[k].channel = k;
        locs[k].passes.assign(runs.size(), std::nullopt);
        locs[k].used.assign(runs.size(), false);
    }

    for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto& das = runs[r];
        const double fs = das.sample_rate_hz();
        const double speed = tracks[r].typical_speed_mps();
        if (!(speed > 0.0)) throw DataError("geolocate_channels: GPS track " + std::to_string(r) + " does not move");
        const double window_s = 2.0 * config.prominence_half_window_m / speed;

        std::vector<std::vector<Candidate>> cand(channels);
        parallel_for(channels, [&](std::size_t k) {
            cand[k] = channel_candidates(das.channel(k), fs, window_s, config.floor_mad_factor);
        });

        // Dominant event per channel, then a running median as the expected arrival.
        std::vector<std::optional<double>> dominant(channels);
        for (std::size_t k = 0; k < channels; ++k) {
            const Candidate* best = nullptr;
            for (const auto& c : cand[k]) {
                if (!best || std::abs(c.prominence) > std::abs(best->prominence)) best = &c;
            }
            if (best) dominant[k] = best->time_s;
        }
        for (std::size_t k = 0; k < channels; ++k) {
            const std::size_t lo = k >= config.prediction_half_width ? k - config.prediction_half_width : 0;
            const std::size_t hi = std::min(channels - 1, k + config.prediction_half_width);
            std::vector<double> near;
            for (std::size_t j = lo; j <= hi; ++j) {
                if (dominant[j]) near.push_back(*dominant[j]);
            }
            if (near.empty() || cand[k].empty()) continue;
            const double predicted = median_of(std::move(near));

            double strongest = 0.0;
            for (const auto& c : cand[k]) {
                if (std::abs(c.time_s - predicted) <= config.search_window_s) {
                    strongest = std::max(strongest, std::abs(c.prominence));
                }
            }
            const Candidate* pick = nullptr;
            for (const auto& c : cand[k]) {
                if (std::abs(c.time_s - predicted) > config.search_window_s) continue;
                if (std::abs(c.prominence) < 0.5 * strongest) continue;
                if (!pick || std::abs(c.time_s - predicted) < std::abs(pick->time_s - predicted)) pick = &c;
            }
            if (!pick) continue;
            const double das_time = das.info().start_time + pick->time_s;
            const auto pos = tracks[r].position_at(das_time + offset_s);
            if (!pos) continue;
            locs[k].passes[r] = RunPass{das_time, pick->prominence, *pos};
        }
    }

    const std::size_t min_passes = std::max<std::size_t>(1, (runs.size() + 1) / 2);
    std::vector<std::size_t> coupled;
    std::vector<double> positions;
    std::vector<double> weights;
    for (auto& loc : locs) {
        std::vector<double> pos;
        for (const auto& p : loc.passes) {
            if (p) pos.push_back(p->position_m);
        }
        if (pos.size() < min_passes) continue;
        const double med = median_of(pos);
        const double scale = std::max(1.4826 * mad_of(pos), 0.05 * config.spool_tolerance_m);
        double lo = 0.0;
        double hi = 0.0;
        double sum = 0.0;
        std::size_t kept = 0;
        for (std::size_t r = 0; r < loc.passes.size(); ++r) {
            if (!loc.passes[r]) continue;
            const double p = loc.passes[r]->position_m;
            if (std::abs(p - med) > config.outlier_mads * scale) continue;
            loc.used[r] = true;
            lo = kept == 0 ? p : std::min(lo, p);
            hi = kept == 0 ? p : std::max(hi, p);
            sum += p;
            ++kept;
        }
        if (kept < min_passes || hi - lo > config.spool_tolerance_m) {
            std::fill(loc.used.begin(), loc.used.end(), false);
            continue;
        }
        loc.road_position_m = sum / static_cast<double>(kept);
        coupled.push_back(loc.channel);
        positions.push_back(*loc.road_position_m);
        weights.push_back(static_cast<double>(kept));
    }
    if (config.enforce_monotone && !positions.empty()) {
        const auto fit = isotonic_fit(positions, weights);
        for (std::size_t i = 0; i < coupled.size(); ++i) locs[coupled[i]].road_position_m = fit[i];
    }
    return locs;
}

std::vector<std::optional<double>> estimate_transmissibility(std::span<const ChannelLocation> locations,
                                                             double test_weight_tons) {
    if (!(test_weight_tons > 0.0)) throw PreconditionError("estimate_transmissibility: weight must be positive");
    std::vector<std::optional<double>> out(locations.size());
    for (std::size_t i = 0; i < locations.size(); ++i) {
        const auto& loc = locations[i];
        if (loc.spooled()) continue;
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t r = 0; r < loc.passes.size(); ++r) {
            if (loc.used[r] && loc.passes[r]) {
                sum += loc.passes[r]->prominence;
                ++n;
            }
        }
        if (n == 0 || sum == 0.0) continue;
        out[i] = sum / static_cast<double>(n) / test_weight_tons;
    }
    return out;
}

double extrapolate_lane(double t_near, double near_offset_m, double far_offset_m, double depth_m,
                        double gauge_length_m) {
    if (!(near_offset_m > 0.0) || !(far_offset_m > 0.0)) {
        throw PreconditionError("extrapolate_lane: lane offsets must be positive");
    }
    if (far_offset_m == near_offset_m) return t_near;
    return t_near * sim::kernel_peak(far_offset_m, depth_m, gauge_length_m) /
           sim::kernel_peak(near_offset_m, depth_m, gauge_length_m);
}

std::vector<double> isotonic_fit(std::span<const double> values, std::span<const double> weights) {
    if (!weights.empty() && weights.size() != values.size()) {
        throw PreconditionError("isotonic_fit: weights must match values");
    }
    struct Block {
        double mean;
        double weight;
        std::size_t count;
    };
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        if (!(w > 0.0)) throw PreconditionError("isotonic_fit: weights must be positive");
        blocks.push_back({values[i], w, 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
            const Block b = blocks.back();
            blocks.pop_back();
            auto& a = blocks.back();
            a.mean = (a.mean * a.weight + b.mean * b.weight) / (a.weight + b.weight);
            a.weight += b.weight;
            a.count += b.count;
        }
    }
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& b : blocks) out.insert(out.end(), b.count, b.mean);
    return out;
}

CalibrationTable build_calibration_table(std::span<const ChannelLocation> locations,
                                         std::span<const std::optional<double>> transmissibility,
                                         const Centerline* centerline) {
    if (locations.size() != transmissibility.size()) {
        throw PreconditionError("build_calibration_table: one transmissibility slot per channel required");
    }
    std::vector<ChannelCalibration> entries(locations.size());
    std::optional<double> next;
    for (std::size_t i = locations.size(); i-- > 0;) {
        const auto& loc = locations[i];
        auto& e = entries[i];
        e.channel = loc.channel;
        if (loc.road_position_m && transmissibility[i]) {
            e.road_position_m = *loc.road_position_m;
            e.transmissibility = transmissibility[i];
            next = e.road_position_m;
        } else {
            e.road_position_m = next ? *next : std::numeric_limits<double>::quiet_NaN();
        }
    }
    std::optional<double> prev;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        auto& e = entries[i];
        if (e.transmissibility) {
            prev = e.road_position_m;
        } else if (std::isnan(e.road_position_m)) {
            // trailing spooled channels with no coupled channel after them
            e.road_position_m = prev.value_or(0.0);
        }
        if (centerline) e.geo = centerline->point_at(e.road_position_m);
    }
    return CalibrationTable(std::move(entries));
}

CalibrationResult calibrate(const CalibrationInputs& inputs) {
    if (inputs.runs.size() != inputs.gps.size()) throw DataError("calibrate: one GPS log per run required");
    std::vector<GpsTrack> tracks;
    for (const auto& g : inputs.gps) tracks.emplace_back(g, inputs.centerline);
    CalibrationResult out;
    out.clock = sync_clocks(inputs.taps);
    out.locations = geolocate_channels(inputs.runs, tracks, out.clock.offset_s, inputs.geolocation);
    const auto t = estimate_transmissibility(out.locations, inputs.test_weight_tons);
    out.table = build_calibration_table(out.locations, t, &inputs.centerline);
    return out;
}

} // namespace dastm::calib
