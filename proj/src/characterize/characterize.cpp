#include "dastm/characterize/characterize.hpp"

#include "dastm/core/filters.hpp"
#include "dastm/detect/prominence.hpp"
#include "dastm/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dastm::characterize {

namespace {

double median_of(std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

struct Window {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive
};

Window clip_window(double t0, double t1, double fs, std::size_t n) {
    const double b = std::max(0.0, std::floor(t0 * fs));
    const double e = std::min(static_cast<double>(n), std::ceil(t1 * fs) + 1.0);
    if (!(e > b)) return {};
    return {static_cast<std::size_t>(b), static_cast<std::size_t>(e)};
}

} // namespace

std::optional<double> autocorrelation_lag(std::span<const double> series, double sample_rate_hz, double min_lag_s,
                                          double max_lag_s, double min_correlation) {
    if (!(sample_rate_hz > 0.0) || !(min_lag_s > 0.0) || !(max_lag_s > min_lag_s)) {
        throw PreconditionError("autocorrelation_lag: need 0 < min_lag < max_lag and a positive sample rate");
    }
    const std::size_t n = series.size();
    const auto lo = static_cast<std::size_t>(std::ceil(min_lag_s * sample_rate_hz));
    const auto hi = std::min(n - 1, static_cast<std::size_t>(std::floor(max_lag_s * sample_rate_hz)));
    if (n < 3 || lo > hi || lo == 0) return std::nullopt;
    auto r = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) s += series[i] * series[i + lag];
        return s;
    };
    const double r0 = r(0);
    if (!(r0 > 0.0)) return std::nullopt;
    // lag range widened by one on each side for the parabola
    const std::size_t first = lo - 1;
    const std::size_t last = std::min(n - 1, hi + 1);
    std::vector<double> rs(last - first + 1);
    for (std::size_t lag = first; lag <= last; ++lag) rs[lag - first] = r(lag);
    std::size_t best = lo;
    for (std::size_t lag = lo; lag <= hi; ++lag) {
        if (rs[lag - first] > rs[best - first]) best = lag;
    }
    if (rs[best - first] / r0 < min_correlation) return std::nullopt;
    const double offset = best < last ? detect::parabolic_offset(rs, best - first) : 0.0;
    return (static_cast<double>(best) + offset) / sample_rate_hz;
}

std::optional<Estimate> estimate_wheelbase(const track::VehicleTrack& track, const ChannelMatrix& das,
                                           std::span<const std::size_t> feature_channels,
                                           const WheelbaseConfig& config) {
    if (!(config.min_wheelbase_m > 0.0) || !(config.max_wheelbase_m > config.min_wheelbase_m)) {
        throw PreconditionError("estimate_wheelbase: wheelbase search range must be positive and ordered");
    }
    const double fs = das.sample_rate_hz();
    Estimate est;
    for (const auto& p : track.points) {
        if (std::find(feature_channels.begin(), feature_channels.end(), p.channel) == feature_channels.end()) continue;
        if (p.channel >= das.channel_count()) continue;
        const double v = p.speed_mps();
        if (!(v > 0.0) || !std::isfinite(v)) continue;
        const double arrival = p.time_s();
        const double half = 0.5 * config.max_wheelbase_m / v + config.window_pad_s;
        // filter a padded stretch so the window itself is free of edge effects
        const double pad = std::max(2.0, half);
        const auto outer = clip_window(arrival - half - pad, arrival + half + pad, fs, das.sample_count());
        if (outer.end - outer.begin < min_filter_length(fs, kWheelCutoffHz)) continue;
        const auto all = das.channel(p.channel);
        const auto hp = highpass_wheel(all.subspan(outer.begin, outer.end - outer.begin), fs);
        const auto inner = clip_window(arrival - half, arrival + half, fs, das.sample_count());
        if (inner.end <= inner.begin) continue;
        std::span<const double> window(hp.data() + (inner.begin - outer.begin), inner.end - inner.begin);
        if (config.min_snr > 0.0) {
            // noise level from the padding on both sides of the window
            std::vector<double> quiet;
            quiet.reserve(hp.size() - window.size());
            for (std::size_t i = 0; i < hp.size(); ++i) {
                const std::size_t abs = outer.begin + i;
                if (abs < inner.begin || abs >= inner.end) quiet.push_back(std::abs(hp[i]));
            }
            if (quiet.empty()) continue;
            const double noise = 1.4826 * median_of(std::move(quiet));
            double peak = 0.0;
            for (double x : window) peak = std::max(peak, std::abs(x));
            if (!(peak >= config.min_snr * noise)) continue;
        }
        const auto lag = autocorrelation_lag(window, fs, config.min_wheelbase_m / v, config.max_wheelbase_m / v,
                                             config.min_correlation);
        if (lag) est.per_channel.push_back(*lag * v);
    }
    if (est.per_channel.empty()) return std::nullopt;
    est.channels = est.per_channel.size();
    est.value = median_of(est.per_channel);
    std::vector<double> dev;
    for (double w : est.per_channel) dev.push_back(std::abs(w - est.value));
    est.spread = 1.4826 * median_of(dev);
    return est;
}

std::optional<Estimate> estimate_weight(const track::VehicleTrack& track, const CalibrationTable& table,
                                        std::size_t min_channels) {
    Estimate est;
    for (const auto& p : track.points) {
        if (!p.detection) continue;
        const auto* c = table.find(p.channel);
        if (!c || c->spooled()) continue;
        est.per_channel.push_back(p.detection->prominence / std::abs(*c->transmissibility));
    }
    if (est.per_channel.empty() || est.per_channel.size() < min_channels) return std::nullopt;
    est.channels = est.per_channel.size();
    const double n = static_cast<double>(est.channels);
    est.value = std::accumulate(est.per_channel.begin(), est.per_channel.end(), 0.0) / n;
    double ss = 0.0;
    for (double w : est.per_channel) ss += (w - est.value) * (w - est.value);
    est.spread = est.channels > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return est;
}

std::vector<std::size_t> crosstalk_channels(const track::VehicleTrack& track,
                                            std::span<const track::VehicleTrack> others, double guard_m) {
    if (!(guard_m > 0.0)) throw PreconditionError("crosstalk_channels: guard distance must be positive");
    std::vector<std::size_t> out;
    for (const auto& p : track.points) {
        const double t = p.time_s();
        bool hit = false;
        for (const auto& other : others) {
            if (other.id == track.id || other.direction == track.direction) continue;
            for (const auto& q : other.points) {
                if (q.channel != p.channel) continue;
                const double v = q.speed_mps();
                if (std::isfinite(v) && v * std::abs(q.time_s() - t) < guard_m) hit = true;
                break;
            }
            if (hit) break;
        }
        if (hit) out.push_back(p.channel);
    }
    return out;
}

track::VehicleTrack drop_channels(const track::VehicleTrack& track, std::span<const std::size_t> channels) {
    track::VehicleTrack out = track;
    for (auto& p : out.points) {
        if (std::find(channels.begin(), channels.end(), p.channel) != channels.end()) {
            p.detection.reset();
            p.detection_id.reset();
        }
    }
    return out;
}

track::VehicleTrack refine_prominences(const track::VehicleTrack& track, const ChannelMatrix& das,
                                       double half_window_m) {
    if (!(half_window_m > 0.0)) throw PreconditionError("refine_prominences: half window must be positive");
    const double fs = das.sample_rate_hz();
    const std::size_t n = das.sample_count();
    track::VehicleTrack out = track;
    for (auto& p : out.points) {
        if (!p.detection || p.channel >= das.channel_count()) continue;
        const double v = p.speed_mps();
        if (!(v > 0.0) || !std::isfinite(v)) continue;
        const double half_s = half_window_m / v;
        const double t = p.detection->time_s;
        const double pad = 4.0;
        const auto outer = clip_window(t - half_s - pad, t + half_s + pad, fs, n);
        if (outer.end - outer.begin < min_filter_length(fs, kQuasiStaticCutoffHz)) continue;
        const auto lp = lowpass_quasistatic(das.channel(p.channel).subspan(outer.begin, outer.end - outer.begin), fs);
        const double sign = p.detection->polarity == Polarity::Peak ? 1.0 : -1.0;
        // extremum of the low-passed series nearest the detection
        const auto search = clip_window(t - 0.25, t + 0.25, fs, n);
        if (search.end <= search.begin) continue;
        std::size_t best = search.begin - outer.begin;
        for (std::size_t i = search.begin; i < search.end; ++i) {
            if (sign * lp[i - outer.begin] > sign * lp[best]) best = i - outer.begin;
        }
        const auto half = static_cast<std::size_t>(std::llround(half_s * fs));
        const double prom = detect::prominence_at(lp, best, half, p.detection->polarity);
        if (prom > 0.0) p.detection->prominence = prom;
    }
    return out;
}

void CharacterizeConfig::validate() const {
    if (!(wheelbase.min_wheelbase_m > 0.0 && wheelbase.max_wheelbase_m > wheelbase.min_wheelbase_m)) {
        throw ConfigError("characterize: wheelbase range must be positive and ordered");
    }
    if (!(wheelbase.window_pad_s >= 0.0) || !(wheelbase.min_snr >= 0.0) ||
        !(wheelbase.min_correlation >= 0.0 && wheelbase.min_correlation <= 1.0)) {
        throw ConfigError("characterize: wheelbase window padding, SNR floor and correlation floor must be in range");
    }
    if (!(prominence_half_window_m > 0.0)) throw ConfigError("characterize: prominence half window must be positive");
    if (!(crosstalk_guard_m >= 0.0)) throw ConfigError("characterize: crosstalk guard must be non-negative");
    if (min_weight_channels == 0) throw ConfigError("characterize: min_weight_channels must be at least 1");
}

VehicleCharacter characterize_track(const track::VehicleTrack& track, std::span<const track::VehicleTrack> all_tracks,
                                    const ChannelMatrix& das, const CalibrationTable& table,
                                    std::span<const std::size_t> feature_channels, const CharacterizeConfig& config) {
    VehicleCharacter out;
    out.track_id = track.id;
    const auto shared = crosstalk_channels(track, all_tracks, config.crosstalk_guard_m);
    const auto clean = drop_channels(track, shared);
    const auto refined = refine_prominences(clean, das, config.prominence_half_window_m);
    out.weight_tons = estimate_weight(refined, table, config.min_weight_channels);
    // crosstalk also bends the track's speed, which scales every wheelbase estimate
    std::vector<std::size_t> wheel_channels;
    for (auto c : feature_channels) {
        if (std::find(shared.begin(), shared.end(), c) == shared.end()) wheel_channels.push_back(c);
    }
    out.wheelbase_m = estimate_wheelbase(track, das, wheel_channels, config.wheelbase);
    return out;
}

} // namespace dastm::characterize
