#include "dastm/sim/scene.hpp"

#include "dastm/core/filters.hpp"
#include "dastm/core/parallel.hpp"
#include "dastm/error.hpp"
#include "dastm/sim/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

namespace dastm::sim {

namespace {

enum class Stream : std::uint64_t { Noise = 1, Drift = 2, Transmissibility = 3, Flip = 4 };

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t index, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

std::size_t spool_channel_count(const SpoolSegment& s, double spacing) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(s.slack_length_m / spacing)));
}

// Slow background: random walk on a coarse grid, low-passed below 0.1 Hz,
// scaled to unit standard deviation and resampled linearly.
std::vector<double> drift_series(std::mt19937_64& rng, std::size_t samples, double fs) {
    constexpr double coarse_hz = 2.0;
    constexpr double cutoff_hz = 0.1;
    const double duration = static_cast<double>(samples) / fs;
    const std::size_t min_len = min_filter_length(coarse_hz, cutoff_hz);
    const std::size_t coarse_n = std::max(min_len, static_cast<std::size_t>(std::ceil(duration * coarse_hz)) + 2);
    std::normal_distribution<double> step(0.0, 1.0);
    std::vector<double> walk(coarse_n);
    double acc = 0.0;
    for (auto& w : walk) {
        acc += step(rng);
        w = acc;
    }
    const auto sections = butterworth(2, cutoff_hz, coarse_hz, FilterResponse::Lowpass);
    auto smooth = filter_zero_phase(walk, sections, static_cast<std::size_t>(3.0 * coarse_hz / cutoff_hz));
    const double mean = std::accumulate(smooth.begin(), smooth.end(), 0.0) / static_cast<double>(coarse_n);
    double var = 0.0;
    for (auto& v : smooth) {
        v -= mean;
        var += v * v;
    }
    const double sd = std::sqrt(var / static_cast<double>(coarse_n));
    std::vector<double> out(samples);
    for (std::size_t n = 0; n < samples; ++n) {
        const double u = static_cast<double>(n) / fs * coarse_hz;
        const auto i = std::min(static_cast<std::size_t>(u), coarse_n - 2);
        const double f = u - static_cast<double>(i);
        out[n] = ((1.0 - f) * smooth[i] + f * smooth[i + 1]) / (sd > 0.0 ? sd : 1.0);
    }
    return out;
}

double axle_sign(Direction d) { return d == Direction::Outbound ? 1.0 : -1.0; }

} // namespace

void VehicleSpec::validate() const {
    if (!(weight_tons > 0.0) || !std::isfinite(weight_tons)) throw ConfigError("vehicle weight_tons must be positive");
    if (!(wheelbase_m > 0.0) || !std::isfinite(wheelbase_m)) throw ConfigError("vehicle wheelbase_m must be positive");
    if (axle_count < 2) throw ConfigError("vehicle axle_count must be at least 2");
}

Trajectory::Trajectory(std::vector<std::pair<double, double>> knots, Direction direction, double lane_offset_m)
    : knots_(std::move(knots)), direction_(direction), lane_offset_m_(lane_offset_m) {
    if (knots_.size() < 2) throw ConfigError("trajectory needs at least two knots");
    if (!(lane_offset_m_ > 0.0) || !std::isfinite(lane_offset_m_)) {
        throw ConfigError("trajectory lane_offset_m must be positive");
    }
    const double s = axle_sign(direction_);
    for (std::size_t i = 0; i < knots_.size(); ++i) {
        if (!std::isfinite(knots_[i].first) || !std::isfinite(knots_[i].second)) {
            throw ConfigError("trajectory knots must be finite");
        }
        if (i > 0) {
            if (!(knots_[i].first > knots_[i - 1].first)) throw ConfigError("trajectory knot times must increase");
            if (!(s * (knots_[i].second - knots_[i - 1].second) > 0.0)) {
                throw ConfigError("trajectory positions must move strictly in the travel direction");
            }
        }
    }
}

Trajectory Trajectory::constant_speed(Direction direction, double lane_offset_m, double entry_time_s,
                                      double entry_position_m, double speed_mps) {
    if (!(speed_mps > 0.0)) throw ConfigError("trajectory speed must be positive");
    const double s = axle_sign(direction);
    return Trajectory({{entry_time_s, entry_position_m}, {entry_time_s + 1.0, entry_position_m + s * speed_mps}},
                      direction, lane_offset_m);
}

std::size_t Trajectory::segment_for_time(double t) const {
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                               [](double v, const auto& k) { return v < k.first; });
    const auto idx = static_cast<std::size_t>(std::distance(knots_.begin(), it));
    return std::clamp<std::size_t>(idx == 0 ? 0 : idx - 1, 0, knots_.size() - 2);
}

double Trajectory::position_at(double time_s) const {
    const auto i = segment_for_time(time_s);
    const auto& [t0, x0] = knots_[i];
    const auto& [t1, x1] = knots_[i + 1];
    return x0 + (x1 - x0) * (time_s - t0) / (t1 - t0);
}

double Trajectory::time_at(double road_position_m) const {
    const double s = axle_sign(direction_);
    const double key = s * road_position_m;
    auto it = std::upper_bound(knots_.begin(), knots_.end(), key,
                               [s](double v, const auto& k) { return v < s * k.second; });
    auto idx = static_cast<std::size_t>(std::distance(knots_.begin(), it));
    idx = std::clamp<std::size_t>(idx == 0 ? 0 : idx - 1, 0, knots_.size() - 2);
    const auto& [t0, x0] = knots_[idx];
    const auto& [t1, x1] = knots_[idx + 1];
    return t0 + (t1 - t0) * (road_position_m - x0) / (x1 - x0);
}

double Trajectory::speed_at(double time_s) const {
    const auto i = segment_for_time(time_s);
    return std::abs(knots_[i + 1].second - knots_[i].second) / (knots_[i + 1].first - knots_[i].first);
}

std::vector<std::size_t> spool_channels(const std::vector<SpoolSegment>& spools, std::size_t channel_count,
                                        double channel_spacing_m) {
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (const auto& s : spools) {
        if (!(s.slack_length_m > 0.0)) throw ConfigError("spool slack_length_m must be positive");
        const std::size_t end = s.first_channel + spool_channel_count(s, channel_spacing_m);
        if (end > channel_count) {
            throw ConfigError("spool at channel " + std::to_string(s.first_channel) + " runs past the last channel");
        }
        ranges.emplace_back(s.first_channel, end);
    }
    std::sort(ranges.begin(), ranges.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        if (i > 0 && ranges[i].first < ranges[i - 1].second) {
            throw ConfigError("spool segments starting at channels " + std::to_string(ranges[i - 1].first) + " and " +
                              std::to_string(ranges[i].first) + " overlap");
        }
        for (std::size_t k = ranges[i].first; k < ranges[i].second; ++k) out.push_back(k);
    }
    return out;
}

CalibrationTable build_sensor_table(const FiberLayout& layout, std::uint64_t seed, const Centerline* centerline) {
    if (layout.channel_count == 0 || !(layout.channel_spacing_m > 0.0) || !(layout.road_per_fiber > 0.0)) {
        throw ConfigError("fiber layout needs channels, a positive spacing and a positive road_per_fiber");
    }
    if (!(layout.transmissibility_min > 0.0) || !(layout.transmissibility_max >= layout.transmissibility_min)) {
        throw ConfigError("fiber layout transmissibility range must satisfy 0 < min <= max");
    }
    if (layout.flipped_fraction < 0.0 || layout.flipped_fraction >= 1.0 || !(layout.mean_flip_run_channels >= 1.0)) {
        throw ConfigError("fiber layout flip statistics out of range");
    }
    const auto spooled = spool_channels(layout.spools, layout.channel_count, layout.channel_spacing_m);
    std::vector<bool> is_spool(layout.channel_count, false);
    for (auto k : spooled) is_spool[k] = true;

    auto t_rng = make_engine(seed, 0, Stream::Transmissibility);
    auto f_rng = make_engine(seed, 0, Stream::Flip);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double rho = std::exp(-1.0 / std::max(layout.correlation_channels, 1e-9));
    const double innovation = std::sqrt(1.0 - rho * rho);
    const double log_min = std::log(layout.transmissibility_min);
    const double log_span = std::log(layout.transmissibility_max) - log_min;
    const double p_leave = 1.0 / layout.mean_flip_run_channels;
    const double p_enter = p_leave * layout.flipped_fraction / (1.0 - layout.flipped_fraction);

    double z = gauss(t_rng);
    bool flipped = unif(f_rng) < layout.flipped_fraction;
    std::size_t slack_channels = 0;
    std::vector<ChannelCalibration> entries;
    entries.reserve(layout.channel_count);
    for (std::size_t k = 0; k < layout.channel_count; ++k) {
        if (k > 0) {
            z = rho * z + innovation * gauss(t_rng);
            flipped = flipped ? unif(f_rng) >= p_leave : unif(f_rng) < p_enter;
        }
        ChannelCalibration c;
        c.channel = k;
        if (is_spool[k]) {
            // every spooled channel sits at the road location where the coil starts
            std::size_t first = k;
            while (first > 0 && is_spool[first - 1]) --first;
            c.road_position_m = layout.first_channel_road_m +
                                layout.road_per_fiber * layout.channel_spacing_m *
                                    static_cast<double>(first - (slack_channels - (k - first)));
            ++slack_channels;
        } else {
            c.road_position_m = layout.first_channel_road_m + layout.road_per_fiber * layout.channel_spacing_m *
                                                                  static_cast<double>(k - slack_channels);
            const double magnitude = std::exp(log_min + normal_cdf(z) * log_span);
            c.transmissibility = flipped ? -magnitude : magnitude;
        }
        if (centerline) c.geo = centerline->point_at(c.road_position_m);
        entries.push_back(c);
    }
    return CalibrationTable(std::move(entries));
}

void SceneConfig::validate() const {
    if (!(record.sample_rate_hz > 0.0) || !(record.gauge_length_m > 0.0) || !(record.channel_spacing_m > 0.0)) {
        throw ConfigError("scene record metadata must be positive");
    }
    if (!(duration_s > 0.0)) throw ConfigError("scene duration_s must be positive");
    if (sensors.size() == 0) throw ConfigError("scene has no sensors");
    if (!(noise_sigma >= 0.0) || !(drift_amplitude >= 0.0)) {
        throw ConfigError("scene noise_sigma and drift_amplitude must be non-negative");
    }
    if (!(reference_lane_offset_m > 0.0) || !(depth_m > 0.0) || !(kernel_cutoff_m > 0.0)) {
        throw ConfigError("scene geometry (reference lane, depth, kernel cutoff) must be positive");
    }
    if (!(wheel.wavelet_hz > 0.0) || !(wheel.decay_s > 0.0) || !(wheel.wave_speed_mps > 0.0) ||
        !(wheel.attenuation_m > 0.0) || wheel.amplitude_ratio < 0.0 || wheel.radius_m < 0.0) {
        throw ConfigError("scene wheel model parameters out of range");
    }
    const std::size_t channels = sensors.entries().back().channel + 1;
    (void)spool_channels(spool_segments, channels, record.channel_spacing_m);
    double lo = sensors[0].road_position_m;
    double hi = lo;
    for (const auto& e : sensors.entries()) {
        lo = std::min(lo, e.road_position_m);
        hi = std::max(hi, e.road_position_m);
    }
    for (double f : road_features) {
        if (!(f >= lo && f <= hi)) throw ConfigError("road feature at " + std::to_string(f) + " m is off the road");
    }
    for (const auto& v : vehicles) v.spec.validate();
    if (taps.amplitude != 0.0 && taps.channel >= channels) throw ConfigError("tap channel outside the record");
    for (double t : taps.times_s) {
        if (!(t >= 0.0 && t < duration_s)) throw ConfigError("tap time outside the record");
    }
}

double GroundTruth::lane_factor(double lane_offset_m) const {
    return kernel_peak(lane_offset_m, depth_m, gauge_length_m) /
           kernel_peak(reference_lane_offset_m, depth_m, gauge_length_m);
}

double quasistatic_response(const SceneConfig& scene, const SceneVehicle& vehicle, const ChannelCalibration& sensor,
                            double time_s) {
    if (!sensor.transmissibility) return 0.0;
    const double gauge = scene.record.gauge_length_m;
    const double norm = kernel_peak(scene.reference_lane_offset_m, scene.depth_m, gauge);
    const double d = vehicle.trajectory.position_at(time_s) - sensor.road_position_m;
    if (std::abs(d) > scene.kernel_cutoff_m) return 0.0;
    return *sensor.transmissibility * vehicle.spec.weight_tons *
           gauge_averaged_kernel(d, vehicle.trajectory.lane_offset_m(), scene.depth_m, gauge) / norm;
}

Recording synthesize(const SceneConfig& scene, std::uint64_t seed) {
    scene.validate();
    const double fs = scene.record.sample_rate_hz;
    const auto samples = static_cast<std::size_t>(std::llround(scene.duration_s * fs));
    if (samples < 2) throw ConfigError("scene shorter than two samples");
    const std::size_t channels = scene.sensors.entries().back().channel + 1;
    std::vector<const ChannelCalibration*> sensor_of(channels, nullptr);
    for (const auto& e : scene.sensors.entries()) sensor_of[e.channel] = &e;
    for (auto k : spool_channels(scene.spool_segments, channels, scene.record.channel_spacing_m)) {
        sensor_of[k] = nullptr;
    }

    const double gauge = scene.record.gauge_length_m;
    const double norm = kernel_peak(scene.reference_lane_offset_m, scene.depth_m, gauge);
    const double dt = 1.0 / fs;
    const auto& wheel = scene.wheel;
    const double wavelet_len = 10.0 * wheel.decay_s;

    std::vector<double> data(channels * samples, 0.0);
    parallel_for(channels, [&](std::size_t k) {
        double* out = data.data() + k * samples;
        const ChannelCalibration* sensor = sensor_of[k];
        if (sensor && sensor->transmissibility) {
            const double T = *sensor->transmissibility;
            const double p = sensor->road_position_m;
            for (const auto& v : scene.vehicles) {
                const auto& traj = v.trajectory;
                const double lane = traj.lane_offset_m();
                const double scale = T * v.spec.weight_tons / norm;
                const double ta = traj.time_at(p - scene.kernel_cutoff_m);
                const double tb = traj.time_at(p + scene.kernel_cutoff_m);
                const double t_lo = std::max(0.0, std::min(ta, tb));
                const double t_hi = std::min(scene.duration_s, std::max(ta, tb));
                if (t_lo >= t_hi) continue;
                const auto n0 = static_cast<std::size_t>(std::ceil(t_lo * fs));
                const auto n1 = std::min(samples, static_cast<std::size_t>(std::floor(t_hi * fs)) + 1);
                for (std::size_t n = n0; n < n1; ++n) {
                    const double d = traj.position_at(static_cast<double>(n) * dt) - p;
                    out[n] += scale * gauge_averaged_kernel(d, lane, scene.depth_m, gauge);
                }
            }
            if (wheel.amplitude_ratio > 0.0) {
                for (const auto& v : scene.vehicles) {
                    const auto& traj = v.trajectory;
                    const double s = axle_sign(traj.direction());
                    const double lane_ratio =
                        kernel_peak(traj.lane_offset_m(), scene.depth_m, gauge) / norm;
                    for (double f : scene.road_features) {
                        const double dist = std::abs(p - f);
                        if (dist > wheel.radius_m) continue;
                        const double amp = wheel.amplitude_ratio * std::abs(T) * v.spec.weight_tons * lane_ratio *
                                           std::exp(-dist / wheel.attenuation_m);
                        const double delay = dist / wheel.wave_speed_mps;
                        const double half_wb = 0.5 * v.spec.wheelbase_m;
                        for (double axle_pos : {f - s * half_wb, f + s * half_wb}) {
                            const double t0 = traj.time_at(axle_pos) + delay;
                            if (t0 + wavelet_len < 0.0 || t0 >= scene.duration_s) continue;
                            const auto n0 = static_cast<std::size_t>(std::max(0.0, std::ceil(t0 * fs)));
                            const auto n1 =
                                std::min(samples, static_cast<std::size_t>(std::floor((t0 + wavelet_len) * fs)) + 1);
                            for (std::size_t n = n0; n < n1; ++n) {
                                const double tau = static_cast<double>(n) * dt - t0;
                                out[n] += amp * std::exp(-tau / wheel.decay_s) *
                                          std::sin(2.0 * std::numbers::pi * wheel.wavelet_hz * tau);
                            }
                        }
                    }
                }
            }
            if (scene.drift_amplitude > 0.0) {
                auto rng = make_engine(seed, k, Stream::Drift);
                const auto drift = drift_series(rng, samples, fs);
                for (std::size_t n = 0; n < samples; ++n) out[n] += scene.drift_amplitude * drift[n];
            }
        }
        if (scene.taps.amplitude != 0.0 && k == scene.taps.channel) {
            for (double t : scene.taps.times_s) {
                const auto n = static_cast<std::size_t>(std::llround(t * fs));
                if (n < samples) out[n] += scene.taps.amplitude;
            }
        }
        if (scene.noise_sigma > 0.0) {
            auto rng = make_engine(seed, k, Stream::Noise);
            std::normal_distribution<double> noise(0.0, scene.noise_sigma);
            for (std::size_t n = 0; n < samples; ++n) out[n] += noise(rng);
        }
    });

    GroundTruth truth;
    truth.sensors = scene.sensors;
    truth.reference_lane_offset_m = scene.reference_lane_offset_m;
    truth.depth_m = scene.depth_m;
    truth.gauge_length_m = gauge;
    for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
        const auto& v = scene.vehicles[i];
        truth.vehicles.push_back({i, v.spec, v.trajectory.direction(), v.trajectory.lane_offset_m()});
        truth.trajectories.push_back(v.trajectory);
        for (std::size_t k = 0; k < channels; ++k) {
            const auto* sensor = sensor_of[k];
            if (!sensor || !sensor->transmissibility) continue;
            const double t = v.trajectory.time_at(sensor->road_position_m);
            if (t >= 0.0 && t <= scene.duration_s - dt) truth.arrivals.push_back({i, k, t});
        }
    }
    return {ChannelMatrix(channels, samples, scene.record, std::move(data)), std::move(truth)};
}

} // namespace dastm::sim
