#pragma once

#include "dastm/core/geo.hpp"
#include "dastm/core/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dastm::sim {

struct VehicleSpec {
    double weight_tons = 1.47;
    double wheelbase_m = 2.7;
    int axle_count = 2;
    std::string label;

    void validate() const;
};

/// Piecewise-linear road position over time. Knots are (time_s, road_m);
/// positions outside the knot range continue at the end speeds.
class Trajectory {
public:
    Trajectory(std::vector<std::pair<double, double>> knots, Direction direction, double lane_offset_m);

    static Trajectory constant_speed(Direction direction, double lane_offset_m, double entry_time_s,
                                     double entry_position_m, double speed_mps);

    [[nodiscard]] double position_at(double time_s) const;
    [[nodiscard]] double time_at(double road_position_m) const;
    /// Unsigned speed at a time (right-continuous at knots).
    [[nodiscard]] double speed_at(double time_s) const;

    [[nodiscard]] Direction direction() const { return direction_; }
    [[nodiscard]] double lane_offset_m() const { return lane_offset_m_; }
    [[nodiscard]] const std::vector<std::pair<double, double>>& knots() const { return knots_; }

private:
    [[nodiscard]] std::size_t segment_for_time(double t) const;

    std::vector<std::pair<double, double>> knots_;
    Direction direction_;
    double lane_offset_m_;
};

struct SceneVehicle {
    VehicleSpec spec;
    Trajectory trajectory;
};

/// Slack fiber coiled at one road location: channels from `first_channel`
/// covering `slack_length_m` of fiber have no road coupling.
struct SpoolSegment {
    std::size_t first_channel = 0;
    double slack_length_m = 0.0;
};

/// How the fiber maps onto the road, plus the statistics used to draw the
/// ground-truth transmissibility field.
struct FiberLayout {
    std::size_t channel_count = 400;
    double channel_spacing_m = 1.0;
    double first_channel_road_m = 0.0;
    double road_per_fiber = 1.0;  ///< road metres per fiber metre on coupled stretches
    std::vector<SpoolSegment> spools;
    double transmissibility_min = 264.0;
    double transmissibility_max = 21704.0;
    double flipped_fraction = 0.18;
    double mean_flip_run_channels = 30.0;
    double correlation_channels = 20.0;
};

/// Channels covered by spools, sorted. Throws ConfigError when spools overlap
/// or run past the last channel.
[[nodiscard]] std::vector<std::size_t> spool_channels(const std::vector<SpoolSegment>& spools,
                                                      std::size_t channel_count, double channel_spacing_m);

/// Ground-truth calibration for a layout: monotone road positions, smooth
/// log-uniform |T_k| in [min, max], runs of flipped channels, spooled channels unset.
[[nodiscard]] CalibrationTable build_sensor_table(const FiberLayout& layout, std::uint64_t seed,
                                                  const Centerline* centerline = nullptr);

/// Wheel-road impact response: damped wavelet per axle at each road feature.
struct WheelModel {
    double wavelet_hz = 8.0;
    double decay_s = 0.04;
    double amplitude_ratio = 0.3;  ///< per-axle peak relative to the channel's quasi-static peak
    double wave_speed_mps = 250.0;
    double radius_m = 12.0;       ///< channels farther than this from a feature see nothing
    double attenuation_m = 4.0;
};

/// Impulses injected on one channel for clock synchronization.
struct TapConfig {
    std::size_t channel = 0;
    std::vector<double> times_s;  ///< record-relative
    double amplitude = 0.0;
};

struct SceneConfig {
    RecordInfo record;
    double duration_s = 60.0;
    CalibrationTable sensors;
    std::vector<SpoolSegment> spool_segments;
    std::vector<SceneVehicle> vehicles;
    std::vector<double> road_features;
    double noise_sigma = 0.0;
    double drift_amplitude = 0.0;
    double reference_lane_offset_m = 3.0;
    double depth_m = 1.5;
    double kernel_cutoff_m = 60.0;  ///< kernel tail ignored beyond this road distance
    WheelModel wheel;
    TapConfig taps;

    /// Throws ConfigError describing the first violated constraint.
    void validate() const;
};

struct VehicleTruth {
    std::size_t id = 0;
    VehicleSpec spec;
    Direction direction = Direction::Outbound;
    double lane_offset_m = 3.0;
};

struct ArrivalTruth {
    std::size_t vehicle = 0;
    std::size_t channel = 0;
    double time_s = 0.0;  ///< record-relative
};

struct GroundTruth {
    std::vector<VehicleTruth> vehicles;
    std::vector<Trajectory> trajectories;
    std::vector<ArrivalTruth> arrivals;  ///< coupled channels only, sorted by (vehicle, channel)
    CalibrationTable sensors;
    double reference_lane_offset_m = 3.0;
    double depth_m = 1.5;
    double gauge_length_m = 10.0;

    /// Ratio of the kernel peak at `lane_offset_m` to the reference lane.
    [[nodiscard]] double lane_factor(double lane_offset_m) const;
};

struct Recording {
    ChannelMatrix das;
    GroundTruth truth;
};

/// Deterministic in (scene, seed): each channel draws from its own RNG streams.
[[nodiscard]] Recording synthesize(const SceneConfig& scene, std::uint64_t seed);

/// Noise-free quasi-static strain of one vehicle at a channel and time.
[[nodiscard]] double quasistatic_response(const SceneConfig& scene, const SceneVehicle& vehicle,
                                          const ChannelCalibration& sensor, double time_s);

} // namespace dastm::sim
