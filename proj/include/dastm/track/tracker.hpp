#pragma once

#include "dastm/core/types.hpp"
#include "dastm/track/kalman.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace dastm::track {

/// Channels a track steps through, ordered by increasing road position.
struct Chain {
    std::vector<std::size_t> channels;
    std::vector<double> positions;

    [[nodiscard]] std::size_t size() const { return channels.size(); }
};

/// Calibrated chain over channels [first, last]: spooled channels excluded,
/// later channels at an already used road position dropped. In baseline mode
/// every channel is kept and positions advance by `nominal_spacing_m` from the
/// position of the first channel.
[[nodiscard]] Chain build_chain(const CalibrationTable& table, std::size_t first_channel, std::size_t last_channel,
                                bool baseline = false, double nominal_spacing_m = 1.0);

struct TrackerConfig {
    MotionModel model;
    double gate_sigmas = 3.0;
    double max_miss_gap_m = 25.0;  ///< road distance of consecutive misses that ends a track
    std::size_t min_track_channels = 15;
    double init_time_std_s = 1.0;
    double init_slowness_std = 0.05;  ///< s/m
    std::size_t seed_channels = 8;    ///< chain channels spanned by a seed cluster
    std::size_t min_seed_support = 5;
    double seed_tolerance_s = 0.25;   ///< detection distance from the seed line
    double min_slowness = 1.0 / 40.0;  ///< s/m, fastest vehicle considered
    double max_slowness = 1.0 / 2.0;   ///< s/m, slowest vehicle considered
    double merge_overlap = 0.5;
    /// Time mismatch allowed when joining two fragments of one vehicle; 0 disables joining.
    double stitch_tolerance_s = 0.5;
    bool baseline = false;
    double nominal_spacing_m = 1.0;

    void validate() const;
};

struct TrackInit {
    std::size_t start = 0;  ///< chain index of the first channel visited
    Direction direction = Direction::Outbound;
    double time_s = 0.0;
    double slowness = 0.1;  ///< s/m, positive along the direction of travel
};

struct TrackPoint {
    std::size_t channel = 0;
    double x_m = 0.0;
    double dx_m = 0.0;  ///< travel distance from the previous point, 0 for the first
    StateEstimate filtered;
    StateEstimate smoothed;
    std::optional<Detection> detection;
    std::optional<std::size_t> detection_id;  ///< index into the input detection list

    [[nodiscard]] double time_s() const { return smoothed.mean(0); }
    /// 1 / slowness; NaN when the smoothed slowness is not positive.
    [[nodiscard]] double speed_mps() const;
};

struct VehicleTrack {
    std::size_t id = 0;
    Direction direction = Direction::Outbound;
    std::vector<TrackPoint> points;  ///< in travel order
    double residual_s = 0.0;         ///< RMS of detection minus smoothed time

    [[nodiscard]] std::size_t associated_count() const;
    [[nodiscard]] std::vector<std::size_t> detection_ids() const;
};

/// Forward filter, association and smoothing along the chain from init.start
/// in the direction of travel. Tracking stops once misses span max_miss_gap_m of road and
/// is trimmed to the last associated channel. Empty when fewer than
/// min_track_channels detections were associated.
[[nodiscard]] std::optional<VehicleTrack> track_single(std::span<const Detection> detections, const Chain& chain,
                                                       const TrackInit& init, const TrackerConfig& config);

struct Segment {
    std::size_t first_channel = 0;
    std::size_t last_channel = 0;
};

struct MultiTrackResult {
    std::vector<VehicleTrack> tracks;
    std::vector<std::size_t> residue;  ///< indices of detections no track used
};

/// Tracks every vehicle in every segment and direction. Seeds are line fits
/// through detections on seed_channels consecutive chain channels; the
/// best-supported seed runs first and consumes its detections. Fragments of
/// one vehicle that line up across a short gap are joined. Throws
/// PreconditionError unless the segments partition the calibrated channels.
[[nodiscard]] MultiTrackResult track_multi(std::span<const Detection> detections, const CalibrationTable& table,
                                           std::span<const Segment> segments, const TrackerConfig& config);

} // namespace dastm::track
