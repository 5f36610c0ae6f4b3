#pragma once

#include "dastm/core/types.hpp"
#include "dastm/sim/scene.hpp"
#include "dastm/track/tracker.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace dastm::eval {

/// Ground-truth arrival of one vehicle at one channel of a (possibly decimated) record.
struct TruthArrival {
    std::size_t vehicle = 0;
    std::size_t channel = 0;
    double time_s = 0.0;
};

/// Arrivals at every coupled channel of `truth_table`, restricted to
/// [margin_s, duration_s - margin_s]. Sorted by (vehicle, channel).
[[nodiscard]] std::vector<TruthArrival> truth_arrivals(std::span<const sim::Trajectory> trajectories,
                                                       const CalibrationTable& truth_table, double duration_s,
                                                       double margin_s = 1.0);

/// One-to-one pairing per channel, greedy by increasing time distance.
struct DetectionMatch {
    std::vector<std::optional<std::size_t>> truth_to_detection;  ///< per arrival
    std::size_t matched = 0;
    std::size_t detections = 0;
    std::size_t arrivals = 0;

    [[nodiscard]] double precision() const;
    [[nodiscard]] double recall() const;
};

[[nodiscard]] DetectionMatch match_detections(std::span<const TruthArrival> arrivals,
                                              std::span<const Detection> detections, double tolerance_s = 0.5);

/// Vehicle each track follows: the one whose arrival times agree with the
/// largest share of the track's detections, if that share reaches `min_share`.
[[nodiscard]] std::vector<std::optional<std::size_t>> match_tracks(std::span<const track::VehicleTrack> tracks,
                                                                   std::span<const TruthArrival> arrivals,
                                                                   double tolerance_s = 0.5,
                                                                   double min_share = 0.5);

struct KinematicErrors {
    double position_mae_m = 0.0;
    double speed_mae_mps = 0.0;
    std::size_t points = 0;
};

/// Mean absolute position and speed error of matched tracks against their
/// trajectories, sampled every `sample_period_s` over each track's time span.
/// Track state between channels is linearly interpolated in time.
[[nodiscard]] KinematicErrors kinematic_errors(std::span<const track::VehicleTrack> tracks,
                                               std::span<const std::optional<std::size_t>> matches,
                                               std::span<const sim::Trajectory> trajectories,
                                               double sample_period_s = 1.0);

/// Percent error summary: share of |error| within `bound_pct` and the 95th
/// percentile of |error|.
struct PercentErrors {
    std::vector<double> errors_pct;
    [[nodiscard]] double share_within(double bound_pct) const;
    [[nodiscard]] double abs_percentile(double q) const;
    [[nodiscard]] double mean() const;
    /// Half-width of the 95% normal interval of individual errors (1.96 sd).
    [[nodiscard]] double interval95() const;
};

} // namespace dastm::eval
