#pragma once

#include "dastm/core/types.hpp"
#include "dastm/track/tracker.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace dastm::characterize {

struct Estimate {
    double value = 0.0;
    double spread = 0.0;  ///< across channels: MAD-based for medians, sample std for means
    std::size_t channels = 0;
    std::vector<double> per_channel;
};

struct WheelbaseConfig {
    double min_wheelbase_m = 1.5;
    double max_wheelbase_m = 12.0;
    double min_correlation = 0.2;  ///< R(tau_m) / R(0) below this skips the channel
    double window_pad_s = 0.3;     ///< margin around the expected axle pair
    double min_snr = 3.0;          ///< window peak over the robust noise level of its padding; 0 disables
};

/// Axle spacing from the autocorrelation of the high-passed signal around the
/// track's arrival at each feature channel it visits, times the speed there.
/// The median across usable channels is reported; empty when none is usable.
[[nodiscard]] std::optional<Estimate> estimate_wheelbase(const track::VehicleTrack& track, const ChannelMatrix& das,
                                                         std::span<const std::size_t> feature_channels,
                                                         const WheelbaseConfig& config = {});

/// Lag (seconds) of the autocorrelation maximum of `series` within
/// [min_lag_s, max_lag_s], refined by a parabola; empty when the normalized
/// peak is below `min_correlation` or the series has no energy.
[[nodiscard]] std::optional<double> autocorrelation_lag(std::span<const double> series, double sample_rate_hz,
                                                        double min_lag_s, double max_lag_s,
                                                        double min_correlation = 0.0);

/// Mean over associated, coupled channels of P_k / |T_k|. Empty when fewer
/// than `min_channels` channels qualify.
[[nodiscard]] std::optional<Estimate> estimate_weight(const track::VehicleTrack& track,
                                                      const CalibrationTable& table, std::size_t min_channels = 1);

/// Channels of `track` where a track in the opposite lane is within
/// `guard_m` of the channel when `track` arrives. Their quasi-static and
/// wheel signatures overlap, so neither can be attributed to one vehicle.
[[nodiscard]] std::vector<std::size_t> crosstalk_channels(const track::VehicleTrack& track,
                                                          std::span<const track::VehicleTrack> others,
                                                          double guard_m = 25.0);

/// Copy of `track` with the detections at `channels` removed.
[[nodiscard]] track::VehicleTrack drop_channels(const track::VehicleTrack& track,
                                                std::span<const std::size_t> channels);

/// Replaces each associated detection's prominence with the quasi-static
/// prominence over a road window of +-half_window_m around the arrival, so
/// the value no longer depends on speed. Points whose extremum cannot be
/// located keep their prominence.
[[nodiscard]] track::VehicleTrack refine_prominences(const track::VehicleTrack& track, const ChannelMatrix& das,
                                                     double half_window_m = 25.0);

struct CharacterizeConfig {
    WheelbaseConfig wheelbase;
    double prominence_half_window_m = 25.0;
    double crosstalk_guard_m = 25.0;
    std::size_t min_weight_channels = 1;

    /// Throws ConfigError.
    void validate() const;
};

struct VehicleCharacter {
    std::size_t track_id = 0;
    std::optional<Estimate> wheelbase_m;
    std::optional<Estimate> weight_tons;
};

/// Wheelbase and weight of one track. Channels shared with opposite-lane
/// tracks in `all_tracks` are skipped for both; `table` must describe the
/// track's lane.
[[nodiscard]] VehicleCharacter characterize_track(const track::VehicleTrack& track,
                                                  std::span<const track::VehicleTrack> all_tracks,
                                                  const ChannelMatrix& das, const CalibrationTable& table,
                                                  std::span<const std::size_t> feature_channels,
                                                  const CharacterizeConfig& config = {});

} // namespace dastm::characterize
