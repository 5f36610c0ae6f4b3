#pragma once

#include "dastm/core/geo.hpp"
#include "dastm/core/types.hpp"

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace dastm::calib {

/// GPS log of one calibration drive, projected onto the road centerline.
class GpsTrack {
public:
    /// Throws DataError unless there are >= 2 fixes with strictly increasing,
    /// finite times and finite coordinates.
    GpsTrack(std::vector<GpsFix> fixes, const Centerline& centerline);

    [[nodiscard]] const std::vector<GpsFix>& samples() const { return fixes_; }
    /// (time_s, road_position_m) per fix.
    [[nodiscard]] const std::vector<std::pair<double, double>>& projected() const { return projected_; }

    [[nodiscard]] double start_time() const { return projected_.front().first; }
    [[nodiscard]] double end_time() const { return projected_.back().first; }

    /// Linear interpolation of road position; empty outside the logged span.
    [[nodiscard]] std::optional<double> position_at(double time_s) const;
    /// Median absolute speed over the log.
    [[nodiscard]] double typical_speed_mps() const;

private:
    std::vector<GpsFix> fixes_;
    std::vector<std::pair<double, double>> projected_;
};

struct TapEvent {
    double das_time_s = 0.0;
    double reference_time_s = 0.0;
};

struct ClockSync {
    double offset_s = 0.0;  ///< add to DAS times to get reference times
    std::optional<double> spread_s;  ///< max - min of the per-tap offsets, with >= 2 taps
};

/// Throws PreconditionError for an empty list and DataError for non-finite times.
[[nodiscard]] ClockSync sync_clocks(std::span<const TapEvent> taps);

/// Absolute DAS times of the `count` strongest impulses on one channel,
/// at least `min_separation_s` apart, in increasing order.
[[nodiscard]] std::vector<double> locate_taps(const ChannelMatrix& das, std::size_t channel, std::size_t count,
                                              double min_separation_s = 0.5);

struct GeolocationConfig {
    double spool_tolerance_m = 5.0;  ///< per-run position disagreement that marks a channel spooled
    double floor_mad_factor = 3.0;   ///< prominence floor in units of the residual-noise MAD
    double search_window_s = 3.0;    ///< accepted distance from the predicted arrival
    double outlier_mads = 3.0;       ///< runs further than this from the median are dropped
    double prominence_half_window_m = 25.0;  ///< road extent of the prominence reference region
    std::size_t prediction_half_width = 10;  ///< channels on each side for the arrival prediction
    bool enforce_monotone = true;

    void validate() const;
};

/// Test-vehicle pass seen at one channel in one run.
struct RunPass {
    double das_time_s = 0.0;     ///< absolute DAS clock
    double prominence = 0.0;     ///< signed: negative for a valley
    double position_m = 0.0;
};

struct ChannelLocation {
    std::size_t channel = 0;
    std::optional<double> road_position_m;  ///< empty when spooled
    std::vector<std::optional<RunPass>> passes;  ///< one slot per run
    std::vector<bool> used;                     ///< runs kept after outlier rejection

    [[nodiscard]] bool spooled() const { return !road_position_m.has_value(); }
};

/// Per-channel road positions from calibration drives. Each run is a record
/// of the same channels; `offset_s` maps DAS times onto the GPS clock.
[[nodiscard]] std::vector<ChannelLocation> geolocate_channels(std::span<const ChannelMatrix> runs,
                                                              std::span<const GpsTrack> tracks, double offset_s,
                                                              const GeolocationConfig& config = {});

/// Signed T_k: mean signed prominence of the kept passes per ton. Empty for
/// spooled channels. Throws PreconditionError for a non-positive weight.
[[nodiscard]] std::vector<std::optional<double>> estimate_transmissibility(
    std::span<const ChannelLocation> locations, double test_weight_tons);

/// Transmissibility predicted at another lane from the ratio of kernel peaks.
/// A positive gauge averages the kernel over the gauge window first.
[[nodiscard]] double extrapolate_lane(double t_near, double near_offset_m, double far_offset_m, double depth_m,
                                      double gauge_length_m = 0.0);

/// Least-squares non-decreasing fit (pool adjacent violators), optional weights.
[[nodiscard]] std::vector<double> isotonic_fit(std::span<const double> values, std::span<const double> weights = {});

/// Assembles the table. Spooled channels take the road position of the next
/// coupled channel (the previous one at the fiber end).
[[nodiscard]] CalibrationTable build_calibration_table(std::span<const ChannelLocation> locations,
                                                       std::span<const std::optional<double>> transmissibility,
                                                       const Centerline* centerline = nullptr);

struct CalibrationInputs {
    std::vector<ChannelMatrix> runs;
    std::vector<std::vector<GpsFix>> gps;
    std::vector<TapEvent> taps;
    Centerline centerline;
    double test_weight_tons = 1.47;
    GeolocationConfig geolocation;
};

struct CalibrationResult {
    CalibrationTable table;
    ClockSync clock;
    std::vector<ChannelLocation> locations;
};

[[nodiscard]] CalibrationResult calibrate(const CalibrationInputs& inputs);

} // namespace dastm::calib
