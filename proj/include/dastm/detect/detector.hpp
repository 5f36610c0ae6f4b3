#pragma once

#include "dastm/core/types.hpp"
#include "dastm/detect/prominence.hpp"

#include <span>
#include <vector>

namespace dastm::detect {

struct DetectorConfig {
    double r0 = 4.0;        ///< prominence threshold at the minimum-transmissibility channel
    double window_s = 1.0;  ///< prominence reference window
    double span_s = 1.0;    ///< LOESS span
    double merge_s = 0.2;   ///< events closer than this on one channel collapse to the most prominent
    ProminenceMode mode = ProminenceMode::Windowed;

    /// Throws ConfigError.
    void validate() const;
};

struct ChannelDetections {
    std::vector<Detection> detections;
    bool skipped_spooled = false;
};

/// Events of one channel whose prominence reaches r0 * |T_k| / T0, searched
/// as peaks on bell channels and valleys on flipped ones.
[[nodiscard]] ChannelDetections per_sensor_detect(std::span<const double> series, double sample_rate_hz,
                                                  const ChannelCalibration& calib, const CalibrationTable& table,
                                                  const DetectorConfig& config);

struct DetectionSet {
    std::vector<Detection> detections;  ///< sorted by (channel, time)
    std::vector<std::size_t> skipped_channels;
};

/// Runs per_sensor_detect on every calibrated channel present in the record.
[[nodiscard]] DetectionSet detect_all(const ChannelMatrix& das, const CalibrationTable& table,
                                      const DetectorConfig& config);

} // namespace dastm::detect
