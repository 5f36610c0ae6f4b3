#include "dastm/detect/detector.hpp"

#include "dastm/core/filters.hpp"
#include "dastm/core/parallel.hpp"
#include "dastm/error.hpp"

#include <algorithm>
#include <cmath>

namespace dastm::detect {

void DetectorConfig::validate() const {
    if (!(r0 > 0.0)) throw ConfigError("detector r0 must be positive");
    if (!(window_s > 0.0)) throw ConfigError("detector window_s must be positive");
    if (!(span_s > 0.0)) throw ConfigError("detector span_s must be positive");
    if (merge_s < 0.0) throw ConfigError("detector merge_s must be non-negative");
}

ChannelDetections per_sensor_detect(std::span<const double> series, double sample_rate_hz,
                                    const ChannelCalibration& calib, const CalibrationTable& table,
                                    const DetectorConfig& config) {
    config.validate();
    ChannelDetections result;
    if (calib.spooled()) {
        result.skipped_spooled = true;
        return result;
    }
    if (!(table.t0() > 0.0)) throw PreconditionError("per_sensor_detect: calibration table has no coupled channel");
    const double t = *calib.transmissibility;
    const Polarity polarity = t > 0.0 ? Polarity::Peak : Polarity::Valley;
    const double threshold = config.r0 * std::abs(t) / table.t0();

    const auto smooth = loess_smooth(series, sample_rate_hz, config.span_s);
    auto events = prominence_scan(smooth, sample_rate_hz, config.window_s, polarity, config.mode);
    std::erase_if(events, [&](const Extremum& e) { return e.prominence < threshold; });

    // Greedy merge: strongest first, drop anything within merge_s of a kept event.
    std::vector<std::size_t> order(events.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return events[a].prominence > events[b].prominence; });
    std::vector<const Extremum*> kept;
    for (std::size_t i : order) {
        const auto& e = events[i];
        const bool close = std::any_of(kept.begin(), kept.end(), [&](const Extremum* k) {
            return std::abs(k->time_s - e.time_s) < config.merge_s;
        });
        if (!close) kept.push_back(&e);
    }
    std::sort(kept.begin(), kept.end(), [](const Extremum* a, const Extremum* b) { return a->time_s < b->time_s; });
    result.detections.reserve(kept.size());
    for (const auto* e : kept) result.detections.push_back({calib.channel, e->time_s, e->prominence, polarity});
    return result;
}

DetectionSet detect_all(const ChannelMatrix& das, const CalibrationTable& table, const DetectorConfig& config) {
    config.validate();
    std::vector<const ChannelCalibration*> work;
    for (const auto& e : table.entries()) {
        if (e.channel < das.channel_count()) work.push_back(&e);
    }
    std::vector<ChannelDetections> per(work.size());
    parallel_for(work.size(), [&](std::size_t i) {
        per[i] = per_sensor_detect(das.channel(work[i]->channel), das.sample_rate_hz(), *work[i], table, config);
    });
    DetectionSet out;
    for (std::size_t i = 0; i < work.size(); ++i) {
        if (per[i].skipped_spooled) out.skipped_channels.push_back(work[i]->channel);
        out.detections.insert(out.detections.end(), per[i].detections.begin(), per[i].detections.end());
    }
    return out;
}

} // namespace dastm::detect
