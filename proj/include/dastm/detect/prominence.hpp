#pragma once

#include "dastm/core/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace dastm::detect {

/// Reference region for the prominence computation: a window of `window_s`
/// centred on the extremum, or the whole series.
enum class ProminenceMode { Windowed, Global };

struct Extremum {
    std::size_t index = 0;  ///< sample index of the extremum (plateau midpoint)
    double time_s = 0.0;    ///< refined time relative to the series start
    double prominence = 0.0;
};

/// Local maxima (Peak) or minima (Valley) with their topographic prominence.
/// The reference region on each side ends at the first strictly higher sample
/// or at the window edge; prominence is the height above the higher of the
/// two side minima. Times are refined by a parabola through three samples,
/// clamped to half a sample. Endpoints are never extrema.
[[nodiscard]] std::vector<Extremum> prominence_scan(std::span<const double> series, double sample_rate_hz,
                                                    double window_s, Polarity polarity,
                                                    ProminenceMode mode = ProminenceMode::Windowed);

/// Prominence of the sample at `index` treated as an extremum, with the
/// reference region limited to `half_window` samples on each side.
[[nodiscard]] double prominence_at(std::span<const double> series, std::size_t index, std::size_t half_window,
                                   Polarity polarity);

/// Sub-sample offset in [-0.5, 0.5] of the parabola vertex through
/// series[index-1..index+1]; zero at the ends and on flat tops.
[[nodiscard]] double parabolic_offset(std::span<const double> series, std::size_t index);

} // namespace dastm::detect
