#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dastm {

/// Filter bank separating the quasi-static (< 1 Hz) and wheel-impulse (>= 3 Hz)
/// components of a strain series. Both cutoffs are applied forward-backward so
/// arrival times are not shifted by group delay.

inline constexpr double kQuasiStaticCutoffHz = 1.0;
inline constexpr double kWheelCutoffHz = 3.0;

/// One second-order section, a0 normalized to 1 (direct form II transposed).
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;

    [[nodiscard]] double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

enum class FilterResponse { Lowpass, Highpass };

/// Digital Butterworth design as a cascade of sections (bilinear, prewarped at cutoff).
[[nodiscard]] std::vector<Biquad> butterworth(int order, double cutoff_hz, double sample_rate_hz,
                                              FilterResponse response);

/// Forward-backward application with odd-extension padding of `pad` samples
/// (clamped to n-1) and steady-state initial conditions. Linear in the input.
[[nodiscard]] std::vector<double> filter_zero_phase(std::span<const double> series, std::span<const Biquad> sections,
                                                    std::size_t pad);

/// Minimum series length accepted by a filter with the given cutoff.
[[nodiscard]] std::size_t min_filter_length(double sample_rate_hz, double cutoff_hz);

/// Zero-phase 1 Hz low-pass. Requires length >= 4 * fs / 1 Hz.
[[nodiscard]] std::vector<double> lowpass_quasistatic(std::span<const double> series, double sample_rate_hz);

/// Zero-phase 3 Hz high-pass. Requires length >= 4 * fs / 3 Hz.
[[nodiscard]] std::vector<double> highpass_wheel(std::span<const double> series, double sample_rate_hz);

/// Degree-1 LOESS with tricube weights over a `span_s` window centred on each
/// sample. Windows are truncated at the series ends. Throws DataError naming
/// the first non-finite sample.
[[nodiscard]] std::vector<double> loess_smooth(std::span<const double> series, double sample_rate_hz,
                                               double span_s = 1.0);

} // namespace dastm
