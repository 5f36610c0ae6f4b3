#include "dastm/detect/prominence.hpp"

#include "dastm/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

namespace dastm::detect {

namespace {

// Range-minimum queries in O(1) after O(n log n) setup.
class SparseMin {
public:
    explicit SparseMin(const std::vector<double>& x) {
        const std::size_t n = x.size();
        levels_.push_back(x);
        for (std::size_t len = 2; len <= n; len *= 2) {
            const auto& prev = levels_.back();
            std::vector<double> next(n - len + 1);
            for (std::size_t i = 0; i + len <= n; ++i) next[i] = std::min(prev[i], prev[i + len / 2]);
            levels_.push_back(std::move(next));
        }
    }

    // Minimum over the closed range [lo, hi].
    [[nodiscard]] double min(std::size_t lo, std::size_t hi) const {
        const std::size_t len = hi - lo + 1;
        const auto level = static_cast<std::size_t>(std::bit_width(len) - 1);
        return std::min(levels_[level][lo], levels_[level][hi + 1 - (std::size_t{1} << level)]);
    }

private:
    std::vector<std::vector<double>> levels_;
};

// Maxima with plateau handling: index is the middle of a flat top whose
// neighbours on both sides are strictly lower.
std::vector<std::size_t> local_maxima(const std::vector<double>& x) {
    std::vector<std::size_t> out;
    const std::size_t n = x.size();
    std::size_t i = 1;
    while (i + 1 < n) {
        if (x[i - 1] < x[i]) {
            std::size_t ahead = i + 1;
            while (ahead + 1 < n && x[ahead] == x[i]) ++ahead;
            if (x[ahead] < x[i]) {
                out.push_back((i + ahead - 1) / 2);
                i = ahead;
                continue;
            }
        }
        ++i;
    }
    return out;
}

std::vector<double> oriented(std::span<const double> series, Polarity polarity) {
    std::vector<double> x(series.begin(), series.end());
    if (polarity == Polarity::Valley) {
        for (auto& v : x) v = -v;
    }
    return x;
}

} // namespace

double parabolic_offset(std::span<const double> series, std::size_t index) {
    if (index == 0 || index + 1 >= series.size()) return 0.0;
    const double a = series[index - 1];
    const double b = series[index];
    const double c = series[index + 1];
    const double denom = a - 2.0 * b + c;
    if (denom == 0.0) return 0.0;
    return std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
}

std::vector<Extremum> prominence_scan(std::span<const double> series, double sample_rate_hz, double window_s,
                                      Polarity polarity, ProminenceMode mode) {
    if (!(sample_rate_hz > 0.0)) throw PreconditionError("prominence_scan: sample rate must be positive");
    if (mode == ProminenceMode::Windowed && !(window_s > 0.0)) {
        throw PreconditionError("prominence_scan: window must be positive");
    }
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (!std::isfinite(series[i])) {
            throw DataError("prominence_scan: non-finite input at index " + std::to_string(i));
        }
    }
    const auto x = oriented(series, polarity);
    const std::size_t n = x.size();
    const auto peaks = local_maxima(x);
    if (peaks.empty()) return {};

    const std::size_t half = mode == ProminenceMode::Global
                                 ? n
                                 : static_cast<std::size_t>(std::llround(window_s * sample_rate_hz / 2.0));

    // Nearest strictly greater sample on each side, by monotonic stack.
    constexpr auto none = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> prev_greater(n, none), next_greater(n, none);
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < n; ++i) {
        while (!stack.empty() && x[stack.back()] <= x[i]) stack.pop_back();
        if (!stack.empty()) prev_greater[i] = stack.back();
        stack.push_back(i);
    }
    stack.clear();
    for (std::size_t i = n; i-- > 0;) {
        while (!stack.empty() && x[stack.back()] <= x[i]) stack.pop_back();
        if (!stack.empty()) next_greater[i] = stack.back();
        stack.push_back(i);
    }

    const SparseMin rmq(x);
    std::vector<Extremum> out;
    out.reserve(peaks.size());
    for (std::size_t p : peaks) {
        const std::size_t w_lo = p >= half ? p - half : 0;
        const std::size_t w_hi = std::min(n - 1, p + half);
        const std::size_t lo = prev_greater[p] == none ? w_lo : std::max(w_lo, prev_greater[p] + 1);
        const std::size_t hi = next_greater[p] == none ? w_hi : std::min(w_hi, next_greater[p] - 1);
        const double base = std::max(rmq.min(lo, p), rmq.min(p, hi));
        const double prominence = x[p] - base;
        if (!(prominence > 0.0)) continue;
        const double t = (static_cast<double>(p) + parabolic_offset(x, p)) / sample_rate_hz;
        out.push_back({p, t, prominence});
    }
    return out;
}

double prominence_at(std::span<const double> series, std::size_t index, std::size_t half_window, Polarity polarity) {
    if (index >= series.size()) throw PreconditionError("prominence_at: index outside the series");
    const double sign = polarity == Polarity::Peak ? 1.0 : -1.0;
    const double top = sign * series[index];
    double left_min = top;
    for (std::size_t j = index, steps = 0; j-- > 0 && steps < half_window; ++steps) {
        const double v = sign * series[j];
        if (v > top) break;
        left_min = std::min(left_min, v);
    }
    double right_min = top;
    for (std::size_t j = index + 1, steps = 0; j < series.size() && steps < half_window; ++j, ++steps) {
        const double v = sign * series[j];
        if (v > top) break;
        right_min = std::min(right_min, v);
    }
    return top - std::max(left_min, right_min);
}

} // namespace dastm::detect
