#include "dastm/core/filters.hpp"

#include "dastm/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace dastm {

namespace {

constexpr int kQuasiStaticOrder = 2;
constexpr int kWheelOrder = 4;

// Sections applied in place with steady-state initial conditions for the first sample.
void run_cascade(std::vector<double>& x, std::span<const Biquad> sections) {
    if (x.empty()) return;
    for (const Biquad& s : sections) {
        const double x0 = x.front();
        const double y0 = s.dc_gain() * x0;
        double z2 = s.b2 * x0 - s.a2 * y0;
        double z1 = s.b1 * x0 - s.a1 * y0 + z2;
        for (double& v : x) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
}

void require_length(std::span<const double> series, double fs, double cutoff, const char* name) {
    if (!(fs > 0.0)) {
        throw PreconditionError(std::string(name) + ": sample rate must be positive");
    }
    const std::size_t need = min_filter_length(fs, cutoff);
    if (series.size() < need) {
        throw PreconditionError(std::string(name) + ": series has " + std::to_string(series.size()) +
                                " samples, requires at least " + std::to_string(need));
    }
}

} // namespace

std::vector<Biquad> butterworth(int order, double cutoff_hz, double sample_rate_hz, FilterResponse response) {
    if (order < 1 || !(cutoff_hz > 0.0) || !(cutoff_hz < sample_rate_hz / 2.0)) {
        throw PreconditionError("butterworth: need order >= 1 and 0 < cutoff < Nyquist");
    }
    std::vector<Biquad> out;
    const double w0 = 2.0 * std::numbers::pi * cutoff_hz / sample_rate_hz;
    const double cw = std::cos(w0);
    const double sw = std::sin(w0);
    for (int k = 0; k < order / 2; ++k) {
        const double q = 1.0 / (2.0 * std::cos(std::numbers::pi * (2.0 * k + 1.0) / (2.0 * order)));
        const double alpha = sw / (2.0 * q);
        const double a0 = 1.0 + alpha;
        Biquad s;
        if (response == FilterResponse::Lowpass) {
            s.b0 = (1.0 - cw) / 2.0 / a0;
            s.b1 = (1.0 - cw) / a0;
            s.b2 = s.b0;
        } else {
            s.b0 = (1.0 + cw) / 2.0 / a0;
            s.b1 = -(1.0 + cw) / a0;
            s.b2 = s.b0;
        }
        s.a1 = -2.0 * cw / a0;
        s.a2 = (1.0 - alpha) / a0;
        out.push_back(s);
    }
    if (order % 2 == 1) {
        const double kk = std::tan(w0 / 2.0);
        Biquad s;
        s.a1 = (kk - 1.0) / (kk + 1.0);
        if (response == FilterResponse::Lowpass) {
            s.b0 = kk / (1.0 + kk);
            s.b1 = s.b0;
        } else {
            s.b0 = 1.0 / (1.0 + kk);
            s.b1 = -s.b0;
        }
        out.push_back(s);
    }
    return out;
}

std::vector<double> filter_zero_phase(std::span<const double> series, std::span<const Biquad> sections,
                                      std::size_t pad) {
    const std::size_t n = series.size();
    if (n == 0) return {};
    pad = std::min(pad, n - 1);
    std::vector<double> x;
    x.reserve(n + 2 * pad);
    const double first = series.front();
    const double last = series.back();
    for (std::size_t i = pad; i >= 1; --i) x.push_back(2.0 * first - series[i]);
    x.insert(x.end(), series.begin(), series.end());
    for (std::size_t i = 1; i <= pad; ++i) x.push_back(2.0 * last - series[n - 1 - i]);

    run_cascade(x, sections);
    std::reverse(x.begin(), x.end());
    run_cascade(x, sections);
    std::reverse(x.begin(), x.end());
    return {x.begin() + static_cast<std::ptrdiff_t>(pad), x.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

std::size_t min_filter_length(double sample_rate_hz, double cutoff_hz) {
    return static_cast<std::size_t>(std::ceil(4.0 * sample_rate_hz / cutoff_hz));
}

std::vector<double> lowpass_quasistatic(std::span<const double> series, double sample_rate_hz) {
    require_length(series, sample_rate_hz, kQuasiStaticCutoffHz, "lowpass_quasistatic");
    const auto sections = butterworth(kQuasiStaticOrder, kQuasiStaticCutoffHz, sample_rate_hz, FilterResponse::Lowpass);
    const auto pad = static_cast<std::size_t>(std::ceil(3.0 * sample_rate_hz / kQuasiStaticCutoffHz));
    return filter_zero_phase(series, sections, pad);
}

std::vector<double> highpass_wheel(std::span<const double> series, double sample_rate_hz) {
    require_length(series, sample_rate_hz, kWheelCutoffHz, "highpass_wheel");
    const auto sections = butterworth(kWheelOrder, kWheelCutoffHz, sample_rate_hz, FilterResponse::Highpass);
    const auto pad = static_cast<std::size_t>(std::ceil(3.0 * sample_rate_hz / kWheelCutoffHz));
    return filter_zero_phase(series, sections, pad);
}

std::vector<double> loess_smooth(std::span<const double> series, double sample_rate_hz, double span_s) {
    if (!(sample_rate_hz > 0.0) || !(span_s > 2.0 / sample_rate_hz)) {
        throw PreconditionError("loess_smooth: span must exceed two sample intervals");
    }
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (!std::isfinite(series[i])) {
            throw DataError("loess_smooth: non-finite input at index " + std::to_string(i));
        }
    }
    const std::size_t n = series.size();
    const auto half = static_cast<std::ptrdiff_t>(std::max(1.0, std::round(span_s * sample_rate_hz / 2.0)));
    const double scale = static_cast<double>(half + 1);

    std::vector<double> weight(static_cast<std::size_t>(2 * half + 1));
    for (std::ptrdiff_t j = -half; j <= half; ++j) {
        const double u = std::abs(static_cast<double>(j)) / scale;
        const double c = 1.0 - u * u * u;
        weight[static_cast<std::size_t>(j + half)] = c * c * c;
    }
    double wsum = 0.0;
    for (double w : weight) wsum += w;

    std::vector<double> out(n);
    const auto sn = static_cast<std::ptrdiff_t>(n);
    for (std::ptrdiff_t i = 0; i < sn; ++i) {
        const std::ptrdiff_t lo = i - half;
        const std::ptrdiff_t hi = i + half;
        if (lo >= 0 && hi < sn) {
            // Symmetric full window: the local slope term vanishes at the centre.
            double acc = 0.0;
            const double* x = series.data() + lo;
            for (std::size_t j = 0; j < weight.size(); ++j) acc += weight[j] * x[j];
            out[static_cast<std::size_t>(i)] = acc / wsum;
            continue;
        }
        const std::ptrdiff_t a = std::max<std::ptrdiff_t>(0, lo);
        const std::ptrdiff_t b = std::min<std::ptrdiff_t>(sn - 1, hi);
        double sw = 0.0, sx = 0.0, sy = 0.0;
        for (std::ptrdiff_t j = a; j <= b; ++j) {
            const double w = weight[static_cast<std::size_t>(j - i + half)];
            const double dx = static_cast<double>(j - i);
            sw += w;
            sx += w * dx;
            sy += w * series[static_cast<std::size_t>(j)];
        }
        const double mx = sx / sw;
        const double my = sy / sw;
        double sxx = 0.0, sxy = 0.0;
        for (std::ptrdiff_t j = a; j <= b; ++j) {
            const double w = weight[static_cast<std::size_t>(j - i + half)];
            const double dx = static_cast<double>(j - i) - mx;
            sxx += w * dx * dx;
            sxy += w * dx * (series[static_cast<std::size_t>(j)] - my);
        }
        out[static_cast<std::size_t>(i)] = sxx > 0.0 ? my - (sxy / sxx) * mx : my;
    }
    return out;
}

} // namespace dastm
