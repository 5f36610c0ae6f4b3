#include "dastm/core/types.hpp"

#include "dastm/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dastm {

namespace {

void check_info(const RecordInfo& info) {
    if (!(info.sample_rate_hz > 0.0) || !(info.channel_spacing_m > 0.0) || !(info.gauge_length_m > 0.0)) {
        throw DataError("record metadata must have positive sample rate, channel spacing and gauge length");
    }
    if (!std::isfinite(info.start_time)) {
        throw DataError("record start_time must be finite");
    }
}

} // namespace

ChannelMatrix::ChannelMatrix(std::size_t channels, std::size_t samples, RecordInfo info)
    : ChannelMatrix(channels, samples, info, std::vector<double>(channels * samples, 0.0)) {}

ChannelMatrix::ChannelMatrix(std::size_t channels, std::size_t samples, RecordInfo info, std::vector<double> data)
    : channels_(channels), samples_(samples), info_(info), data_(std::move(data)) {
    check_info(info_);
    if (channels_ == 0) {
        throw DataError("record must have at least one channel");
    }
    if (data_.size() != channels_ * samples_) {
        throw DataError("record data size " + std::to_string(data_.size()) + " does not match " +
                        std::to_string(channels_) + " x " + std::to_string(samples_));
    }
    check_finite();
}

std::span<const double> ChannelMatrix::channel(std::size_t k) const {
    return {data_.data() + k * samples_, samples_};
}

std::span<double> ChannelMatrix::channel(std::size_t k) {
    return {data_.data() + k * samples_, samples_};
}

std::vector<double> ChannelMatrix::channel_copy(std::size_t k) const {
    auto c = channel(k);
    return {c.begin(), c.end()};
}

void ChannelMatrix::check_finite() const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            throw DataError("non-finite strain at channel " + std::to_string(i / samples_) + ", sample " +
                            std::to_string(i % samples_));
        }
    }
}

ChannelMatrix ChannelMatrix::decimate_channels(std::size_t factor) const {
    if (factor == 0) {
        throw PreconditionError("channel decimation factor must be >= 1");
    }
    const std::size_t kept = (channels_ + factor - 1) / factor;
    std::vector<double> out;
    out.reserve(kept * samples_);
    for (std::size_t k = 0; k < channels_; k += factor) {
        auto c = channel(k);
        out.insert(out.end(), c.begin(), c.end());
    }
    RecordInfo info = info_;
    info.channel_spacing_m *= static_cast<double>(factor);
    return {kept, samples_, info, std::move(out)};
}

std::string_view to_string(Pattern p) {
    switch (p) {
    case Pattern::Bell: return "bell";
    case Pattern::Flipped: return "flipped";
    case Pattern::Spooled: return "spooled";
    }
    return "spooled";
}

Pattern parse_pattern(std::string_view s) {
    if (s == "bell") return Pattern::Bell;
    if (s == "flipped") return Pattern::Flipped;
    if (s == "spooled") return Pattern::Spooled;
    throw DataError("unknown signal pattern '" + std::string(s) + "'");
}

Pattern classify_pattern(std::optional<double> transmissibility) {
    if (!transmissibility) return Pattern::Spooled;
    if (*transmissibility > 0.0) return Pattern::Bell;
    if (*transmissibility < 0.0) return Pattern::Flipped;
    return Pattern::Spooled;
}

std::string_view to_string(Direction d) {
    return d == Direction::Outbound ? "outbound" : "inbound";
}

Direction parse_direction(std::string_view s) {
    if (s == "outbound") return Direction::Outbound;
    if (s == "inbound") return Direction::Inbound;
    throw DataError("unknown direction '" + std::string(s) + "'");
}

std::string_view to_string(Polarity p) {
    return p == Polarity::Peak ? "peak" : "valley";
}

Polarity parse_polarity(std::string_view s) {
    if (s == "peak") return Polarity::Peak;
    if (s == "valley") return Polarity::Valley;
    throw DataError("unknown polarity '" + std::string(s) + "'");
}

CalibrationTable::CalibrationTable(std::vector<ChannelCalibration> entries) : entries_(std::move(entries)) {
    normalize();
}

const ChannelCalibration* CalibrationTable::find(std::size_t channel) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), channel,
                               [](const ChannelCalibration& e, std::size_t c) { return e.channel < c; });
    if (it == entries_.end() || it->channel != channel) return nullptr;
    return &*it;
}

void CalibrationTable::set(ChannelCalibration entry) {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), entry.channel,
                               [](const ChannelCalibration& e, std::size_t c) { return e.channel < c; });
    if (it != entries_.end() && it->channel == entry.channel) {
        *it = entry;
    } else {
        entries_.insert(it, entry);
    }
    normalize();
}

void CalibrationTable::set_transmissibility(std::size_t channel, std::optional<double> t) {
    const ChannelCalibration* e = find(channel);
    if (e == nullptr) {
        throw PreconditionError("no calibration entry for channel " + std::to_string(channel));
    }
    ChannelCalibration copy = *e;
    copy.transmissibility = t;
    set(copy);
}

CalibrationTable CalibrationTable::scaled(double factor) const {
    auto out = entries_;
    for (auto& e : out) {
        if (e.transmissibility) *e.transmissibility *= factor;
    }
    return CalibrationTable(std::move(out));
}

CalibrationTable CalibrationTable::decimated(std::size_t factor) const {
    if (factor == 0) {
        throw PreconditionError("channel decimation factor must be >= 1");
    }
    std::vector<ChannelCalibration> out;
    for (const auto& e : entries_) {
        if (e.channel % factor != 0) continue;
        out.push_back(e);
        out.back().channel = e.channel / factor;
    }
    return CalibrationTable(std::move(out));
}

void CalibrationTable::normalize() {
    std::sort(entries_.begin(), entries_.end(),
              [](const ChannelCalibration& a, const ChannelCalibration& b) { return a.channel < b.channel; });
    for (std::size_t i = 1; i < entries_.size(); ++i) {
        if (entries_[i].channel == entries_[i - 1].channel) {
            throw DataError("duplicate calibration entry for channel " + std::to_string(entries_[i].channel));
        }
    }
    for (auto& e : entries_) {
        if (e.transmissibility && (*e.transmissibility == 0.0 || !std::isfinite(*e.transmissibility))) {
            e.transmissibility.reset();
        }
    }
    double t0 = std::numeric_limits<double>::infinity();
    for (const auto& e : entries_) {
        if (e.transmissibility) t0 = std::min(t0, std::abs(*e.transmissibility));
    }
    t0_ = std::isfinite(t0) ? t0 : 0.0;
}

} // namespace dastm
