#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace dastm {

/// Sampling metadata carried alongside every strain record.
struct RecordInfo {
    double sample_rate_hz = 250.0;
    double start_time = 0.0;         ///< seconds since epoch of sample 0
    double channel_spacing_m = 1.0;  ///< nominal spacing along the fiber
    double gauge_length_m = 10.0;
};

/// Strain record: K channels by N samples, stored channel-major.
///
/// Values are unitless interrogator strain. The constructor enforces the
/// record invariants (positive metadata, exact dimensions, finite values), so
/// any ChannelMatrix in hand is valid.
class ChannelMatrix {
public:
    ChannelMatrix() = default;
    ChannelMatrix(std::size_t channels, std::size_t samples, RecordInfo info);
    ChannelMatrix(std::size_t channels, std::size_t samples, RecordInfo info, std::vector<double> data);

    [[nodiscard]] std::size_t channel_count() const { return channels_; }
    [[nodiscard]] std::size_t sample_count() const { return samples_; }
    [[nodiscard]] const RecordInfo& info() const { return info_; }
    [[nodiscard]] double sample_rate_hz() const { return info_.sample_rate_hz; }
    [[nodiscard]] double duration_s() const { return static_cast<double>(samples_) / info_.sample_rate_hz; }

    [[nodiscard]] std::span<const double> channel(std::size_t k) const;
    [[nodiscard]] std::span<double> channel(std::size_t k);
    [[nodiscard]] std::vector<double> channel_copy(std::size_t k) const;
    [[nodiscard]] const std::vector<double>& data() const { return data_; }

    /// Throws DataError naming the first non-finite (channel, sample).
    void check_finite() const;

    /// Keeps every `factor`-th channel starting at channel 0; spacing scales by `factor`.
    [[nodiscard]] ChannelMatrix decimate_channels(std::size_t factor) const;

private:
    std::size_t channels_ = 0;
    std::size_t samples_ = 0;
    RecordInfo info_;
    std::vector<double> data_;
};

enum class Pattern { Bell, Flipped, Spooled };

[[nodiscard]] std::string_view to_string(Pattern p);
[[nodiscard]] Pattern parse_pattern(std::string_view s);

/// Bell for positive transmissibility, Flipped for negative, Spooled when unset.
[[nodiscard]] Pattern classify_pattern(std::optional<double> transmissibility);

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;
};

/// Per-virtual-sensor characterization.
struct ChannelCalibration {
    std::size_t channel = 0;
    double road_position_m = 0.0;
    /// Signed strain prominence per ton; empty for spooled channels.
    std::optional<double> transmissibility;
    std::optional<GeoPoint> geo;

    [[nodiscard]] Pattern pattern() const { return classify_pattern(transmissibility); }
    [[nodiscard]] bool spooled() const { return !transmissibility.has_value(); }
};

/// Ordered calibration of all channels. T0 is kept equal to the minimum
/// absolute transmissibility over coupled channels after every mutation.
class CalibrationTable {
public:
    CalibrationTable() = default;
    explicit CalibrationTable(std::vector<ChannelCalibration> entries);

    [[nodiscard]] const std::vector<ChannelCalibration>& entries() const { return entries_; }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }
    [[nodiscard]] const ChannelCalibration& operator[](std::size_t i) const { return entries_[i]; }

    /// Entry for a channel index, or nullptr.
    [[nodiscard]] const ChannelCalibration* find(std::size_t channel) const;

    /// Minimum |T_k| over coupled channels; 0 when every channel is spooled.
    [[nodiscard]] double t0() const { return t0_; }

    void set(ChannelCalibration entry);
    void set_transmissibility(std::size_t channel, std::optional<double> t);

    /// Same channels with T_k multiplied by `factor` (sign kept when factor > 0).
    [[nodiscard]] CalibrationTable scaled(double factor) const;
    /// Keeps channels whose index is a multiple of `factor`, renumbered to
    /// match ChannelMatrix::decimate_channels.
    [[nodiscard]] CalibrationTable decimated(std::size_t factor) const;

private:
    void normalize();

    std::vector<ChannelCalibration> entries_;
    double t0_ = 0.0;
};

/// Travel direction along the road: Outbound moves toward increasing road
/// position (and increasing channel index), Inbound toward decreasing.
enum class Direction { Outbound, Inbound };

[[nodiscard]] std::string_view to_string(Direction d);
[[nodiscard]] Direction parse_direction(std::string_view s);

enum class Polarity { Peak, Valley };

[[nodiscard]] std::string_view to_string(Polarity p);
[[nodiscard]] Polarity parse_polarity(std::string_view s);

/// Candidate vehicle arrival at one channel.
struct Detection {
    std::size_t channel = 0;
    double time_s = 0.0;  ///< seconds from record start, sub-sample resolution
    double prominence = 0.0;
    Polarity polarity = Polarity::Peak;
};

} // namespace dastm
