#pragma once

#include "dastm/core/types.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dastm::io {

/// Header plus string cells of a comma-delimited text table.
struct TextTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws DataError when absent.
    [[nodiscard]] std::size_t column(const std::string& name) const;
    [[nodiscard]] bool has_column(const std::string& name) const;
    [[nodiscard]] double number(std::size_t row, const std::string& name) const;
    [[nodiscard]] const std::string& text(std::size_t row, const std::string& name) const;
};

/// Reads a comma-delimited table with a header row. Blank lines and lines
/// starting with '#' are skipped.
[[nodiscard]] TextTable read_table(const std::filesystem::path& path);
void write_table(const std::filesystem::path& path, const TextTable& table);

/// Shortest round-trippable decimal form; "nan" for NaN.
[[nodiscard]] std::string format_number(double v);
[[nodiscard]] double parse_number(const std::string& s);

/// Key-value sidecar ("key = value" per line).
[[nodiscard]] std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);
void write_key_values(const std::filesystem::path& path, const std::map<std::string, std::string>& kv);

/// Sidecar path for a binary record: "<bin>.meta".
[[nodiscard]] std::filesystem::path sidecar_path(const std::filesystem::path& bin_path);

/// Binary little-endian float32, channel-major, plus the metadata sidecar.
void write_channel_matrix(const std::filesystem::path& bin_path, const ChannelMatrix& m);
[[nodiscard]] ChannelMatrix read_channel_matrix(const std::filesystem::path& bin_path);

/// Columns: index, road_position_m, transmissibility, pattern, lat, lon.
void write_calibration(const std::filesystem::path& path, const CalibrationTable& table);
[[nodiscard]] CalibrationTable read_calibration(const std::filesystem::path& path);

/// Columns: channel, time_s, prominence, polarity.
void write_detections(const std::filesystem::path& path, const std::vector<Detection>& detections);
[[nodiscard]] std::vector<Detection> read_detections(const std::filesystem::path& path);

} // namespace dastm::io
