#include "dastm/core/io.hpp"

#include "dastm/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace dastm::io {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, mode);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    return out;
}

std::uint32_t to_little_endian(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    }
    return v;
}

std::size_t parse_count(const std::map<std::string, std::string>& kv, const std::string& key,
                        const std::filesystem::path& path) {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError("'" + path.string() + "' lacks key '" + key + "'");
    const double v = parse_number(it->second);
    if (!(v >= 0.0) || v != std::floor(v)) throw DataError("'" + key + "' must be a non-negative integer");
    return static_cast<std::size_t>(v);
}

double parse_real(const std::map<std::string, std::string>& kv, const std::string& key,
                  const std::filesystem::path& path) {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError("'" + path.string() + "' lacks key '" + key + "'");
    return parse_number(it->second);
}

} // namespace

std::size_t TextTable::column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("table lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

bool TextTable::has_column(const std::string& name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
}

double TextTable::number(std::size_t row, const std::string& name) const {
    return parse_number(text(row, name));
}

const std::string& TextTable::text(std::size_t row, const std::string& name) const {
    const auto c = column(name);
    if (c >= rows.at(row).size()) throw DataError("row " + std::to_string(row) + " is short");
    return rows[row][c];
}

TextTable read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    TextTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        const auto s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        auto cells = split(s);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size()) {
            throw DataError("'" + path.string() + "': row has " + std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(cells));
    }
    if (!have_header) throw DataError("'" + path.string() + "' has no header row");
    return t;
}

void write_table(const std::filesystem::path& path, const TextTable& table) {
    auto out = open_out(path);
    auto write_row = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            out << cells[i];
        }
        out << '\n';
    };
    write_row(table.header);
    for (const auto& r : table.rows) write_row(r);
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, res.ptr};
}

double parse_number(const std::string& s) {
    const auto t = trim(s);
    if (t == "nan" || t == "NaN" || t == "-" || t.empty()) return std::numeric_limits<double>::quiet_NaN();
    if (t == "inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const char* first = t.data();
    if (*first == '+') ++first;
    auto res = std::from_chars(first, t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw DataError("not a number: '" + t + "'");
    }
    return v;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw DataError("'" + path.string() + "': expected key = value, got '" + s + "'");
        kv[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
    }
    return kv;
}

void write_key_values(const std::filesystem::path& path, const std::map<std::string, std::string>& kv) {
    auto out = open_out(path);
    for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

std::filesystem::path sidecar_path(const std::filesystem::path& bin_path) {
    return std::filesystem::path(bin_path.string() + ".meta");
}

void write_channel_matrix(const std::filesystem::path& bin_path, const ChannelMatrix& m) {
    auto out = open_out(bin_path, std::ios::out | std::ios::binary);
    std::vector<std::uint32_t> words(m.data().size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        const auto f = static_cast<float>(m.data()[i]);
        std::uint32_t w = 0;
        std::memcpy(&w, &f, sizeof(w));
        words[i] = to_little_endian(w);
    }
    out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
    if (!out) throw DataError("failed writing '" + bin_path.string() + "'");
    const auto& info = m.info();
    write_key_values(sidecar_path(bin_path), {
        {"sample_rate_hz", format_number(info.sample_rate_hz)},
        {"channel_count", std::to_string(m.channel_count())},
        {"sample_count", std::to_string(m.sample_count())},
        {"start_time", format_number(info.start_time)},
        {"channel_spacing_m", format_number(info.channel_spacing_m)},
        {"gauge_length_m", format_number(info.gauge_length_m)},
    });
}

ChannelMatrix read_channel_matrix(const std::filesystem::path& bin_path) {
    const auto meta = sidecar_path(bin_path);
    const auto kv = read_key_values(meta);
    RecordInfo info;
    info.sample_rate_hz = parse_real(kv, "sample_rate_hz", meta);
    info.start_time = parse_real(kv, "start_time", meta);
    info.channel_spacing_m = parse_real(kv, "channel_spacing_m", meta);
    info.gauge_length_m = parse_real(kv, "gauge_length_m", meta);
    const auto channels = parse_count(kv, "channel_count", meta);
    const auto samples = parse_count(kv, "sample_count", meta);

    std::ifstream in(bin_path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + bin_path.string() + "'");
    std::vector<std::uint32_t> words(channels * samples);
    in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
    if (in.gcount() != static_cast<std::streamsize>(words.size() * 4)) {
        throw DataError("'" + bin_path.string() + "' is shorter than " + std::to_string(channels) + " x " +
                        std::to_string(samples) + " float32 values");
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw DataError("'" + bin_path.string() + "' is longer than its sidecar declares");
    }
    std::vector<double> data(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        const std::uint32_t w = to_little_endian(words[i]);
        float f = 0.0f;
        std::memcpy(&f, &w, sizeof(f));
        data[i] = f;
    }
    return {channels, samples, info, std::move(data)};
}

void write_calibration(const std::filesystem::path& path, const CalibrationTable& table) {
    TextTable t;
    t.header = {"index", "road_position_m", "transmissibility", "pattern", "lat", "lon"};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& e : table.entries()) {
        t.rows.push_back({std::to_string(e.channel), format_number(e.road_position_m),
                          format_number(e.transmissibility.value_or(nan)), std::string(to_string(e.pattern())),
                          format_number(e.geo ? e.geo->lat : nan), format_number(e.geo ? e.geo->lon : nan)});
    }
    write_table(path, t);
}

CalibrationTable read_calibration(const std::filesystem::path& path) {
    const auto t = read_table(path);
    std::vector<ChannelCalibration> entries;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        ChannelCalibration e;
        const double idx = t.number(r, "index");
        if (!(idx >= 0.0) || idx != std::floor(idx)) throw DataError("calibration index must be a non-negative integer");
        e.channel = static_cast<std::size_t>(idx);
        e.road_position_m = t.number(r, "road_position_m");
        const double tk = t.number(r, "transmissibility");
        const Pattern p = parse_pattern(t.text(r, "pattern"));
        if (std::isfinite(tk) && tk != 0.0) e.transmissibility = tk;
        if (classify_pattern(e.transmissibility) != p) {
            throw DataError("calibration row for channel " + std::to_string(e.channel) +
                            ": pattern disagrees with transmissibility sign");
        }
        const double lat = t.number(r, "lat");
        const double lon = t.number(r, "lon");
        if (std::isfinite(lat) && std::isfinite(lon)) e.geo = GeoPoint{lat, lon};
        entries.push_back(e);
    }
    return CalibrationTable(std::move(entries));
}

void write_detections(const std::filesystem::path& path, const std::vector<Detection>& detections) {
    TextTable t;
    t.header = {"channel", "time_s", "prominence", "polarity"};
    for (const auto& d : detections) {
        t.rows.push_back({std::to_string(d.channel), format_number(d.time_s), format_number(d.prominence),
                          std::string(to_string(d.polarity))});
    }
    write_table(path, t);
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
    const auto t = read_table(path);
    std::vector<Detection> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        Detection d;
        d.channel = static_cast<std::size_t>(t.number(r, "channel"));
        d.time_s = t.number(r, "time_s");
        d.prominence = t.number(r, "prominence");
        d.polarity = parse_polarity(t.text(r, "polarity"));
        if (!(d.prominence > 0.0) || !std::isfinite(d.time_s)) {
            throw DataError("detection row " + std::to_string(r) + " has invalid time or prominence");
        }
        out.push_back(d);
    }
    return out;
}

} // namespace dastm::io
