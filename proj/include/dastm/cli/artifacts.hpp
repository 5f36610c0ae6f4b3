#pragma once

#include "dastm/calib/calibration.hpp"
#include "dastm/characterize/characterize.hpp"
#include "dastm/core/geo.hpp"
#include "dastm/sim/scene.hpp"
#include "dastm/track/tracker.hpp"

#include <filesystem>
#include <vector>

// Plain-text artifacts exchanged between subcommands. Every reader throws
// DataError for missing columns or values that break the writer's invariants.
namespace dastm::cli {

/// Columns: lat, lon.
void write_centerline(const std::filesystem::path& path, const Centerline& centerline);
[[nodiscard]] Centerline read_centerline(const std::filesystem::path& path);

/// Columns: run, time_s, lat, lon. Runs are numbered from 0 without gaps.
void write_gps(const std::filesystem::path& path, const std::vector<std::vector<GpsFix>>& runs);
[[nodiscard]] std::vector<std::vector<GpsFix>> read_gps(const std::filesystem::path& path);

/// Columns: das_time_s, reference_time_s.
void write_taps(const std::filesystem::path& path, const std::vector<calib::TapEvent>& taps);
[[nodiscard]] std::vector<calib::TapEvent> read_taps(const std::filesystem::path& path);

/// Single column `column`.
void write_column(const std::filesystem::path& path, const std::string& column, const std::vector<double>& values);
[[nodiscard]] std::vector<double> read_column(const std::filesystem::path& path, const std::string& column);

/// Columns: vehicle, label, direction, lane_offset_m, weight_tons, wheelbase_m, axle_count.
void write_vehicle_truth(const std::filesystem::path& path, const std::vector<sim::VehicleTruth>& vehicles);
[[nodiscard]] std::vector<sim::VehicleTruth> read_vehicle_truth(const std::filesystem::path& path);

/// Knots per vehicle. Columns: vehicle, time_s, road_m. Vehicles must match
/// the order of `truth`.
void write_trajectories(const std::filesystem::path& path, const std::vector<sim::Trajectory>& trajectories);
[[nodiscard]] std::vector<sim::Trajectory> read_trajectories(const std::filesystem::path& path,
                                                             const std::vector<sim::VehicleTruth>& truth);

/// Columns: vehicle, channel, time_s, weight_tons, wheelbase_m.
void write_arrivals(const std::filesystem::path& path, const std::vector<sim::ArrivalTruth>& arrivals,
                    const std::vector<sim::VehicleTruth>& vehicles);

/// One row per track point. Columns: track, direction, channel, x_m, dx_m,
/// time_s, slowness, var_t, cov_t_slowness, var_slowness, filtered_time_s,
/// filtered_slowness, speed_kmh, detection, residual_s. `detection` indexes
/// the detection list the tracks were built from, -1 for a coasted point.
void write_tracks(const std::filesystem::path& path, const std::vector<track::VehicleTrack>& tracks);
[[nodiscard]] std::vector<track::VehicleTrack> read_tracks(const std::filesystem::path& path,
                                                           const std::vector<Detection>& detections);

/// Columns: track, direction, first_channel, last_channel, associated,
/// speed_kmh (median over points), weight_tons, weight_spread_tons,
/// weight_channels, wheelbase_m, wheelbase_spread_m, wheelbase_channels.
/// Missing estimates are written as nan.
void write_characterization(const std::filesystem::path& path, const std::vector<track::VehicleTrack>& tracks,
                            const std::vector<characterize::VehicleCharacter>& characters);

} // namespace dastm::cli
