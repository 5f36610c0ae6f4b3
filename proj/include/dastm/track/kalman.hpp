#pragma once

#include "dastm/core/types.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace dastm::track {

/// Gaussian belief over [arrival time t (s), slowness dt/dx (s/m)] at one channel.
struct StateEstimate {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    std::size_t channel = 0;
};

/// How the measurement term enters the innovation variance: as sigma_z^2
/// (dimensionally consistent) or as sigma_z itself.
enum class InnovationForm { Variance, LiteralStd };

/// Constant-slowness chain: the slowness derivative is white noise with
/// standard deviation sigma_tddot per metre of travel.
struct MotionModel {
    double sigma_tddot = 0.005;  ///< s/m^2
    double sigma_z = 0.05;       ///< s
    InnovationForm innovation = InnovationForm::Variance;

    /// Throws ConfigError.
    void validate() const;
    [[nodiscard]] double measurement_variance() const;
    [[nodiscard]] Eigen::Matrix2d transition(double dx) const;
    [[nodiscard]] Eigen::Matrix2d process_noise(double dx) const;
};

/// mean <- A mean, cov <- A cov A' + Q(dx). Throws PreconditionError for dx <= 0.
[[nodiscard]] StateEstimate predict(const StateEstimate& state, double dx, const MotionModel& model);

/// sqrt(C P C' + R) of a predicted state.
[[nodiscard]] double innovation_std(const StateEstimate& predicted, const MotionModel& model);

/// Index of the candidate nearest the predicted arrival time, or empty when
/// there are none or the nearest lies outside gate_sigmas innovation stds.
[[nodiscard]] std::optional<std::size_t> associate(const StateEstimate& predicted,
                                                   std::span<const Detection> candidates, const MotionModel& model,
                                                   double gate_sigmas = 3.0);

/// Measurement update with an observed arrival time. Throws DataError for a
/// non-positive innovation variance.
[[nodiscard]] StateEstimate update(const StateEstimate& predicted, double z, const MotionModel& model);

/// Backward smoothing pass. `dxs[k]` is the step from filtered[k] to
/// filtered[k+1]. Singular predicted covariances are inverted after adding a
/// small diagonal; the number of such steps is written to `regularized`.
[[nodiscard]] std::vector<StateEstimate> rts_smooth(std::span<const StateEstimate> filtered, const MotionModel& model,
                                                    std::span<const double> dxs, std::size_t* regularized = nullptr);

} // namespace dastm::track
