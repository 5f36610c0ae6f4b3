#include "dastm/track/kalman.hpp"

#include "dastm/error.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>

namespace dastm::track {

void MotionModel::validate() const {
    if (!(sigma_tddot > 0.0) || !std::isfinite(sigma_tddot)) throw ConfigError("sigma_tddot must be positive");
    if (!(sigma_z > 0.0) || !std::isfinite(sigma_z)) throw ConfigError("sigma_z must be positive");
}

double MotionModel::measurement_variance() const {
    return innovation == InnovationForm::Variance ? sigma_z * sigma_z : sigma_z;
}

Eigen::Matrix2d MotionModel::transition(double dx) const {
    Eigen::Matrix2d a;
    a << 1.0, dx, 0.0, 1.0;
    return a;
}

Eigen::Matrix2d MotionModel::process_noise(double dx) const {
    const double dx2 = dx * dx;
    Eigen::Matrix2d q;
    q << dx2 * dx2 / 4.0, dx2 * dx / 2.0, dx2 * dx / 2.0, dx2;
    return q * (sigma_tddot * sigma_tddot);
}

StateEstimate predict(const StateEstimate& state, double dx, const MotionModel& model) {
    if (!(dx > 0.0)) throw PreconditionError("predict: channel step must be positive");
    const Eigen::Matrix2d a = model.transition(dx);
    StateEstimate out;
    out.channel = state.channel;
    out.mean = a * state.mean;
    out.cov = a * state.cov * a.transpose() + model.process_noise(dx);
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    return out;
}

double innovation_std(const StateEstimate& predicted, const MotionModel& model) {
    return std::sqrt(predicted.cov(0, 0) + model.measurement_variance());
}

std::optional<std::size_t> associate(const StateEstimate& predicted, std::span<const Detection> candidates,
                                     const MotionModel& model, double gate_sigmas) {
    if (candidates.empty()) return std::nullopt;
    std::size_t best = 0;
    double best_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double gap = std::abs(candidates[i].time_s - predicted.mean(0));
        if (gap < best_gap) {
            best_gap = gap;
            best = i;
        }
    }
    if (best_gap > gate_sigmas * innovation_std(predicted, model)) return std::nullopt;
    return best;
}

StateEstimate update(const StateEstimate& predicted, double z, const MotionModel& model) {
    const double s = predicted.cov(0, 0) + model.measurement_variance();
    if (!(s > 0.0)) throw DataError("update: innovation variance is not positive");
    const Eigen::Vector2d gain = predicted.cov.col(0) / s;
    StateEstimate out;
    out.channel = predicted.channel;
    out.mean = predicted.mean + gain * (z - predicted.mean(0));
    Eigen::Matrix2d ikc = Eigen::Matrix2d::Identity();
    ikc.col(0) -= gain;
    out.cov = ikc * predicted.cov;
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    return out;
}

std::vector<StateEstimate> rts_smooth(std::span<const StateEstimate> filtered, const MotionModel& model,
                                      std::span<const double> dxs, std::size_t* regularized) {
    if (filtered.empty()) throw PreconditionError("rts_smooth: need at least one filtered state");
    if (dxs.size() + 1 != filtered.size()) throw PreconditionError("rts_smooth: need one step per transition");
    std::size_t fixes = 0;
    std::vector<StateEstimate> out(filtered.begin(), filtered.end());
    for (std::size_t k = filtered.size() - 1; k-- > 0;) {
        const Eigen::Matrix2d a = model.transition(dxs[k]);
        const StateEstimate pred = predict(filtered[k], dxs[k], model);
        Eigen::Matrix2d p_pred = pred.cov;
        const double scale = std::max(p_pred.trace(), std::numeric_limits<double>::min());
        if (std::abs(p_pred.determinant()) <= 1e-14 * scale * scale) {
            p_pred += Eigen::Matrix2d::Identity() * (1e-12 * scale);
            ++fixes;
        }
        const Eigen::Matrix2d g = filtered[k].cov * a.transpose() * p_pred.inverse();
        out[k].mean = filtered[k].mean + g * (out[k + 1].mean - pred.mean);
        out[k].cov = filtered[k].cov + g * (out[k + 1].cov - p_pred) * g.transpose();
        out[k].cov = 0.5 * (out[k].cov + out[k].cov.transpose());
    }
    if (regularized) *regularized = fixes;
    return out;
}

} // namespace dastm::track
