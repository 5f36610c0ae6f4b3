#pragma once

// Posterior mean of [t, slowness] given a Gaussian prior and one arrival-time
// observation, by summing prior x likelihood over a dense grid.

#include <Eigen/Dense>

#include <cmath>

namespace oracle {

inline Eigen::Vector2d grid_posterior_mean(const Eigen::Vector2d& prior_mean, const Eigen::Matrix2d& prior_cov,
                                           double z, double sigma_z, int half_points = 400, double span_sigmas = 9.0) {
    const Eigen::Matrix2d inv = prior_cov.inverse();
    const double s0 = std::sqrt(prior_cov(0, 0));
    const double s1 = std::sqrt(prior_cov(1, 1));
    const double h0 = span_sigmas * s0 / half_points;
    const double h1 = span_sigmas * s1 / half_points;
    double w_sum = 0.0, t_sum = 0.0, s_sum = 0.0;
    for (int i = -half_points; i <= half_points; ++i) {
        for (int j = -half_points; j <= half_points; ++j) {
            const Eigen::Vector2d d(i * h0, j * h1);
            const double t = prior_mean(0) + d(0);
            const double prior = std::exp(-0.5 * d.dot(inv * d));
            const double r = (z - t) / sigma_z;
            const double w = prior * std::exp(-0.5 * r * r);
            w_sum += w;
            t_sum += w * t;
            s_sum += w * (prior_mean(1) + d(1));
        }
    }
    return {t_sum / w_sum, s_sum / w_sum};
}

} // namespace oracle
