#pragma once

#include <span>

#include <Eigen/Core>

#include "voxavoid/tasks.hpp"

namespace voxavoid {

struct RegularizationConfig
{
    /// false: plain activation-weighted least squares, min |A (xdot_ref - J qdot)|^2
    bool enabled = true;
    double p_lambda = 0.1;         // peak penalty; 0 turns the penalty term off
    double sigma_threshold = 0.05;
    double rtol = 1e-8;            // pseudo-inverse cutoff relative to the largest singular value
};

/// p_i = p_lambda * exp(-sigma_i^2 / (2 sigma_threshold^2))
Eigen::VectorXd bell_regularizer(const Eigen::VectorXd& singular_values, const RegularizationConfig& cfg);

/// Moore-Penrose pseudo-inverse, singular values below rtol * sigma_max dropped.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double rtol);

/// qdot = R+ J^T A A xdot_ref + (I - R+ J^T A A J) qdot_lower with
/// R = J^T A J + V P V^T, V and sigma from the SVD of J^T A J.
Eigen::VectorXd solve_level(const TaskLevel& level, const Eigen::VectorXd& qdot_lower,
                            const RegularizationConfig& cfg);

/// `levels` highest priority first; folded from the lowest level upward
/// starting at qdot = 0.
Eigen::VectorXd solve_priority_stack(std::span<const TaskLevel> levels, const RegularizationConfig& cfg);

/// Uniform scaling so that every |qdot_j| <= qdot_max.
Eigen::VectorXd clamp_velocity(const Eigen::VectorXd& qdot, double qdot_max);

}  // namespace voxavoid
