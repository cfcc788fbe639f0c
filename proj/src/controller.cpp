#include "voxavoid/controller.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>

namespace voxavoid {

Eigen::VectorXd bell_regularizer(const Eigen::VectorXd& singular_values, const RegularizationConfig& cfg)
{
    if (!(cfg.sigma_threshold > 0)) throw std::invalid_argument("sigma_threshold must be positive");
    const double s2 = 2.0 * cfg.sigma_threshold * cfg.sigma_threshold;
    return cfg.p_lambda * (-singular_values.array().square() / s2).exp();
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double rtol)
{
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    if (s.size() > 0 && s[0] > 0) {
        const double cutoff = rtol * s[0];
        for (Eigen::Index k = 0; k < s.size(); ++k) {
            if (s[k] > cutoff) inv[k] = 1.0 / s[k];
        }
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::VectorXd solve_level(const TaskLevel& level, const Eigen::VectorXd& qdot_lower,
                            const RegularizationConfig& cfg)
{
    level.validate();
    const auto n = level.cols();
    if (qdot_lower.size() != n) throw std::invalid_argument("qdot_lower has the wrong size");
    if (!level.jacobian.allFinite() || !level.activation.allFinite() || !level.xdot_ref.allFinite() ||
        !qdot_lower.allFinite()) {
        throw std::invalid_argument("non-finite input to task level '" + level.name + "'");
    }
    const Eigen::VectorXd a2 = level.activation.array().square();
    const Eigen::MatrixXd jt_aa = level.jacobian.transpose() * a2.asDiagonal();
    const Eigen::MatrixXd jt_aa_j = jt_aa * level.jacobian;

    Eigen::MatrixXd r;
    if (!cfg.enabled) {
        r = jt_aa_j;
    } else {
        r = level.jacobian.transpose() * level.activation.asDiagonal() * level.jacobian;
        if (cfg.p_lambda > 0) {
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullV);
            const Eigen::VectorXd p = bell_regularizer(svd.singularValues(), cfg);
            r += svd.matrixV() * p.asDiagonal() * svd.matrixV().transpose();
        }
    }
    const Eigen::MatrixXd r_pinv = pseudo_inverse(r, cfg.rtol);
    return r_pinv * (jt_aa * level.xdot_ref) + qdot_lower - r_pinv * (jt_aa_j * qdot_lower);
}

Eigen::VectorXd solve_priority_stack(std::span<const TaskLevel> levels, const RegularizationConfig& cfg)
{
    if (levels.empty()) throw std::invalid_argument("empty priority stack");
    const int n = levels.front().cols();
    for (const auto& l : levels) {
        if (l.cols() != n) throw std::invalid_argument("task levels differ in joint count");
    }
    Eigen::VectorXd qdot = Eigen::VectorXd::Zero(n);
    for (auto it = levels.rbegin(); it != levels.rend(); ++it) qdot = solve_level(*it, qdot, cfg);
    return qdot;
}

Eigen::VectorXd clamp_velocity(const Eigen::VectorXd& qdot, double qdot_max)
{
    if (!(qdot_max > 0)) throw std::invalid_argument("qdot_max must be positive");
    const double peak = qdot.size() ? qdot.cwiseAbs().maxCoeff() : 0.0;
    return peak > qdot_max ? Eigen::VectorXd(qdot * (qdot_max / peak)) : qdot;
}

}  // namespace voxavoid
