#include "voxavoid/tasks.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace voxavoid {

void TaskLevel::validate() const
{
    const auto m = jacobian.rows();
    if (activation.size() != m || xdot_ref.size() != m || values.size() != m) {
        throw std::invalid_argument("task level '" + name + "' has inconsistent row counts");
    }
    if (m > 0 && ((activation.array() < 0.0).any() || (activation.array() > 1.0).any())) {
        throw std::invalid_argument("task level '" + name + "' has activations outside [0, 1]");
    }
}

TaskLevel TaskLevel::stack(std::string name, const TaskLevel& a, const TaskLevel& b)
{
    if (a.cols() != b.cols()) throw std::invalid_argument("stacked levels differ in joint count");
    TaskLevel out;
    out.name = std::move(name);
    out.jacobian.resize(a.rows() + b.rows(), a.cols());
    out.jacobian << a.jacobian, b.jacobian;
    out.activation.resize(a.rows() + b.rows());
    out.activation << a.activation, b.activation;
    out.xdot_ref.resize(a.rows() + b.rows());
    out.xdot_ref << a.xdot_ref, b.xdot_ref;
    out.values.resize(a.rows() + b.rows());
    out.values << a.values, b.values;
    return out;
}

double activation_sigmoid(double x, double x_m, double b)
{
    if (!(b > 0)) throw std::invalid_argument("activation buffer must be positive");
    if (x <= x_m) return 1.0;
    if (x >= x_m + b) return 0.0;
    return 0.5 * (std::cos((x - x_m) * std::numbers::pi / b) + 1.0);
}

TaskLevel distance_task_level(std::string name, const KinematicChain& chain,
                              const std::vector<Eigen::Isometry3d>& transforms,
                              const std::vector<PlacedSphere>& spheres,
                              const std::vector<std::optional<Eigen::Vector3d>>& sites,
                              const AvoidanceConfig& cfg, DirectionMemory& memory)
{
    if (sites.size() != spheres.size()) throw std::invalid_argument("one site per sphere required");
    const int m = static_cast<int>(spheres.size());
    memory.last.resize(spheres.size());
    memory.held.resize(spheres.size(), false);

    TaskLevel level;
    level.name = std::move(name);
    level.jacobian = Eigen::MatrixXd::Zero(m, chain.dof());
    level.activation = Eigen::VectorXd::Zero(m);
    level.xdot_ref = Eigen::VectorXd::Zero(m);
    level.values = Eigen::VectorXd::Constant(m, -1.0);

    for (int i = 0; i < m; ++i) {
        if (!sites[i]) continue;
        const PlacedSphere& s = spheres[i];
        const Eigen::Vector3d delta = *sites[i] - s.center;
        const double x = delta.norm();
        level.values[i] = x;
        level.activation[i] = activation_sigmoid(x, s.radius, s.buffer);
        level.xdot_ref[i] = cfg.kappa * (s.radius + cfg.x_star_offset - x);

        std::optional<Eigen::Vector3d> dir;
        if (x > 1e-12) {
            dir = delta / x;
            memory.last[i] = dir;
            memory.held[i] = false;
        } else {
            ++memory.degenerate_events;
            if (memory.last[i] && !memory.held[i]) {
                dir = memory.last[i];
                memory.held[i] = true;
            } else {
                level.activation[i] = 1.0;
            }
        }
        if (dir) {
            level.jacobian.row(i) = -dir->transpose() * chain.position_jacobian(transforms, s.link, s.center);
        }
    }
    return level;
}

CollisionLevels update_collision_tasks(const KinematicChain& chain,
                                       const std::vector<Eigen::Isometry3d>& transforms,
                                       const std::vector<PlacedSphere>& spheres,
                                       const std::vector<std::optional<Eigen::Vector3d>>& env_sites,
                                       const std::vector<std::optional<Eigen::Vector3d>>& self_sites,
                                       const AvoidanceConfig& cfg, DirectionMemory& env_memory,
                                       DirectionMemory& self_memory)
{
    return {distance_task_level("obstacle", chain, transforms, spheres, env_sites, cfg, env_memory),
            distance_task_level("self", chain, transforms, spheres, self_sites, cfg, self_memory)};
}

TaskLevel joint_limit_tasks(const Eigen::VectorXd& q, const Eigen::VectorXd& q_min,
                            const Eigen::VectorXd& q_max, const JointLimitConfig& cfg)
{
    const auto n = q.size();
    if (q_min.size() != n || q_max.size() != n) throw std::invalid_argument("joint limit sizes differ");
    if (((q_max - q_min).array() <= 0.0).any()) throw std::invalid_argument("joint limits need q_min < q_max");

    TaskLevel level;
    level.name = "joint_limits";
    level.jacobian = Eigen::MatrixXd::Zero(2 * n, n);
    level.activation.resize(2 * n);
    level.xdot_ref.resize(2 * n);
    level.values.resize(2 * n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double upper = q_max[j] - q[j];
        const double lower = q[j] - q_min[j];
        level.jacobian(2 * j, j) = -1.0;
        level.jacobian(2 * j + 1, j) = 1.0;
        level.values[2 * j] = upper;
        level.values[2 * j + 1] = lower;
        level.activation[2 * j] = activation_sigmoid(upper, cfg.margin, cfg.buffer);
        level.activation[2 * j + 1] = activation_sigmoid(lower, cfg.margin, cfg.buffer);
        level.xdot_ref[2 * j] = cfg.kappa * (cfg.x_star() - upper);
        level.xdot_ref[2 * j + 1] = cfg.kappa * (cfg.x_star() - lower);
    }
    return level;
}

Eigen::Vector3d rotation_vector(const Eigen::Matrix3d& r)
{
    const Eigen::AngleAxisd aa(r);
    return aa.angle() * aa.axis();
}

TaskLevel ee_pose_task(const KinematicChain& chain, const std::vector<Eigen::Isometry3d>& transforms,
                       const Eigen::Isometry3d& target, const PoseGains& gains)
{
    const Eigen::Isometry3d pose = chain.ee_pose(transforms);
    TaskLevel level;
    level.name = "ee_pose";
    level.jacobian = chain.geometric_jacobian(transforms, chain.end_effector().link, pose.translation());
    level.activation = Eigen::VectorXd::Ones(6);
    level.values.resize(6);
    level.values.head<3>() = target.translation() - pose.translation();
    level.values.tail<3>() = rotation_vector(target.linear() * pose.linear().transpose());
    level.xdot_ref.resize(6);
    level.xdot_ref.head<3>() = gains.kp * level.values.head<3>();
    level.xdot_ref.tail<3>() = gains.ko * level.values.tail<3>();
    return level;
}

}  // namespace voxavoid
