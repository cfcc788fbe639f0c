#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "voxavoid/robot_model.hpp"

namespace voxavoid {

/// One priority level: task Jacobian, diagonal activation, reference task
/// velocity, and the current task values.
struct TaskLevel
{
    std::string name;
    Eigen::MatrixXd jacobian;      // m x n
    Eigen::VectorXd activation;    // diagonal of A, entries in [0, 1]
    Eigen::VectorXd xdot_ref;      // m
    Eigen::VectorXd values;        // m

    int rows() const { return static_cast<int>(jacobian.rows()); }
    int cols() const { return static_cast<int>(jacobian.cols()); }
    /// Throws std::invalid_argument on inconsistent sizes or activations
    /// outside [0, 1].
    void validate() const;

    /// Rows of `other` appended below this level's rows.
    static TaskLevel stack(std::string name, const TaskLevel& a, const TaskLevel& b);
};

/// 1 at or below x_m, 0 at or above x_m + b, cosine blend in between.
double activation_sigmoid(double x, double x_m, double b);

struct AvoidanceConfig
{
    double kappa = 2.0;           // 1/s
    double x_star_offset = 0.04;  // x* = x_M + offset
};

/// Per-sphere memory of the last well-defined push direction, used when a
/// sphere center coincides with its nearest site.
struct DirectionMemory
{
    std::vector<std::optional<Eigen::Vector3d>> last;
    std::vector<bool> held;   // last direction already reused once
    int degenerate_events = 0;
};

/// A control sphere resolved in the world for this cycle.
struct PlacedSphere
{
    int link = -1;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();  // world
    double radius = 0.0;
    double buffer = 0.02;
};

/// One scalar distance row per sphere. `sites[i]` is the world position of
/// sphere i's nearest occupied voxel center, or nullopt for none; such rows
/// are inert (A = 0, zero row, zero reference, value -1).
TaskLevel distance_task_level(std::string name, const KinematicChain& chain,
                              const std::vector<Eigen::Isometry3d>& transforms,
                              const std::vector<PlacedSphere>& spheres,
                              const std::vector<std::optional<Eigen::Vector3d>>& sites,
                              const AvoidanceConfig& cfg, DirectionMemory& memory);

struct CollisionLevels
{
    TaskLevel obstacle;
    TaskLevel self;
};

CollisionLevels update_collision_tasks(const KinematicChain& chain,
                                       const std::vector<Eigen::Isometry3d>& transforms,
                                       const std::vector<PlacedSphere>& spheres,
                                       const std::vector<std::optional<Eigen::Vector3d>>& env_sites,
                                       const std::vector<std::optional<Eigen::Vector3d>>& self_sites,
                                       const AvoidanceConfig& cfg, DirectionMemory& env_memory,
                                       DirectionMemory& self_memory);

struct JointLimitConfig
{
    double margin = 0.05;  // rad, x_M of the limit rows
    double buffer = 0.05;  // rad
    double kappa = 2.0;    // 1/s
    double x_star() const { return margin + 2.0 * buffer; }
};

/// Rows 2j (upper limit of joint j) and 2j + 1 (lower limit).
TaskLevel joint_limit_tasks(const Eigen::VectorXd& q, const Eigen::VectorXd& q_min,
                            const Eigen::VectorXd& q_max, const JointLimitConfig& cfg);

struct PoseGains
{
    double kp = 1.0;  // 1/s
    double ko = 1.0;  // 1/s
};

/// Rotation vector of r (axis times angle, angle in [0, pi]).
Eigen::Vector3d rotation_vector(const Eigen::Matrix3d& r);

/// Six always-active rows: linear then angular end-effector velocity.
TaskLevel ee_pose_task(const KinematicChain& chain, const std::vector<Eigen::Isometry3d>& transforms,
                       const Eigen::Isometry3d& target, const PoseGains& gains);

}  // namespace voxavoid
