#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Geometry>
#include <json.hpp>

#include "voxavoid/geometry.hpp"

namespace voxavoid {

enum class JointType { Revolute, Fixed };

struct Joint
{
    JointType type = JointType::Revolute;
    Eigen::Isometry3d origin = Eigen::Isometry3d::Identity();  // parent link frame -> joint frame
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();            // joint frame, unit
    double q_min = 0.0;
    double q_max = 0.0;
};

struct Link
{
    std::string name;
    int parent = -1;  // -1: attached to the base frame
    Joint joint;
    LinkGeometry geometry;
    double buffer = 0.02;
    std::vector<BoundingSphere> explicit_spheres;  // replaces generation when non-empty
};

struct EndEffector
{
    int link = -1;
    Eigen::Isometry3d offset = Eigen::Isometry3d::Identity();  // in the link frame
};

/// Chain of links, each moved by one revolute or fixed joint. A link's
/// parent comes before it, so forward kinematics is a single pass; the
/// default parent is the previous link.
class KinematicChain
{
public:
    KinematicChain(std::vector<Link> links, std::vector<std::pair<int, int>> acm,
                   Eigen::Isometry3d base_frame, std::vector<int> controlled_links, EndEffector ee);

    static KinematicChain from_json(const nlohmann::json& j);
    static KinematicChain load(const std::filesystem::path& path);

    int dof() const { return static_cast<int>(m_dof_link.size()); }
    int link_count() const { return static_cast<int>(m_links.size()); }
    const Link& link(int i) const { return m_links.at(static_cast<std::size_t>(i)); }
    const std::vector<Link>& links() const { return m_links; }
    int link_index(const std::string& name) const;  // throws when unknown
    /// Joint variable driving link i, or -1 for a fixed link.
    int dof_of_link(int i) const { return m_link_dof.at(static_cast<std::size_t>(i)); }
    int link_of_dof(int k) const { return m_dof_link.at(static_cast<std::size_t>(k)); }

    Eigen::VectorXd q_min() const;
    Eigen::VectorXd q_max() const;
    const Eigen::Isometry3d& base_frame() const { return m_base; }
    const EndEffector& end_effector() const { return m_ee; }
    const std::vector<int>& controlled_links() const { return m_controlled; }

    bool allowed_collision(int a, int b) const;
    const std::vector<std::pair<int, int>>& acm() const { return m_acm; }
    /// True when joint variable k moves link i.
    bool moves(int k, int link) const;

    /// World transform of every link.
    std::vector<Eigen::Isometry3d> forward_kinematics(const Eigen::VectorXd& q) const;
    Eigen::Isometry3d ee_pose(const std::vector<Eigen::Isometry3d>& transforms) const;

    /// Column k = axis_k x (point - origin_k) for joints moving `link`, zero
    /// otherwise. `transforms` must come from forward_kinematics.
    Eigen::Matrix3Xd position_jacobian(const std::vector<Eigen::Isometry3d>& transforms, int link,
                                       const Eigen::Vector3d& point_world) const;
    Eigen::Matrix3Xd position_jacobian(const Eigen::VectorXd& q, int link,
                                       const Eigen::Vector3d& point_world) const;
    /// Linear rows on top, angular rows below.
    Eigen::Matrix<double, 6, Eigen::Dynamic> geometric_jacobian(
        const std::vector<Eigen::Isometry3d>& transforms, int link, const Eigen::Vector3d& point_world) const;

    /// Generated spheres for every link (or its explicit list), link order.
    std::vector<BoundingSphere> bounding_spheres() const;

private:
    void check_q(const Eigen::VectorXd& q) const;

    std::vector<Link> m_links;
    std::vector<std::pair<int, int>> m_acm;  // normalized, first < second, sorted
    Eigen::Isometry3d m_base;
    std::vector<int> m_controlled;
    EndEffector m_ee;
    std::vector<int> m_link_dof;
    std::vector<int> m_dof_link;
    std::vector<std::vector<bool>> m_moves;  // [dof][link]
};

/// Links that are not controlled and are paired in the ACM with at most some
/// of the controlled links; ascending order.
std::vector<int> self_obstacle_links(const KinematicChain& chain, const std::vector<int>& controlled);

/// JSON helpers shared by the robot and scenario readers.
Eigen::Vector3d vec3_from_json(const nlohmann::json& j);
/// {"translation": [...], "rotation": [ax, ay, az, angle]}, both optional.
Eigen::Isometry3d transform_from_json(const nlohmann::json& j);
/// {"type": "box" | "cylinder" | "sphere" | "capsule", ...}
Primitive primitive_from_json(const nlohmann::json& j);

/// Rotation from an axis-angle [ax, ay, az, angle]; the axis is normalized.
Eigen::Matrix3d rotation_from_axis_angle(const nlohmann::json& j);

}  // namespace voxavoid
