#include "voxavoid/robot_model.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace voxavoid {

using nlohmann::json;

Eigen::Vector3d vec3_from_json(const json& j)
{
    if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-vector, got " + j.dump());
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::Isometry3d transform_from_json(const json& j)
{
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    if (j.contains("translation")) t.translation() = vec3_from_json(j["translation"]);
    if (j.contains("rotation")) t.linear() = rotation_from_axis_angle(j["rotation"]);
    return t;
}

Primitive primitive_from_json(const json& j)
{
    const std::string type = j.at("type").get<std::string>();
    Primitive p;
    if (type == "box") {
        Box b;
        b.center = vec3_from_json(j.at("center"));
        if (j.contains("rotation")) b.rotation = rotation_from_axis_angle(j["rotation"]);
        b.half_extents = vec3_from_json(j.at("half_extents"));
        p = b;
    } else if (type == "cylinder") {
        Cylinder c;
        c.base = vec3_from_json(j.at("base"));
        c.axis = vec3_from_json(j.at("axis")).normalized();
        c.radius = j.at("radius").get<double>();
        c.length = j.at("length").get<double>();
        p = c;
    } else if (type == "sphere") {
        p = Sphere{vec3_from_json(j.at("center")), j.at("radius").get<double>()};
    } else if (type == "capsule") {
        p = Capsule{vec3_from_json(j.at("p0")), vec3_from_json(j.at("p1")), j.at("radius").get<double>()};
    } else {
        throw std::invalid_argument("unknown primitive type '" + type + "'");
    }
    validate(p);
    return p;
}

Eigen::Matrix3d rotation_from_axis_angle(const json& j)
{
    if (!j.is_array() || j.size() != 4) throw std::invalid_argument("rotation must be [ax, ay, az, angle]");
    const Eigen::Vector3d axis(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
    const double angle = j[3].get<double>();
    if (angle == 0.0) return Eigen::Matrix3d::Identity();
    if (axis.norm() < 1e-12) throw std::invalid_argument("rotation axis must be non-zero");
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

KinematicChain::KinematicChain(std::vector<Link> links, std::vector<std::pair<int, int>> acm,
                               Eigen::Isometry3d base_frame, std::vector<int> controlled_links,
                               EndEffector ee)
    : m_links(std::move(links)), m_base(base_frame), m_controlled(std::move(controlled_links)), m_ee(ee)
{
    const int n_links = link_count();
    if (n_links == 0) throw std::invalid_argument("chain has no links");
    for (int i = 0; i < n_links; ++i) {
        const Link& l = m_links[i];
        if (l.parent >= i || l.parent < -1) {
            throw std::invalid_argument("link '" + l.name + "' must come after its parent");
        }
        if (l.joint.type == JointType::Revolute) {
            if (!(l.joint.q_min < l.joint.q_max)) {
                throw std::invalid_argument("joint of link '" + l.name + "' needs q_min < q_max");
            }
            if (std::abs(l.joint.axis.norm() - 1.0) > 1e-9) {
                throw std::invalid_argument("joint axis of link '" + l.name + "' must be unit length");
            }
            m_link_dof.push_back(dof());
            m_dof_link.push_back(i);
        } else {
            m_link_dof.push_back(-1);
        }
        if (!(l.buffer > 0)) throw std::invalid_argument("sphere buffer must be positive");
    }

    for (auto& [a, b] : acm) {
        if (a < 0 || b < 0 || a >= n_links || b >= n_links || a == b) {
            throw std::invalid_argument("invalid ACM pair");
        }
        if (a > b) std::swap(a, b);
    }
    std::sort(acm.begin(), acm.end());
    acm.erase(std::unique(acm.begin(), acm.end()), acm.end());
    m_acm = std::move(acm);

    for (int c : m_controlled) {
        if (c < 0 || c >= n_links) throw std::invalid_argument("invalid controlled link");
    }
    if (m_ee.link < 0 || m_ee.link >= n_links) throw std::invalid_argument("invalid end-effector link");

    m_moves.assign(static_cast<std::size_t>(dof()), std::vector<bool>(static_cast<std::size_t>(n_links), false));
    for (int i = 0; i < n_links; ++i) {
        for (int a = i; a >= 0; a = m_links[a].parent) {
            if (m_link_dof[a] >= 0) m_moves[m_link_dof[a]][i] = true;
        }
    }
}

KinematicChain KinematicChain::from_json(const json& j)
{
    std::vector<Link> links;
    auto index_of = [&](const std::string& name) {
        for (std::size_t i = 0; i < links.size(); ++i) {
            if (links[i].name == name) return static_cast<int>(i);
        }
        throw std::invalid_argument("unknown link '" + name + "'");
    };

    for (const auto& jl : j.at("links")) {
        Link l;
        l.name = jl.at("name").get<std::string>();
        for (const auto& other : links) {
            if (other.name == l.name) throw std::invalid_argument("duplicate link name '" + l.name + "'");
        }
        if (!jl.contains("parent")) {
            l.parent = static_cast<int>(links.size()) - 1;
        } else if (jl["parent"].is_null()) {
            l.parent = -1;
        } else {
            l.parent = index_of(jl["parent"].get<std::string>());
        }
        const json& jj = jl.at("joint");
        const std::string type = jj.value("type", "revolute");
        if (type == "revolute") {
            l.joint.type = JointType::Revolute;
            const Eigen::Vector3d axis = vec3_from_json(jj.at("axis"));
            if (axis.norm() < 1e-12) throw std::invalid_argument("joint axis must be non-zero");
            l.joint.axis = axis.normalized();
            const auto& lim = jj.at("limits");
            l.joint.q_min = lim.at(0).get<double>();
            l.joint.q_max = lim.at(1).get<double>();
        } else if (type == "fixed") {
            l.joint.type = JointType::Fixed;
        } else {
            throw std::invalid_argument("unknown joint type '" + type + "'");
        }
        l.joint.origin = transform_from_json(jj);
        for (const auto& jp : jl.value("geometry", json::array())) l.geometry.primitives.push_back(primitive_from_json(jp));
        if (l.geometry.empty()) throw std::invalid_argument("link '" + l.name + "' has no geometry");
        l.buffer = jl.value("buffer", 0.02);
        for (const auto& js : jl.value("spheres", json::array())) {
            l.explicit_spheres.push_back(
                {static_cast<int>(links.size()), vec3_from_json(js.at("center")), js.at("radius").get<double>(), l.buffer});
        }
        links.push_back(std::move(l));
    }

    std::vector<std::pair<int, int>> acm;
    for (const auto& pair : j.value("acm", json::array())) {
        acm.emplace_back(index_of(pair.at(0).get<std::string>()), index_of(pair.at(1).get<std::string>()));
    }
    std::vector<int> controlled;
    for (const auto& name : j.value("controlled_links", json::array())) {
        controlled.push_back(index_of(name.get<std::string>()));
    }
    EndEffector ee;
    const json& je = j.at("end_effector");
    ee.link = index_of(je.at("link").get<std::string>());
    ee.offset = transform_from_json(je);
    const Eigen::Isometry3d base = j.contains("base_frame") ? transform_from_json(j["base_frame"]) : Eigen::Isometry3d::Identity();
    return KinematicChain(std::move(links), std::move(acm), base, std::move(controlled), ee);
}

KinematicChain KinematicChain::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open robot file " + path.string());
    return from_json(json::parse(in));
}

int KinematicChain::link_index(const std::string& name) const
{
    for (int i = 0; i < link_count(); ++i) {
        if (m_links[i].name == name) return i;
    }
    throw std::invalid_argument("unknown link '" + name + "'");
}

Eigen::VectorXd KinematicChain::q_min() const
{
    Eigen::VectorXd v(dof());
    for (int k = 0; k < dof(); ++k) v[k] = m_links[m_dof_link[k]].joint.q_min;
    return v;
}

Eigen::VectorXd KinematicChain::q_max() const
{
    Eigen::VectorXd v(dof());
    for (int k = 0; k < dof(); ++k) v[k] = m_links[m_dof_link[k]].joint.q_max;
    return v;
}

bool KinematicChain::allowed_collision(int a, int b) const
{
    if (a > b) std::swap(a, b);
    return std::binary_search(m_acm.begin(), m_acm.end(), std::make_pair(a, b));
}

bool KinematicChain::moves(int k, int link) const
{
    return m_moves.at(static_cast<std::size_t>(k)).at(static_cast<std::size_t>(link));
}

void KinematicChain::check_q(const Eigen::VectorXd& q) const
{
    if (q.size() != dof()) throw std::invalid_argument("configuration has the wrong number of joints");
}

std::vector<Eigen::Isometry3d> KinematicChain::forward_kinematics(const Eigen::VectorXd& q) const
{
    check_q(q);
    std::vector<Eigen::Isometry3d> t(m_links.size());
    for (std::size_t i = 0; i < m_links.size(); ++i) {
        const Link& l = m_links[i];
        const Eigen::Isometry3d& parent = l.parent < 0 ? m_base : t[static_cast<std::size_t>(l.parent)];
        t[i] = parent * l.joint.origin;
        if (m_link_dof[i] >= 0) t[i].rotate(Eigen::AngleAxisd(q[m_link_dof[i]], l.joint.axis));
    }
    return t;
}

Eigen::Isometry3d KinematicChain::ee_pose(const std::vector<Eigen::Isometry3d>& transforms) const
{
    return transforms.at(static_cast<std::size_t>(m_ee.link)) * m_ee.offset;
}

Eigen::Matrix3Xd KinematicChain::position_jacobian(const std::vector<Eigen::Isometry3d>& transforms, int link,
                                                   const Eigen::Vector3d& point_world) const
{
    if (link < 0 || link >= link_count()) throw std::out_of_range("invalid link index");
    Eigen::Matrix3Xd jac = Eigen::Matrix3Xd::Zero(3, dof());
    for (int k = 0; k < dof(); ++k) {
        if (!m_moves[k][link]) continue;
        const Eigen::Isometry3d& tk = transforms[static_cast<std::size_t>(m_dof_link[k])];
        const Eigen::Vector3d axis = tk.linear() * m_links[m_dof_link[k]].joint.axis;
        jac.col(k) = axis.cross(point_world - tk.translation());
    }
    return jac;
}

Eigen::Matrix3Xd KinematicChain::position_jacobian(const Eigen::VectorXd& q, int link,
                                                   const Eigen::Vector3d& point_world) const
{
    return position_jacobian(forward_kinematics(q), link, point_world);
}

Eigen::Matrix<double, 6, Eigen::Dynamic> KinematicChain::geometric_jacobian(
    const std::vector<Eigen::Isometry3d>& transforms, int link, const Eigen::Vector3d& point_world) const
{
    Eigen::Matrix<double, 6, Eigen::Dynamic> jac(6, dof());
    jac.topRows<3>() = position_jacobian(transforms, link, point_world);
    jac.bottomRows<3>().setZero();
    for (int k = 0; k < dof(); ++k) {
        if (!m_moves[k][link]) continue;
        const Eigen::Isometry3d& tk = transforms[static_cast<std::size_t>(m_dof_link[k])];
        jac.block<3, 1>(3, k) = tk.linear() * m_links[m_dof_link[k]].joint.axis;
    }
    return jac;
}

std::vector<BoundingSphere> KinematicChain::bounding_spheres() const
{
    std::vector<BoundingSphere> out;
    for (int i = 0; i < link_count(); ++i) {
        const Link& l = m_links[i];
        if (!l.explicit_spheres.empty()) {
            out.insert(out.end(), l.explicit_spheres.begin(), l.explicit_spheres.end());
            continue;
        }
        const auto spheres = generate_bounding_spheres(compute_obb(l.geometry), l.buffer, i);
        out.insert(out.end(), spheres.begin(), spheres.end());
    }
    return out;
}

std::vector<int> self_obstacle_links(const KinematicChain& chain, const std::vector<int>& controlled)
{
    std::vector<int> out;
    for (int l = 0; l < chain.link_count(); ++l) {
        if (std::find(controlled.begin(), controlled.end(), l) != controlled.end()) continue;
        const bool exempt = !controlled.empty() && std::all_of(controlled.begin(), controlled.end(), [&](int c) {
            return chain.allowed_collision(l, c);
        });
        if (!exempt) out.push_back(l);
    }
    return out;
}

}  // namespace voxavoid
