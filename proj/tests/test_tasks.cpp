#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "voxavoid/controller.hpp"
#include "voxavoid/tasks.hpp"

using namespace voxavoid;

namespace {

constexpr double kPi = std::numbers::pi;
const char* kRobot = VOXAVOID_DATA_DIR "/robots/tiago_like.json";

Eigen::VectorXd random_q(const KinematicChain& chain, std::mt19937_64& rng)
{
    Eigen::VectorXd q(chain.dof());
    for (int k = 0; k < chain.dof(); ++k) {
        q[k] = std::uniform_real_distribution<double>(chain.q_min()[k], chain.q_max()[k])(rng);
    }
    return q;
}

std::vector<PlacedSphere> place(const std::vector<Eigen::Isometry3d>& t, const std::vector<BoundingSphere>& spheres)
{
    std::vector<PlacedSphere> out;
    for (const auto& s : spheres) out.push_back({s.link, t[s.link] * s.center, s.radius, s.buffer});
    return out;
}

}  // namespace

TEST_CASE("activation sigmoid boundary values")
{
    CHECK(activation_sigmoid(0.1, 0.1, 0.02) == 1.0);
    CHECK(activation_sigmoid(0.12, 0.1, 0.02) == 0.0);
    CHECK(activation_sigmoid(0.11, 0.1, 0.02) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(activation_sigmoid(-5.0, 0.1, 0.02) == 1.0);
    CHECK(activation_sigmoid(7.0, 0.1, 0.02) == 0.0);
    CHECK_THROWS_AS(activation_sigmoid(0.1, 0.1, 0.0), std::invalid_argument);
}

TEST_CASE("activation sigmoid is monotone and Lipschitz with pi / 2b")
{
    const double xm = 0.07, b = 0.02;
    const double lip = kPi / (2 * b);
    double prev = activation_sigmoid(0.0, xm, b);
    const double h = 1e-5;
    for (double x = h; x < 0.15; x += h) {
        const double a = activation_sigmoid(x, xm, b);
        CHECK(a <= prev);
        CHECK(std::abs(a - prev) <= lip * h * (1 + 1e-9) + 1e-15);
        prev = a;
    }
}

TEST_CASE("collision row for an axis-aligned obstacle")
{
    const auto chain = KinematicChain::load(kRobot);
    const Eigen::VectorXd q = Eigen::VectorXd::Zero(chain.dof());
    const auto t = chain.forward_kinematics(q);
    const int link = chain.link_index("arm_5");
    const Eigen::Vector3d c = t[link].translation();
    const std::vector<PlacedSphere> spheres{{link, c, 0.07, 0.02}};
    const std::vector<std::optional<Eigen::Vector3d>> sites{c + Eigen::Vector3d(0, 0, 0.3)};
    AvoidanceConfig cfg;
    DirectionMemory mem;
    const auto level = distance_task_level("obstacle", chain, t, spheres, sites, cfg, mem);
    CHECK(level.values[0] == doctest::Approx(0.3));
    CHECK(level.activation[0] == 0.0);
    CHECK(level.xdot_ref[0] == doctest::Approx(cfg.kappa * (0.07 + cfg.x_star_offset - 0.3)));
    const Eigen::RowVectorXd expect = -chain.position_jacobian(t, link, c).row(2);
    CHECK((level.jacobian.row(0) - expect).norm() < 1e-14);
}

TEST_CASE("empty environment leaves the level inert")
{
    const auto chain = KinematicChain::load(kRobot);
    const auto t = chain.forward_kinematics(Eigen::VectorXd::Zero(chain.dof()));
    const auto spheres = place(t, chain.bounding_spheres());
    const std::vector<std::optional<Eigen::Vector3d>> none(spheres.size());
    DirectionMemory mem;
    const auto level = distance_task_level("obstacle", chain, t, spheres, none, {}, mem);
    CHECK(level.activation.isZero());
    CHECK(level.jacobian.isZero());
    CHECK(level.xdot_ref.isZero());
    const Eigen::VectorXd lower = Eigen::VectorXd::LinSpaced(chain.dof(), -1, 1);
    const Eigen::VectorXd out = solve_level(level, lower, {});
    CHECK(out == lower);
}

TEST_CASE("avoidance rows match central differences of the distance")
{
    const auto chain = KinematicChain::load(kRobot);
    std::vector<BoundingSphere> spheres;
    for (const auto& s : chain.bounding_spheres()) {
        if (chain.dof_of_link(s.link) >= 0) spheres.push_back(s);
    }
    std::mt19937_64 rng(8);
    std::normal_distribution<double> noise(0.0, 0.15);
    const double eps = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::VectorXd q = random_q(chain, rng);
        const auto& s = spheres[rng() % spheres.size()];
        const auto t = chain.forward_kinematics(q);
        const Eigen::Vector3d c = t[s.link] * s.center;
        const Eigen::Vector3d obstacle = c + Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
        DirectionMemory mem;
        const auto level = distance_task_level("obstacle", chain, t, {{s.link, c, s.radius, s.buffer}},
                                               {obstacle}, {}, mem);
        CHECK(level.jacobian.row(0).norm() > 0);
        for (int k = 0; k < chain.dof(); ++k) {
            Eigen::VectorXd qp = q, qm = q;
            qp[k] += eps;
            qm[k] -= eps;
            const double xp = (obstacle - chain.forward_kinematics(qp)[s.link] * s.center).norm();
            const double xm = (obstacle - chain.forward_kinematics(qm)[s.link] * s.center).norm();
            CHECK(std::abs((xp - xm) / (2 * eps) - level.jacobian(0, k)) <= 1e-5);
        }
    }
}

TEST_CASE("obstacle and self levels share one code path")
{
    const auto chain = KinematicChain::load(kRobot);
    const auto t = chain.forward_kinematics(Eigen::VectorXd::Constant(chain.dof(), 0.2));
    const auto spheres = place(t, chain.bounding_spheres());
    std::vector<std::optional<Eigen::Vector3d>> sites;
    for (std::size_t i = 0; i < spheres.size(); ++i) {
        if (i % 3) sites.push_back(spheres[i].center + Eigen::Vector3d(0.05, -0.02 * (i % 5), 0.1));
        else sites.emplace_back();
    }
    DirectionMemory m1, m2;
    const auto levels = update_collision_tasks(chain, t, spheres, sites, sites, {}, m1, m2);
    CHECK(levels.obstacle.jacobian == levels.self.jacobian);
    CHECK(levels.obstacle.activation == levels.self.activation);
    CHECK(levels.obstacle.xdot_ref == levels.self.xdot_ref);
    CHECK(levels.obstacle.values == levels.self.values);
    for (int i = 0; i < levels.obstacle.rows(); ++i) {
        if (sites[i]) {
            CHECK(levels.obstacle.activation[i] ==
                  activation_sigmoid(levels.obstacle.values[i], spheres[i].radius, spheres[i].buffer));
        }
    }
}

TEST_CASE("coincident center and site reuse the last direction once")
{
    const auto chain = KinematicChain::load(kRobot);
    const auto t = chain.forward_kinematics(Eigen::VectorXd::Zero(chain.dof()));
    const int link = chain.link_index("arm_7");
    const Eigen::Vector3d c = t[link].translation();
    const std::vector<PlacedSphere> spheres{{link, c, 0.06, 0.02}};
    DirectionMemory mem;
    const auto first = distance_task_level("o", chain, t, spheres, {c + Eigen::Vector3d(0.1, 0, 0)}, {}, mem);
    const auto held = distance_task_level("o", chain, t, spheres, {c}, {}, mem);
    CHECK(held.jacobian == first.jacobian);
    CHECK(held.activation[0] == 1.0);
    const auto zero = distance_task_level("o", chain, t, spheres, {c}, {}, mem);
    CHECK(zero.jacobian.isZero());
    CHECK(zero.activation[0] == 1.0);
    CHECK(mem.degenerate_events == 2);

    // without any history the row is zero right away
    DirectionMemory fresh;
    const auto cold = distance_task_level("o", chain, t, spheres, {c}, {}, fresh);
    CHECK(cold.jacobian.isZero());
    CHECK(cold.activation[0] == 1.0);
}

TEST_CASE("joint limit rows")
{
    const Eigen::Vector2d lo(-1.0, -2.0), hi(1.0, 2.0);
    JointLimitConfig cfg;
    const auto mid = joint_limit_tasks(Eigen::Vector2d(0.0, 0.1), lo, hi, cfg);
    CHECK(mid.rows() == 4);
    CHECK(mid.activation.isZero());

    const auto at_margin = joint_limit_tasks(Eigen::Vector2d(1.0 - cfg.margin, 0.0), lo, hi, cfg);
    CHECK(at_margin.activation[0] == 1.0);
    CHECK(at_margin.activation[1] == 0.0);

    // beyond the upper limit: fully active, pushes q_0 down
    const auto beyond = joint_limit_tasks(Eigen::Vector2d(1.2, 0.0), lo, hi, cfg);
    CHECK(beyond.activation[0] == 1.0);
    CHECK(beyond.values[0] == doctest::Approx(-0.2));
    CHECK(beyond.xdot_ref[0] == doctest::Approx(cfg.kappa * (cfg.x_star() + 0.2)));
    const Eigen::VectorXd qdot = solve_level(beyond, Eigen::VectorXd::Zero(2), {});
    CHECK(qdot[0] < 0);
    CHECK(qdot[0] == doctest::Approx(-cfg.kappa * (cfg.x_star() + 0.2)).epsilon(1e-3));

    const auto lower = joint_limit_tasks(Eigen::Vector2d(0.0, -2.01), lo, hi, cfg);
    CHECK(lower.activation[3] == 1.0);
    CHECK(solve_level(lower, Eigen::VectorXd::Zero(2), {})[1] > 0);

    CHECK_THROWS_AS(joint_limit_tasks(Eigen::Vector2d::Zero(), hi, lo, cfg), std::invalid_argument);
}

TEST_CASE("end-effector pose task references")
{
    const auto chain = KinematicChain::load(kRobot);
    const auto t = chain.forward_kinematics(Eigen::VectorXd::Constant(chain.dof(), 0.3));
    const Eigen::Isometry3d pose = chain.ee_pose(t);

    const auto same = ee_pose_task(chain, t, pose, {});
    CHECK(same.xdot_ref.norm() < 1e-12);
    CHECK(same.activation == Eigen::VectorXd::Ones(6));

    Eigen::Isometry3d up = pose;
    up.translation().z() += 0.1;
    const auto lift = ee_pose_task(chain, t, up, {1.0, 1.0});
    Eigen::VectorXd expect(6);
    expect << 0, 0, 0.1, 0, 0, 0;
    CHECK((lift.xdot_ref - expect).norm() < 1e-12);

    Eigen::Isometry3d turned = pose;
    turned.linear() = Eigen::AngleAxisd(kPi / 2, Eigen::Vector3d::UnitZ()) * pose.linear();
    const auto turn = ee_pose_task(chain, t, turned, {1.0, 1.0});
    expect << 0, 0, 0, 0, 0, kPi / 2;
    CHECK((turn.xdot_ref - expect).norm() < 1e-12);

    // the Jacobian is the geometric Jacobian at the tool point
    const auto ref = chain.geometric_jacobian(t, chain.end_effector().link, pose.translation());
    CHECK(same.jacobian == Eigen::MatrixXd(ref));
}
