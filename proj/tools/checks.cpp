#include "checks.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "voxavoid/controller.hpp"
#include "voxavoid/edt.hpp"
#include "voxavoid/sim.hpp"
#include "voxavoid/tasks.hpp"
#include "voxavoid/ui_server.hpp"
#include "voxavoid/ws_client.hpp"

namespace voxavoid::checks {

namespace {

using clock = std::chrono::steady_clock;
using nlohmann::json;

double seconds_since(clock::time_point t0)
{
    return std::chrono::duration<double>(clock::now() - t0).count();
}

std::string fmt(double v, int precision = 3)
{
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

OccupancySnapshot random_grid(GridDims dims, double density, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution occ(density);
    OccupancySnapshot s{dims, 1.0, Eigen::Vector3d::Zero(), std::vector<std::uint8_t>(dims.count(), 0)};
    for (auto& c : s.occupied) c = occ(rng) ? 1 : 0;
    return s;
}

Eigen::VectorXd random_q(const KinematicChain& chain, std::mt19937_64& rng)
{
    Eigen::VectorXd q(chain.dof());
    for (int k = 0; k < chain.dof(); ++k) {
        q[k] = std::uniform_real_distribution<double>(chain.q_min()[k], chain.q_max()[k])(rng);
    }
    return q;
}

Outcome edt_exactness(const std::filesystem::path&)
{
    const auto t0 = clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> side(4, 32);
    std::uniform_real_distribution<double> density(0.01, 0.50);
    const int grids = 200;
    int mismatches = 0;
    int runs = 0;
    for (int g = 0; g < grids; ++g) {
        GridDims dims{side(rng), side(rng), side(rng)};
        double d = density(rng);
        if (g == 0) dims = {4, 4, 4}, d = 0.01;
        if (g == 1) dims = {32, 32, 32}, d = 0.50;
        if (g == 2) dims = {32, 32, 32}, d = 0.01;
        const auto snap = random_grid(dims, d, 5000 + g);
        const auto truth = squared_distances(brute_force_edt(snap));
        for (int m1 : {1, 2, 4}) {
            for (int m2 : {1, 2, 4}) {
                for (int m3 : {1, 2, 4}) {
                    ++runs;
                    if (squared_distances(pba_edt(snap, {{m1, m2, m3}, 0})) != truth) ++mismatches;
                }
            }
        }
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs < 60.0, std::to_string(grids) + " grids x 27 band configs, " +
                                                std::to_string(mismatches) + " mismatches in " +
                                                std::to_string(runs) + " runs, " + fmt(secs) + " s (limit 60 s)"};
}

Outcome edt_determinism(const std::filesystem::path&)
{
    int differing = 0;
    for (int g = 0; g < 10; ++g) {
        const GridDims dims{20 + 3 * g, 17 + 2 * g, 13 + g};
        const auto snap = random_grid(dims, 0.005 + 0.03 * g, 700 + g);
        const auto ref = pba_edt(snap, {BandConfig::for_workers(1), 1});
        for (int w : {2, 4, 8}) {
            for (const BandConfig& bands : {BandConfig::for_workers(1), BandConfig::for_workers(w)}) {
                const auto df = pba_edt(snap, {bands, w});
                if (!std::equal(df.packed_sites().begin(), df.packed_sites().end(), ref.packed_sites().begin(),
                                ref.packed_sites().end())) {
                    ++differing;
                }
            }
        }
    }
    return {differing == 0, "10 grids, workers 1/2/4/8, " + std::to_string(differing) + " differing outputs"};
}

double best_edt_ms(GridDims dims, double density, int workers, int repeat)
{
    const auto snap = random_grid(dims, density, 31);
    const EdtOptions opt{BandConfig::for_workers(workers), workers};
    pba_edt(snap, opt);  // warm-up
    std::vector<double> ms;
    for (int r = 0; r < repeat; ++r) {
        const auto t0 = clock::now();
        const auto df = pba_edt(snap, opt);
        ms.push_back(1e3 * seconds_since(t0));
    }
    return *std::min_element(ms.begin(), ms.end());  // least disturbed by other load
}

Outcome edt_scaling(const std::filesystem::path&)
{
    const int workers = 4;
    const double small = best_edt_ms({96, 96, 128}, 0.01, workers, 7);
    const double large = best_edt_ms({192, 192, 128}, 0.01, workers, 7);
    const double doubled = best_edt_ms({192, 96, 128}, 0.01, workers, 7);
    const double ratio = large / small;
    const bool pass = ratio <= 2.8 && large < 300.0;
    return {pass, "192x192x128 / 96x96x128 = " + fmt(large) + " / " + fmt(small) + " ms, ratio " + fmt(ratio) +
                      " (limit 2.8; 4x the voxels); 192x192x128 " + fmt(large) + " ms with " +
                      std::to_string(workers) + " workers (limit 300 ms); one axis doubled: ratio " +
                      fmt(doubled / small)};
}

Outcome sphere_model(const std::filesystem::path& data)
{
    const auto chain = KinematicChain::load(data / "robots/tiago_like.json");
    const auto spheres = chain.bounding_spheres();
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    int links = 0;
    int count_mismatches = 0;
    long escapes = 0;
    for (int l = 0; l < chain.link_count(); ++l) {
        if (chain.link(l).geometry.primitives.empty()) continue;
        ++links;
        const auto obb = compute_obb(chain.link(l).geometry);
        std::array<double, 3> e{obb.edges[0], obb.edges[1], obb.edges[2]};
        std::sort(e.begin(), e.end());
        const int expected = static_cast<int>(std::ceil(e[2] / std::hypot(e[0], e[1]) + 1.0));
        std::vector<BoundingSphere> mine;
        for (const auto& s : spheres) {
            if (s.link == l) mine.push_back(s);
        }
        if (static_cast<int>(mine.size()) != expected) ++count_mismatches;
        for (int i = 0; i < 10000; ++i) {
            const Eigen::Vector3d local(u(rng) * obb.edges[0], u(rng) * obb.edges[1], u(rng) * obb.edges[2]);
            const Eigen::Vector3d p = obb.center + obb.rotation * local;
            const bool inside = std::any_of(mine.begin(), mine.end(), [&](const BoundingSphere& s) {
                return (p - s.center).norm() <= s.radius;
            });
            if (!inside) ++escapes;
        }
    }
    return {count_mismatches == 0 && escapes == 0,
            std::to_string(links) + " links, " + std::to_string(spheres.size()) + " spheres, " +
                std::to_string(count_mismatches) + " count mismatches, " + std::to_string(escapes) +
                " escapes in " + std::to_string(links * 10000) + " samples"};
}

Outcome jacobians(const std::filesystem::path& data)
{
    const auto chain = KinematicChain::load(data / "robots/tiago_like.json");
    std::vector<BoundingSphere> spheres;
    for (const auto& s : chain.bounding_spheres()) {
        if (chain.dof_of_link(s.link) >= 0) spheres.push_back(s);
    }
    std::mt19937_64 rng(4242);
    std::normal_distribution<double> offset(0.0, 0.15);
    const double eps = 1e-6;
    double worst_row = 0.0;
    double worst_col = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::VectorXd q = random_q(chain, rng);
        const auto& s = spheres[rng() % spheres.size()];
        const auto t = chain.forward_kinematics(q);
        const Eigen::Vector3d c = t[s.link] * s.center;
        const Eigen::Vector3d obstacle = c + Eigen::Vector3d(offset(rng), offset(rng), offset(rng));
        DirectionMemory memory;
        const auto level =
            distance_task_level("obstacle", chain, t, {{s.link, c, s.radius, s.buffer}}, {obstacle}, {}, memory);
        const auto jac = chain.geometric_jacobian(t, s.link, c);
        for (int k = 0; k < chain.dof(); ++k) {
            Eigen::VectorXd qp = q, qm = q;
            qp[k] += eps;
            qm[k] -= eps;
            const auto tp = chain.forward_kinematics(qp);
            const auto tm = chain.forward_kinematics(qm);
            const Eigen::Vector3d cp = tp[s.link] * s.center;
            const Eigen::Vector3d cm = tm[s.link] * s.center;
            const double dx = ((obstacle - cp).norm() - (obstacle - cm).norm()) / (2 * eps);
            worst_row = std::max(worst_row, std::abs(dx - level.jacobian(0, k)));
            const Eigen::Vector3d dp = (cp - cm) / (2 * eps);
            const Eigen::AngleAxisd aa(tp[s.link].linear() * tm[s.link].linear().transpose());
            const Eigen::Vector3d dw = aa.angle() * aa.axis() / (2 * eps);
            worst_col = std::max({worst_col, (dp - jac.block<3, 1>(0, k)).norm(), (dw - jac.block<3, 1>(3, k)).norm()});
        }
    }
    return {worst_row <= 1e-5 && worst_col <= 1e-5, "100 (q, obstacle) pairs, max error avoidance rows " +
                                                         fmt(worst_row) + ", FK columns " + fmt(worst_col) +
                                                         " (limit 1e-5)"};
}

TaskLevel random_level(int m, int n, std::mt19937_64& rng, bool random_activation)
{
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    TaskLevel level{"random", Eigen::MatrixXd(m, n), Eigen::VectorXd(m), Eigen::VectorXd(m), Eigen::VectorXd::Zero(m)};
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < n; ++c) level.jacobian(r, c) = g(rng);
        level.activation[r] = random_activation ? u(rng) : 1.0;
        level.xdot_ref[r] = g(rng);
    }
    return level;
}

Outcome exact_priority(const std::filesystem::path&)
{
    const RegularizationConfig no_penalty{true, 0.0, 0.05, 1e-8};
    std::mt19937_64 rng(515);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto high = random_level(1 + trial % 5, 7, rng, false);
        Eigen::VectorXd reference;
        for (int variant = 0; variant < 6; ++variant) {
            std::vector<TaskLevel> stack{high};
            for (int l = 0; l < 1 + variant % 3; ++l) stack.push_back(random_level(1 + (variant + l) % 6, 7, rng, true));
            const Eigen::VectorXd v = high.jacobian * solve_priority_stack(stack, no_penalty);
            if (variant == 0) {
                reference = v;
            } else {
                worst = std::max(worst, (v - reference).lpNorm<Eigen::Infinity>());
            }
        }
    }
    return {worst <= 1e-10, "50 trials, max change of the top task velocity " + fmt(worst) + " (limit 1e-10)"};
}

Outcome regularization_effect(const std::filesystem::path& data)
{
    Scenario on = Scenario::load(data / "scenarios/exp3_regularization.json");
    Scenario off = on;
    off.controller.regularization.enabled = false;
    const auto a = run_scenario(on);
    const auto b = run_scenario(off);
    if (a.fault || b.fault) return {false, "fault: " + a.fault_message + b.fault_message};
    const double ratio = a.metrics.max_qdot_jump / b.metrics.max_qdot_jump;
    return {ratio <= 0.5, "max |delta qdot| " + fmt(a.metrics.max_qdot_jump) + " with, " +
                              fmt(b.metrics.max_qdot_jump) + " without, ratio " + fmt(ratio) + " (limit 0.5)"};
}

Outcome safety(const std::filesystem::path& data)
{
    bool pass = true;
    std::string detail;
    for (const char* name : {"exp1_walker", "exp2_waypoints", "exp5_self_collision"}) {
        const auto s = Scenario::load(data / "scenarios" / (std::string(name) + ".json"));
        const auto t0 = clock::now();
        const auto r = run_scenario(s);
        const double secs = seconds_since(t0);
        const auto& m = r.metrics;
        const bool ok = !r.fault && m.min_env_margin >= 0.0 && m.min_self_margin >= 0.0 &&
                        m.final_ee_position_error < 0.02 && secs < 30.0;
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += std::string(name) + (ok ? "" : " [fail]") + " env " + fmt(m.min_env_margin) + " self " +
                  fmt(m.min_self_margin) + " ee " + fmt(m.final_ee_position_error) + " m " + fmt(secs) + " s";
        if (r.fault) detail += " fault " + r.fault_message;
    }
    return {pass, detail + " (margins >= 0, ee < 0.02 m, < 30 s)"};
}

std::string snapshot_problem(const json& m, std::size_t dof, std::size_t spheres)
{
    const auto numbers = [](const json& j, std::size_t n) {
        return j.is_array() && j.size() == n &&
               std::all_of(j.begin(), j.end(), [](const json& v) { return v.is_number(); });
    };
    if (!m.is_object() || m.value("type", "") != "snapshot") return "type";
    if (!m.contains("t") || !m["t"].is_number()) return "t";
    if (!m.contains("q") || !numbers(m["q"], dof)) return "q";
    if (!m.contains("spheres") || !m["spheres"].is_array() || m["spheres"].size() != spheres) return "spheres";
    for (const auto& s : m["spheres"]) {
        if (!s.contains("c") || !numbers(s["c"], 3)) return "sphere c";
        for (const char* k : {"r", "xc", "xs", "a"}) {
            if (!s.contains(k) || !s[k].is_number()) return std::string("sphere ") + k;
        }
    }
    if (!m.contains("obstacles") || !m["obstacles"].is_array()) return "obstacles";
    for (const auto& o : m["obstacles"]) {
        if (!o.contains("id") || !o["id"].is_number_integer() || !o.contains("position") ||
            !numbers(o["position"], 3)) {
            return "obstacle";
        }
    }
    if (!m.contains("ee") || !m["ee"].contains("pose") || !m["ee"].contains("target") ||
        !numbers(m["ee"]["pose"], 7) || !numbers(m["ee"]["target"], 7)) {
        return "ee";
    }
    if (!m.contains("timings")) return "timings";
    for (const char* k : {"clear", "insert", "edt", "solve"}) {
        if (!m["timings"].contains(k) || !m["timings"][k].is_number()) return std::string("timings ") + k;
    }
    return {};
}

json next_of_type(WsClient& c, const std::string& type)
{
    for (int i = 0; i < 50; ++i) {
        json m = c.receive();
        if (m.value("type", "") == type) return m;
    }
    throw std::runtime_error("no " + type + " message");
}

Outcome ui_protocol(const std::filesystem::path& data)
{
    Simulation sim(Scenario::load(data / "scenarios/sandbox.json"));
    std::vector<int> ids;
    for (const auto& o : sim.obstacles().specs()) ids.push_back(o.id);
    const std::size_t dof = static_cast<std::size_t>(sim.chain().dof());
    const std::size_t spheres = sim.state().spheres.size();
    UiServer server(ids, 0);
    std::atomic<bool> stop{false};
    std::thread loop([&] { run_interactive(sim, server, stop); });
    std::vector<std::string> failures;
    try {
        WsClient client("127.0.0.1", server.port());
        int bad = 0;
        double last_t = -1.0;
        bool monotone = true;
        for (int i = 0; i < 100; ++i) {
            const json m = client.receive();
            const std::string problem = snapshot_problem(m, dof, spheres);
            if (!problem.empty()) {
                ++bad;
                continue;
            }
            monotone = monotone && m["t"].get<double>() >= last_t;
            last_t = m["t"].get<double>();
        }
        if (bad > 0) failures.push_back(std::to_string(bad) + " invalid snapshots");
        if (!monotone) failures.push_back("t not monotone");

        // Round trip 1: the very next snapshot may already be in flight, the one after must show the move.
        client.send({{"type", "set_obstacle"}, {"id", 0}, {"position", {0.5, 0.0, 1.0}}});
        bool moved = false;
        for (int i = 0; i < 2 && !moved; ++i) {
            const auto p = next_of_type(client, "snapshot")["obstacles"][0]["position"];
            moved = p == json::array({0.5, 0.0, 1.0});
        }
        if (!moved) failures.push_back("set_obstacle not reflected");

        // Round trip 2.
        client.send({{"type", "pause"}});
        next_of_type(client, "snapshot");
        const double t1 = next_of_type(client, "snapshot")["t"].get<double>();
        const double t2 = next_of_type(client, "snapshot")["t"].get<double>();
        if (t1 != t2) failures.push_back("pause did not hold t");
        client.send({{"type", "resume"}});

        // Round trip 3.
        client.send({{"type", "set_obstacle"}, {"id", 99}, {"position", {0.0, 0.0, 0.0}}});
        const json err = next_of_type(client, "error");
        if (!err.contains("detail")) failures.push_back("error without detail");
        const json after = next_of_type(client, "snapshot");
        if (after["obstacles"][0]["position"] != json::array({0.5, 0.0, 1.0})) {
            failures.push_back("invalid command changed the simulation");
        }
        if (!client.is_open()) failures.push_back("connection closed after an error");
    } catch (const std::exception& e) {
        failures.push_back(e.what());
    }
    stop = true;
    loop.join();
    server.stop();
    std::string detail = "100 snapshots schema-checked; set_obstacle, pause, unknown id round trips";
    for (const auto& f : failures) detail += "; " + f;
    return {failures.empty(), detail};
}

}  // namespace

std::vector<Check> acceptance_checks()
{
    return {{"edt-exactness", edt_exactness},     {"edt-determinism", edt_determinism},
            {"edt-scaling", edt_scaling},         {"sphere-model", sphere_model},
            {"jacobians", jacobians},             {"exact-priority", exact_priority},
            {"regularization", regularization_effect}, {"safety-envelope", safety},
            {"ui-protocol", ui_protocol}};
}

int run_checks(std::ostream& out, const std::filesystem::path& data_dir, const std::string& filter)
{
    int failures = 0;
    for (const auto& check : acceptance_checks()) {
        if (!filter.empty() && check.name.find(filter) == std::string::npos) continue;
        const auto t0 = clock::now();
        Outcome o;
        try {
            o = check.run(data_dir);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        out << (o.pass ? "PASS " : "FAIL ") << check.name << ": " << o.detail << " (" << fmt(seconds_since(t0))
            << " s)" << std::endl;
    }
    return failures;
}

}  // namespace voxavoid::checks
