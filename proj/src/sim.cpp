#include "voxavoid/sim.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>

namespace voxavoid {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where)
{
    if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw std::invalid_argument("unknown key '" + key + "' in " + where);
        }
    }
}

Eigen::Quaterniond quaternion_from_json(const json& j)
{
    if (!j.is_array() || j.size() != 4) throw std::invalid_argument("quaternion must be [qx, qy, qz, qw]");
    Eigen::Quaterniond q(j[3].get<double>(), j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
    if (std::abs(q.norm() - 1.0) > 1e-3) throw std::invalid_argument("quaternion is not unit length");
    return q.normalized();
}

Motion motion_from_json(const json& j)
{
    const std::string type = j.at("type").get<std::string>();
    if (type == "static") {
        check_keys(j, {"type", "position"}, "static motion");
        return StaticMotion{vec3_from_json(j.at("position"))};
    }
    if (type == "oscillate") {
        check_keys(j, {"type", "center", "amplitude", "period", "phase"}, "oscillate motion");
        OscillateMotion m;
        m.center = vec3_from_json(j.at("center"));
        m.amplitude = vec3_from_json(j.at("amplitude"));
        m.period = j.value("period", m.period);
        m.phase = j.value("phase", m.phase);
        return m;
    }
    if (type == "waypoints") {
        check_keys(j, {"type", "points", "speed", "loop"}, "waypoint motion");
        WaypointMotion m;
        const double speed = j.value("speed", 1.4);
        m.loop = j.value("loop", false);
        for (const auto& jp : j.at("points")) {
            Waypoint w;
            w.speed = speed;
            if (jp.is_array()) {
                w.position = vec3_from_json(jp);
            } else {
                check_keys(jp, {"position", "speed", "hold"}, "waypoint");
                w.position = vec3_from_json(jp.at("position"));
                w.speed = jp.value("speed", speed);
                w.hold = jp.value("hold", 0.0);
            }
            m.points.push_back(w);
        }
        return m;
    }
    throw std::invalid_argument("unknown motion type '" + type + "'");
}

void validate_motion(const Motion& m)
{
    if (const auto* o = std::get_if<OscillateMotion>(&m)) {
        if (!(o->period > 0)) throw std::invalid_argument("oscillation period must be positive");
    } else if (const auto* w = std::get_if<WaypointMotion>(&m)) {
        if (w->points.empty()) throw std::invalid_argument("waypoint motion needs at least one point");
        for (const auto& p : w->points) {
            if (!(p.speed > 0) || p.hold < 0) throw std::invalid_argument("waypoint speed must be positive, hold >= 0");
        }
    }
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b)
{
    // splitmix64 finalizer over the combined words
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double ms_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Eigen::Vector3d motion_position(const Motion& m, double t)
{
    if (const auto* s = std::get_if<StaticMotion>(&m)) return s->position;
    if (const auto* o = std::get_if<OscillateMotion>(&m)) {
        return o->center + o->amplitude * std::sin(2.0 * std::numbers::pi * t / o->period + o->phase);
    }
    const auto& w = std::get<WaypointMotion>(m);
    const auto& pts = w.points;
    // segment k runs from stop k-1 to stop k, then holds at stop k
    const std::size_t segments = pts.size() - 1 + (w.loop && pts.size() > 1 ? 1 : 0);
    double period = pts[0].hold;
    for (std::size_t k = 1; k <= segments; ++k) {
        const auto& to = pts[k % pts.size()];
        period += (to.position - pts[k - 1].position).norm() / to.speed + to.hold;
    }
    double local = t;
    if (w.loop && period > 0) {
        local = std::fmod(t, period);
        if (local < 0) local += period;
    }
    if (local <= pts[0].hold || segments == 0) return pts[0].position;
    local -= pts[0].hold;
    for (std::size_t k = 1; k <= segments; ++k) {
        const auto& from = pts[k - 1];
        const auto& to = pts[k % pts.size()];
        const double travel = (to.position - from.position).norm() / to.speed;
        if (local < travel) return from.position + (to.position - from.position) * (local / travel);
        local -= travel;
        if (local < to.hold) return to.position;
        local -= to.hold;
    }
    return pts[segments % pts.size()].position;
}

Scenario Scenario::from_json(const json& j, const std::filesystem::path& base_dir)
{
    check_keys(j, {"name", "robot", "grid", "obstacles", "ee_targets", "q0", "duration", "dt", "self_collision",
                   "seed", "sensor", "controller", "edt"},
               "scenario");
    Scenario s;
    s.name = j.value("name", s.name);
    s.robot_file = base_dir / j.at("robot").get<std::string>();

    if (j.contains("grid")) {
        const json& g = j["grid"];
        check_keys(g, {"dims", "voxel_size", "origin"}, "grid");
        if (g.contains("dims")) {
            const auto& d = g["dims"];
            if (!d.is_array() || d.size() != 3) throw std::invalid_argument("grid dims must be [nx, ny, nz]");
            s.grid.dims = {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
        }
        s.grid.voxel_size = g.value("voxel_size", s.grid.voxel_size);
        if (g.contains("origin")) s.grid.origin = vec3_from_json(g["origin"]);
    }

    for (const auto& jo : j.value("obstacles", json::array())) {
        check_keys(jo, {"id", "shape", "cloud_file", "motion", "point_density"}, "obstacle");
        ObstacleSpec o;
        o.id = jo.at("id").get<int>();
        if (jo.contains("shape")) {
            const json& shape = jo["shape"];
            if (shape.is_array()) {
                for (const auto& jp : shape) o.shape.primitives.push_back(primitive_from_json(jp));
            } else {
                o.shape.primitives.push_back(primitive_from_json(shape));
            }
        }
        if (jo.contains("cloud_file")) o.cloud = load_xyz(base_dir / jo["cloud_file"].get<std::string>());
        o.motion = motion_from_json(jo.at("motion"));
        o.point_density = jo.value("point_density", o.point_density);
        s.obstacles.push_back(std::move(o));
    }

    for (const auto& jt : j.value("ee_targets", json::array())) {
        check_keys(jt, {"t", "position", "quaternion"}, "ee target");
        EeWaypoint w;
        w.t = jt.at("t").get<double>();
        w.position = vec3_from_json(jt.at("position"));
        if (jt.contains("quaternion")) w.orientation = quaternion_from_json(jt["quaternion"]);
        s.ee_targets.push_back(w);
    }

    if (j.contains("q0")) {
        const auto v = j["q0"].get<std::vector<double>>();
        s.q0 = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    s.duration = j.value("duration", s.duration);
    s.dt = j.value("dt", s.dt);
    s.self_collision = j.value("self_collision", s.self_collision);
    s.seed = j.value("seed", s.seed);

    if (j.contains("sensor")) {
        const json& js = j["sensor"];
        check_keys(js, {"translation", "rotation", "camera_period", "noise_sigma", "filter"}, "sensor");
        s.sensor.pose = transform_from_json(js);
        s.sensor.camera_period = js.value("camera_period", s.sensor.camera_period);
        s.sensor.noise_sigma = js.value("noise_sigma", s.sensor.noise_sigma);
        if (js.contains("filter")) {
            const json& jf = js["filter"];
            check_keys(jf, {"enabled", "k_neighbors", "std_multiplier"}, "sensor filter");
            s.sensor.filter.enabled = jf.value("enabled", s.sensor.filter.enabled);
            s.sensor.filter.k_neighbors = jf.value("k_neighbors", s.sensor.filter.k_neighbors);
            s.sensor.filter.std_multiplier = jf.value("std_multiplier", s.sensor.filter.std_multiplier);
        }
    }

    if (j.contains("controller")) {
        const json& jc = j["controller"];
        check_keys(jc, {"regularization", "p_lambda", "sigma_threshold", "rtol", "kappa", "x_star_offset", "kp", "ko",
                        "qdot_max", "joint_limits"},
                   "controller");
        auto& c = s.controller;
        c.regularization.enabled = jc.value("regularization", c.regularization.enabled);
        c.regularization.p_lambda = jc.value("p_lambda", c.regularization.p_lambda);
        c.regularization.sigma_threshold = jc.value("sigma_threshold", c.regularization.sigma_threshold);
        c.regularization.rtol = jc.value("rtol", c.regularization.rtol);
        c.avoidance.kappa = jc.value("kappa", c.avoidance.kappa);
        c.avoidance.x_star_offset = jc.value("x_star_offset", c.avoidance.x_star_offset);
        c.gains.kp = jc.value("kp", c.gains.kp);
        c.gains.ko = jc.value("ko", c.gains.ko);
        c.qdot_max = jc.value("qdot_max", c.qdot_max);
        if (jc.contains("joint_limits")) {
            const json& jl = jc["joint_limits"];
            check_keys(jl, {"margin", "buffer", "kappa"}, "joint limits");
            c.joint_limits.margin = jl.value("margin", c.joint_limits.margin);
            c.joint_limits.buffer = jl.value("buffer", c.joint_limits.buffer);
            c.joint_limits.kappa = jl.value("kappa", c.joint_limits.kappa);
        }
    }

    if (j.contains("edt")) {
        const json& je = j["edt"];
        check_keys(je, {"bands", "workers"}, "edt");
        s.edt.workers = je.value("workers", s.edt.workers);
        if (je.contains("bands")) {
            const auto& b = je["bands"];
            if (!b.is_array() || b.size() != 3) throw std::invalid_argument("edt bands must be [m1, m2, m3]");
            s.edt.bands = {b[0].get<int>(), b[1].get<int>(), b[2].get<int>()};
        } else {
            s.edt.bands = BandConfig::for_workers(std::max(1, s.edt.workers));
        }
    }
    s.validate();
    return s;
}

Scenario Scenario::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
    return from_json(json::parse(in), path.parent_path());
}

void Scenario::validate() const
{
    if (!(dt > 0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
    if (!(duration >= 0) || !std::isfinite(duration)) throw std::invalid_argument("duration must be >= 0");
    if (grid.dims.nx <= 0 || grid.dims.ny <= 0 || grid.dims.nz <= 0) throw std::invalid_argument("grid dims must be positive");
    if (!(grid.voxel_size > 0)) throw std::invalid_argument("voxel size must be positive");
    if (!(sensor.camera_period > 0)) throw std::invalid_argument("camera period must be positive");
    if (sensor.noise_sigma < 0) throw std::invalid_argument("noise sigma must be >= 0");
    if (!(controller.qdot_max > 0)) throw std::invalid_argument("qdot_max must be positive");
    std::set<int> ids;
    for (const auto& o : obstacles) {
        if (!ids.insert(o.id).second) throw std::invalid_argument("duplicate obstacle id " + std::to_string(o.id));
        if (o.shape.empty() && o.cloud.empty()) throw std::invalid_argument("obstacle needs a shape or a cloud");
        if (!(o.point_density > 0)) throw std::invalid_argument("point density must be positive");
        validate_motion(o.motion);
    }
    for (std::size_t k = 1; k < ee_targets.size(); ++k) {
        if (!(ee_targets[k].t > ee_targets[k - 1].t)) throw std::invalid_argument("ee target times must increase");
    }
}

long Scenario::tick_count() const
{
    return static_cast<long>(std::ceil(duration / dt - 1e-9));
}

ObstacleSet::ObstacleSet(const Scenario& scenario)
    : m_specs(scenario.obstacles), m_sensor(scenario.sensor), m_seed(scenario.seed)
{
    for (const auto& o : m_specs) {
        if (!o.cloud.empty()) {
            m_local.push_back(o.cloud);
            continue;
        }
        double area = 0.0;
        for (const auto& p : o.shape.primitives) area += surface_area(p);
        const int count = std::max(1, static_cast<int>(std::lround(area * o.point_density)));
        m_local.push_back(sample_surface(o.shape, count, mix(m_seed, static_cast<std::uint64_t>(o.id))));
    }
}

bool ObstacleSet::has(int id) const
{
    return std::any_of(m_specs.begin(), m_specs.end(), [&](const ObstacleSpec& o) { return o.id == id; });
}

Eigen::Vector3d ObstacleSet::position(std::size_t index, double t) const
{
    return motion_position(m_specs.at(index).motion, t);
}

void ObstacleSet::set_motion(int id, Motion m)
{
    validate_motion(m);
    for (auto& o : m_specs) {
        if (o.id == id) {
            o.motion = std::move(m);
            return;
        }
    }
    throw std::invalid_argument("unknown obstacle id " + std::to_string(id));
}

PointCloud ObstacleSet::cloud(double t) const
{
    PointCloud out;
    out.sensor_pose = m_sensor.pose;
    const Eigen::Isometry3d world_to_sensor = m_sensor.pose.inverse();
    for (std::size_t k = 0; k < m_specs.size(); ++k) {
        const Eigen::Vector3d offset = position(k, t);
        std::mt19937_64 rng(mix(mix(m_seed, static_cast<std::uint64_t>(m_specs[k].id)), std::bit_cast<std::uint64_t>(t)));
        std::normal_distribution<double> noise(0.0, m_sensor.noise_sigma);
        for (const auto& p : m_local[k]) {
            Eigen::Vector3d w = p + offset;
            if (m_sensor.noise_sigma > 0) w += Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
            out.points.push_back(world_to_sensor * w);
        }
    }
    return out;
}

PointCloud obstacle_cloud(const Scenario& scenario, double t)
{
    return ObstacleSet(scenario).cloud(t);
}

Simulation::Simulation(Scenario scenario)
    : m_scenario((scenario.validate(), std::move(scenario))),
      m_chain(KinematicChain::load(m_scenario.robot_file)),
      m_obstacles(m_scenario),
      m_env(m_scenario.grid.dims, m_scenario.grid.voxel_size, m_scenario.grid.origin),
      m_self(m_scenario.grid.dims, m_scenario.grid.voxel_size, m_scenario.grid.origin),
      m_mask(m_scenario.grid.dims, m_scenario.grid.voxel_size, m_scenario.grid.origin)
{
    const int n = m_chain.dof();
    if (m_scenario.q0.size() == 0) m_scenario.q0 = Eigen::VectorXd::Zero(n);
    if (m_scenario.q0.size() != n) throw std::invalid_argument("q0 has the wrong number of joints");
    if ((m_scenario.q0.array() < m_chain.q_min().array()).any() ||
        (m_scenario.q0.array() > m_chain.q_max().array()).any()) {
        throw std::invalid_argument("q0 violates the joint limits");
    }

    const auto& controlled = m_chain.controlled_links();
    m_self_links = self_obstacle_links(m_chain, controlled);
    for (const auto& s : m_chain.bounding_spheres()) {
        if (std::find(controlled.begin(), controlled.end(), s.link) == controlled.end()) continue;
        m_spheres.push_back(s);
        // spheres on links touching a body proxy by construction get no self row
        const bool paired = std::any_of(m_self_links.begin(), m_self_links.end(),
                                        [&](int l) { return m_chain.allowed_collision(l, s.link); });
        m_has_self_row.push_back(!paired);
    }
    for (const auto& l : m_chain.links()) m_link_voxels.push_back(voxelize_link(l.geometry, m_scenario.grid.voxel_size));

    const auto transforms = m_chain.forward_kinematics(m_scenario.q0);
    m_initial_orientation = Eigen::Quaterniond(m_chain.ee_pose(transforms).linear());

    m_state.q = m_scenario.q0;
    m_state.qdot = Eigen::VectorXd::Zero(n);
    m_state.ee_pose = m_chain.ee_pose(transforms);
    m_state.ee_target = target_at(0.0);
    for (const auto& s : m_spheres) {
        m_state.spheres.push_back({s.link, transforms[s.link] * s.center, s.radius, s.buffer});
    }
}

Eigen::Isometry3d Simulation::target_at(double t) const
{
    if (m_target_override) return *m_target_override;
    Eigen::Isometry3d out = Eigen::Isometry3d::Identity();
    const auto& wp = m_scenario.ee_targets;
    if (wp.empty()) {
        out = m_chain.ee_pose(m_chain.forward_kinematics(m_scenario.q0));
        return out;
    }
    const auto orient = [&](const EeWaypoint& w) { return w.orientation.value_or(m_initial_orientation); };
    if (t <= wp.front().t) {
        out.linear() = orient(wp.front()).toRotationMatrix();
        out.translation() = wp.front().position;
        return out;
    }
    for (std::size_t k = 1; k < wp.size(); ++k) {
        if (t < wp[k].t) {
            const double s = (t - wp[k - 1].t) / (wp[k].t - wp[k - 1].t);
            const double w = 0.5 * (1.0 - std::cos(std::numbers::pi * s));
            out.translation() = (1.0 - w) * wp[k - 1].position + w * wp[k].position;
            out.linear() = orient(wp[k - 1]).slerp(w, orient(wp[k])).toRotationMatrix();
            return out;
        }
    }
    out.linear() = orient(wp.back()).toRotationMatrix();
    out.translation() = wp.back().position;
    return out;
}

bool Simulation::finished() const
{
    return m_state.fault || m_state.metrics.ticks >= m_scenario.tick_count();
}

bool Simulation::step()
{
    if (m_state.fault) return false;
    try {
        run_tick();
    } catch (const std::exception& e) {
        m_state.fault = true;
        m_state.fault_message = e.what();
        return false;
    }
    return true;
}

void Simulation::run_tick()
{
    using clock = std::chrono::steady_clock;
    const long tick = m_state.metrics.ticks;
    const double t = static_cast<double>(tick) * m_scenario.dt;
    // q of this tick: the integrated state of the previous one
    Eigen::VectorXd q = m_state.q;
    if (m_have_qdot) {
        q = (q + m_scenario.dt * m_state.qdot).cwiseMax(m_chain.q_min()).cwiseMin(m_chain.q_max());
    }
    if (!q.allFinite()) throw std::runtime_error("joint state left the finite range");
    StageTimings timings;

    auto t0 = clock::now();
    m_env.clear();
    m_self.clear();
    m_mask.clear();
    timings.clear_ms = ms_since(t0);

    t0 = clock::now();
    const auto transforms = m_chain.forward_kinematics(q);
    for (int l = 0; l < m_chain.link_count(); ++l) insert_voxel_set(m_mask, m_link_voxels[l], transforms[l]);
    for (int l : m_self_links) insert_voxel_set(m_self, m_link_voxels[l], transforms[l]);
    const long frame = static_cast<long>(std::floor(t / m_scenario.sensor.camera_period + 1e-9));
    if (frame != m_camera_frame) {
        PointCloud raw = m_obstacles.cloud(t);
        const auto& f = m_scenario.sensor.filter;
        if (f.enabled) raw.points = statistical_outlier_filter(raw.points, f.k_neighbors, f.std_multiplier);
        m_cloud = std::move(raw);
        m_camera_frame = frame;
    }
    insert_point_cloud(m_env, m_cloud, m_mask, FilterConfig{false});
    timings.insert_ms = ms_since(t0);

    t0 = clock::now();
    // the transform only reruns when the occupancy actually changed
    auto env_snapshot = OccupancySnapshot::of(m_env);
    if (!m_env_valid || env_snapshot.occupied != m_env_snapshot.occupied) {
        m_env_field = pba_edt(env_snapshot, m_scenario.edt);
        m_env_snapshot = std::move(env_snapshot);
        m_env_valid = true;
        ++m_state.metrics.env_edt_runs;
    }
    auto self_snapshot = OccupancySnapshot::of(m_self);
    if (!m_self_valid || self_snapshot.occupied != m_self_snapshot.occupied) {
        m_self_field = pba_edt(self_snapshot, m_scenario.edt);
        m_self_snapshot = std::move(self_snapshot);
        m_self_valid = true;
        ++m_state.metrics.self_edt_runs;
    }
    timings.edt_ms = ms_since(t0);

    t0 = clock::now();
    std::vector<PlacedSphere> placed;
    std::vector<std::optional<Eigen::Vector3d>> env_sites, self_sites;
    for (std::size_t i = 0; i < m_spheres.size(); ++i) {
        const auto& s = m_spheres[i];
        placed.push_back({s.link, transforms[s.link] * s.center, s.radius, s.buffer});
        const auto v = m_env.world_to_voxel(placed.back().center);
        auto lookup = [&](const DistanceField& field) -> std::optional<Eigen::Vector3d> {
            if (!v) return std::nullopt;
            const auto site = field.site(*v);
            if (!site) return std::nullopt;
            return m_env.voxel_center(*site);
        };
        env_sites.push_back(lookup(m_env_field));
        self_sites.push_back(m_has_self_row[i] ? lookup(m_self_field) : std::nullopt);
    }

    const auto& cfg = m_scenario.controller;
    const Eigen::Isometry3d target = target_at(t);
    auto collision = update_collision_tasks(m_chain, transforms, placed, env_sites, self_sites, cfg.avoidance,
                                            m_env_memory, m_self_memory);
    if (!m_scenario.self_collision) {
        // distances stay measured and logged, the rows no longer act
        collision.self.activation.setZero();
        collision.self.jacobian.setZero();
        collision.self.xdot_ref.setZero();
    }
    std::vector<TaskLevel> levels;
    levels.push_back(joint_limit_tasks(q, m_chain.q_min(), m_chain.q_max(), cfg.joint_limits));
    levels.push_back(TaskLevel::stack("collision", collision.obstacle, collision.self));
    levels.push_back(ee_pose_task(m_chain, transforms, target, cfg.gains));
    const Eigen::VectorXd qdot = clamp_velocity(solve_priority_stack(levels, cfg.regularization), cfg.qdot_max);
    if (!qdot.allFinite()) throw std::runtime_error("controller produced a non-finite velocity");
    timings.solve_ms = ms_since(t0);

    // commit only after every stage succeeded
    Metrics& m = m_state.metrics;
    if (m_have_qdot) m.max_qdot_jump = std::max(m.max_qdot_jump, (qdot - m_state.qdot).norm());
    for (std::size_t i = 0; i < placed.size(); ++i) {
        SphereState& s = m_state.spheres[i];
        s.center = placed[i].center;
        s.xc = collision.obstacle.values[static_cast<Eigen::Index>(i)];
        s.xs = collision.self.values[static_cast<Eigen::Index>(i)];
        s.ac = collision.obstacle.activation[static_cast<Eigen::Index>(i)];
        s.as = collision.self.activation[static_cast<Eigen::Index>(i)];
        const double floor = s.radius - s.buffer;
        if (env_sites[i]) m.min_env_margin = std::min(m.min_env_margin, s.xc - floor);
        if (self_sites[i]) m.min_self_margin = std::min(m.min_self_margin, s.xs - floor);
        m.max_env_activation = std::max(m.max_env_activation, s.ac);
    }
    const auto& ee = levels.back();
    m.final_ee_position_error = ee.values.head<3>().norm();
    m.final_ee_rotation_error = ee.values.tail<3>().norm();
    m.degenerate_events = m_env_memory.degenerate_events + m_self_memory.degenerate_events;
    ++m.ticks;

    m_state.tick = tick;
    m_state.t = t;
    m_state.q = q;
    m_state.qdot = qdot;
    m_state.ee_pose = m_chain.ee_pose(transforms);
    m_state.ee_target = target;
    m_state.timings = timings;
    m_levels = std::move(levels);
    m_have_qdot = true;
}

std::vector<std::pair<int, Eigen::Vector3d>> Simulation::obstacle_positions() const
{
    std::vector<std::pair<int, Eigen::Vector3d>> out;
    for (std::size_t k = 0; k < m_obstacles.size(); ++k) {
        out.emplace_back(m_obstacles.specs()[k].id, m_obstacles.position(k, m_state.t));
    }
    return out;
}

void Simulation::set_obstacle_position(int id, const Eigen::Vector3d& p)
{
    if (!p.allFinite()) throw std::invalid_argument("obstacle position must be finite");
    m_obstacles.set_motion(id, StaticMotion{p});
    m_camera_frame = -1;  // next tick captures a fresh cloud
}

void Simulation::set_target(const Eigen::Isometry3d& pose)
{
    m_target_override = pose;
    m_state.ee_target = pose;
}

void Simulation::set_regularization(bool enabled)
{
    m_scenario.controller.regularization.enabled = enabled;
}

std::string format_double(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

CsvLog::CsvLog(std::ostream& out, int dof, std::size_t spheres, bool with_header) : m_out(out)
{
    if (!with_header) return;
    const auto cols = columns(dof, spheres);
    for (std::size_t c = 0; c < cols.size(); ++c) m_out << (c ? "," : "") << cols[c];
    m_out << '\n';
}

std::vector<std::string> CsvLog::columns(int dof, std::size_t spheres)
{
    std::vector<std::string> out{"t"};
    for (int k = 0; k < dof; ++k) out.push_back("q" + std::to_string(k));
    for (int k = 0; k < dof; ++k) out.push_back("qd" + std::to_string(k));
    for (std::size_t i = 0; i < spheres; ++i) {
        const auto n = std::to_string(i);
        out.insert(out.end(), {"xc" + n, "xs" + n, "ac" + n, "as" + n});
    }
    out.insert(out.end(), {"ee_pos_err", "ee_rot_err", "clear_ms", "insert_ms", "edt_ms", "solve_ms"});
    return out;
}

bool CsvLog::is_timing_column(const std::string& name)
{
    return name == "clear_ms" || name == "insert_ms" || name == "edt_ms" || name == "solve_ms";
}

void CsvLog::write(const SimState& s)
{
    std::string line = format_double(s.t);
    const auto add = [&](double v) {
        line += ',';
        line += format_double(v);
    };
    for (double v : s.q) add(v);
    for (double v : s.qdot) add(v);
    for (const auto& sp : s.spheres) {
        add(sp.xc);
        add(sp.xs);
        add(sp.ac);
        add(sp.as);
    }
    add((s.ee_target.translation() - s.ee_pose.translation()).norm());
    add(rotation_vector(s.ee_target.linear() * s.ee_pose.linear().transpose()).norm());
    add(s.timings.clear_ms);
    add(s.timings.insert_ms);
    add(s.timings.edt_ms);
    add(s.timings.solve_ms);
    m_out << line << '\n';
}

RunResult run_scenario(const Scenario& scenario, const RunOptions& options)
{
    const auto start = std::chrono::steady_clock::now();
    Simulation sim(scenario);
    std::optional<CsvLog> log;
    if (options.csv) log.emplace(*options.csv, sim.chain().dof(), sim.state().spheres.size());
    const long ticks = options.max_ticks >= 0 ? options.max_ticks : scenario.tick_count();
    for (long k = 0; k < ticks; ++k) {
        if (!sim.step()) break;
        if (log) log->write(sim.state());
    }
    RunResult r;
    r.metrics = sim.state().metrics;
    r.metrics.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.fault = sim.state().fault;
    r.fault_message = sim.state().fault_message;
    r.ticks = r.metrics.ticks;
    return r;
}

}  // namespace voxavoid
