#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Geometry>
#include <json.hpp>

#include "voxavoid/controller.hpp"
#include "voxavoid/edt.hpp"
#include "voxavoid/geometry.hpp"
#include "voxavoid/point_cloud.hpp"
#include "voxavoid/robot_model.hpp"
#include "voxavoid/tasks.hpp"
#include "voxavoid/voxel_grid.hpp"

namespace voxavoid {

struct StaticMotion
{
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

/// center + amplitude * sin(2 pi t / period + phase), per axis.
struct OscillateMotion
{
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d amplitude = Eigen::Vector3d::Zero();
    double period = 2.0;
    double phase = 0.0;
};

struct Waypoint
{
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    double speed = 1.4;  // m/s on the segment that ends here
    double hold = 0.0;   // s spent standing here on arrival
};

/// Constant speed along straight segments; the first waypoint is the start.
struct WaypointMotion
{
    std::vector<Waypoint> points;
    bool loop = false;  // closing segment back to the start uses the first waypoint's speed
};

using Motion = std::variant<StaticMotion, OscillateMotion, WaypointMotion>;

Eigen::Vector3d motion_position(const Motion& m, double t);

struct ObstacleSpec
{
    int id = 0;
    LinkGeometry shape;           // body frame, sampled on its surface
    Points cloud;                 // body frame; replaces surface sampling when non-empty
    Motion motion;
    double point_density = 2500;  // points per square meter of surface
};

struct EeWaypoint
{
    double t = 0.0;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    std::optional<Eigen::Quaterniond> orientation;  // nullopt: initial tool orientation
};

struct GridSpec
{
    GridDims dims{96, 96, 96};
    double voxel_size = 0.02;
    Eigen::Vector3d origin{-0.5, -0.96, 0.0};
};

struct SensorSettings
{
    Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();  // sensor -> world
    double camera_period = 1.0 / 30.0;
    double noise_sigma = 0.0;  // m, isotropic Gaussian per point and frame
    FilterConfig filter;
};

struct ControllerSettings
{
    RegularizationConfig regularization;
    AvoidanceConfig avoidance;
    JointLimitConfig joint_limits;
    PoseGains gains{2.0, 2.0};
    double qdot_max = 1.5;  // rad/s
};

struct Scenario
{
    std::string name = "scenario";
    std::filesystem::path robot_file;
    GridSpec grid;
    std::vector<ObstacleSpec> obstacles;
    std::vector<EeWaypoint> ee_targets;  // empty: hold the initial pose
    Eigen::VectorXd q0;                  // empty: all zeros
    double duration = 5.0;
    double dt = 0.005;
    bool self_collision = true;  // false: self distances are still measured, the rows are inert
    std::uint64_t seed = 1;
    SensorSettings sensor;
    ControllerSettings controller;
    EdtOptions edt;

    /// Relative paths (robot, cloud files) resolve against `base_dir`.
    static Scenario from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    static Scenario load(const std::filesystem::path& path);
    /// Throws std::invalid_argument on dt <= 0, duration < 0 and similar.
    void validate() const;
    long tick_count() const;
};

/// Synthetic depth sensor: surface samples of every mover, fixed per
/// obstacle, posed at time t and expressed in the sensor frame.
class ObstacleSet
{
public:
    explicit ObstacleSet(const Scenario& scenario);

    std::size_t size() const { return m_specs.size(); }
    bool has(int id) const;
    const std::vector<ObstacleSpec>& specs() const { return m_specs; }
    Eigen::Vector3d position(std::size_t index, double t) const;
    void set_motion(int id, Motion m);

    PointCloud cloud(double t) const;

private:
    std::vector<ObstacleSpec> m_specs;
    std::vector<Points> m_local;
    SensorSettings m_sensor;
    std::uint64_t m_seed;
};

PointCloud obstacle_cloud(const Scenario& scenario, double t);

struct SphereState
{
    int link = -1;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    double radius = 0.0;
    double buffer = 0.0;
    double xc = -1.0;  // -1: no site
    double xs = -1.0;  // -1: no site or no self row for this sphere
    double ac = 0.0;
    double as = 0.0;
};

struct StageTimings
{
    double clear_ms = 0.0;
    double insert_ms = 0.0;
    double edt_ms = 0.0;
    double solve_ms = 0.0;
};

struct Metrics
{
    static constexpr double kNone = std::numeric_limits<double>::infinity();

    long ticks = 0;
    double min_env_margin = kNone;   // min of x_c - (x_M - b)
    double min_self_margin = kNone;  // min of x_s - (x_M - b)
    double max_qdot_jump = 0.0;      // max tick-to-tick |delta qdot|
    double final_ee_position_error = 0.0;
    double final_ee_rotation_error = 0.0;
    double max_env_activation = 0.0;
    int env_edt_runs = 0;
    int self_edt_runs = 0;
    int degenerate_events = 0;
    double wall_seconds = 0.0;
};

struct SimState
{
    long tick = 0;
    double t = 0.0;
    Eigen::VectorXd q;
    Eigen::VectorXd qdot;
    std::vector<SphereState> spheres;
    Eigen::Isometry3d ee_pose = Eigen::Isometry3d::Identity();
    Eigen::Isometry3d ee_target = Eigen::Isometry3d::Identity();
    StageTimings timings;
    Metrics metrics;
    bool fault = false;
    std::string fault_message;
};

/// Owns the maps, distance fields and controller state of one run.
class Simulation
{
public:
    explicit Simulation(Scenario scenario);

    const Scenario& scenario() const { return m_scenario; }
    const KinematicChain& chain() const { return m_chain; }
    const SimState& state() const { return m_state; }
    const ObstacleSet& obstacles() const { return m_obstacles; }
    const VoxelGrid& environment_map() const { return m_env; }
    const VoxelGrid& self_map() const { return m_self; }
    const DistanceField& environment_field() const { return m_env_field; }
    const DistanceField& self_field() const { return m_self_field; }
    const std::vector<TaskLevel>& levels() const { return m_levels; }

    /// One control tick. Returns false, leaving q untouched, when a stage
    /// fails; the state is then flagged and further steps do nothing.
    bool step();
    bool finished() const;

    std::vector<std::pair<int, Eigen::Vector3d>> obstacle_positions() const;
    /// Replaces obstacle `id`'s motion by a fixed position. Throws on an unknown id.
    void set_obstacle_position(int id, const Eigen::Vector3d& p);
    /// Overrides the timed targets from now on.
    void set_target(const Eigen::Isometry3d& pose);
    void set_regularization(bool enabled);

    Eigen::Isometry3d target_at(double t) const;

private:
    void run_tick();

    Scenario m_scenario;
    KinematicChain m_chain;
    ObstacleSet m_obstacles;
    std::vector<BoundingSphere> m_spheres;
    std::vector<bool> m_has_self_row;
    std::vector<LocalVoxelSet> m_link_voxels;
    std::vector<int> m_self_links;

    VoxelGrid m_env;
    VoxelGrid m_self;
    VoxelGrid m_mask;
    OccupancySnapshot m_env_snapshot;
    OccupancySnapshot m_self_snapshot;
    DistanceField m_env_field;
    DistanceField m_self_field;
    bool m_env_valid = false;
    bool m_self_valid = false;

    long m_camera_frame = -1;
    PointCloud m_cloud;  // filtered, sensor frame

    DirectionMemory m_env_memory;
    DirectionMemory m_self_memory;
    std::vector<TaskLevel> m_levels;
    Eigen::Quaterniond m_initial_orientation = Eigen::Quaterniond::Identity();
    std::optional<Eigen::Isometry3d> m_target_override;
    bool m_have_qdot = false;

    SimState m_state;
};

/// Per-tick CSV; column order fixed by dof and sphere count.
class CsvLog
{
public:
    CsvLog(std::ostream& out, int dof, std::size_t spheres, bool with_header = true);
    void write(const SimState& s);
    static std::vector<std::string> columns(int dof, std::size_t spheres);
    /// Columns whose content depends on wall-clock time.
    static bool is_timing_column(const std::string& name);

private:
    std::ostream& m_out;
};

struct RunOptions
{
    std::ostream* csv = nullptr;
    long max_ticks = -1;  // -1: the scenario duration
};

struct RunResult
{
    Metrics metrics;
    bool fault = false;
    std::string fault_message;
    long ticks = 0;
};

RunResult run_scenario(const Scenario& scenario, const RunOptions& options = {});

/// Shortest round-trip decimal text, always with '.'.
std::string format_double(double v);

}  // namespace voxavoid
