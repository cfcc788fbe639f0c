#pragma once

#include <atomic>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Geometry>
#include <json.hpp>

#include "voxavoid/sim.hpp"

namespace voxavoid {

struct SetObstacleCommand
{
    int id = 0;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

struct SetTargetCommand
{
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

struct PauseCommand
{
};

struct ResumeCommand
{
};

struct ToggleRegularizationCommand
{
    bool enabled = true;
};

using Command = std::variant<SetObstacleCommand, SetTargetCommand, PauseCommand, ResumeCommand,
                             ToggleRegularizationCommand>;

struct CommandError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// Parses one command message. Obstacle ids must be in `obstacle_ids`; a
/// quaternion [qx, qy, qz, qw] within 1e-3 of unit norm is renormalized,
/// anything further off is rejected. Throws CommandError.
Command parse_command(const std::string& text, const std::vector<int>& obstacle_ids);

/// The snapshot message for the simulation's current state. Absent
/// distances are -1; "a" is the larger of the obstacle and self activations.
nlohmann::json snapshot_json(const Simulation& sim);

namespace detail {
struct UiServerCore;
}

/// WebSocket endpoint "/ws" on its own network thread. Snapshots go out at
/// 30 Hz, latest wins; commands are queued and never dropped.
class UiServer
{
public:
    /// Binds immediately; port 0 picks a free port. Throws std::runtime_error
    /// when the address cannot be bound.
    UiServer(std::vector<int> obstacle_ids, unsigned short port, const std::string& address = "127.0.0.1");
    ~UiServer();
    UiServer(const UiServer&) = delete;
    UiServer& operator=(const UiServer&) = delete;

    unsigned short port() const;
    void publish(std::string snapshot);
    std::vector<Command> take_commands();
    void stop();

private:
    std::shared_ptr<detail::UiServerCore> m_impl;
};

struct InteractiveState
{
    bool paused = false;
};

void apply_command(Simulation& sim, InteractiveState& state, const Command& command);

/// Drains commands, steps (unless paused) and publishes, paced to dt of wall
/// time, until `stop` is set. Keeps serving once the scenario duration is
/// over; the simulation then holds its last state. A faulted simulation also
/// holds. Returns the number of ticks run.
long run_interactive(Simulation& sim, UiServer& server, const std::atomic<bool>& stop);

}  // namespace voxavoid
