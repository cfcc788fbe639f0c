#include "voxavoid/ui_server.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace voxavoid {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

Eigen::Vector3d finite_vec3(const json& j, const char* what)
{
    if (!j.is_array() || j.size() != 3 || !std::all_of(j.begin(), j.end(), [](const json& v) { return v.is_number(); })) {
        throw CommandError(std::string(what) + " must be an array of 3 numbers");
    }
    Eigen::Vector3d v(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
    if (!v.allFinite()) throw CommandError(std::string(what) + " must be finite");
    return v;
}

json pose_json(const Eigen::Isometry3d& pose)
{
    const Eigen::Quaterniond q(pose.linear());
    const Eigen::Vector3d& p = pose.translation();
    return json::array({p.x(), p.y(), p.z(), q.x(), q.y(), q.z(), q.w()});
}

json vec_json(const Eigen::Vector3d& v)
{
    return json::array({v.x(), v.y(), v.z()});
}

}  // namespace

Command parse_command(const std::string& text, const std::vector<int>& obstacle_ids)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw CommandError(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
        throw CommandError("command must be an object with a string \"type\"");
    }
    const std::string type = j["type"].get<std::string>();
    if (type == "set_obstacle") {
        if (!j.contains("id") || !j["id"].is_number_integer()) throw CommandError("set_obstacle needs an integer id");
        const int id = j["id"].get<int>();
        if (std::find(obstacle_ids.begin(), obstacle_ids.end(), id) == obstacle_ids.end()) {
            throw CommandError("unknown obstacle id " + std::to_string(id));
        }
        if (!j.contains("position")) throw CommandError("set_obstacle needs a position");
        return SetObstacleCommand{id, finite_vec3(j["position"], "position")};
    }
    if (type == "set_target") {
        if (!j.contains("position") || !j.contains("quaternion")) {
            throw CommandError("set_target needs position and quaternion");
        }
        const json& jq = j["quaternion"];
        if (!jq.is_array() || jq.size() != 4 || !std::all_of(jq.begin(), jq.end(), [](const json& v) { return v.is_number(); })) {
            throw CommandError("quaternion must be an array of 4 numbers [qx, qy, qz, qw]");
        }
        Eigen::Quaterniond q(jq[3].get<double>(), jq[0].get<double>(), jq[1].get<double>(), jq[2].get<double>());
        const double norm = q.norm();
        if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-3) {
            throw CommandError("quaternion norm must be within 1e-3 of 1");
        }
        return SetTargetCommand{finite_vec3(j["position"], "position"), q.normalized()};
    }
    if (type == "pause") return PauseCommand{};
    if (type == "resume") return ResumeCommand{};
    if (type == "toggle_regularization") {
        if (!j.contains("enabled") || !j["enabled"].is_boolean()) {
            throw CommandError("toggle_regularization needs a boolean \"enabled\"");
        }
        return ToggleRegularizationCommand{j["enabled"].get<bool>()};
    }
    throw CommandError("unknown command type '" + type + "'");
}

json snapshot_json(const Simulation& sim)
{
    const SimState& s = sim.state();
    json spheres = json::array();
    for (const auto& sp : s.spheres) {
        spheres.push_back({{"c", vec_json(sp.center)},
                           {"r", sp.radius},
                           {"xc", sp.xc},
                           {"xs", sp.xs},
                           {"a", std::max(sp.ac, sp.as)}});
    }
    json obstacles = json::array();
    for (const auto& [id, p] : sim.obstacle_positions()) obstacles.push_back({{"id", id}, {"position", vec_json(p)}});
    return {{"type", "snapshot"},
            {"t", s.t},
            {"q", std::vector<double>(s.q.data(), s.q.data() + s.q.size())},
            {"spheres", std::move(spheres)},
            {"obstacles", std::move(obstacles)},
            {"ee", {{"pose", pose_json(s.ee_pose)}, {"target", pose_json(s.ee_target)}}},
            {"timings",
             {{"clear", s.timings.clear_ms}, {"insert", s.timings.insert_ms}, {"edt", s.timings.edt_ms},
              {"solve", s.timings.solve_ms}}}};
}

class Session;

namespace detail {

struct UiServerCore
{
    explicit UiServerCore(std::vector<int> ids) : obstacle_ids(std::move(ids)) {}

    void accept();
    void schedule_broadcast();

    net::io_context ioc{1};
    tcp::acceptor acceptor{ioc};
    net::steady_timer timer{ioc};
    std::chrono::steady_clock::time_point next_broadcast;
    std::vector<int> obstacle_ids;
    std::vector<std::weak_ptr<Session>> sessions;  // network thread only
    std::thread thread;

    std::mutex mutex;
    std::string latest;
    std::vector<Command> commands;
    bool stopped = false;
};

}  // namespace detail

using detail::UiServerCore;

class Session : public std::enable_shared_from_this<Session>
{
public:
    Session(tcp::socket socket, UiServerCore& server) : m_ws(std::move(socket)), m_server(server) {}

    void start()
    {
        http::async_read(m_ws.next_layer(), m_buffer, m_request,
                         [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
    }

    // Snapshots replace a snapshot still waiting in the queue; errors always queue.
    void send(std::shared_ptr<const std::string> text, bool snapshot)
    {
        if (snapshot) {
            const std::size_t first_unsent = m_writing ? 1 : 0;
            for (std::size_t i = first_unsent; i < m_queue.size(); ++i) {
                if (m_queue[i].second) {
                    m_queue[i].first = std::move(text);
                    return;
                }
            }
        }
        m_queue.emplace_back(std::move(text), snapshot);
        if (!m_writing) write_next();
    }

private:
    void on_request(beast::error_code ec)
    {
        if (ec) return;
        if (!websocket::is_upgrade(m_request) || m_request.target() != "/ws") {
            m_response = std::make_shared<http::response<http::string_body>>(http::status::not_found, m_request.version());
            m_response->set(http::field::content_type, "text/plain");
            m_response->body() = "websocket endpoint is /ws\n";
            m_response->prepare_payload();
            http::async_write(m_ws.next_layer(), *m_response, [self = shared_from_this()](beast::error_code, std::size_t) {
                beast::error_code ignored;
                self->m_ws.next_layer().socket().shutdown(tcp::socket::shutdown_send, ignored);
            });
            return;
        }
        m_ws.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        m_ws.async_accept(m_request, [self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            self->m_ws.text(true);
            self->m_server.sessions.push_back(self);
            self->read();
        });
    }

    void read()
    {
        m_ws.async_read(m_buffer, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
    }

    void on_read(beast::error_code ec)
    {
        if (ec) return;
        const std::string text = beast::buffers_to_string(m_buffer.data());
        m_buffer.consume(m_buffer.size());
        try {
            Command c = parse_command(text, m_server.obstacle_ids);
            std::lock_guard lock(m_server.mutex);
            m_server.commands.push_back(std::move(c));
        } catch (const CommandError& e) {
            const json err = {{"type", "error"}, {"detail", e.what()}};
            send(std::make_shared<const std::string>(err.dump()), false);
        }
        read();
    }

    void write_next()
    {
        m_writing = true;
        m_ws.async_write(net::buffer(*m_queue.front().first), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return;
            self->m_queue.pop_front();
            if (self->m_queue.empty()) {
                self->m_writing = false;
            } else {
                self->write_next();
            }
        });
    }

    websocket::stream<beast::tcp_stream> m_ws;
    UiServerCore& m_server;
    beast::flat_buffer m_buffer;
    http::request<http::string_body> m_request;
    std::shared_ptr<http::response<http::string_body>> m_response;
    std::deque<std::pair<std::shared_ptr<const std::string>, bool>> m_queue;
    bool m_writing = false;
};

void UiServerCore::accept()
{
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
        if (ec) {
            if (ec == net::error::operation_aborted) return;
        } else {
            std::make_shared<Session>(std::move(socket), *this)->start();
        }
        accept();
    });
}

void UiServerCore::schedule_broadcast()
{
    using namespace std::chrono;
    next_broadcast += duration_cast<steady_clock::duration>(duration<double>(1.0 / 30.0));
    timer.expires_at(next_broadcast);
    timer.async_wait([this](beast::error_code ec) {
        if (ec) return;
        std::shared_ptr<const std::string> text;
        {
            std::lock_guard lock(mutex);
            if (!latest.empty()) text = std::make_shared<const std::string>(latest);
        }
        sessions.erase(std::remove_if(sessions.begin(), sessions.end(), [](const auto& w) { return w.expired(); }),
                       sessions.end());
        if (text) {
            for (const auto& w : sessions) {
                if (auto s = w.lock()) s->send(text, true);
            }
        }
        schedule_broadcast();
    });
}

UiServer::UiServer(std::vector<int> obstacle_ids, unsigned short port, const std::string& address)
    : m_impl(std::make_shared<UiServerCore>(std::move(obstacle_ids)))
{
    beast::error_code ec;
    const auto ip = net::ip::make_address(address, ec);
    if (ec) throw std::runtime_error("invalid listen address '" + address + "'");
    const tcp::endpoint endpoint(ip, port);
    auto& acc = m_impl->acceptor;
    acc.open(endpoint.protocol(), ec);
    if (!ec) acc.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acc.bind(endpoint, ec);
    if (!ec) acc.listen(net::socket_base::max_listen_connections, ec);
    if (ec) throw std::runtime_error("cannot listen on " + address + ":" + std::to_string(port) + ": " + ec.message());

    m_impl->accept();
    m_impl->next_broadcast = std::chrono::steady_clock::now();
    m_impl->schedule_broadcast();
    m_impl->thread = std::thread([impl = m_impl.get()] { impl->ioc.run(); });
}

UiServer::~UiServer()
{
    stop();
}

unsigned short UiServer::port() const
{
    return m_impl->acceptor.local_endpoint().port();
}

void UiServer::publish(std::string snapshot)
{
    std::lock_guard lock(m_impl->mutex);
    m_impl->latest = std::move(snapshot);
}

std::vector<Command> UiServer::take_commands()
{
    std::lock_guard lock(m_impl->mutex);
    return std::exchange(m_impl->commands, {});
}

void UiServer::stop()
{
    {
        std::lock_guard lock(m_impl->mutex);
        if (m_impl->stopped) return;
        m_impl->stopped = true;
    }
    m_impl->ioc.stop();
    if (m_impl->thread.joinable()) m_impl->thread.join();
}

void apply_command(Simulation& sim, InteractiveState& state, const Command& command)
{
    std::visit(
        [&](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, SetObstacleCommand>) {
                sim.set_obstacle_position(c.id, c.position);
            } else if constexpr (std::is_same_v<T, SetTargetCommand>) {
                Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
                pose.linear() = c.orientation.toRotationMatrix();
                pose.translation() = c.position;
                sim.set_target(pose);
            } else if constexpr (std::is_same_v<T, PauseCommand>) {
                state.paused = true;
            } else if constexpr (std::is_same_v<T, ResumeCommand>) {
                state.paused = false;
            } else {
                sim.set_regularization(c.enabled);
            }
        },
        command);
}

long run_interactive(Simulation& sim, UiServer& server, const std::atomic<bool>& stop)
{
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(sim.scenario().dt));
    InteractiveState state;
    long ticks = 0;
    auto next = clock::now();
    while (!stop.load()) {
        for (const auto& c : server.take_commands()) apply_command(sim, state, c);
        if (!state.paused && !sim.finished()) {
            if (sim.step()) ++ticks;
        }
        server.publish(snapshot_json(sim).dump());
        next += period;
        const auto now = clock::now();
        if (next < now - std::chrono::milliseconds(100)) next = now;  // fell behind: do not burst
        std::this_thread::sleep_until(next);
    }
    return ticks;
}

}  // namespace voxavoid
