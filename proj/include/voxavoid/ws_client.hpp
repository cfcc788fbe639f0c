#pragma once

#include <chrono>
#include <memory>
#include <string>

#include <json.hpp>

namespace voxavoid {

/// Blocking WebSocket client for scripting the ui-server.
class WsClient
{
public:
    /// Connects and upgrades on `path`. Throws std::runtime_error.
    WsClient(const std::string& host, unsigned short port, const std::string& path = "/ws");
    ~WsClient();
    WsClient(const WsClient&) = delete;
    WsClient& operator=(const WsClient&) = delete;

    void send(const nlohmann::json& message);
    /// Next message; throws std::runtime_error on timeout or a closed connection.
    nlohmann::json receive(std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));
    bool is_open() const;
    void close();

private:
    struct Impl;
    std::unique_ptr<Impl> m_impl;
};

/// Plain HTTP GET status code, for probing non-WebSocket paths.
int http_get_status(const std::string& host, unsigned short port, const std::string& path);

}  // namespace voxavoid
