#include "voxavoid/ws_client.hpp"

#include <stdexcept>

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

struct WsClient::Impl
{
    net::io_context ioc;
    websocket::stream<beast::tcp_stream> ws{ioc};
    beast::flat_buffer buffer;
};

WsClient::WsClient(const std::string& host, unsigned short port, const std::string& path)
    : m_impl(std::make_unique<Impl>())
{
    try {
        tcp::resolver resolver(m_impl->ioc);
        auto& stream = beast::get_lowest_layer(m_impl->ws);
        stream.expires_after(std::chrono::seconds(5));
        stream.connect(resolver.resolve(host, std::to_string(port)));
        m_impl->ws.handshake(host + ":" + std::to_string(port), path);
        stream.expires_never();
    } catch (const beast::system_error& e) {
        throw std::runtime_error(std::string("websocket connect failed: ") + e.what());
    }
}

WsClient::~WsClient()
{
    close();
}

void WsClient::send(const nlohmann::json& message)
{
    m_impl->ws.text(true);
    m_impl->ws.write(net::buffer(message.dump()));
}

nlohmann::json WsClient::receive(std::chrono::milliseconds timeout)
{
    auto& impl = *m_impl;
    beast::error_code result = net::error::would_block;
    impl.ws.async_read(impl.buffer, [&](beast::error_code ec, std::size_t) { result = ec; });
    impl.ioc.restart();
    impl.ioc.run_for(timeout);
    if (result == net::error::would_block) {
        // Timed out: abandon the connection, a pending read cannot be resumed.
        beast::get_lowest_layer(impl.ws).close();
        impl.ioc.restart();
        impl.ioc.run();
        throw std::runtime_error("websocket receive timed out");
    }
    if (result) throw std::runtime_error("websocket receive failed: " + result.message());
    const std::string text = beast::buffers_to_string(impl.buffer.data());
    impl.buffer.consume(impl.buffer.size());
    return nlohmann::json::parse(text);
}

bool WsClient::is_open() const
{
    return m_impl->ws.is_open();
}

void WsClient::close()
{
    if (!m_impl || !m_impl->ws.is_open()) return;
    beast::error_code ec;
    beast::get_lowest_layer(m_impl->ws).expires_after(std::chrono::seconds(1));
    m_impl->ws.close(websocket::close_code::normal, ec);
}

int http_get_status(const std::string& host, unsigned short port, const std::string& path)
{
    net::io_context ioc;
    tcp::resolver resolver(ioc);
    beast::tcp_stream stream(ioc);
    stream.expires_after(std::chrono::seconds(5));
    stream.connect(resolver.resolve(host, std::to_string(port)));
    http::request<http::empty_body> req(http::verb::get, path, 11);
    req.set(http::field::host, host);
    http::write(stream, req);
    beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(stream, buffer, res);
    beast::error_code ec;
    stream.socket().shutdown(tcp::socket::shutdown_both, ec);
    return static_cast<int>(res.result_int());
}

}  // namespace voxavoid
