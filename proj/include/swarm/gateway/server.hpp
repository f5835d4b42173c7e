#pragma once

#include "swarm/gateway/app.hpp"

#include <httplib.h>

#include <condition_variable>
#include <deque>

namespace swarm::gateway {

/// "event: <type>\ndata: <json>\n\n"
std::string sse_frame(std::string_view event, const nlohmann::json& data);

struct WireEvent {
    std::string event;  // token | tool_call | tool_result | final | error
    nlohmann::json data;
};

/// token {text}; tool_call {id, name, arguments}; tool_result {id, name,
/// status, summary, elapsed_ms[, envelope]}; final {message, truncated,
/// iterations}; error {envelope}.
WireEvent to_wire(const orch::TurnEvent& event);

/// One line describing a tool result for trace views.
std::string result_summary(const orch::ToolResult& result);

/// Frames produced by a turn thread and drained by one HTTP response. The
/// producer never blocks; once the reader is gone frames are dropped.
class EventChannel {
public:
    void push(std::string frame);
    void close();
    void abandon();
    /// Blocks for the next frame; false once closed and drained or abandoned.
    bool next(std::string& frame);

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::string> frames_;
    bool closed_ = false;
    bool abandoned_ = false;
};

/// HTTP front door. Every route authenticates the bearer token before
/// touching any state. Turns run on their own threads and finish even when
/// the client disconnects.
class GatewayServer {
public:
    explicit GatewayServer(App& app, std::size_t worker_threads = 32);
    ~GatewayServer();

    GatewayServer(const GatewayServer&) = delete;
    GatewayServer& operator=(const GatewayServer&) = delete;

    /// Binds to `port` (0 picks a free one) and returns the bound port, or -1.
    int bind(const std::string& host, int port);
    /// Serves until stop(); returns false if the listener failed.
    bool serve();
    /// Stops accepting connections, then waits for in-flight turns.
    void stop();
    void drain();
    std::size_t turns_in_flight() const;

private:
    void routes();
    const UserContext* authenticate(const httplib::Request& req, httplib::Response& res) const;
    void post_message(const UserContext& ctx, const httplib::Request& req, httplib::Response& res);
    void get_artifact(const UserContext& ctx, const httplib::Request& req, httplib::Response& res);

    App& app_;
    httplib::Server http_;
    mutable std::mutex turns_mu_;
    std::condition_variable turns_cv_;
    std::size_t turns_ = 0;
};

} // namespace swarm::gateway
