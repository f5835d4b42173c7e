#include "swarm/gateway/server.hpp"

#include "swarm/utf8.hpp"

#include <iostream>
#include <thread>

namespace swarm::gateway {

using nlohmann::json;

namespace {

constexpr std::size_t summary_bytes = 160;

void send_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", {{"status", status}, {"message", message}}}}.dump(), "application/json");
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

/// Maps session-store failures to HTTP statuses.
template <class Fn>
bool with_session(httplib::Response& res, Fn&& fn) {
    try {
        fn();
        return true;
    } catch (const session::StoreError& e) {
        switch (e.kind()) {
        case session::StoreErrorKind::session_not_found: send_error(res, 404, e.what()); break;
        case session::StoreErrorKind::permission_denied: send_error(res, 403, e.what()); break;
        default: send_error(res, 500, e.what()); break;
        }
        return false;
    }
}

} // namespace

std::string sse_frame(std::string_view event, const json& data) {
    std::string out = "event: ";
    out.append(event);
    out += "\ndata: ";
    out += data.dump();
    out += "\n\n";
    return out;
}

std::string result_summary(const orch::ToolResult& result) {
    if (result.status == orch::ResultStatus::error) {
        auto env = ErrorEnvelope::from_json(result.content);
        return std::string(to_string(env.error_type)) + ": " + env.message;
    }
    auto text = result.content.dump();
    if (text.size() <= summary_bytes) return text;
    return std::string(utf8_prefix(text, summary_bytes)) + "...";
}

WireEvent to_wire(const orch::TurnEvent& event) {
    return std::visit(
        [](const auto& ev) -> WireEvent {
            using T = std::decay_t<decltype(ev)>;
            if constexpr (std::is_same_v<T, orch::TokenEvent>) {
                return {"token", {{"text", ev.text}}};
            } else if constexpr (std::is_same_v<T, orch::ToolCallStarted>) {
                return {"tool_call", {{"id", ev.call.id}, {"name", ev.call.name}, {"arguments", ev.call.arguments}}};
            } else if constexpr (std::is_same_v<T, orch::ToolResultEvent>) {
                bool ok = ev.result.status == orch::ResultStatus::ok;
                json data{{"id", ev.result.call_id},
                          {"name", ev.name},
                          {"status", ok ? "ok" : "error"},
                          {"summary", result_summary(ev.result)},
                          {"elapsed_ms", ev.result.elapsed.count()}};
                if (!ok) data["envelope"] = ev.result.content;
                return {"tool_result", std::move(data)};
            } else if constexpr (std::is_same_v<T, orch::FinalEvent>) {
                return {"final", {{"message", ev.message}, {"truncated", ev.truncated}, {"iterations", ev.iterations}}};
            } else {
                return {"error", {{"envelope", ev.envelope.to_json()}}};
            }
        },
        event);
}

void EventChannel::push(std::string frame) {
    {
        std::lock_guard lock(mu_);
        if (abandoned_ || closed_) return;
        frames_.push_back(std::move(frame));
    }
    cv_.notify_all();
}

void EventChannel::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

void EventChannel::abandon() {
    {
        std::lock_guard lock(mu_);
        abandoned_ = true;
        frames_.clear();
    }
    cv_.notify_all();
}

bool EventChannel::next(std::string& frame) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return abandoned_ || closed_ || !frames_.empty(); });
    if (abandoned_ || frames_.empty()) return false;
    frame = std::move(frames_.front());
    frames_.pop_front();
    return true;
}

GatewayServer::GatewayServer(App& app, std::size_t worker_threads) : app_(app) {
    http_.new_task_queue = [worker_threads] { return new httplib::ThreadPool(worker_threads); };
    routes();
}

GatewayServer::~GatewayServer() { stop(); }

int GatewayServer::bind(const std::string& host, int port) {
    if (port == 0) return http_.bind_to_any_port(host);
    return http_.bind_to_port(host, port) ? port : -1;
}

bool GatewayServer::serve() { return http_.listen_after_bind(); }

void GatewayServer::stop() {
    if (http_.is_running()) http_.stop();
    drain();
}

void GatewayServer::drain() {
    std::unique_lock lock(turns_mu_);
    turns_cv_.wait(lock, [&] { return turns_ == 0; });
}

std::size_t GatewayServer::turns_in_flight() const {
    std::lock_guard lock(turns_mu_);
    return turns_;
}

const UserContext* GatewayServer::authenticate(const httplib::Request& req, httplib::Response& res) const {
    auto header = req.get_header_value("Authorization");
    constexpr std::string_view scheme = "Bearer ";
    const UserContext* ctx = nullptr;
    if (header.starts_with(scheme)) ctx = app_.authenticate(std::string_view(header).substr(scheme.size()));
    if (!ctx) {
        res.set_header("WWW-Authenticate", "Bearer");
        send_error(res, 401, "missing or unknown bearer token");
    }
    return ctx;
}

void GatewayServer::routes() {
    http_.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        const auto* ctx = authenticate(req, res);
        if (!ctx) return;
        auto s = app_.sessions().create_session(*ctx);
        send_json(res, 201, {{"session_id", s.session_id},
                             {"thread_id", s.thread_id},
                             {"namespace", ctx->namespace_name},
                             {"created_at", format_timestamp(s.created_at)}});
    });

    http_.Get("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        const auto* ctx = authenticate(req, res);
        if (!ctx) return;
        json list = json::array();
        for (const auto& s : app_.sessions().list_sessions(ctx->user_id)) list.push_back(session::to_json(s));
        send_json(res, 200, {{"sessions", list}});
    });

    http_.Get("/api/sessions/:id/history", [this](const httplib::Request& req, httplib::Response& res) {
        const auto* ctx = authenticate(req, res);
        if (!ctx) return;
        const auto& id = req.path_params.at("id");
        with_session(res, [&] {
            auto history = app_.sessions().get_history(id, ctx->user_id);
            json messages = json::array();
            for (const auto& m : *history) messages.push_back(llm::to_json(m));
            send_json(res, 200, {{"session_id", id}, {"messages", messages}});
        });
    });

    http_.Post("/api/sessions/:id/messages", [this](const httplib::Request& req, httplib::Response& res) {
        const auto* ctx = authenticate(req, res);
        if (!ctx) return;
        post_message(*ctx, req, res);
    });

    http_.Get("/api/artifacts/:token", [this](const httplib::Request& req, httplib::Response& res) {
        const auto* ctx = authenticate(req, res);
        if (!ctx) return;
        get_artifact(*ctx, req, res);
    });

    http_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        send_error(res, 500, what);
    });
}

void GatewayServer::post_message(const UserContext& ctx, const httplib::Request& req, httplib::Response& res) {
    const auto& id = req.path_params.at("id");
    if (!with_session(res, [&] { app_.sessions().get_session(id, ctx.user_id); })) return;

    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("text") || !body["text"].is_string() ||
        body["text"].get_ref<const std::string&>().empty())
        return send_error(res, 400, "body must be {\"text\": <non-empty string>}");
    auto text = body["text"].get<std::string>();

    std::optional<orch::Orchestrator::TurnLease> lease;
    try {
        lease.emplace(app_.orchestrator().acquire(id));
    } catch (const orch::TurnError& e) {
        return send_error(res, 409, e.what());
    } catch (const session::StoreError& e) {
        return send_error(res, 404, e.what());
    }

    auto channel = std::make_shared<EventChannel>();
    {
        std::lock_guard lock(turns_mu_);
        ++turns_;
    }
    std::thread([this, channel, text = std::move(text), lease = std::move(*lease)]() mutable {
        auto sink = [&](const orch::TurnEvent& ev) {
            auto wire = to_wire(ev);
            channel->push(sse_frame(wire.event, wire.data));
        };
        try {
            app_.orchestrator().run_turn(std::move(lease), text, sink);
        } catch (const std::exception& e) {
            auto env = ErrorEnvelope::make(ErrorType::internal, e.what());
            channel->push(sse_frame("error", {{"envelope", env.to_json()}}));
        }
        channel->close();
        try {
            app_.persist();
        } catch (const std::exception& e) {
            std::cerr << "persist failed: " << e.what() << '\n';
        }
        {
            std::lock_guard lock(turns_mu_);
            --turns_;
        }
        turns_cv_.notify_all();
    }).detach();

    res.status = 200;
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [channel](std::size_t, httplib::DataSink& sink) {
            std::string frame;
            if (!channel->next(frame)) {
                sink.done();
                return true;
            }
            if (!sink.write(frame.data(), frame.size())) {
                channel->abandon();
                return false;
            }
            return true;
        },
        [channel](bool) { channel->abandon(); });
}

void GatewayServer::get_artifact(const UserContext& ctx, const httplib::Request& req, httplib::Response& res) {
    auto target = app_.presign().resolve(req.path_params.at("token"));
    if (!target) return send_error(res, 404, "unknown or expired artifact handle");
    if (target->user_id != ctx.user_id) return send_error(res, 403, "artifact handle belongs to another user");
    if (!ctx.can_access_bucket(target->bucket))
        return send_error(res, 403, "no access to bucket '" + target->bucket + "'");
    std::optional<minio::StoredObject> object;
    try {
        object = app_.objects().get_object(target->bucket, target->key);
    } catch (const ToolError& e) {
        return send_error(res, e.kind() == ErrorType::not_found ? 404 : 502, e.what());
    }
    if (!object) return send_error(res, 404, "object no longer exists");
    res.status = 200;
    res.set_content(std::move(object->bytes),
                    object->content_type.empty() ? "application/octet-stream" : object->content_type);
}

} // namespace swarm::gateway
