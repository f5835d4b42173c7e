#include "harness.hpp"

#include "swarm/ids.hpp"

#include <fstream>
#include <set>
#include <thread>

namespace swarm::testing {

std::filesystem::path fixture_path(const std::string& relative) { return std::filesystem::path(SWARM_FIXTURE_DIR) / relative; }

json load_fixture(const std::string& relative) { return gateway::read_json_file(fixture_path(relative)); }

UserContext alice() { return {"alice", "team-a", {"mlpipeline", "datasets", "team-a-data"}, "cred-team-a"}; }
UserContext bob() { return {"bob", "team-b", {"mlpipeline", "datasets", "team-b-data"}, "cred-team-b"}; }
UserContext mallory() { return {"mallory", "team-c", {}, ""}; }

gateway::GatewayConfig test_config(const std::string& script, std::optional<std::filesystem::path> data_dir) {
    gateway::GatewayConfig c;
    c.host = "127.0.0.1";
    c.port = 0;
    c.data_dir = std::move(data_dir);
    c.llm.provider = "scripted";
    c.llm.script = fixture_path("scripts/" + script);
    c.backends.fixture = fixture_path("diabetes.json");
    c.tokens.emplace(std::string(alice_token), alice());
    c.tokens.emplace(std::string(bob_token), bob());
    c.tokens.emplace(std::string(mallory_token), mallory());
    return c;
}

TempDir::TempDir(const std::string& tag)
    : path_(std::filesystem::temp_directory_path() / ("swarm-" + tag + "-" + random_hex(6))) {
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::vector<std::string> event_names(const std::vector<orch::TurnEvent>& events) {
    static const char* names[] = {"token", "tool_call", "tool_result", "final", "error"};
    std::vector<std::string> out;
    for (const auto& e : events) out.emplace_back(names[e.index()]);
    return out;
}

std::optional<std::string> event_grammar_violation(const std::vector<std::pair<std::string, json>>& events) {
    if (events.empty()) return "no events";
    std::set<std::string> open;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& [name, data] = events[i];
        bool last = i + 1 == events.size();
        if (name == "final" || name == "error") {
            if (!last) return "event after " + name + " at " + std::to_string(i);
            continue;
        }
        if (last) return "stream does not end with final or error";
        if (name == "tool_call") {
            if (!open.insert(data.at("id").get<std::string>()).second) return "duplicate tool_call id";
        } else if (name == "tool_result") {
            if (open.erase(data.at("id").get<std::string>()) != 1) return "tool_result without tool_call";
        } else if (name != "token") {
            return "unknown event " + name;
        }
    }
    if (!open.empty()) return "unanswered tool_call";
    return std::nullopt;
}

std::vector<std::pair<std::string, json>> parse_sse(std::string_view body) {
    std::vector<std::pair<std::string, json>> out;
    std::size_t pos = 0;
    while (pos < body.size()) {
        auto end = body.find("\n\n", pos);
        if (end == std::string_view::npos) break;
        auto frame = body.substr(pos, end - pos);
        pos = end + 2;
        std::string event, data;
        std::size_t line_start = 0;
        while (line_start <= frame.size()) {
            auto nl = frame.find('\n', line_start);
            auto line = frame.substr(line_start, nl == std::string_view::npos ? std::string_view::npos : nl - line_start);
            if (line.starts_with("event: ")) event = line.substr(7);
            if (line.starts_with("data: ")) data = line.substr(6);
            if (nl == std::string_view::npos) break;
            line_start = nl + 1;
        }
        out.emplace_back(event, json::parse(data));
    }
    return out;
}

std::function<orch::ToolHandler(const llm::ToolDescriptor&, orch::ToolHandler)> CallRecorder::wrapper() {
    return [this](const llm::ToolDescriptor& d, orch::ToolHandler inner) -> orch::ToolHandler {
        return [this, name = d.name, inner = std::move(inner)](const json& args, const UserContext& ctx) {
            auto start = std::chrono::steady_clock::now();
            std::chrono::milliseconds delay;
            {
                std::lock_guard lock(mu_);
                auto it = per_tool_.find(name);
                delay = it == per_tool_.end() ? delay_ : it->second;
            }
            if (delay.count() > 0) std::this_thread::sleep_for(delay);
            auto record = [&] {
                std::lock_guard lock(mu_);
                intervals_.push_back({name, start, std::chrono::steady_clock::now()});
            };
            try {
                auto out = inner(args, ctx);
                record();
                return out;
            } catch (...) {
                record();
                throw;
            }
        };
    };
}

std::vector<CallRecorder::Interval> CallRecorder::intervals() const {
    std::lock_guard lock(mu_);
    return intervals_;
}

void CallRecorder::set_delay_for(const std::string& tool, std::chrono::milliseconds delay) {
    std::lock_guard lock(mu_);
    per_tool_[tool] = delay;
}

void EchoProvider::complete_streaming(std::span<const llm::ChatMessage> history, std::span<const llm::ToolDescriptor>,
                                      const llm::LlmParams&, const llm::EventSink& sink) {
    const llm::ChatMessage* user = nullptr;
    for (auto it = history.rbegin(); it != history.rend() && !user; ++it)
        if (it->role == llm::Role::user) user = &*it;
    if (!user) {
        sink(llm::Finished{llm::FinishReason::error, llm::LlmErrorKind::malformed_stream, "no user message"});
        return;
    }
    if (history.back().role == llm::Role::user) {
        auto base = "c" + hex64(fnv1a64(user->content));
        sink(llm::ToolCallDelta{0, base + "-1", "list_user_buckets", "{}"});
        sink(llm::ToolCallDelta{1, base + "-2", "get_pipelines", "{}"});
        sink(llm::Finished{llm::FinishReason::tool_calls, {}, {}});
        return;
    }
    sink(llm::TextDelta{"done " + user->content});
    sink(llm::Finished{});
}

bool overlaps(const CallRecorder::Interval& a, const CallRecorder::Interval& b) {
    return a.start < b.end && b.start < a.end;
}

} // namespace swarm::testing
