#include "swarm/session/session_store.hpp"

#include "swarm/ids.hpp"
#include "swarm/utf8.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace swarm {

nlohmann::json to_json(const UserContext& ctx) {
    return {{"user_id", ctx.user_id},
            {"namespace", ctx.namespace_name},
            {"allowed_buckets", ctx.allowed_buckets},
            {"credential_ref", ctx.credential_ref}};
}

UserContext user_context_from_json(const nlohmann::json& j) {
    UserContext ctx;
    ctx.user_id = j.at("user_id").get<std::string>();
    ctx.namespace_name = j.at("namespace").get<std::string>();
    ctx.allowed_buckets = j.value("allowed_buckets", std::set<std::string>{});
    ctx.credential_ref = j.value("credential_ref", "");
    return ctx;
}

} // namespace swarm

namespace swarm::session {

namespace fs = std::filesystem;
using llm::Role;
using nlohmann::json;

std::string_view to_string(StoreErrorKind kind) {
    switch (kind) {
    case StoreErrorKind::session_not_found: return "SessionNotFound";
    case StoreErrorKind::permission_denied: return "PermissionDenied";
    case StoreErrorKind::pairing_violation: return "PairingViolation";
    case StoreErrorKind::storage_unavailable: return "StorageUnavailable";
    }
    return "StorageUnavailable";
}

json to_json(const SessionSummary& s) {
    return {{"session_id", s.session_id},
            {"thread_id", s.thread_id},
            {"excerpt", s.excerpt},
            {"message_count", s.message_count},
            {"updated_at", format_timestamp(s.updated_at)}};
}

std::optional<std::string> pairing_violation(std::span<const ChatMessage> history) {
    std::set<std::string> open;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < history.size(); ++i) {
        const auto& msg = history[i];
        for (const auto& call : msg.tool_calls) {
            if (!seen.insert(call.id).second) return "tool call id " + call.id + " reused at message " + std::to_string(i);
            open.insert(call.id);
        }
        if (msg.role == Role::tool) {
            if (open.erase(msg.tool_call_id) == 0)
                return "tool message " + std::to_string(i) + " answers unknown or already answered call " +
                       msg.tool_call_id;
        }
    }
    if (!open.empty()) return "tool call " + *open.begin() + " has no result";
    return std::nullopt;
}

namespace {

std::string excerpt_of(const std::vector<ChatMessage>& history) {
    for (const auto& msg : history) {
        if (msg.role != Role::user) continue;
        return std::string(utf8_prefix(msg.content, 80));
    }
    return {};
}

void redact(std::string& text, const std::string& secret) {
    if (secret.empty()) return;
    for (auto pos = text.find(secret); pos != std::string::npos; pos = text.find(secret, pos))
        text.replace(pos, secret.size(), "[redacted]");
}

void write_file_atomically(const fs::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        out.flush();
        if (!out) throw StoreError(StoreErrorKind::storage_unavailable, "cannot write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw StoreError(StoreErrorKind::storage_unavailable, "cannot replace " + path.string() + ": " + ec.message());
}

} // namespace

SessionStore::SessionStore() = default;

SessionStore::SessionStore(fs::path data_dir) : data_dir_(std::move(data_dir)) {
    std::error_code ec;
    fs::create_directories(*data_dir_ / "sessions", ec);
    if (ec) throw StoreError(StoreErrorKind::storage_unavailable, "cannot create " + data_dir_->string());
    load();
}

fs::path SessionStore::log_path(const std::string& session_id) const {
    return *data_dir_ / "sessions" / (session_id + ".log");
}

void SessionStore::load() {
    for (const auto& item : fs::directory_iterator(*data_dir_ / "sessions")) {
        if (item.path().extension() != ".log") continue;
        std::ifstream in(item.path(), std::ios::binary);
        std::string line;
        std::shared_ptr<Entry> entry;
        std::vector<ChatMessage> history;
        std::uintmax_t good_bytes = 0;
        std::uintmax_t offset = 0;
        while (std::getline(in, line)) {
            bool complete = !in.eof();
            offset += line.size() + (complete ? 1 : 0);
            if (!complete) break;  // torn final write
            auto record = json::parse(line, nullptr, false);
            if (record.is_discarded()) break;
            auto type = record.value("type", "");
            if (type == "session" && !entry) {
                entry = std::make_shared<Entry>();
                entry->session_id = record.at("session_id").get<std::string>();
                entry->thread_id = record.at("thread_id").get<std::string>();
                entry->user = user_context_from_json(record.at("user"));
                entry->created_at = parse_timestamp(record.at("created_at").get<std::string>());
                entry->updated_at = entry->created_at;
            } else if (type == "append" && entry) {
                for (const auto& m : record.at("messages")) {
                    auto msg = llm::message_from_json(m);
                    for (const auto& call : msg.tool_calls) {
                        entry->used_call_ids.insert(call.id);
                        entry->open_calls.insert(call.id);
                    }
                    if (msg.role == Role::tool) entry->open_calls.erase(msg.tool_call_id);
                    history.push_back(std::move(msg));
                }
                entry->updated_at = std::max(entry->updated_at, parse_timestamp(record.at("at").get<std::string>()));
            } else {
                break;
            }
            good_bytes = offset;
        }
        in.close();
        if (!entry) continue;
        if (fs::file_size(item.path()) != good_bytes) fs::resize_file(item.path(), good_bytes);
        entry->log_bytes = good_bytes;
        entry->history = std::make_shared<const std::vector<ChatMessage>>(std::move(history));
        sessions_[entry->session_id] = entry;
    }
    write_index();
}

void SessionStore::write_log_line(const fs::path& path, const std::string& line, std::uintmax_t& good_bytes) {
    std::optional<std::size_t> fault;
    {
        std::lock_guard lock(fault_mu_);
        fault.swap(fault_after_bytes_);
    }
    std::error_code ec;
    if (fs::file_size(path, ec) != good_bytes || ec) fs::resize_file(path, good_bytes, ec);
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw StoreError(StoreErrorKind::storage_unavailable, "cannot open " + path.string());
    if (fault) {
        // leave a torn tail, as a crash would; the next write or reload truncates it
        out.write(line.data(), static_cast<std::streamsize>(std::min(*fault, line.size())));
        out.flush();
        throw StoreError(StoreErrorKind::storage_unavailable, "injected write fault");
    }
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (!out) throw StoreError(StoreErrorKind::storage_unavailable, "write failed for " + path.string());
    good_bytes += line.size();
}

void SessionStore::write_index() const {
    if (!data_dir_) return;
    json sessions = json::array();
    {
        std::shared_lock lock(mu_);
        for (const auto& [id, entry] : sessions_) {
            std::lock_guard snap(entry->snapshot_mu);
            sessions.push_back({{"session_id", id},
                                {"thread_id", entry->thread_id},
                                {"user_id", entry->user.user_id},
                                {"created_at", format_timestamp(entry->created_at)},
                                {"updated_at", format_timestamp(entry->updated_at)},
                                {"message_count", entry->history ? entry->history->size() : 0}});
        }
    }
    std::lock_guard lock(index_mu_);
    write_file_atomically(*data_dir_ / "sessions" / "index.json", json{{"sessions", sessions}}.dump(2));
}

Session SessionStore::create_session(const UserContext& user) {
    if (user.user_id.empty()) throw std::invalid_argument("user_id is empty");
    if (user.namespace_name.empty()) throw std::invalid_argument("namespace is empty");

    auto entry = std::make_shared<Entry>();
    entry->session_id = "sess-" + random_hex(16);
    entry->thread_id = "thread-" + random_hex(8);
    entry->user = user;
    entry->created_at = now_utc();
    entry->updated_at = entry->created_at;
    entry->history = std::make_shared<const std::vector<ChatMessage>>();

    if (data_dir_) {
        json header{{"type", "session"},
                    {"session_id", entry->session_id},
                    {"thread_id", entry->thread_id},
                    {"user", to_json(user)},
                    {"created_at", format_timestamp(entry->created_at)}};
        auto line = header.dump() + "\n";
        write_file_atomically(log_path(entry->session_id), line);
        entry->log_bytes = line.size();
    }
    {
        std::unique_lock lock(mu_);
        sessions_[entry->session_id] = entry;
    }
    write_index();
    return {entry->session_id, entry->thread_id, entry->user, entry->history, entry->created_at, entry->updated_at};
}

std::size_t SessionStore::append_messages(const std::string& session_id, std::vector<ChatMessage> msgs) {
    auto entry = find(session_id);
    std::lock_guard write_lock(entry->write_mu);

    auto open = entry->open_calls;
    auto used = entry->used_call_ids;
    for (auto& msg : msgs) {
        try {
            llm::validate(msg);
        } catch (const std::invalid_argument& e) {
            throw StoreError(StoreErrorKind::pairing_violation, e.what());
        }
        for (const auto& call : msg.tool_calls) {
            if (!used.insert(call.id).second)
                throw StoreError(StoreErrorKind::pairing_violation, "tool call id " + call.id + " already used");
            open.insert(call.id);
        }
        if (msg.role == Role::tool && open.erase(msg.tool_call_id) == 0)
            throw StoreError(StoreErrorKind::pairing_violation,
                             "tool message answers unknown call " + msg.tool_call_id);
        redact(msg.content, entry->user.credential_ref);
        if (msg.created_at == Timestamp{}) msg.created_at = now_utc();
    }

    auto at = std::max(entry->updated_at, now_utc());
    if (data_dir_) {
        json batch = json::array();
        for (const auto& msg : msgs) batch.push_back(llm::to_json(msg));
        json record{{"type", "append"}, {"at", format_timestamp(at)}, {"messages", std::move(batch)}};
        write_log_line(log_path(session_id), record.dump() + "\n", entry->log_bytes);
    } else {
        std::lock_guard lock(fault_mu_);
        if (fault_after_bytes_) {
            fault_after_bytes_.reset();
            throw StoreError(StoreErrorKind::storage_unavailable, "injected write fault");
        }
    }

    std::size_t length = 0;
    {
        std::lock_guard snap(entry->snapshot_mu);
        auto next = std::make_shared<std::vector<ChatMessage>>(*entry->history);
        next->insert(next->end(), std::make_move_iterator(msgs.begin()), std::make_move_iterator(msgs.end()));
        length = next->size();
        entry->history = std::move(next);
        entry->updated_at = at;
        entry->open_calls = std::move(open);
        entry->used_call_ids = std::move(used);
    }
    write_index();
    return length;
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& session_id) const {
    std::shared_lock lock(mu_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw StoreError(StoreErrorKind::session_not_found, "no session " + session_id);
    return it->second;
}

std::shared_ptr<SessionStore::Entry> SessionStore::find_owned(const std::string& session_id,
                                                               const std::string& user_id) const {
    auto entry = find(session_id);
    if (entry->user.user_id != user_id)
        throw StoreError(StoreErrorKind::permission_denied, "session " + session_id + " belongs to another user");
    return entry;
}

History SessionStore::get_history(const std::string& session_id, const std::string& user_id) const {
    auto entry = find_owned(session_id, user_id);
    std::lock_guard snap(entry->snapshot_mu);
    return entry->history;
}

Session SessionStore::get_session(const std::string& session_id, const std::string& user_id) const {
    auto entry = find_owned(session_id, user_id);
    std::lock_guard snap(entry->snapshot_mu);
    return {entry->session_id, entry->thread_id, entry->user, entry->history, entry->created_at, entry->updated_at};
}

std::vector<SessionSummary> SessionStore::list_sessions(const std::string& user_id) const {
    std::vector<SessionSummary> out;
    std::shared_lock lock(mu_);
    for (const auto& [id, entry] : sessions_) {
        if (entry->user.user_id != user_id) continue;
        std::lock_guard snap(entry->snapshot_mu);
        out.push_back({id, entry->thread_id, excerpt_of(*entry->history), entry->history->size(), entry->updated_at});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.updated_at != b.updated_at ? a.updated_at > b.updated_at : a.session_id < b.session_id;
    });
    return out;
}

UserContext SessionStore::owner(const std::string& session_id) const {
    return find(session_id)->user;
}

void SessionStore::inject_write_fault(std::size_t bytes) {
    std::lock_guard lock(fault_mu_);
    fault_after_bytes_ = bytes;
}

} // namespace swarm::session
