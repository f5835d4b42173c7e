#pragma once

#include "swarm/error.hpp"
#include "swarm/llm/types.hpp"
#include "swarm/session/user_context.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>

namespace swarm::session {

using llm::ChatMessage;

enum class StoreErrorKind { session_not_found, permission_denied, pairing_violation, storage_unavailable };

std::string_view to_string(StoreErrorKind kind);

using StoreError = Error<StoreErrorKind>;

using History = std::shared_ptr<const std::vector<ChatMessage>>;

struct Session {
    std::string session_id;
    std::string thread_id;
    UserContext user;
    History history;
    Timestamp created_at{};
    Timestamp updated_at{};
};

struct SessionSummary {
    std::string session_id;
    std::string thread_id;
    std::string excerpt;  // first user message, at most 80 bytes
    std::size_t message_count = 0;
    Timestamp updated_at{};
};

nlohmann::json to_json(const SessionSummary& summary);

/// Scans a history for the tool-call pairing invariant: every assistant
/// tool-call id is answered by exactly one later tool message and no tool
/// message is unanswered or duplicated. Returns a description of the first
/// violation.
std::optional<std::string> pairing_violation(std::span<const ChatMessage> history);

/// Sessions with append-only histories.
///
/// With a data directory every session is a JSON-lines log
/// (`sessions/<id>.log`) plus `sessions/index.json`; each append is a single
/// log line, so a batch is either fully on disk or ignored on reload.
class SessionStore {
public:
    /// In-memory store.
    SessionStore();
    /// Durable store rooted at `data_dir`; existing sessions are loaded.
    explicit SessionStore(std::filesystem::path data_dir);

    SessionStore(const SessionStore&) = delete;
    SessionStore& operator=(const SessionStore&) = delete;

    Session create_session(const UserContext& user);

    /// Appends all of `msgs` or none; returns the new history length.
    std::size_t append_messages(const std::string& session_id, std::vector<ChatMessage> msgs);

    History get_history(const std::string& session_id, const std::string& user_id) const;
    Session get_session(const std::string& session_id, const std::string& user_id) const;
    std::vector<SessionSummary> list_sessions(const std::string& user_id) const;

    /// Owner context; for trusted server-side callers that already authorized.
    UserContext owner(const std::string& session_id) const;

    bool durable() const { return data_dir_.has_value(); }

    /// Makes the next log write stop after `bytes` bytes and fail, as a crash would.
    void inject_write_fault(std::size_t bytes);

private:
    struct Entry {
        std::string session_id;
        std::string thread_id;
        UserContext user;
        Timestamp created_at{};
        mutable std::mutex write_mu;
        mutable std::mutex snapshot_mu;
        History history;
        Timestamp updated_at{};
        std::set<std::string> open_calls;
        std::set<std::string> used_call_ids;
        std::uintmax_t log_bytes = 0;
    };

    std::shared_ptr<Entry> find(const std::string& session_id) const;
    std::shared_ptr<Entry> find_owned(const std::string& session_id, const std::string& user_id) const;
    std::filesystem::path log_path(const std::string& session_id) const;
    void load();
    void write_log_line(const std::filesystem::path& path, const std::string& line, std::uintmax_t& good_bytes);
    void write_index() const;

    std::optional<std::filesystem::path> data_dir_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::mutex fault_mu_;
    std::optional<std::size_t> fault_after_bytes_;
    mutable std::mutex index_mu_;
};

} // namespace swarm::session
