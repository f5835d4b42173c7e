#pragma once

#include <nlohmann/json.hpp>

#include <set>
#include <string>

namespace swarm {

/// Per-user session variables: pipeline namespace, bucket grants and an
/// opaque credential handle that backends resolve through gateway config.
struct UserContext {
    std::string user_id;
    std::string namespace_name;
    std::set<std::string> allowed_buckets;
    std::string credential_ref;

    bool can_access_bucket(const std::string& bucket) const { return allowed_buckets.contains(bucket); }

    bool operator==(const UserContext&) const = default;
};

/// Namespace all users may read.
inline constexpr std::string_view shared_namespace = "shared";

/// Includes credential_ref; never place the result in chat history.
nlohmann::json to_json(const UserContext& ctx);
UserContext user_context_from_json(const nlohmann::json& j);

} // namespace swarm
