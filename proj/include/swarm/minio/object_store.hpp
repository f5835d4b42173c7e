#pragma once

#include "swarm/time.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace swarm::minio {

struct BucketInfo {
    std::string name;
    Timestamp created_at{};
    std::size_t object_count = 0;
    std::uint64_t total_bytes = 0;
};

struct ObjectStat {
    std::string bucket;
    std::string key;
    std::uint64_t size_bytes = 0;
    Timestamp last_modified{};
    std::string content_type;
};

struct StoredObject {
    std::string bytes;
    std::string content_type;
    Timestamp last_modified{};
};

struct ListResult {
    std::vector<ObjectStat> objects;
    std::vector<std::string> prefixes;  // common prefixes, non-recursive listings only
    bool truncated = false;
};

nlohmann::json to_json(const BucketInfo& info);
nlohmann::json to_json(const ObjectStat& stat);
nlohmann::json to_json(const ListResult& listing);

/// S3 naming: 3-63 characters of lowercase letters, digits, '-' and '.',
/// starting and ending with a letter or digit.
bool valid_bucket_name(std::string_view name);

/// Object storage as the storage agent sees it. Missing buckets raise
/// ToolError{not_found}; transport failures raise ToolError{backend_unavailable}.
class ObjectStore {
public:
    virtual ~ObjectStore() = default;

    virtual std::vector<BucketInfo> list_buckets() = 0;
    virtual bool bucket_exists(const std::string& bucket) = 0;
    virtual void create_bucket(const std::string& bucket) = 0;
    virtual void put_object(const std::string& bucket, const std::string& key, std::string bytes,
                            const std::string& content_type) = 0;
    virtual std::optional<StoredObject> get_object(const std::string& bucket, const std::string& key) = 0;
    /// Keys starting with `prefix` in lexicographic order. Non-recursive listings
    /// fold keys with a further '/' into common prefixes. At most `limit`
    /// entries (objects plus prefixes) are returned.
    virtual ListResult list_objects(const std::string& bucket, const std::string& prefix, bool recursive,
                                    std::size_t limit) = 0;
};

class MemoryObjectStore final : public ObjectStore {
public:
    explicit MemoryObjectStore(Clock clock = now_utc);

    std::vector<BucketInfo> list_buckets() override;
    bool bucket_exists(const std::string& bucket) override;
    void create_bucket(const std::string& bucket) override;
    void put_object(const std::string& bucket, const std::string& key, std::string bytes,
                    const std::string& content_type) override;
    std::optional<StoredObject> get_object(const std::string& bucket, const std::string& key) override;
    ListResult list_objects(const std::string& bucket, const std::string& prefix, bool recursive,
                            std::size_t limit) override;

    /// Full contents, object bytes base64-encoded.
    nlohmann::json snapshot() const;
    void restore(const nlohmann::json& snapshot);

private:
    struct Bucket {
        Timestamp created_at{};
        std::map<std::string, StoredObject> objects;
    };

    Clock clock_;
    mutable std::shared_mutex mu_;
    std::map<std::string, Bucket> buckets_;
};

} // namespace swarm::minio
