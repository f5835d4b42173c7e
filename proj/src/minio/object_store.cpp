#include "swarm/minio/object_store.hpp"

#include "swarm/base64.hpp"
#include "swarm/orchestrator/error_envelope.hpp"

namespace swarm::minio {

using nlohmann::json;

json to_json(const BucketInfo& info) {
    return {{"name", info.name},
            {"created_at", format_timestamp(info.created_at)},
            {"object_count", info.object_count},
            {"total_bytes", info.total_bytes}};
}

json to_json(const ObjectStat& stat) {
    return {{"bucket", stat.bucket},
            {"key", stat.key},
            {"size_bytes", stat.size_bytes},
            {"last_modified", format_timestamp(stat.last_modified)},
            {"content_type", stat.content_type}};
}

json to_json(const ListResult& listing) {
    json objects = json::array();
    for (const auto& o : listing.objects) objects.push_back(to_json(o));
    return {{"objects", std::move(objects)}, {"prefixes", listing.prefixes}, {"truncated", listing.truncated}};
}

bool valid_bucket_name(std::string_view name) {
    if (name.size() < 3 || name.size() > 63) return false;
    auto alnum = [](char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); };
    if (!alnum(name.front()) || !alnum(name.back())) return false;
    for (char c : name)
        if (!alnum(c) && c != '-' && c != '.') return false;
    return name.find("..") == std::string_view::npos;
}

MemoryObjectStore::MemoryObjectStore(Clock clock) : clock_(std::move(clock)) {}

std::vector<BucketInfo> MemoryObjectStore::list_buckets() {
    std::shared_lock lock(mu_);
    std::vector<BucketInfo> out;
    for (const auto& [name, bucket] : buckets_) {
        BucketInfo info{name, bucket.created_at, bucket.objects.size(), 0};
        for (const auto& [key, obj] : bucket.objects) info.total_bytes += obj.bytes.size();
        out.push_back(std::move(info));
    }
    return out;
}

bool MemoryObjectStore::bucket_exists(const std::string& bucket) {
    std::shared_lock lock(mu_);
    return buckets_.contains(bucket);
}

void MemoryObjectStore::create_bucket(const std::string& bucket) {
    if (!valid_bucket_name(bucket)) throw ToolError(ErrorType::invalid_argument, "invalid bucket name: " + bucket);
    auto t = clock_();
    std::unique_lock lock(mu_);
    buckets_.try_emplace(bucket, Bucket{t, {}});
}

void MemoryObjectStore::put_object(const std::string& bucket, const std::string& key, std::string bytes,
                                   const std::string& content_type) {
    if (key.empty()) throw ToolError(ErrorType::invalid_argument, "object key is empty");
    auto t = clock_();
    std::unique_lock lock(mu_);
    auto it = buckets_.find(bucket);
    if (it == buckets_.end()) throw ToolError(ErrorType::not_found, "no bucket " + bucket);
    it->second.objects[key] = StoredObject{std::move(bytes), content_type, t};
}

std::optional<StoredObject> MemoryObjectStore::get_object(const std::string& bucket, const std::string& key) {
    std::shared_lock lock(mu_);
    auto it = buckets_.find(bucket);
    if (it == buckets_.end()) throw ToolError(ErrorType::not_found, "no bucket " + bucket);
    auto obj = it->second.objects.find(key);
    if (obj == it->second.objects.end()) return std::nullopt;
    return obj->second;
}

ListResult MemoryObjectStore::list_objects(const std::string& bucket, const std::string& prefix, bool recursive,
                                           std::size_t limit) {
    std::shared_lock lock(mu_);
    auto it = buckets_.find(bucket);
    if (it == buckets_.end()) throw ToolError(ErrorType::not_found, "no bucket " + bucket);
    ListResult out;
    const auto& objects = it->second.objects;
    for (auto obj = objects.lower_bound(prefix); obj != objects.end(); ++obj) {
        const auto& key = obj->first;
        if (key.compare(0, prefix.size(), prefix) != 0) break;
        if (!recursive) {
            auto slash = key.find('/', prefix.size());
            if (slash != std::string::npos) {
                auto common = key.substr(0, slash + 1);
                if (out.prefixes.empty() || out.prefixes.back() != common) {
                    if (out.objects.size() + out.prefixes.size() >= limit) {
                        out.truncated = true;
                        break;
                    }
                    out.prefixes.push_back(std::move(common));
                }
                continue;
            }
        }
        if (out.objects.size() + out.prefixes.size() >= limit) {
            out.truncated = true;
            break;
        }
        out.objects.push_back({bucket, key, obj->second.bytes.size(), obj->second.last_modified, obj->second.content_type});
    }
    return out;
}

json MemoryObjectStore::snapshot() const {
    std::shared_lock lock(mu_);
    json buckets = json::array();
    for (const auto& [name, bucket] : buckets_) {
        json objects = json::array();
        for (const auto& [key, obj] : bucket.objects)
            objects.push_back({{"key", key},
                               {"content_type", obj.content_type},
                               {"last_modified", format_timestamp(obj.last_modified)},
                               {"base64", base64_encode(obj.bytes)}});
        buckets.push_back({{"name", name}, {"created_at", format_timestamp(bucket.created_at)}, {"objects", objects}});
    }
    return {{"buckets", std::move(buckets)}};
}

void MemoryObjectStore::restore(const json& snapshot) {
    std::map<std::string, Bucket> buckets;
    for (const auto& b : snapshot.at("buckets")) {
        Bucket bucket{parse_timestamp(b.at("created_at").get<std::string>()), {}};
        for (const auto& o : b.at("objects"))
            bucket.objects[o.at("key").get<std::string>()] =
                StoredObject{base64_decode(o.at("base64").get<std::string>()), o.value("content_type", ""),
                             parse_timestamp(o.at("last_modified").get<std::string>())};
        buckets.emplace(b.at("name").get<std::string>(), std::move(bucket));
    }
    std::unique_lock lock(mu_);
    buckets_ = std::move(buckets);
}

} // namespace swarm::minio
