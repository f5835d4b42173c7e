#pragma once

#include "swarm/ids.hpp"
#include "swarm/minio/object_store.hpp"
#include "swarm/url.hpp"

#include <chrono>
#include <map>

namespace swarm::minio {

struct S3Credentials {
    std::string access_key;
    std::string secret_key;
    std::string region = "us-east-1";
};

std::string hmac_sha256(std::string_view key, std::string_view data);

/// A request as SigV4 sees it. `query` holds decoded names and values.
struct SignableRequest {
    std::string method;
    std::string path;  // decoded, starting with '/'
    std::map<std::string, std::string> query;
    std::map<std::string, std::string> headers;  // lowercase names
    std::string payload_hash;                     // hex sha256, or "UNSIGNED-PAYLOAD"
};

std::string canonical_request(const SignableRequest& req);

/// Adds x-amz-date, x-amz-content-sha256 and Authorization headers
/// (AWS Signature Version 4, service "s3").
void sign_request(SignableRequest& req, const S3Credentials& creds, Timestamp at);

/// Query-string presigned GET URL valid for `expires`.
std::string presign_get(const Endpoint& endpoint, const std::string& bucket, const std::string& key,
                        const S3Credentials& creds, Timestamp at, std::chrono::seconds expires);

/// Text of every <tag>…</tag> element in document order, entities decoded.
/// Enough for the flat S3 list responses; not a general XML parser.
std::vector<std::string> xml_elements(std::string_view xml, std::string_view tag);

/// Thin path-style S3 client: ListBuckets, ListObjectsV2, GetObject, PutObject.
class S3ObjectStore final : public ObjectStore {
public:
    S3ObjectStore(Endpoint endpoint, S3Credentials creds, std::chrono::seconds timeout = std::chrono::seconds(30));

    std::vector<BucketInfo> list_buckets() override;
    bool bucket_exists(const std::string& bucket) override;
    void create_bucket(const std::string& bucket) override;
    void put_object(const std::string& bucket, const std::string& key, std::string bytes,
                    const std::string& content_type) override;
    std::optional<StoredObject> get_object(const std::string& bucket, const std::string& key) override;
    ListResult list_objects(const std::string& bucket, const std::string& prefix, bool recursive,
                            std::size_t limit) override;

private:
    struct Reply {
        int status = 0;
        std::string body;
        std::string content_type;
        std::string last_modified;
    };
    Reply send(SignableRequest req, const std::string& body = {});

    Endpoint endpoint_;
    S3Credentials creds_;
    std::chrono::seconds timeout_;
};

} // namespace swarm::minio
