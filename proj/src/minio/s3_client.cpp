#include "swarm/minio/s3_client.hpp"

#include "swarm/orchestrator/error_envelope.hpp"

#include <httplib.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>

#include <ctime>
#include <iomanip>
#include <sstream>

namespace swarm::minio {

namespace {

std::string to_hex(const unsigned char* data, std::size_t n) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(n * 2, '0');
    for (std::size_t i = 0; i < n; ++i) {
        out[2 * i] = digits[data[i] >> 4];
        out[2 * i + 1] = digits[data[i] & 0xf];
    }
    return out;
}

std::string hex_of(std::string_view bytes) {
    return to_hex(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
}

/// 20130524T000000Z
std::string amz_date(Timestamp at) {
    std::string out;
    for (char c : format_timestamp(at).substr(0, 19))
        if (c != '-' && c != ':') out += c;
    return out + "Z";
}

std::string trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    std::string out;
    bool space = false;
    for (char c : s) {
        if (c == ' ' || c == '\t') {
            space = true;
            continue;
        }
        if (space) out += ' ';
        space = false;
        out += c;
    }
    return out;
}

std::string canonical_query(const std::map<std::string, std::string>& query) {
    std::map<std::string, std::string> encoded;
    for (const auto& [k, v] : query) encoded[url_encode(k)] = url_encode(v);
    std::string out;
    for (const auto& [k, v] : encoded) {
        if (!out.empty()) out += '&';
        out += k + "=" + v;
    }
    return out;
}

std::string signed_headers(const std::map<std::string, std::string>& headers) {
    std::string out;
    for (const auto& [k, v] : headers) {
        if (!out.empty()) out += ';';
        out += k;
    }
    return out;
}

std::string signing_key(const S3Credentials& creds, const std::string& date) {
    auto k = hmac_sha256("AWS4" + creds.secret_key, date);
    k = hmac_sha256(k, creds.region);
    k = hmac_sha256(k, "s3");
    return hmac_sha256(k, "aws4_request");
}

std::string scope(const S3Credentials& creds, const std::string& date) {
    return date + "/" + creds.region + "/s3/aws4_request";
}

std::string signature(const SignableRequest& req, const S3Credentials& creds, const std::string& stamp) {
    auto date = stamp.substr(0, 8);
    auto to_sign = "AWS4-HMAC-SHA256\n" + stamp + "\n" + scope(creds, date) + "\n" + sha256_hex(canonical_request(req));
    return hex_of(hmac_sha256(signing_key(creds, date), to_sign));
}

std::string object_path(const std::string& bucket, const std::string& key = {}) {
    return "/" + bucket + (key.empty() ? "" : "/" + key);
}

std::string decode_entities(std::string_view text) {
    static const std::pair<std::string_view, char> entities[] = {
        {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&apos;", '\''}};
    std::string out;
    for (std::size_t i = 0; i < text.size();) {
        bool hit = false;
        if (text[i] == '&')
            for (const auto& [name, c] : entities)
                if (text.substr(i, name.size()) == name) {
                    out += c;
                    i += name.size();
                    hit = true;
                    break;
                }
        if (!hit) out += text[i++];
    }
    return out;
}

Timestamp parse_http_date(const std::string& text) {
    std::tm tm{};
    std::istringstream in(text);
    in.imbue(std::locale::classic());
    in >> std::get_time(&tm, "%a, %d %b %Y %H:%M:%S");
    if (in.fail()) return {};
    return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::from_time_t(timegm(&tm)));
}

[[noreturn]] void raise_status(int status, const std::string& what, const std::string& body) {
    auto code = xml_elements(body, "Code");
    auto detail = what + ": HTTP " + std::to_string(status) + (code.empty() ? "" : " " + code.front());
    if (status == 404) throw ToolError(ErrorType::not_found, detail);
    if (status == 403) throw ToolError(ErrorType::permission_denied, detail);
    if (status == 400) throw ToolError(ErrorType::invalid_argument, detail);
    throw ToolError(ErrorType::backend_unavailable, detail);
}

} // namespace

std::string hmac_sha256(std::string_view key, std::string_view data) {
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), reinterpret_cast<const unsigned char*>(data.data()),
         data.size(), out, &len);
    return std::string(reinterpret_cast<const char*>(out), len);
}

std::string canonical_request(const SignableRequest& req) {
    std::string headers;
    for (const auto& [k, v] : req.headers) headers += k + ":" + trim(v) + "\n";
    return req.method + "\n" + url_encode(req.path, true) + "\n" + canonical_query(req.query) + "\n" + headers + "\n" +
           signed_headers(req.headers) + "\n" + req.payload_hash;
}

void sign_request(SignableRequest& req, const S3Credentials& creds, Timestamp at) {
    auto stamp = amz_date(at);
    req.headers["x-amz-date"] = stamp;
    req.headers["x-amz-content-sha256"] = req.payload_hash;
    auto sig = signature(req, creds, stamp);
    req.headers["authorization"] = "AWS4-HMAC-SHA256 Credential=" + creds.access_key + "/" +
                                   scope(creds, stamp.substr(0, 8)) + ",SignedHeaders=" + signed_headers(req.headers) +
                                   ",Signature=" + sig;
}

std::string presign_get(const Endpoint& endpoint, const std::string& bucket, const std::string& key,
                        const S3Credentials& creds, Timestamp at, std::chrono::seconds expires) {
    auto stamp = amz_date(at);
    SignableRequest req{"GET", endpoint.base_path + object_path(bucket, key), {}, {{"host", endpoint.authority()}},
                        "UNSIGNED-PAYLOAD"};
    req.query = {{"X-Amz-Algorithm", "AWS4-HMAC-SHA256"},
                 {"X-Amz-Credential", creds.access_key + "/" + scope(creds, stamp.substr(0, 8))},
                 {"X-Amz-Date", stamp},
                 {"X-Amz-Expires", std::to_string(expires.count())},
                 {"X-Amz-SignedHeaders", "host"}};
    auto sig = signature(req, creds, stamp);
    return endpoint.origin() + url_encode(req.path, true) + "?" + canonical_query(req.query) +
           "&X-Amz-Signature=" + sig;
}

std::vector<std::string> xml_elements(std::string_view xml, std::string_view tag) {
    std::vector<std::string> out;
    const std::string open = "<" + std::string(tag) + ">";
    const std::string close = "</" + std::string(tag) + ">";
    for (auto pos = xml.find(open); pos != std::string_view::npos; pos = xml.find(open, pos)) {
        auto start = pos + open.size();
        auto end = xml.find(close, start);
        if (end == std::string_view::npos) break;
        out.push_back(decode_entities(xml.substr(start, end - start)));
        pos = end + close.size();
    }
    return out;
}

S3ObjectStore::S3ObjectStore(Endpoint endpoint, S3Credentials creds, std::chrono::seconds timeout)
    : endpoint_(std::move(endpoint)), creds_(std::move(creds)), timeout_(timeout) {}

S3ObjectStore::Reply S3ObjectStore::send(SignableRequest req, const std::string& body) {
    req.path = endpoint_.base_path + req.path;
    req.headers["host"] = endpoint_.authority();
    req.payload_hash = sha256_hex(body);
    sign_request(req, creds_, now_utc());

    httplib::Client client(endpoint_.origin());
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    httplib::Request http;
    http.method = req.method;
    http.path = url_encode(req.path, true);
    if (auto q = canonical_query(req.query); !q.empty()) http.path += "?" + q;
    for (const auto& [k, v] : req.headers)
        if (k != "host") http.headers.emplace(k, v);
    http.body = body;
    auto result = client.send(http);
    if (!result)
        throw ToolError(ErrorType::backend_unavailable, "object store unreachable: " + httplib::to_string(result.error()));
    return {result->status, result->body, result->get_header_value("Content-Type"),
            result->get_header_value("Last-Modified")};
}

std::vector<BucketInfo> S3ObjectStore::list_buckets() {
    auto reply = send({"GET", "/", {}, {}, {}});
    if (reply.status != 200) raise_status(reply.status, "ListBuckets", reply.body);
    std::vector<BucketInfo> out;
    for (const auto& bucket : xml_elements(reply.body, "Bucket")) {
        BucketInfo info;
        info.name = xml_elements(bucket, "Name").at(0);
        if (auto created = xml_elements(bucket, "CreationDate"); !created.empty()) {
            try {
                info.created_at = parse_timestamp(created.front());
            } catch (const std::invalid_argument&) {
            }
        }
        out.push_back(std::move(info));
    }
    return out;
}

bool S3ObjectStore::bucket_exists(const std::string& bucket) {
    auto reply = send({"HEAD", object_path(bucket), {}, {}, {}});
    if (reply.status == 404) return false;
    if (reply.status != 200) raise_status(reply.status, "HeadBucket", reply.body);
    return true;
}

void S3ObjectStore::create_bucket(const std::string& bucket) {
    auto reply = send({"PUT", object_path(bucket), {}, {}, {}});
    if (reply.status != 200 && reply.status != 409) raise_status(reply.status, "CreateBucket", reply.body);
}

void S3ObjectStore::put_object(const std::string& bucket, const std::string& key, std::string bytes,
                               const std::string& content_type) {
    SignableRequest req{"PUT", object_path(bucket, key), {}, {}, {}};
    if (!content_type.empty()) req.headers["content-type"] = content_type;
    auto reply = send(std::move(req), bytes);
    if (reply.status != 200) raise_status(reply.status, "PutObject", reply.body);
}

std::optional<StoredObject> S3ObjectStore::get_object(const std::string& bucket, const std::string& key) {
    auto reply = send({"GET", object_path(bucket, key), {}, {}, {}});
    if (reply.status == 404 && !xml_elements(reply.body, "Code").empty() &&
        xml_elements(reply.body, "Code").front() == "NoSuchKey")
        return std::nullopt;
    if (reply.status != 200) raise_status(reply.status, "GetObject", reply.body);
    return StoredObject{std::move(reply.body), reply.content_type, parse_http_date(reply.last_modified)};
}

ListResult S3ObjectStore::list_objects(const std::string& bucket, const std::string& prefix, bool recursive,
                                       std::size_t limit) {
    SignableRequest req{"GET", object_path(bucket), {{"list-type", "2"}, {"max-keys", std::to_string(limit)}}, {}, {}};
    if (!prefix.empty()) req.query["prefix"] = prefix;
    if (!recursive) req.query["delimiter"] = "/";
    auto reply = send(std::move(req));
    if (reply.status != 200) raise_status(reply.status, "ListObjectsV2", reply.body);

    ListResult out;
    for (const auto& item : xml_elements(reply.body, "Contents")) {
        ObjectStat stat;
        stat.bucket = bucket;
        stat.key = xml_elements(item, "Key").at(0);
        if (auto size = xml_elements(item, "Size"); !size.empty()) stat.size_bytes = std::stoull(size.front());
        if (auto modified = xml_elements(item, "LastModified"); !modified.empty()) {
            try {
                stat.last_modified = parse_timestamp(modified.front());
            } catch (const std::invalid_argument&) {
            }
        }
        out.objects.push_back(std::move(stat));
    }
    for (const auto& common : xml_elements(reply.body, "CommonPrefixes"))
        for (auto& p : xml_elements(common, "Prefix")) out.prefixes.push_back(std::move(p));
    auto truncated = xml_elements(reply.body, "IsTruncated");
    out.truncated = !truncated.empty() && truncated.front() == "true";
    return out;
}

} // namespace swarm::minio
