#pragma once

#include <string>
#include <string_view>

namespace swarm {

/// An absolute http(s) URL split the way HTTP clients want it.
struct Endpoint {
    std::string scheme;  // "http" or "https"
    std::string host;
    int port = 0;
    std::string base_path;  // no trailing slash, may be empty

    /// scheme://host[:port], suitable for an HTTP client constructor.
    std::string origin() const;
    /// host[:port] as sent in the Host header (default ports omitted).
    std::string authority() const;
};

/// Throws std::invalid_argument for anything but an absolute http(s) URL.
Endpoint parse_endpoint(std::string_view url);

/// RFC 3986 percent-encoding; '/' is kept when `keep_slash`.
std::string url_encode(std::string_view text, bool keep_slash = false);

} // namespace swarm
