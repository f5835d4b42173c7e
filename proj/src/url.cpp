#include "swarm/url.hpp"

#include <charconv>
#include <stdexcept>

namespace swarm {

std::string Endpoint::origin() const {
    return scheme + "://" + host + ":" + std::to_string(port);
}

std::string Endpoint::authority() const {
    bool default_port = (scheme == "http" && port == 80) || (scheme == "https" && port == 443);
    return default_port ? host : host + ":" + std::to_string(port);
}

Endpoint parse_endpoint(std::string_view url) {
    Endpoint ep;
    auto sep = url.find("://");
    if (sep == std::string_view::npos) throw std::invalid_argument("not an absolute URL: " + std::string(url));
    ep.scheme = std::string(url.substr(0, sep));
    if (ep.scheme != "http" && ep.scheme != "https")
        throw std::invalid_argument("unsupported URL scheme: " + ep.scheme);
    auto rest = url.substr(sep + 3);
    auto slash = rest.find('/');
    auto hostport = rest.substr(0, slash);
    if (slash != std::string_view::npos) ep.base_path = std::string(rest.substr(slash));
    while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();

    auto colon = hostport.rfind(':');
    if (colon != std::string_view::npos && hostport.find(']') == std::string_view::npos) {
        auto digits = hostport.substr(colon + 1);
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), ep.port);
        if (ec != std::errc{} || ptr != digits.data() + digits.size() || ep.port <= 0 || ep.port > 65535)
            throw std::invalid_argument("bad port in URL: " + std::string(url));
        hostport = hostport.substr(0, colon);
    } else {
        ep.port = ep.scheme == "https" ? 443 : 80;
    }
    if (hostport.empty()) throw std::invalid_argument("URL without host: " + std::string(url));
    ep.host = std::string(hostport);
    return ep;
}

std::string url_encode(std::string_view text, bool keep_slash) {
    static constexpr char hex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : text) {
        bool unreserved = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' ||
                          c == '_' || c == '.' || c == '~' || (keep_slash && c == '/');
        if (unreserved) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xF]);
        }
    }
    return out;
}

} // namespace swarm
