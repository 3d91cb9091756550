#include "eor/transport.hpp"

#include <cstdlib>

#include <httplib.h>

namespace eor {

namespace {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw TransportError("malformed URL '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

json HttpTransport::post_json(const std::string& url, const json& body,
                              const std::map<std::string, std::string>& headers) {
    const auto parsed = split_url(url);
    httplib::Client client(parsed.origin);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    client.set_write_timeout(timeout_seconds_, 0);

    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);

    auto res = client.Post(parsed.path, hdrs, body.dump(), "application/json");
    if (!res) {
        throw TransportError("POST " + url + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw TransportError("POST " + url + " returned HTTP " + std::to_string(res->status));
    }
    try {
        return json::parse(res->body);
    } catch (const json::parse_error& e) {
        throw TransportError("POST " + url + " returned invalid JSON: " + e.what());
    }
}

json OfflineTransport::post_json(const std::string& url, const json&,
                                 const std::map<std::string, std::string>&) {
    ++attempts_;
    throw TransportError("network access disabled (offline transport); refused POST " + url);
}

std::map<std::string, std::string> Endpoint::headers() const {
    std::map<std::string, std::string> h;
    if (!token.empty()) h["Authorization"] = "Bearer " + token;
    return h;
}

Endpoint Endpoint::from_env(const std::string& prefix) {
    Endpoint ep;
    if (const char* url = std::getenv((prefix + "_URL").c_str())) ep.url = url;
    if (const char* token = std::getenv((prefix + "_TOKEN").c_str())) ep.token = token;
    return ep;
}

}  // namespace eor
