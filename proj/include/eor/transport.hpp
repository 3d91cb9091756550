#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "eor/domain.hpp"

namespace eor {

using json = nlohmann::json;

class TransportError : public Error {
public:
    using Error::Error;
};

/// JSON-over-HTTP request/response channel shared by every external
/// service client (reader, scorer, source adapters).
class Transport {
public:
    virtual ~Transport() = default;

    virtual json post_json(const std::string& url, const json& body,
                           const std::map<std::string, std::string>& headers) = 0;
};

/// cpp-httplib backed transport. Supports http:// and https:// URLs.
class HttpTransport : public Transport {
public:
    explicit HttpTransport(int timeout_seconds = 120) : timeout_seconds_(timeout_seconds) {}

    json post_json(const std::string& url, const json& body,
                   const std::map<std::string, std::string>& headers) override;

private:
    int timeout_seconds_;
};

/// Refuses every request. Used for replay runs so that any attempt to reach
/// the network fails loudly and is counted.
class OfflineTransport : public Transport {
public:
    json post_json(const std::string& url, const json& body,
                   const std::map<std::string, std::string>& headers) override;

    std::size_t attempts() const { return attempts_.load(); }

private:
    std::atomic<std::size_t> attempts_{0};
};

/// Forwards to an inner transport and counts calls.
class CountingTransport : public Transport {
public:
    explicit CountingTransport(std::shared_ptr<Transport> inner) : inner_(std::move(inner)) {}

    json post_json(const std::string& url, const json& body,
                   const std::map<std::string, std::string>& headers) override {
        ++calls_;
        return inner_->post_json(url, body, headers);
    }

    std::size_t calls() const { return calls_.load(); }

private:
    std::shared_ptr<Transport> inner_;
    std::atomic<std::size_t> calls_{0};
};

struct Endpoint {
    std::string url;
    std::string token;

    bool empty() const { return url.empty(); }
    std::map<std::string, std::string> headers() const;

    /// Reads `<prefix>_URL` and `<prefix>_TOKEN` from the environment.
    static Endpoint from_env(const std::string& prefix);
};

}  // namespace eor
