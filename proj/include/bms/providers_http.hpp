#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace bms {

struct HttpRequest {
    std::string method = "GET";
    std::string url; // absolute, query string included
    std::map<std::string, std::string> headers;
    std::string body;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

// Method plus URL with its query parameters sorted by name and credential
// parameters (api_key, apikey, key, token, cx) masked, so recordings and
// cache entries are stable across secrets and parameter order.
std::string canonical_request_key(const HttpRequest& req);

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse send(const HttpRequest& req) = 0;
};

// Live transport over cpp-httplib with TLS.
class HttplibTransport final : public HttpTransport {
public:
    explicit HttplibTransport(std::chrono::seconds timeout = std::chrono::seconds(30));
    HttpResponse send(const HttpRequest& req) override;

private:
    std::chrono::seconds timeout_;
};

// Replays committed responses keyed by canonical_request_key. A request with
// no recording is an error: tests must never fall through to the network.
class RecordedTransport final : public HttpTransport {
public:
    RecordedTransport() = default;

    void add(const std::string& canonical_key, int status, std::string body);
    void add_file(const std::string& canonical_key, int status,
                  const std::filesystem::path& body_path);

    HttpResponse send(const HttpRequest& req) override;

    std::vector<std::string> requests_seen() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, HttpResponse> responses_;
    std::vector<std::string> seen_;
};

struct RetryPolicy {
    int max_retries = 2; // attempts = max_retries + 1
    std::chrono::milliseconds base_delay{200};
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Retries transport exceptions, 5xx, and 429 with doubling delays; any other
// status is returned to the caller as-is. Exhausted retries raise
// ErrorKind::source_unavailable.
HttpResponse fetch_with_retries(HttpTransport& transport, const HttpRequest& req,
                                const RetryPolicy& policy = {},
                                const Sleeper& sleep = {});

// Spaces requests at least 1/rate seconds apart per limiter instance.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_second, Sleeper sleep = {});
    void acquire();

private:
    std::chrono::nanoseconds min_gap_;
    Sleeper sleep_;
    std::mutex mu_;
    std::chrono::steady_clock::time_point next_allowed_{};
};

} // namespace bms
