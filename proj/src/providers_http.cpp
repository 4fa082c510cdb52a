#include "bms/providers_http.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "bms/error.hpp"
#include "bms/text.hpp"

namespace bms {

namespace {

bool is_secret_param(const std::string& name) {
    static const char* names[] = {"api_key", "apikey", "key", "token", "cx"};
    std::string lower = to_lower_ascii(name);
    return std::any_of(std::begin(names), std::end(names),
                       [&](const char* n) { return lower == n; });
}

} // namespace

std::string canonical_request_key(const HttpRequest& req) {
    auto qpos = req.url.find('?');
    std::string base = req.url.substr(0, qpos);
    std::vector<std::pair<std::string, std::string>> params;
    if (qpos != std::string::npos) {
        for (const auto& pair : split(req.url.substr(qpos + 1), '&')) {
            if (pair.empty()) continue;
            auto eq = pair.find('=');
            std::string name = eq == std::string::npos ? pair : pair.substr(0, eq);
            std::string value = eq == std::string::npos ? "" : pair.substr(eq + 1);
            if (is_secret_param(name)) value = "***";
            params.emplace_back(std::move(name), std::move(value));
        }
    }
    std::sort(params.begin(), params.end());
    std::string out = req.method + " " + base;
    for (std::size_t i = 0; i < params.size(); ++i) {
        out += i == 0 ? "?" : "&";
        out += params[i].first;
        out += "=";
        out += params[i].second;
    }
    return out;
}

HttplibTransport::HttplibTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

HttpResponse HttplibTransport::send(const HttpRequest& req) {
    auto scheme_end = req.url.find("://");
    if (scheme_end == std::string::npos)
        raise(ErrorKind::precondition, "url lacks scheme: " + req.url);
    auto host_start = scheme_end + 3;
    auto path_start = req.url.find('/', host_start);
    std::string origin = req.url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : req.url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout_.count(), 0);
    client.set_read_timeout(timeout_.count(), 0);
    client.set_follow_location(true);
    httplib::Headers headers;
    for (const auto& [k, v] : req.headers) headers.emplace(k, v);

    httplib::Result res;
    if (req.method == "GET") {
        res = client.Get(path, headers);
    } else if (req.method == "POST") {
        std::string content_type = "application/x-www-form-urlencoded";
        auto it = req.headers.find("Content-Type");
        if (it != req.headers.end()) content_type = it->second;
        res = client.Post(path, headers, req.body, content_type);
    } else {
        raise(ErrorKind::precondition, "unsupported method: " + req.method);
    }
    if (!res)
        raise(ErrorKind::provider,
              "transport error for " + req.url + ": " + httplib::to_string(res.error()));
    return HttpResponse{res->status, res->body};
}

void RecordedTransport::add(const std::string& canonical_key, int status, std::string body) {
    std::lock_guard lock(mu_);
    responses_[canonical_key] = HttpResponse{status, std::move(body)};
}

void RecordedTransport::add_file(const std::string& canonical_key, int status,
                                 const std::filesystem::path& body_path) {
    std::ifstream in(body_path, std::ios::binary);
    if (!in) raise(ErrorKind::io, "cannot read fixture: " + body_path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    add(canonical_key, status, buf.str());
}

HttpResponse RecordedTransport::send(const HttpRequest& req) {
    const std::string key = canonical_request_key(req);
    std::lock_guard lock(mu_);
    seen_.push_back(key);
    auto it = responses_.find(key);
    if (it == responses_.end())
        raise(ErrorKind::provider, "no recorded response for: " + key);
    return it->second;
}

std::vector<std::string> RecordedTransport::requests_seen() const {
    std::lock_guard lock(mu_);
    return seen_;
}

HttpResponse fetch_with_retries(HttpTransport& transport, const HttpRequest& req,
                                const RetryPolicy& policy, const Sleeper& sleep) {
    Sleeper do_sleep = sleep;
    if (!do_sleep)
        do_sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    std::string last_error;
    auto delay = policy.base_delay;
    for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
        if (attempt > 0) {
            do_sleep(delay);
            delay *= 2;
        }
        try {
            HttpResponse res = transport.send(req);
            if (res.status == 429 || res.status >= 500) {
                last_error = "status " + std::to_string(res.status);
                continue;
            }
            return res;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::provider) throw;
            last_error = e.what();
        }
    }
    raise(ErrorKind::source_unavailable,
          "request failed after " + std::to_string(policy.max_retries + 1) +
              " attempts (" + last_error + "): " + canonical_request_key(req));
}

RateLimiter::RateLimiter(double requests_per_second, Sleeper sleep)
    : sleep_(std::move(sleep)) {
    if (requests_per_second <= 0)
        raise(ErrorKind::precondition, "rate must be positive");
    min_gap_ = std::chrono::nanoseconds(
        static_cast<long long>(1e9 / requests_per_second));
    if (!sleep_)
        sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

void RateLimiter::acquire() {
    std::chrono::nanoseconds wait{0};
    {
        std::lock_guard lock(mu_);
        auto now = std::chrono::steady_clock::now();
        if (now < next_allowed_) wait = next_allowed_ - now;
        next_allowed_ = (now < next_allowed_ ? next_allowed_ : now) + min_gap_;
    }
    if (wait.count() > 0)
        sleep_(std::chrono::duration_cast<std::chrono::milliseconds>(wait) +
               std::chrono::milliseconds(1));
}

} // namespace bms
