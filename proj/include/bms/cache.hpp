#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "bms/providers_http.hpp"
#include "bms/timeutil.hpp"

namespace bms {

// File-per-entry response cache. Entries are JSON envelopes holding the
// stored-at time, the TTL, and the base64 payload; the file name is the hash
// of the caller's key. Expired or unreadable entries miss (a warning goes to
// stderr for corrupt ones) and the next put overwrites them.
class ResponseCache {
public:
    ResponseCache(std::filesystem::path dir, std::chrono::seconds ttl, Clock& clock);

    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& payload) const;

    std::filesystem::path path_for(const std::string& key) const;

private:
    std::filesystem::path dir_;
    std::chrono::seconds ttl_;
    Clock& clock_;
};

// GET-only read-through cache around a transport. Non-GET requests and non-200
// responses bypass storage.
class CachingTransport final : public HttpTransport {
public:
    CachingTransport(std::shared_ptr<HttpTransport> inner, std::shared_ptr<ResponseCache> cache);

    HttpResponse send(const HttpRequest& req) override;

private:
    std::shared_ptr<HttpTransport> inner_;
    std::shared_ptr<ResponseCache> cache_;
};

} // namespace bms
