#include "bms/cache.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bms/error.hpp"
#include "bms/ids.hpp"

namespace bms {

namespace {

const char* kB64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(const std::string& in) {
    std::string out;
    out.reserve((in.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 2 < in.size()) {
        unsigned v = (static_cast<unsigned char>(in[i]) << 16) |
                     (static_cast<unsigned char>(in[i + 1]) << 8) |
                     static_cast<unsigned char>(in[i + 2]);
        out += kB64Alphabet[(v >> 18) & 63];
        out += kB64Alphabet[(v >> 12) & 63];
        out += kB64Alphabet[(v >> 6) & 63];
        out += kB64Alphabet[v & 63];
        i += 3;
    }
    if (i + 1 == in.size()) {
        unsigned v = static_cast<unsigned char>(in[i]) << 16;
        out += kB64Alphabet[(v >> 18) & 63];
        out += kB64Alphabet[(v >> 12) & 63];
        out += "==";
    } else if (i + 2 == in.size()) {
        unsigned v = (static_cast<unsigned char>(in[i]) << 16) |
                     (static_cast<unsigned char>(in[i + 1]) << 8);
        out += kB64Alphabet[(v >> 18) & 63];
        out += kB64Alphabet[(v >> 12) & 63];
        out += kB64Alphabet[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

std::optional<std::string> b64_decode(const std::string& in) {
    std::string out;
    unsigned buffer = 0;
    int bits = 0;
    for (char c : in) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        int v = b64_value(c);
        if (v < 0) return std::nullopt;
        buffer = (buffer << 6) | static_cast<unsigned>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out += static_cast<char>((buffer >> bits) & 0xff);
        }
    }
    return out;
}

} // namespace

ResponseCache::ResponseCache(std::filesystem::path dir, std::chrono::seconds ttl, Clock& clock)
    : dir_(std::move(dir)), ttl_(ttl), clock_(clock) {
    std::filesystem::create_directories(dir_);
}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
    return dir_ / (to_hex(fnv1a64(key)) + ".json");
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
    auto path = path_for(key);
    std::ifstream in(path);
    if (!in) return std::nullopt;
    try {
        nlohmann::json doc;
        in >> doc;
        Timestamp stored_at = parse_rfc3339(doc.at("stored_at").get<std::string>());
        auto ttl_s = doc.at("ttl_s").get<std::int64_t>();
        if (clock_.now() - stored_at > ttl_s) return std::nullopt;
        auto payload = b64_decode(doc.at("payload_b64").get<std::string>());
        if (!payload) throw std::runtime_error("payload is not base64");
        return *payload;
    } catch (const std::exception& e) {
        std::cerr << "warning: discarding unreadable cache entry " << path.string() << ": "
                  << e.what() << '\n';
        return std::nullopt;
    }
}

void ResponseCache::put(const std::string& key, const std::string& payload) const {
    nlohmann::json doc = {
        {"stored_at", to_rfc3339(clock_.now())},
        {"ttl_s", static_cast<std::int64_t>(ttl_.count())},
        {"payload_b64", b64_encode(payload)},
    };
    auto path = path_for(key);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) raise(ErrorKind::io, "cannot write cache entry: " + tmp.string());
        out << doc.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

CachingTransport::CachingTransport(std::shared_ptr<HttpTransport> inner,
                                   std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

HttpResponse CachingTransport::send(const HttpRequest& req) {
    if (req.method != "GET" || !cache_) return inner_->send(req);
    const std::string key = canonical_request_key(req);
    if (auto hit = cache_->get(key)) return HttpResponse{200, *hit};
    HttpResponse res = inner_->send(req);
    if (res.status == 200) cache_->put(key, res.body);
    return res;
}

} // namespace bms
