#include "bms/providers_live.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

#include "bms/error.hpp"
#include "bms/text.hpp"

namespace bms {

namespace {

nlohmann::json parse_json(const std::string& body, const std::string& what) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) raise(ErrorKind::parse, what + ": response is not JSON");
    return j;
}

std::string strip_tags(std::string_view html) {
    std::string out;
    bool in_tag = false;
    for (char c : html) {
        if (c == '<') {
            in_tag = true;
        } else if (c == '>') {
            in_tag = false;
        } else if (!in_tag) {
            out += c;
        }
    }
    return out;
}

std::string decode_entities(std::string_view s) {
    static const std::pair<const char*, const char*> table[] = {
        {"&amp;", "&"}, {"&lt;", "<"},   {"&gt;", ">"},    {"&quot;", "\""},
        {"&#39;", "'"}, {"&#x27;", "'"}, {"&nbsp;", " "},
    };
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size();) {
        bool matched = false;
        if (s[i] == '&') {
            for (const auto& [entity, repl] : table) {
                size_t n = std::string_view(entity).size();
                if (s.compare(i, n, entity) == 0) {
                    out += repl;
                    i += n;
                    matched = true;
                    break;
                }
            }
        }
        if (!matched) out += s[i++];
    }
    return out;
}

struct Anchor {
    size_t start = 0;
    std::string href;
    std::string inner;
};

// All <a> elements whose attribute list mentions the class token.
std::vector<Anchor> anchors_with_class(const std::string& html, const std::string& cls) {
    std::vector<Anchor> out;
    size_t pos = 0;
    while ((pos = html.find("<a ", pos)) != std::string::npos) {
        size_t tag_end = html.find('>', pos);
        if (tag_end == std::string::npos) break;
        size_t close = html.find("</a>", tag_end);
        if (close == std::string::npos) break;
        std::string attrs = html.substr(pos, tag_end - pos);
        if (attrs.find(cls) != std::string::npos) {
            Anchor a;
            a.start = pos;
            size_t h = attrs.find("href=\"");
            if (h != std::string::npos) {
                size_t end = attrs.find('"', h + 6);
                if (end != std::string::npos) a.href = attrs.substr(h + 6, end - h - 6);
            }
            a.inner = html.substr(tag_end + 1, close - tag_end - 1);
            out.push_back(std::move(a));
        }
        pos = close + 4;
    }
    return out;
}

// Result links come wrapped in a redirect; the target URL rides in the uddg
// query parameter.
std::string unwrap_ddg_href(const std::string& raw) {
    std::string href = decode_entities(raw);
    auto u = href.find("uddg=");
    if (u != std::string::npos) {
        auto end = href.find('&', u);
        auto len = end == std::string::npos ? std::string::npos : end - u - 5;
        return url_decode(href.substr(u + 5, len));
    }
    if (href.rfind("//", 0) == 0) return "https:" + href;
    return href;
}

std::string clean_inner(const std::string& inner) {
    return collapse_whitespace(decode_entities(strip_tags(inner)));
}

std::vector<WebResult> parse_duckduckgo(const std::string& html) {
    auto links = anchors_with_class(html, "result__a");
    auto snippets = anchors_with_class(html, "result__snippet");
    std::vector<WebResult> out;
    out.reserve(links.size());
    for (size_t i = 0; i < links.size(); ++i) {
        WebResult r;
        r.engine = SearchEngine::duckduckgo;
        r.url = unwrap_ddg_href(links[i].href);
        r.title = clean_inner(links[i].inner);
        size_t next = i + 1 < links.size() ? links[i + 1].start : html.size();
        for (const auto& s : snippets) {
            if (s.start > links[i].start && s.start < next) {
                r.snippet = clean_inner(s.inner);
                break;
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace

HttpWebSearchClient::HttpWebSearchClient(std::shared_ptr<HttpTransport> transport)
    : HttpWebSearchClient(std::move(transport), Options()) {}

HttpWebSearchClient::HttpWebSearchClient(std::shared_ptr<HttpTransport> transport,
                                         Options options)
    : transport_(std::move(transport)), options_(std::move(options)) {
    if (!transport_) raise(ErrorKind::precondition, "web search client needs a transport");
    if (options_.requests_per_second > 0)
        limiter_ = std::make_unique<RateLimiter>(options_.requests_per_second, options_.sleeper);
}

HttpResponse HttpWebSearchClient::get(const std::string& url,
                                      const std::map<std::string, std::string>& headers) {
    if (limiter_) limiter_->acquire();
    HttpRequest req;
    req.url = url;
    req.headers = headers;
    return fetch_with_retries(*transport_, req, options_.retry, options_.sleeper);
}

std::vector<WebResult> HttpWebSearchClient::do_search(SearchEngine engine,
                                                      const std::string& query,
                                                      int max_results) {
    switch (engine) {
    case SearchEngine::duckduckgo:
        return search_duckduckgo(query);
    case SearchEngine::google:
        return search_google(query, max_results);
    case SearchEngine::brave:
        return search_brave(query, max_results);
    }
    raise(ErrorKind::precondition, "unknown search engine");
}

std::vector<WebResult> HttpWebSearchClient::search_duckduckgo(const std::string& query) {
    std::string url = "https://html.duckduckgo.com/html/?q=" + url_encode(query);
    auto res = get(url, {{"User-Agent", "Mozilla/5.0 (compatible; bms/0.1)"}});
    if (res.status != 200)
        raise(ErrorKind::provider,
              "duckduckgo returned status " + std::to_string(res.status));
    return parse_duckduckgo(res.body);
}

std::vector<WebResult> HttpWebSearchClient::search_google(const std::string& query,
                                                          int max_results) {
    if (options_.google_api_key.empty() || options_.google_cx.empty())
        raise(ErrorKind::source_unavailable, "google api key or cx not configured");
    // The JSON API caps one page at ten results.
    int count = std::min(max_results, 10);
    std::string url = "https://www.googleapis.com/customsearch/v1?key=" +
                      url_encode(options_.google_api_key) + "&cx=" +
                      url_encode(options_.google_cx) + "&q=" + url_encode(query) +
                      "&num=" + std::to_string(count);
    auto res = get(url);
    if (res.status != 200)
        raise(ErrorKind::provider, "google returned status " + std::to_string(res.status));
    auto j = parse_json(res.body, "google search");

    std::vector<WebResult> out;
    try {
        if (!j.contains("items")) return out;
        for (const auto& item : j.at("items")) {
            WebResult r;
            r.engine = SearchEngine::google;
            r.title = collapse_whitespace(item.value("title", ""));
            r.url = item.value("link", "");
            r.snippet = collapse_whitespace(item.value("snippet", ""));
            out.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::parse, std::string("google search: ") + e.what());
    }
    return out;
}

std::vector<WebResult> HttpWebSearchClient::search_brave(const std::string& query,
                                                         int max_results) {
    if (options_.brave_api_key.empty())
        raise(ErrorKind::source_unavailable, "brave api key not configured");
    // The web search endpoint caps count at twenty.
    int count = std::min(max_results, 20);
    std::string url = "https://api.search.brave.com/res/v1/web/search?q=" + url_encode(query) +
                      "&count=" + std::to_string(count);
    auto res = get(url, {{"X-Subscription-Token", options_.brave_api_key},
                         {"Accept", "application/json"}});
    if (res.status != 200)
        raise(ErrorKind::provider, "brave returned status " + std::to_string(res.status));
    auto j = parse_json(res.body, "brave search");

    std::vector<WebResult> out;
    try {
        if (!j.contains("web") || !j.at("web").contains("results")) return out;
        for (const auto& item : j.at("web").at("results")) {
            WebResult r;
            r.engine = SearchEngine::brave;
            r.title = collapse_whitespace(item.value("title", ""));
            r.url = item.value("url", "");
            r.snippet = collapse_whitespace(item.value("description", ""));
            out.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::parse, std::string("brave search: ") + e.what());
    }
    return out;
}

} // namespace bms
