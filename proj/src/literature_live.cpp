#include "bms/providers_live.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include <sstream>

#include "bms/error.hpp"
#include "bms/text.hpp"

namespace bms {

namespace {

constexpr const char* kEutilsBase = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";

nlohmann::json parse_json(const std::string& body, const std::string& what) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) raise(ErrorKind::parse, what + ": response is not JSON");
    return j;
}

// Concatenated text of a node and its descendants; handles mixed content
// where inline markup splits the text into child nodes.
std::string xml_text(const boost::property_tree::ptree& node) {
    std::string out = node.data();
    for (const auto& [name, child] : node) {
        if (name == "<xmlattr>") continue;
        out += xml_text(child);
    }
    return out;
}

} // namespace

HttpLiteratureClient::HttpLiteratureClient(std::shared_ptr<HttpTransport> transport)
    : HttpLiteratureClient(std::move(transport), Options()) {}

HttpLiteratureClient::HttpLiteratureClient(std::shared_ptr<HttpTransport> transport,
                                           Options options)
    : transport_(std::move(transport)), options_(std::move(options)) {
    if (!transport_) raise(ErrorKind::precondition, "literature client needs a transport");
    if (options_.requests_per_second > 0)
        limiter_ = std::make_unique<RateLimiter>(options_.requests_per_second, options_.sleeper);
}

Timestamp HttpLiteratureClient::stamp() const {
    static SystemClock wall;
    return options_.clock ? options_.clock->now() : wall.now();
}

HttpResponse HttpLiteratureClient::get(const std::string& url,
                                       const std::map<std::string, std::string>& headers) {
    if (limiter_) limiter_->acquire();
    HttpRequest req;
    req.url = url;
    req.headers = headers;
    return fetch_with_retries(*transport_, req, options_.retry, options_.sleeper);
}

std::vector<Document> HttpLiteratureClient::do_search(LiteratureSource source,
                                                      const std::string& query,
                                                      int max_results) {
    switch (source) {
    case LiteratureSource::pubmed:
        return search_pubmed(query, max_results);
    case LiteratureSource::pmc:
        return search_pmc(query, max_results);
    case LiteratureSource::sciencedirect:
        return search_sciencedirect(query, max_results);
    }
    raise(ErrorKind::precondition, "unknown literature source");
}

std::vector<std::string> HttpLiteratureClient::esearch_ids(const std::string& db,
                                                           const std::string& query,
                                                           int max_results) {
    std::string url = std::string(kEutilsBase) + "/esearch.fcgi?db=" + db +
                      "&term=" + url_encode(query) +
                      "&retmode=json&retmax=" + std::to_string(max_results);
    if (!options_.ncbi_api_key.empty()) url += "&api_key=" + url_encode(options_.ncbi_api_key);
    auto res = get(url);
    if (res.status != 200)
        raise(ErrorKind::provider,
              db + " esearch returned status " + std::to_string(res.status));
    auto j = parse_json(res.body, db + " esearch");
    std::vector<std::string> ids;
    try {
        for (const auto& id : j.at("esearchresult").at("idlist"))
            ids.push_back(id.get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::parse, db + " esearch: " + e.what());
    }
    return ids;
}

std::vector<Document> HttpLiteratureClient::search_pubmed(const std::string& query,
                                                          int max_results) {
    auto ids = esearch_ids("pubmed", query, max_results);
    if (ids.empty()) return {};

    std::string url = std::string(kEutilsBase) + "/efetch.fcgi?db=pubmed&id=" + join(ids, ",") +
                      "&retmode=xml";
    if (!options_.ncbi_api_key.empty()) url += "&api_key=" + url_encode(options_.ncbi_api_key);
    auto res = get(url);
    if (res.status != 200)
        raise(ErrorKind::provider,
              "pubmed efetch returned status " + std::to_string(res.status));

    boost::property_tree::ptree pt;
    std::istringstream in(res.body);
    try {
        boost::property_tree::read_xml(in, pt);
    } catch (const std::exception& e) {
        raise(ErrorKind::parse, std::string("pubmed efetch: ") + e.what());
    }
    auto set = pt.get_child_optional("PubmedArticleSet");
    if (!set) raise(ErrorKind::parse, "pubmed efetch: missing PubmedArticleSet");

    std::vector<Document> docs;
    for (const auto& [name, article] : *set) {
        if (name != "PubmedArticle") continue;
        auto citation = article.get_child_optional("MedlineCitation");
        if (!citation) continue;
        Document d;
        d.source = LiteratureSource::pubmed;
        d.external_id = trim(citation->get<std::string>("PMID", ""));
        if (d.external_id.empty()) continue;
        if (auto art = citation->get_child_optional("Article")) {
            if (auto title = art->get_child_optional("ArticleTitle"))
                d.title = collapse_whitespace(xml_text(*title));
            if (auto abs = art->get_child_optional("Abstract")) {
                std::vector<std::string> parts;
                for (const auto& [part_name, part] : *abs) {
                    if (part_name != "AbstractText") continue;
                    std::string label = part.get<std::string>("<xmlattr>.Label", "");
                    std::string text = collapse_whitespace(xml_text(part));
                    if (text.empty()) continue;
                    parts.push_back(label.empty() ? text : label + ": " + text);
                }
                d.abstract_text = join(parts, " ");
            }
        }
        d.url = "https://pubmed.ncbi.nlm.nih.gov/" + d.external_id + "/";
        d.retrieved_at = stamp();
        docs.push_back(std::move(d));
    }
    return docs;
}

std::vector<Document> HttpLiteratureClient::search_pmc(const std::string& query,
                                                       int max_results) {
    auto ids = esearch_ids("pmc", query, max_results);
    if (ids.empty()) return {};

    std::string url = std::string(kEutilsBase) + "/esummary.fcgi?db=pmc&id=" + join(ids, ",") +
                      "&retmode=json";
    if (!options_.ncbi_api_key.empty()) url += "&api_key=" + url_encode(options_.ncbi_api_key);
    auto res = get(url);
    if (res.status != 200)
        raise(ErrorKind::provider,
              "pmc esummary returned status " + std::to_string(res.status));
    auto j = parse_json(res.body, "pmc esummary");

    std::vector<Document> docs;
    try {
        const auto& result = j.at("result");
        for (const auto& uid : result.at("uids")) {
            const std::string key = uid.get<std::string>();
            if (!result.contains(key)) continue;
            const auto& entry = result.at(key);
            Document d;
            d.source = LiteratureSource::pmc;
            d.external_id = "PMC" + key;
            d.title = collapse_whitespace(entry.value("title", ""));
            d.url = "https://www.ncbi.nlm.nih.gov/pmc/articles/PMC" + key + "/";
            d.retrieved_at = stamp();
            docs.push_back(std::move(d));
        }
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::parse, std::string("pmc esummary: ") + e.what());
    }
    return docs;
}

std::vector<Document> HttpLiteratureClient::search_sciencedirect(const std::string& query,
                                                                 int max_results) {
    if (options_.sciencedirect_api_key.empty())
        raise(ErrorKind::source_unavailable, "sciencedirect api key not configured");

    std::string url = "https://api.elsevier.com/content/search/sciencedirect?query=" +
                      url_encode(query) + "&count=" + std::to_string(max_results);
    auto res = get(url, {{"X-ELS-APIKey", options_.sciencedirect_api_key},
                         {"Accept", "application/json"}});
    if (res.status == 401 || res.status == 403)
        raise(ErrorKind::provider,
              "sciencedirect rejected the api key (status " + std::to_string(res.status) + ")");
    if (res.status != 200)
        raise(ErrorKind::provider,
              "sciencedirect search returned status " + std::to_string(res.status));
    auto j = parse_json(res.body, "sciencedirect search");

    std::vector<Document> docs;
    try {
        const auto& results = j.at("search-results");
        if (!results.contains("entry")) return docs;
        for (const auto& entry : results.at("entry")) {
            if (!entry.is_object() || entry.contains("error")) continue;
            std::string doi = entry.value("prism:doi", "");
            std::string ext = doi;
            if (ext.empty()) {
                ext = entry.value("dc:identifier", "");
                if (ext.rfind("DOI:", 0) == 0) ext = ext.substr(4);
            }
            if (ext.empty()) ext = entry.value("prism:pii", "");
            if (ext.empty()) continue;

            Document d;
            d.source = LiteratureSource::sciencedirect;
            d.external_id = ext;
            d.title = collapse_whitespace(entry.value("dc:title", ""));
            d.abstract_text = collapse_whitespace(entry.value("dc:description", ""));
            if (entry.contains("link") && entry.at("link").is_array()) {
                for (const auto& link : entry.at("link")) {
                    if (link.value("@ref", "") == "scidir") {
                        d.url = link.value("@href", "");
                        break;
                    }
                }
            }
            if (d.url.empty()) d.url = entry.value("prism:url", "");
            if (d.url.empty() && !doi.empty()) d.url = "https://doi.org/" + doi;
            d.retrieved_at = stamp();
            docs.push_back(std::move(d));
        }
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::parse, std::string("sciencedirect search: ") + e.what());
    }
    return docs;
}

} // namespace bms
