#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bms/providers.hpp"
#include "bms/providers_http.hpp"
#include "bms/timeutil.hpp"

namespace bms {

// PubMed and PMC via the NCBI E-utilities, ScienceDirect via the Elsevier
// search API. A missing ScienceDirect key degrades that one source instead of
// failing the whole run.
class HttpLiteratureClient final : public LiteratureClient {
public:
    struct Options {
        std::string ncbi_api_key;
        std::string sciencedirect_api_key;
        RetryPolicy retry;
        double requests_per_second = 0; // 0 = unthrottled
        const Clock* clock = nullptr;   // stamps retrieved_at; wall clock when null
        Sleeper sleeper;                // injected for retry and pacing delays
    };

    explicit HttpLiteratureClient(std::shared_ptr<HttpTransport> transport);
    HttpLiteratureClient(std::shared_ptr<HttpTransport> transport, Options options);

protected:
    std::vector<Document> do_search(LiteratureSource source, const std::string& query,
                                    int max_results) override;

private:
    std::vector<Document> search_pubmed(const std::string& query, int max_results);
    std::vector<Document> search_pmc(const std::string& query, int max_results);
    std::vector<Document> search_sciencedirect(const std::string& query, int max_results);
    std::vector<std::string> esearch_ids(const std::string& db, const std::string& query,
                                         int max_results);
    HttpResponse get(const std::string& url,
                     const std::map<std::string, std::string>& headers = {});
    Timestamp stamp() const;

    std::shared_ptr<HttpTransport> transport_;
    Options options_;
    std::unique_ptr<RateLimiter> limiter_;
};

// DuckDuckGo's HTML endpoint plus the Google and Brave JSON APIs. Engines
// whose credentials are absent degrade as unavailable sources.
class HttpWebSearchClient final : public WebSearchClient {
public:
    struct Options {
        std::string google_api_key;
        std::string google_cx;
        std::string brave_api_key;
        RetryPolicy retry;
        double requests_per_second = 0;
        Sleeper sleeper;
    };

    explicit HttpWebSearchClient(std::shared_ptr<HttpTransport> transport);
    HttpWebSearchClient(std::shared_ptr<HttpTransport> transport, Options options);

protected:
    std::vector<WebResult> do_search(SearchEngine engine, const std::string& query,
                                     int max_results) override;

private:
    std::vector<WebResult> search_duckduckgo(const std::string& query);
    std::vector<WebResult> search_google(const std::string& query, int max_results);
    std::vector<WebResult> search_brave(const std::string& query, int max_results);
    HttpResponse get(const std::string& url,
                     const std::map<std::string, std::string>& headers = {});

    std::shared_ptr<HttpTransport> transport_;
    Options options_;
    std::unique_ptr<RateLimiter> limiter_;
};

// UniProt REST for accession lookup and entries, AlphaFold for predicted
// structures.
class HttpProteinClient final : public ProteinClient {
public:
    struct Options {
        RetryPolicy retry;
        double requests_per_second = 0;
        Sleeper sleeper;
    };

    explicit HttpProteinClient(std::shared_ptr<HttpTransport> transport);
    HttpProteinClient(std::shared_ptr<HttpTransport> transport, Options options);

protected:
    std::string do_lookup(const std::string& gene,
                          const std::optional<std::string>& organism) override;
    ProteinRecord do_fetch_entry(const std::string& accession) override;
    StructureFile do_fetch_structure(const std::string& accession) override;

private:
    HttpResponse get(const std::string& url);

    std::shared_ptr<HttpTransport> transport_;
    Options options_;
    std::unique_ptr<RateLimiter> limiter_;
};

} // namespace bms
