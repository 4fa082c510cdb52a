#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bms/providers.hpp"

namespace bms {

// Replays canned completions keyed by the hash of the exact prompt. Each key
// holds a queue of entries consumed in call order; the last entry is sticky.
class ScriptedLanguageModel final : public LanguageModel {
public:
    struct Entry {
        std::string reply;
        bool fail = false;
    };

    explicit ScriptedLanguageModel(std::shared_ptr<LanguageModel> fallback = nullptr);

    static std::string key_of(const std::string& prompt);

    void script(const std::string& prompt, std::string reply);
    void script_failure(const std::string& prompt);
    void script_key(const std::string& key, Entry entry);

    void save_transcript(const std::filesystem::path& path) const;
    void load_transcript(const std::filesystem::path& path);

    std::size_t calls() const;

protected:
    std::string do_complete(const std::string& prompt, const GenParams& params) override;

private:
    struct Queue {
        std::vector<Entry> entries;
        std::size_t next = 0;
    };
    mutable std::mutex mu_;
    std::map<std::string, Queue> script_;
    std::shared_ptr<LanguageModel> fallback_;
    std::size_t calls_ = 0;
};

// Deterministic rule-based model. Dispatches on the '@@task <name>' marker in
// the first prompt line and answers by extracting from the prompt itself, so
// pipeline stages behave sensibly without a live provider.
class ExtractiveLanguageModel final : public LanguageModel {
public:
    struct Options {
        std::vector<std::string> topics;
        std::uint64_t topic_seed = 0;
        std::size_t default_keyword_cap = 8;
    };

    ExtractiveLanguageModel() = default;
    explicit ExtractiveLanguageModel(Options opts);

    std::size_t calls() const;

protected:
    std::string do_complete(const std::string& prompt, const GenParams& params) override;

private:
    std::string answer_decompose(const std::string& prompt) const;
    std::string answer_keywords(const std::string& prompt) const;
    std::string answer_sub_answer(const std::string& prompt) const;
    std::string answer_links(const std::string& prompt) const;
    std::string answer_report(const std::string& prompt) const;
    std::string answer_mcq_generate(const std::string& prompt) const;
    std::string answer_mcq_answer(const std::string& prompt) const;
    std::string answer_relevance(const std::string& prompt) const;
    std::string answer_topic(const std::string& prompt) const;

    Options opts_;
    mutable std::mutex mu_;
    std::size_t calls_ = 0;
};

// Bag-of-words embedder: each token hashes to a fixed pseudo-random vector,
// a text embeds as the normalized sum. Equal texts embed equally and texts
// sharing tokens land close, which is enough signal for ranking tests.
class HashEmbedder final : public Embedder {
public:
    explicit HashEmbedder(int dimension = 64, std::uint64_t seed = 0x5eedbeef);

    int dimension() const override { return dimension_; }
    std::string model_tag() const override { return "hash-embedder"; }
    std::size_t batch_calls() const;

protected:
    std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) override;

private:
    std::vector<double> token_vector(const std::string& token) const;

    int dimension_;
    std::uint64_t seed_;
    mutable std::mutex mu_;
    std::size_t batch_calls_ = 0;
};

// In-memory corpus with per-source, per-query result sets plus failure
// injection; unknown queries fall back to a token-overlap scan of the
// source's default corpus when one is set.
class InMemoryLiteratureClient final : public LiteratureClient {
public:
    void add(LiteratureSource source, const std::string& query, std::vector<Document> docs);
    void set_corpus(LiteratureSource source, std::vector<Document> docs);
    void set_failure(LiteratureSource source, bool fail);
    void set_query_failure(LiteratureSource source, const std::string& query);
    int calls(LiteratureSource source) const;
    std::vector<std::string> queries_seen(LiteratureSource source) const;

protected:
    std::vector<Document> do_search(LiteratureSource source, const std::string& query,
                                    int max_results) override;

private:
    mutable std::mutex mu_;
    std::map<LiteratureSource, std::map<std::string, std::vector<Document>>> exact_;
    std::map<LiteratureSource, std::vector<Document>> corpus_;
    std::map<LiteratureSource, bool> fail_;
    std::map<LiteratureSource, std::set<std::string>> fail_queries_;
    std::map<LiteratureSource, int> calls_;
    std::map<LiteratureSource, std::vector<std::string>> seen_;
};

class InMemoryWebClient final : public WebSearchClient {
public:
    void add(SearchEngine engine, const std::string& query, std::vector<WebResult> results);
    void set_default(SearchEngine engine, std::vector<WebResult> results);
    void set_failure(SearchEngine engine, bool fail);
    int calls(SearchEngine engine) const;

protected:
    std::vector<WebResult> do_search(SearchEngine engine, const std::string& query,
                                     int max_results) override;

private:
    mutable std::mutex mu_;
    std::map<SearchEngine, std::map<std::string, std::vector<WebResult>>> exact_;
    std::map<SearchEngine, std::vector<WebResult>> defaults_;
    std::map<SearchEngine, bool> fail_;
    std::map<SearchEngine, int> calls_;
};

class InMemoryProteinClient final : public ProteinClient {
public:
    void add_accession(const std::string& gene, const std::string& organism,
                       std::string accession);
    void add_record(ProteinRecord record);
    void add_structure(const std::string& accession, std::string pdb_payload);
    void set_failure(bool fail);

protected:
    std::string do_lookup(const std::string& gene,
                          const std::optional<std::string>& organism) override;
    ProteinRecord do_fetch_entry(const std::string& accession) override;
    StructureFile do_fetch_structure(const std::string& accession) override;

private:
    void check_fail() const;

    mutable std::mutex mu_;
    std::map<std::string, std::string> accession_by_key_;
    std::map<std::string, ProteinRecord> records_;
    std::map<std::string, std::string> structures_;
    bool fail_ = false;
};

} // namespace bms
