#pragma once

#include "bms/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace bms {

struct GenParams {
    double temperature = 0.0;
    int max_tokens = 4096;
};

struct EmbeddingVector {
    std::vector<double> values; // fixed length, all finite
    std::string model_tag;
};

class LanguageModel {
public:
    virtual ~LanguageModel() = default;

    // Throws ErrorKind::precondition on empty prompt, ErrorKind::provider on
    // transport failure, ErrorKind::transcript_miss on unknown mock prompts.
    std::string complete(const std::string& prompt, const GenParams& params = {});

protected:
    virtual std::string do_complete(const std::string& prompt, const GenParams& params) = 0;
};

class Embedder {
public:
    virtual ~Embedder() = default;

    // One vector per input, uniform dimensionality, all entries finite.
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);

    virtual int dimension() const = 0;
    virtual std::string model_tag() const = 0;

protected:
    virtual std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) = 0;
};

class LiteratureClient {
public:
    virtual ~LiteratureClient() = default;

    // Never returns more than max_results. Throws ErrorKind::source_unavailable
    // after exhausted retries; callers treat that as an empty result set.
    std::vector<Document> search(LiteratureSource source, const std::string& query,
                                 int max_results);

protected:
    virtual std::vector<Document> do_search(LiteratureSource source, const std::string& query,
                                            int max_results) = 0;
};

class WebSearchClient {
public:
    virtual ~WebSearchClient() = default;

    // Duplicate URLs within one engine's response are dropped keeping first.
    std::vector<WebResult> search(SearchEngine engine, const std::string& query, int max_results);

protected:
    virtual std::vector<WebResult> do_search(SearchEngine engine, const std::string& query,
                                             int max_results) = 0;
};

class ProteinClient {
public:
    virtual ~ProteinClient() = default;

    // Top-ranked accession for the gene, organism-filtered when given.
    std::string lookup_accession(const std::string& gene,
                                 const std::optional<std::string>& organism);

    ProteinRecord fetch_entry(const std::string& accession);
    StructureFile fetch_structure(const std::string& accession);

protected:
    virtual std::string do_lookup(const std::string& gene,
                                  const std::optional<std::string>& organism) = 0;
    virtual ProteinRecord do_fetch_entry(const std::string& accession) = 0;
    virtual StructureFile do_fetch_structure(const std::string& accession) = 0;
};

// All provider handles one pipeline run needs. The same LanguageModel instance
// backs every generation stage by default; callers may swap per-stage handles.
struct ProviderSet {
    std::shared_ptr<LanguageModel> lm;
    std::shared_ptr<Embedder> embedder;
    std::shared_ptr<LiteratureClient> literature;
    std::shared_ptr<WebSearchClient> web;
    std::shared_ptr<ProteinClient> protein;
};

} // namespace bms
