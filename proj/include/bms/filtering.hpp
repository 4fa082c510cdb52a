#pragma once

#include "bms/providers.hpp"
#include "bms/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace bms {

struct CoverageScore {
    int matched = 0; // keywords found in title + abstract
    int total = 1;   // keyword set size e

    double fraction() const { return static_cast<double>(matched) / total; }
};

template <typename T>
struct Ranked {
    T item;
    double score = 0.0; // finite, in [-1,1] for cosine ranks
};

// Count of keywords whose normalized surface occurs in the normalized
// concatenation title + " " + abstract. Word-boundary matching is optional.
CoverageScore keyword_coverage(const std::string& title, const std::string& abstract_text,
                               const KeywordSet& keywords, bool word_boundary = false);

// Keeps exactly the documents with coverage fraction >= theta (inclusive),
// preserving input order.
std::vector<Document> filter_by_coverage(const std::vector<Document>& docs,
                                         const KeywordSet& keywords, double theta,
                                         bool word_boundary = false);

// dot(u,v) / (|u||v|), clamped to [-1,1]. Throws on zero-norm input or
// dimensionality mismatch.
double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

// Embeds the query and each item's ranking text, returns the k highest-cosine
// items in descending score order; ties broken by input order.
template <typename T>
std::vector<Ranked<T>> rank_top_k(const std::vector<T>& items, const std::string& query_text,
                                  Embedder& embedder, int k,
                                  const std::function<std::string(const T&)>& text_of);

std::vector<Ranked<Document>> rank_documents_top_k(const std::vector<Document>& docs,
                                                   const std::string& query_text,
                                                   Embedder& embedder, int k);

std::vector<Ranked<WebResult>> rank_web_top_k(const std::vector<WebResult>& results,
                                              const std::string& query_text, Embedder& embedder,
                                              int k);

// Relevance score in [0,1] for one web result against the query.
using RelevanceScorer =
    std::function<double(const WebResult& result, const std::string& query_text)>;

// Default relevance mapping: cosine mapped to [0,1] via (s+1)/2 using the
// embedder over title + " " + snippet.
RelevanceScorer embedding_relevance(Embedder& embedder);

// Provider-scored alternative: asks the language model for a 0..1 score.
RelevanceScorer provider_relevance(LanguageModel& lm);

// Drops results with relevance < tau, then returns the top-k survivors by
// relevance in descending order, stable ties. Scorer defaults to
// embedding_relevance(embedder).
std::vector<WebResult> filter_web(const std::vector<WebResult>& results,
                                  const std::string& query_text, Embedder& embedder, double tau,
                                  int k, const RelevanceScorer& scorer = nullptr);

} // namespace bms
