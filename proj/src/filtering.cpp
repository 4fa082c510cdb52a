#include "bms/filtering.hpp"

#include "bms/error.hpp"
#include "bms/text.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bms {

CoverageScore keyword_coverage(const std::string& title, const std::string& abstract_text,
                               const KeywordSet& keywords, bool word_boundary) {
    if (keywords.keywords.empty())
        raise(ErrorKind::precondition, "keyword set must be non-empty");
    const std::string haystack = normalize_text(title + " " + abstract_text);
    CoverageScore score;
    score.total = keywords.size();
    for (const auto& kw : keywords.keywords) {
        bool hit = word_boundary ? contains_word(haystack, kw.surface)
                                 : haystack.find(kw.surface) != std::string::npos;
        if (hit) ++score.matched;
    }
    return score;
}

std::vector<Document> filter_by_coverage(const std::vector<Document>& docs,
                                         const KeywordSet& keywords, double theta,
                                         bool word_boundary) {
    if (!(theta >= 0.0 && theta <= 1.0))
        raise(ErrorKind::precondition, "theta must lie in [0,1]");
    std::vector<Document> kept;
    kept.reserve(docs.size());
    for (const auto& d : docs) {
        auto cov = keyword_coverage(d.title, d.abstract_text, keywords, word_boundary);
        if (cov.fraction() >= theta) kept.push_back(d); // boundary inclusive
    }
    return kept;
}

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.values.size() != v.values.size())
        raise(ErrorKind::precondition, "cosine over mismatched dimensionalities");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (size_t i = 0; i < u.values.size(); ++i) {
        dot += u.values[i] * v.values[i];
        nu += u.values[i] * u.values[i];
        nv += v.values[i] * v.values[i];
    }
    if (nu == 0.0 || nv == 0.0)
        raise(ErrorKind::degenerate_vector, "cosine over zero-norm vector");
    double s = dot / (std::sqrt(nu) * std::sqrt(nv));
    return std::clamp(s, -1.0, 1.0);
}

namespace {

// Scores every item against the query with one embed batch; returns indices in
// descending score order, stable on ties.
std::vector<std::pair<size_t, double>> score_and_order(const std::vector<std::string>& texts,
                                                       const std::string& query_text,
                                                       Embedder& embedder) {
    std::vector<std::string> batch;
    batch.reserve(texts.size() + 1);
    batch.push_back(query_text.empty() ? std::string(" ") : query_text);
    for (const auto& t : texts) batch.push_back(t.empty() ? std::string(" ") : t);
    auto vectors = embedder.embed(batch);
    std::vector<std::pair<size_t, double>> order(texts.size());
    for (size_t i = 0; i < texts.size(); ++i)
        order[i] = {i, cosine_similarity(vectors[0], vectors[i + 1])};
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return order;
}

} // namespace

template <typename T>
std::vector<Ranked<T>> rank_top_k(const std::vector<T>& items, const std::string& query_text,
                                  Embedder& embedder, int k,
                                  const std::function<std::string(const T&)>& text_of) {
    if (k < 1) raise(ErrorKind::precondition, "k must be >= 1");
    if (items.empty()) return {};
    std::vector<std::string> texts;
    texts.reserve(items.size());
    for (const auto& it : items) texts.push_back(text_of(it));
    auto order = score_and_order(texts, query_text, embedder);
    std::vector<Ranked<T>> out;
    const size_t limit = std::min<size_t>(static_cast<size_t>(k), order.size());
    out.reserve(limit);
    for (size_t i = 0; i < limit; ++i)
        out.push_back(Ranked<T>{items[order[i].first], order[i].second});
    return out;
}

template std::vector<Ranked<Document>>
rank_top_k<Document>(const std::vector<Document>&, const std::string&, Embedder&, int,
                     const std::function<std::string(const Document&)>&);
template std::vector<Ranked<WebResult>>
rank_top_k<WebResult>(const std::vector<WebResult>&, const std::string&, Embedder&, int,
                      const std::function<std::string(const WebResult&)>&);
template std::vector<Ranked<std::string>>
rank_top_k<std::string>(const std::vector<std::string>&, const std::string&, Embedder&, int,
                        const std::function<std::string(const std::string&)>&);

std::vector<Ranked<Document>> rank_documents_top_k(const std::vector<Document>& docs,
                                                   const std::string& query_text,
                                                   Embedder& embedder, int k) {
    return rank_top_k<Document>(docs, query_text, embedder, k, [](const Document& d) {
        return d.title + " " + d.abstract_text;
    });
}

std::vector<Ranked<WebResult>> rank_web_top_k(const std::vector<WebResult>& results,
                                              const std::string& query_text, Embedder& embedder,
                                              int k) {
    return rank_top_k<WebResult>(results, query_text, embedder, k, [](const WebResult& r) {
        return r.title + " " + r.snippet;
    });
}

RelevanceScorer embedding_relevance(Embedder& embedder) {
    return [&embedder](const WebResult& r, const std::string& query_text) {
        std::string item_text = r.title + " " + r.snippet;
        auto vectors = embedder.embed({query_text.empty() ? std::string(" ") : query_text,
                                       item_text.empty() ? std::string(" ") : item_text});
        return (cosine_similarity(vectors[0], vectors[1]) + 1.0) / 2.0;
    };
}

RelevanceScorer provider_relevance(LanguageModel& lm) {
    return [&lm](const WebResult& r, const std::string& query_text) {
        std::string prompt = "@@task relevance\nRate the relevance of the result to the query "
                             "as a number in [0,1].\nQUERY: " +
                             query_text + "\nRESULT: " + r.title + " " + r.snippet +
                             "\nReply with the number only.";
        std::string reply = lm.complete(prompt);
        try {
            double v = std::stod(trim(reply));
            return std::clamp(v, 0.0, 1.0);
        } catch (const std::exception&) {
            raise(ErrorKind::parse, "relevance reply is not a number: " + reply);
        }
    };
}

std::vector<WebResult> filter_web(const std::vector<WebResult>& results,
                                  const std::string& query_text, Embedder& embedder, double tau,
                                  int k, const RelevanceScorer& scorer) {
    if (!(tau >= 0.0 && tau <= 1.0)) raise(ErrorKind::precondition, "tau must lie in [0,1]");
    if (k < 1) raise(ErrorKind::precondition, "k must be >= 1");
    if (results.empty()) return {};

    std::vector<double> relevance(results.size());
    if (scorer) {
        for (size_t i = 0; i < results.size(); ++i)
            relevance[i] = scorer(results[i], query_text);
    } else {
        // One batch over all items instead of a call per result.
        std::vector<std::string> texts;
        texts.reserve(results.size());
        for (const auto& r : results) texts.push_back(r.title + " " + r.snippet);
        auto order = score_and_order(texts, query_text, embedder);
        for (const auto& [idx, cos] : order) relevance[idx] = (cos + 1.0) / 2.0;
    }

    std::vector<size_t> surviving;
    for (size_t i = 0; i < results.size(); ++i)
        if (relevance[i] >= tau) surviving.push_back(i); // boundary inclusive

    std::stable_sort(surviving.begin(), surviving.end(),
                     [&](size_t a, size_t b) { return relevance[a] > relevance[b]; });
    if (surviving.size() > static_cast<size_t>(k)) surviving.resize(static_cast<size_t>(k));

    std::vector<WebResult> out;
    out.reserve(surviving.size());
    for (size_t idx : surviving) {
        WebResult r = results[idx];
        r.relevance = relevance[idx];
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace bms
