#pragma once

// Brute-force reference implementations for the filtering contracts, with
// randomized trial runners shared by the unit suite and the acceptance
// checks. The references deliberately re-derive normalization, matching,
// cosine, and ordering from scratch instead of calling the library helpers.
// Each runner throws std::runtime_error with a diagnostic on the first
// divergence and returns counters on success.

#include "bms/filtering.hpp"
#include "bms/providers_mock.hpp"
#include "bms/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bms::test {

inline std::string ref_normalize(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

inline bool ref_word_hit(const std::string& hay, const std::string& needle) {
    if (needle.empty()) return false;
    auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    for (size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
        size_t end = pos + needle.size();
        bool left_ok = pos == 0 || !alnum(hay[pos - 1]);
        bool right_ok = end == hay.size() || !alnum(hay[end]);
        if (left_ok && right_ok) return true;
    }
    return false;
}

inline int ref_coverage_count(const Document& d, const KeywordSet& ks, bool word_boundary) {
    const std::string hay = ref_normalize(d.title + " " + d.abstract_text);
    int matched = 0;
    for (const auto& kw : ks.keywords) {
        bool hit = word_boundary ? ref_word_hit(hay, kw.surface)
                                 : hay.find(kw.surface) != std::string::npos;
        if (hit) ++matched;
    }
    return matched;
}

inline double ref_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    double s = dot / (std::sqrt(na) * std::sqrt(nb));
    if (s < -1.0) return -1.0;
    if (s > 1.0) return 1.0;
    return s;
}

inline int pick_int(std::mt19937_64& g, int lo, int hi) {
    return lo + static_cast<int>(g() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline double unit_double(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Includes near-duplicate pairs (pathway/pathways, steroid/steroidogenesis,
// cell/cells) so substring and word-boundary matching give different answers.
inline const std::vector<std::string>& corpus_tokens() {
    static const std::vector<std::string> v = {
        "cortisol", "synthesis",  "zebrafish",  "interrenal", "stress",   "axis",
        "receptor", "signal",     "pathway",    "pathways",   "hormone",  "acth",
        "crh",      "feedback",   "adrenal",    "gland",      "steroid",  "steroidogenesis",
        "enzyme",   "cyp17a1",    "cyp11b1",    "hsd3b1",     "expression", "larval",
        "adult",    "mutant",     "knockout",   "phenotype",  "regulation", "transcription",
        "protein",  "binding",    "cell",       "cells",      "tissue",   "plasma",
        "assay",    "response",   "responses",
    };
    return v;
}

inline std::string random_phrase(std::mt19937_64& g, int min_tokens, int max_tokens) {
    const auto& vocab = corpus_tokens();
    int n = pick_int(g, min_tokens, max_tokens);
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (!out.empty()) out += " ";
        out += vocab[g() % vocab.size()];
    }
    return out;
}

inline KeywordSet random_keyword_set(std::mt19937_64& g) {
    const auto& vocab = corpus_tokens();
    int e = pick_int(g, 1, 6);
    KeywordSet ks;
    ks.subquery = "sq:oracle";
    std::vector<std::string> surfaces;
    while (static_cast<int>(surfaces.size()) < e) {
        std::string s = vocab[g() % vocab.size()];
        if (g() % 2 == 0) s += " " + vocab[g() % vocab.size()];
        if (std::find(surfaces.begin(), surfaces.end(), s) == surfaces.end())
            surfaces.push_back(std::move(s));
    }
    for (int i = 0; i < e; ++i)
        ks.keywords.push_back(Keyword{surfaces[static_cast<size_t>(i)], i + 1,
                                      SemanticDimension{"oracle", DimensionKind::keyword}});
    return ks;
}

// Re-renders a normalized keyword surface with random casing and doubled
// inter-word spaces; both sides must see through the jitter.
inline std::string jitter_surface(const std::string& surface, std::mt19937_64& g) {
    std::string out;
    for (char c : surface) {
        if (c == ' ') {
            out += ' ';
            if (g() % 3 == 0) out += ' ';
        } else if (g() % 4 == 0) {
            out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        } else {
            out += c;
        }
    }
    return out;
}

inline Document random_coverage_doc(const KeywordSet& ks, std::mt19937_64& g, int serial) {
    Document d;
    d.external_id = "d" + std::to_string(serial);
    d.title = random_phrase(g, 2, 5);
    d.abstract_text = random_phrase(g, 0, 18);
    d.url = "https://example.org/" + d.external_id;

    int e = ks.size();
    int inject = static_cast<int>(g() % static_cast<std::uint64_t>(e + 1));
    std::vector<int> idx(static_cast<size_t>(e));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), g);
    for (int i = 0; i < inject; ++i) {
        std::string piece = jitter_surface(ks.keywords[static_cast<size_t>(idx[static_cast<size_t>(i)])].surface, g);
        if (g() % 2 == 0)
            d.title += " " + piece;
        else
            d.abstract_text += " " + piece;
    }
    return d;
}

struct CoverageOracleStats {
    int trials = 0;
    int documents = 0;
    int kept = 0;
    int boundary_kept = 0; // coverage fraction exactly equal to theta
};

inline CoverageOracleStats run_coverage_oracle(int trials, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CoverageOracleStats st;
    for (int t = 0; t < trials; ++t) {
        KeywordSet ks = random_keyword_set(g);
        const int e = ks.size();
        const int n = pick_int(g, 8, 24);
        std::vector<Document> docs;
        docs.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) docs.push_back(random_coverage_doc(ks, g, i));

        const bool word_boundary = (t % 3 == 2);
        double theta = 0.0;
        switch (t % 4) {
        case 0: theta = static_cast<double>(g() % static_cast<std::uint64_t>(e + 1)) / e; break;
        case 1: theta = 1.0; break;
        case 2: theta = unit_double(g); break;
        default: theta = 0.0; break;
        }

        auto lib = filter_by_coverage(docs, ks, theta, word_boundary);

        std::vector<const Document*> ref;
        for (const auto& d : docs) {
            int matched = ref_coverage_count(d, ks, word_boundary);
            auto cov = keyword_coverage(d.title, d.abstract_text, ks, word_boundary);
            if (cov.matched != matched || cov.total != e)
                throw std::runtime_error("coverage count diverged on " + d.external_id + ": library " +
                                         std::to_string(cov.matched) + "/" + std::to_string(cov.total) +
                                         " vs reference " + std::to_string(matched) + "/" +
                                         std::to_string(e));
            double frac = static_cast<double>(matched) / e;
            if (frac >= theta) {
                ref.push_back(&d);
                if (frac == theta) ++st.boundary_kept;
            }
        }

        if (lib.size() != ref.size())
            throw std::runtime_error("coverage filter size diverged at trial " + std::to_string(t) +
                                     ": library kept " + std::to_string(lib.size()) + ", reference " +
                                     std::to_string(ref.size()));
        for (size_t i = 0; i < lib.size(); ++i)
            if (lib[i].external_id != ref[i]->external_id)
                throw std::runtime_error("coverage filter order diverged at trial " +
                                         std::to_string(t) + " position " + std::to_string(i));

        ++st.trials;
        st.documents += n;
        st.kept += static_cast<int>(lib.size());
    }
    return st;
}

struct RankOracleStats {
    int pools = 0;
    int items = 0;
    int ties_seen = 0; // pools containing at least one duplicated ranking text
};

inline std::vector<Document> random_rank_docs(std::mt19937_64& g, int n) {
    std::vector<Document> docs;
    docs.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Document d;
        d.external_id = "d" + std::to_string(i);
        d.url = "https://example.org/" + d.external_id;
        if (i > 0 && g() % 8 == 0) {
            const auto& prev = docs[g() % docs.size()];
            d.title = prev.title;
            d.abstract_text = prev.abstract_text;
        } else {
            d.title = random_phrase(g, 1, 5);
            d.abstract_text = random_phrase(g, 0, 12);
        }
        docs.push_back(std::move(d));
    }
    return docs;
}

inline std::vector<WebResult> random_rank_results(std::mt19937_64& g, int n) {
    std::vector<WebResult> results;
    results.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        WebResult r;
        r.url = "https://example.org/hit/" + std::to_string(i);
        if (i > 0 && g() % 8 == 0) {
            const auto& prev = results[g() % results.size()];
            r.title = prev.title;
            r.snippet = prev.snippet;
        } else {
            r.title = random_phrase(g, 1, 5);
            r.snippet = random_phrase(g, 0, 12);
        }
        results.push_back(std::move(r));
    }
    return results;
}

// Descending stable order over one embed batch [query, texts...], mirroring
// the published ranking contract with local arithmetic.
inline std::vector<std::pair<size_t, double>> ref_order(Embedder& embedder,
                                                        const std::vector<std::string>& texts,
                                                        const std::string& query_text) {
    std::vector<std::string> batch;
    batch.reserve(texts.size() + 1);
    batch.push_back(query_text.empty() ? std::string(" ") : query_text);
    for (const auto& t : texts) batch.push_back(t.empty() ? std::string(" ") : t);
    auto vecs = embedder.embed(batch);
    std::vector<std::pair<size_t, double>> order(texts.size());
    for (size_t i = 0; i < texts.size(); ++i)
        order[i] = {i, ref_cosine(vecs[0].values, vecs[i + 1].values)};
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return order;
}

inline bool has_duplicate(std::vector<std::string> texts) {
    std::sort(texts.begin(), texts.end());
    return std::adjacent_find(texts.begin(), texts.end()) != texts.end();
}

inline RankOracleStats run_rank_oracle(int pools, int max_pool, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    HashEmbedder embedder;
    RankOracleStats st;
    for (int p = 0; p < pools; ++p) {
        const int n = pick_int(g, 1, max_pool);
        const int k = pick_int(g, 1, 20);
        const std::string query = random_phrase(g, 2, 6);
        const size_t expected = std::min<size_t>(static_cast<size_t>(k), static_cast<size_t>(n));

        std::vector<std::string> texts;
        texts.reserve(static_cast<size_t>(n));
        std::vector<std::string> ids;
        std::vector<std::string> got_ids;
        std::vector<double> got_scores;

        if (p % 2 == 0) {
            auto docs = random_rank_docs(g, n);
            for (const auto& d : docs) texts.push_back(d.title + " " + d.abstract_text);
            for (const auto& d : docs) ids.push_back(d.external_id);
            auto lib = rank_documents_top_k(docs, query, embedder, k);
            for (const auto& r : lib) {
                got_ids.push_back(r.item.external_id);
                got_scores.push_back(r.score);
            }
        } else {
            auto results = random_rank_results(g, n);
            for (const auto& r : results) texts.push_back(r.title + " " + r.snippet);
            for (const auto& r : results) ids.push_back(r.url);
            auto lib = rank_web_top_k(results, query, embedder, k);
            for (const auto& r : lib) {
                got_ids.push_back(r.item.url);
                got_scores.push_back(r.score);
            }
        }

        if (got_ids.size() != expected)
            throw std::runtime_error("rank size diverged at pool " + std::to_string(p) + ": got " +
                                     std::to_string(got_ids.size()) + ", expected " +
                                     std::to_string(expected));
        auto order = ref_order(embedder, texts, query);
        for (size_t i = 0; i < expected; ++i) {
            if (got_ids[i] != ids[order[i].first])
                throw std::runtime_error("rank order diverged at pool " + std::to_string(p) +
                                         " position " + std::to_string(i));
            if (std::abs(got_scores[i] - order[i].second) > 1e-12)
                throw std::runtime_error("rank score diverged at pool " + std::to_string(p) +
                                         " position " + std::to_string(i));
            if (!(got_scores[i] >= -1.0 && got_scores[i] <= 1.0))
                throw std::runtime_error("rank score outside [-1,1] at pool " + std::to_string(p));
        }

        ++st.pools;
        st.items += n;
        if (has_duplicate(texts)) ++st.ties_seen;
    }
    return st;
}

// For every k in 1..max_k the ranking must equal the first k entries of the
// max_k ranking, ids and scores alike.
inline int run_rank_prefix_property(int pools, int max_k, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    HashEmbedder embedder;
    int checks = 0;
    for (int p = 0; p < pools; ++p) {
        const int n = pick_int(g, 1, 60);
        const std::string query = random_phrase(g, 2, 6);
        auto docs = random_rank_docs(g, n);
        auto full = rank_documents_top_k(docs, query, embedder, max_k);
        for (int k = 1; k <= max_k; ++k) {
            auto got = rank_documents_top_k(docs, query, embedder, k);
            size_t expected = std::min<size_t>(static_cast<size_t>(k), full.size());
            if (got.size() != expected)
                throw std::runtime_error("prefix size diverged at pool " + std::to_string(p) +
                                         " k=" + std::to_string(k));
            for (size_t i = 0; i < got.size(); ++i)
                if (got[i].item.external_id != full[i].item.external_id ||
                    got[i].score != full[i].score)
                    throw std::runtime_error("prefix property violated at pool " +
                                             std::to_string(p) + " k=" + std::to_string(k) +
                                             " position " + std::to_string(i));
            ++checks;
        }
    }
    return checks;
}

struct WebFilterOracleStats {
    int pools = 0;
    int survivors = 0;
    int boundary_kept = 0; // relevance exactly equal to tau
};

inline WebFilterOracleStats run_web_filter_oracle(int pools, int max_pool, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    HashEmbedder embedder;
    WebFilterOracleStats st;
    for (int p = 0; p < pools; ++p) {
        const int n = pick_int(g, 1, max_pool);
        const int k = pick_int(g, 1, 20);
        const std::string query = random_phrase(g, 2, 6);
        auto results = random_rank_results(g, n);

        std::vector<std::string> texts;
        texts.reserve(static_cast<size_t>(n));
        for (const auto& r : results) texts.push_back(r.title + " " + r.snippet);
        std::vector<double> rel(static_cast<size_t>(n));
        for (const auto& [idx, cos] : ref_order(embedder, texts, query))
            rel[idx] = (cos + 1.0) / 2.0;

        const bool exact_boundary = (p % 3 == 0);
        double tau = 0.0;
        switch (p % 3) {
        case 0: tau = rel[g() % rel.size()]; break; // exact survival boundary
        case 1: tau = unit_double(g); break;
        default: tau = (g() % 2 == 0) ? 0.0 : 1.0; break;
        }

        std::vector<size_t> surviving;
        for (size_t i = 0; i < rel.size(); ++i)
            if (rel[i] >= tau) surviving.push_back(i);
        std::stable_sort(surviving.begin(), surviving.end(),
                         [&](size_t a, size_t b) { return rel[a] > rel[b]; });

        auto check = [&](const std::vector<WebResult>& lib, size_t limit, const char* label) {
            size_t expected = std::min(surviving.size(), limit);
            if (lib.size() != expected)
                throw std::runtime_error(std::string(label) + " size diverged at pool " +
                                         std::to_string(p) + ": got " + std::to_string(lib.size()) +
                                         ", expected " + std::to_string(expected));
            for (size_t i = 0; i < lib.size(); ++i) {
                size_t idx = surviving[i];
                if (lib[i].url != results[idx].url)
                    throw std::runtime_error(std::string(label) + " order diverged at pool " +
                                             std::to_string(p) + " position " + std::to_string(i));
                if (!lib[i].relevance.has_value())
                    throw std::runtime_error(std::string(label) + " left relevance unset at pool " +
                                             std::to_string(p));
                if (std::abs(*lib[i].relevance - rel[idx]) > 1e-12)
                    throw std::runtime_error(std::string(label) + " relevance diverged at pool " +
                                             std::to_string(p) + " position " + std::to_string(i));
            }
        };

        check(filter_web(results, query, embedder, tau, k), static_cast<size_t>(k), "web filter");

        // Truncation to k can hide a wrong threshold decision further down the
        // ordering, so boundary pools are re-run untruncated.
        if (exact_boundary) {
            auto full = filter_web(results, query, embedder, tau, n);
            check(full, static_cast<size_t>(n), "web filter (untruncated)");
            for (const auto& r : full)
                if (*r.relevance == tau) ++st.boundary_kept;
        }

        ++st.pools;
        st.survivors += static_cast<int>(std::min(surviving.size(), static_cast<size_t>(k)));
    }
    return st;
}

} // namespace bms::test
