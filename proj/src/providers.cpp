#include "bms/providers.hpp"

#include "bms/error.hpp"
#include "bms/text.hpp"

#include <cmath>
#include <unordered_set>

namespace bms {

std::string LanguageModel::complete(const std::string& prompt, const GenParams& params) {
    if (trim(prompt).empty()) raise(ErrorKind::precondition, "prompt must be non-empty");
    return do_complete(prompt, params);
}

std::vector<EmbeddingVector> Embedder::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) raise(ErrorKind::precondition, "embed batch must be non-empty");
    for (const auto& t : texts)
        if (t.empty()) raise(ErrorKind::precondition, "embed input must be non-empty");
    auto out = do_embed(texts);
    if (out.size() != texts.size())
        raise(ErrorKind::provider, "embedder returned wrong batch size");
    const size_t dim = out.empty() ? 0 : out.front().values.size();
    for (const auto& v : out) {
        if (v.values.size() != dim)
            raise(ErrorKind::provider, "dimensionality mismatch across embedding batch");
        for (double x : v.values)
            if (!std::isfinite(x)) raise(ErrorKind::provider, "non-finite embedding entry");
    }
    return out;
}

std::vector<Document> LiteratureClient::search(LiteratureSource source, const std::string& query,
                                               int max_results) {
    if (trim(query).empty()) raise(ErrorKind::precondition, "query must be non-empty");
    if (max_results < 1) raise(ErrorKind::precondition, "max_results must be >= 1");
    auto docs = do_search(source, query, max_results);
    if (static_cast<int>(docs.size()) > max_results) docs.resize(max_results);
    for (auto& d : docs) d.source = source;
    return docs;
}

std::vector<WebResult> WebSearchClient::search(SearchEngine engine, const std::string& query,
                                               int max_results) {
    if (trim(query).empty()) raise(ErrorKind::precondition, "query must be non-empty");
    if (max_results < 1) raise(ErrorKind::precondition, "max_results must be >= 1");
    auto results = do_search(engine, query, max_results);
    std::vector<WebResult> kept;
    kept.reserve(results.size());
    std::unordered_set<std::string> seen;
    for (auto& r : results) {
        if (r.url.empty()) continue;
        if (!seen.insert(r.url).second) continue; // keep first occurrence
        r.engine = engine;
        kept.push_back(std::move(r));
        if (static_cast<int>(kept.size()) == max_results) break;
    }
    return kept;
}

std::string ProteinClient::lookup_accession(const std::string& gene,
                                            const std::optional<std::string>& organism) {
    if (trim(gene).empty()) raise(ErrorKind::precondition, "gene must be non-empty");
    return do_lookup(gene, organism);
}

ProteinRecord ProteinClient::fetch_entry(const std::string& accession) {
    if (trim(accession).empty()) raise(ErrorKind::precondition, "accession must be non-empty");
    return do_fetch_entry(accession);
}

StructureFile ProteinClient::fetch_structure(const std::string& accession) {
    if (trim(accession).empty()) raise(ErrorKind::precondition, "accession must be non-empty");
    auto sf = do_fetch_structure(accession);
    if (!is_valid_pdb_payload(sf.payload))
        raise(ErrorKind::parse, "structure payload is not a PDB record stream");
    return sf;
}

} // namespace bms
