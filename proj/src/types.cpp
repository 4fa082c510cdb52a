#include "bms/types.hpp"

#include "bms/error.hpp"
#include "bms/ids.hpp"
#include "bms/text.hpp"

#include <cctype>

namespace bms {

const char* to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::precondition: return "precondition error";
    case ErrorKind::invalid_keyword: return "invalid-keyword error";
    case ErrorKind::config: return "config error";
    case ErrorKind::planner: return "planner error";
    case ErrorKind::provider: return "provider error";
    case ErrorKind::transcript_miss: return "transcript-miss error";
    case ErrorKind::not_found: return "not-found error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::source_unavailable: return "source-unavailable error";
    case ErrorKind::executor: return "executor error";
    case ErrorKind::harness: return "harness error";
    case ErrorKind::scoring: return "scoring error";
    case ErrorKind::usage: return "usage error";
    case ErrorKind::io: return "io error";
    case ErrorKind::degenerate_vector: return "degenerate-vector error";
    }
    return "error";
}

const char* to_string(DimensionKind k) {
    return k == DimensionKind::decomposition ? "decomposition-dimension" : "keyword-dimension";
}

const char* to_string(ToolKind t) {
    switch (t) {
    case ToolKind::literature: return "literature";
    case ToolKind::protein_annotation: return "protein-annotation";
    case ToolKind::protein_structure: return "protein-structure";
    case ToolKind::web: return "web";
    }
    return "literature";
}

const char* to_string(LiteratureSource s) {
    switch (s) {
    case LiteratureSource::pubmed: return "pubmed";
    case LiteratureSource::pmc: return "pmc";
    case LiteratureSource::sciencedirect: return "sciencedirect";
    }
    return "pubmed";
}

const char* to_string(SearchEngine e) {
    switch (e) {
    case SearchEngine::duckduckgo: return "duckduckgo";
    case SearchEngine::google: return "google";
    case SearchEngine::brave: return "brave";
    }
    return "duckduckgo";
}

const char* to_string(McqProvenance p) {
    return p == McqProvenance::generated ? "generated" : "imported";
}

DimensionKind dimension_kind_from_string(const std::string& s) {
    if (s == "decomposition-dimension") return DimensionKind::decomposition;
    if (s == "keyword-dimension") return DimensionKind::keyword;
    raise(ErrorKind::parse, "unknown dimension kind: " + s);
}

ToolKind tool_kind_from_string(const std::string& s) {
    if (s == "literature") return ToolKind::literature;
    if (s == "protein-annotation") return ToolKind::protein_annotation;
    if (s == "protein-structure") return ToolKind::protein_structure;
    if (s == "web") return ToolKind::web;
    raise(ErrorKind::parse, "unknown tool kind: " + s);
}

LiteratureSource literature_source_from_string(const std::string& s) {
    if (s == "pubmed") return LiteratureSource::pubmed;
    if (s == "pmc") return LiteratureSource::pmc;
    if (s == "sciencedirect") return LiteratureSource::sciencedirect;
    raise(ErrorKind::parse, "unknown literature source: " + s);
}

SearchEngine search_engine_from_string(const std::string& s) {
    if (s == "duckduckgo") return SearchEngine::duckduckgo;
    if (s == "google") return SearchEngine::google;
    if (s == "brave") return SearchEngine::brave;
    raise(ErrorKind::parse, "unknown search engine: " + s);
}

McqProvenance mcq_provenance_from_string(const std::string& s) {
    if (s == "generated") return McqProvenance::generated;
    if (s == "imported") return McqProvenance::imported;
    raise(ErrorKind::parse, "unknown mcq provenance: " + s);
}

std::string Document::id() const {
    return std::string("doc:") + to_string(source) + ":" + external_id;
}

std::string WebResult::id() const {
    return std::string("web:") + to_string(engine) + ":" + to_hex(fnv1a64(url));
}

std::string ProteinRecord::id() const {
    return "prot:" + uniprot_id;
}

std::string StructureFile::id() const {
    return "struct:" + uniprot_id;
}

std::string normalize_keyword(const std::string& raw) {
    std::string surface = normalize_text(raw);
    if (surface.empty()) raise(ErrorKind::invalid_keyword, "keyword empty after trimming");
    return surface;
}

FilterConfig validate_config(const FilterConfig& cfg) {
    auto check_fraction = [](double v, const char* field) {
        if (!(v >= 0.0 && v <= 1.0))
            raise(ErrorKind::config, std::string(field) + " must lie in [0,1]");
    };
    auto check_count = [](int v, const char* field) {
        if (v < 1) raise(ErrorKind::config, std::string(field) + " must be >= 1");
    };
    check_fraction(cfg.coverage_threshold, "coverage_threshold");
    check_fraction(cfg.web_relevance_threshold, "web_relevance_threshold");
    check_count(cfg.literature_top_k, "literature_top_k");
    check_count(cfg.per_source_max, "per_source_max");
    check_count(cfg.web_top_k, "web_top_k");
    check_count(cfg.fallback_keyword_count, "fallback_keyword_count");
    return cfg;
}

bool is_valid_protein_sequence(const std::string& seq) {
    if (seq.empty()) return false;
    static const std::string allowed = "ACDEFGHIKLMNPQRSTVWYBJOUXZ";
    for (char c : seq) {
        char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (allowed.find(u) == std::string::npos) return false;
    }
    return true;
}

bool is_valid_pdb_payload(const std::string& payload) {
    size_t start = payload.find_first_not_of(" \t\r\n");
    if (start == std::string::npos) return false;
    std::string_view rest(payload.c_str() + start, payload.size() - start);
    // Record names occupy their own token; HEADERX must not pass.
    for (std::string_view name : {"HEADER", "ATOM", "MODEL"}) {
        if (!rest.starts_with(name)) continue;
        if (rest.size() == name.size()) return true;
        char next = rest[name.size()];
        if (next == ' ' || next == '\r' || next == '\n' || next == '\t') return true;
    }
    return false;
}

std::string make_query_id(const std::string& text) {
    return "q-" + to_hex(fnv1a64(normalize_text(text)));
}

std::string make_subquery_id(const std::string& query_id, int ordinal) {
    return query_id + "-s" + std::to_string(ordinal);
}

} // namespace bms
