#pragma once

#include "bms/timeutil.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bms {

struct UserQuery {
    std::string id;
    std::string text;   // non-empty after trimming
    Timestamp submitted_at = 0;
};

enum class DimensionKind { decomposition, keyword };

struct SemanticDimension {
    std::string name;
    DimensionKind kind = DimensionKind::decomposition;

    bool operator==(const SemanticDimension&) const = default;
};

struct SubQuery {
    std::string id;
    std::string parent_query;
    std::string text;
    SemanticDimension dimension; // kind must be decomposition
    int ordinal = 1;             // 1..n contiguous per parent query

    bool operator==(const SubQuery&) const = default;
};

struct Keyword {
    std::string surface; // trimmed, case-folded, whitespace-collapsed
    int salience_rank = 1;
    SemanticDimension dimension;

    bool operator==(const Keyword&) const = default;
};

struct KeywordSet {
    std::string subquery;
    std::vector<Keyword> keywords; // salience ranks exactly 1..e, unique surfaces

    int size() const { return static_cast<int>(keywords.size()); }
    bool operator==(const KeywordSet&) const = default;
};

enum class ToolKind { literature, protein_annotation, protein_structure, web };

struct FilterConfig {
    double coverage_threshold = 0.80;    // theta
    int literature_top_k = 10;
    int per_source_max = 100;
    double web_relevance_threshold = 0.50; // tau
    int web_top_k = 10;
    int fallback_keyword_count = 3;

    bool operator==(const FilterConfig&) const = default;
};

enum class LiteratureSource { pubmed, pmc, sciencedirect };

struct Document {
    LiteratureSource source = LiteratureSource::pubmed;
    std::string external_id;
    std::string title;
    std::string abstract_text; // may be empty
    std::string url;
    Timestamp retrieved_at = 0;
    std::optional<double> similarity; // set after ranking, in [-1,1]

    std::string id() const; // "doc:<source>:<external_id>"
    bool operator==(const Document&) const = default;
};

enum class SearchEngine { duckduckgo, google, brave };

struct WebResult {
    SearchEngine engine = SearchEngine::duckduckgo;
    std::string title;
    std::string url; // non-empty
    std::string snippet;
    std::optional<double> relevance; // in [0,1]

    std::string id() const; // "web:<engine>:<url hash>"
    bool operator==(const WebResult&) const = default;
};

struct StructureFile {
    std::string uniprot_id;
    std::string format = "PDB";
    std::string payload; // must begin with HEADER, ATOM, or MODEL
    std::string fetched_from;

    std::string id() const; // "struct:<uniprot_id>"
    bool operator==(const StructureFile&) const = default;
};

struct ProteinRecord {
    std::string uniprot_id;
    std::string gene;
    std::optional<std::string> organism;
    std::string function_text;
    std::vector<std::string> interactions; // partner descriptors
    std::string sequence;                  // residue letters only
    std::optional<std::string> structure_ref; // StructureFile id when fetched

    std::string id() const; // "prot:<uniprot_id>"
    bool operator==(const ProteinRecord&) const = default;
};

struct SubAnswer {
    std::string id; // "ans:<subquery id>"
    std::string subquery;
    std::string text;
    std::vector<std::string> evidence; // ids resolving into the bundle; may be
                                       // empty only when confident is false
    bool confident = true;

    bool operator==(const SubAnswer&) const = default;
};

struct Citation {
    std::string evidence_id;
    std::string source;  // "pubmed", "google", "uniprot", ...
    std::string title;
    std::string locator; // URL or accession

    bool operator==(const Citation&) const = default;
};

struct Report {
    std::string query;
    std::vector<std::string> background;
    std::vector<std::string> findings;
    std::vector<Citation> references;    // first-citation order, deduplicated
    std::vector<std::string> sub_answers; // SubAnswer ids, one per sub-query
    Timestamp generated_at = 0;

    bool operator==(const Report&) const = default;
};

enum class McqProvenance { generated, imported };

inline constexpr std::array<char, 4> kOptionLabels = {'A', 'B', 'C', 'D'};

struct McqItem {
    std::string id;
    int level = 1; // 1..3
    std::string stem;
    std::array<std::string, 4> options; // labeled A-D, pairwise distinct
    char answer_key = 'A';
    std::vector<int> context_refs; // report paragraph indices
    McqProvenance provenance = McqProvenance::generated;

    bool operator==(const McqItem&) const = default;
};

struct LevelStats {
    double mean = 0.0;
    double stddev = 0.0; // population std-dev over repeats

    bool operator==(const LevelStats&) const = default;
};

struct BenchmarkRun {
    std::string id;
    std::vector<McqItem> items;
    // item id -> chosen label per repeat ("" records an abstention)
    std::map<std::string, std::vector<std::string>> answers;
    std::map<int, LevelStats> per_level_accuracy;
    int repeats = 1;

    bool operator==(const BenchmarkRun&) const = default;
};

// --- enum <-> string -------------------------------------------------------

const char* to_string(DimensionKind k);
const char* to_string(ToolKind t);
const char* to_string(LiteratureSource s);
const char* to_string(SearchEngine e);
const char* to_string(McqProvenance p);

DimensionKind dimension_kind_from_string(const std::string& s);
ToolKind tool_kind_from_string(const std::string& s);
LiteratureSource literature_source_from_string(const std::string& s);
SearchEngine search_engine_from_string(const std::string& s);
McqProvenance mcq_provenance_from_string(const std::string& s);

// --- operations ------------------------------------------------------------

// Trimmed, case-folded, internally whitespace-collapsed surface form.
// Throws ErrorKind::invalid_keyword when empty after trimming.
std::string normalize_keyword(const std::string& raw);

// Returns cfg unchanged when all invariants hold; throws ErrorKind::config
// naming the offending field otherwise.
FilterConfig validate_config(const FilterConfig& cfg);

// Residue alphabet check: the 20 standard letters plus B, J, O, U, X, Z.
bool is_valid_protein_sequence(const std::string& seq);

// PDB payload gate: first record must be HEADER, ATOM, or MODEL.
bool is_valid_pdb_payload(const std::string& payload);

std::string make_query_id(const std::string& text);
std::string make_subquery_id(const std::string& query_id, int ordinal);

} // namespace bms
