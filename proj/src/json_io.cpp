#include "bms/json_io.hpp"

#include "bms/error.hpp"

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace bms {

namespace {

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
    if (v.has_value()) j[key] = *v;
}

template <typename T>
void get_optional(const json& j, const char* key, std::optional<T>& v) {
    if (j.contains(key) && !j.at(key).is_null())
        v = j.at(key).get<T>();
    else
        v.reset();
}

} // namespace

void to_json(json& j, const UserQuery& v) {
    j = json{{"id", v.id}, {"text", v.text}, {"submitted_at", to_rfc3339(v.submitted_at)}};
}

void from_json(const json& j, UserQuery& v) {
    j.at("id").get_to(v.id);
    j.at("text").get_to(v.text);
    v.submitted_at = parse_rfc3339(j.at("submitted_at").get<std::string>());
}

void to_json(json& j, const SemanticDimension& v) {
    j = json{{"name", v.name}, {"kind", to_string(v.kind)}};
}

void from_json(const json& j, SemanticDimension& v) {
    j.at("name").get_to(v.name);
    v.kind = dimension_kind_from_string(j.at("kind").get<std::string>());
}

void to_json(json& j, const SubQuery& v) {
    j = json{{"id", v.id},
             {"parent_query", v.parent_query},
             {"text", v.text},
             {"dimension", v.dimension},
             {"ordinal", v.ordinal}};
}

void from_json(const json& j, SubQuery& v) {
    j.at("id").get_to(v.id);
    j.at("parent_query").get_to(v.parent_query);
    j.at("text").get_to(v.text);
    j.at("dimension").get_to(v.dimension);
    j.at("ordinal").get_to(v.ordinal);
}

void to_json(json& j, const Keyword& v) {
    j = json{{"surface", v.surface},
             {"salience_rank", v.salience_rank},
             {"dimension", v.dimension}};
}

void from_json(const json& j, Keyword& v) {
    j.at("surface").get_to(v.surface);
    j.at("salience_rank").get_to(v.salience_rank);
    j.at("dimension").get_to(v.dimension);
}

void to_json(json& j, const KeywordSet& v) {
    j = json{{"subquery", v.subquery}, {"keywords", v.keywords}, {"size", v.size()}};
}

void from_json(const json& j, KeywordSet& v) {
    j.at("subquery").get_to(v.subquery);
    j.at("keywords").get_to(v.keywords);
}

void to_json(json& j, const FilterConfig& v) {
    j = json{{"coverage_threshold", v.coverage_threshold},
             {"literature_top_k", v.literature_top_k},
             {"per_source_max", v.per_source_max},
             {"web_relevance_threshold", v.web_relevance_threshold},
             {"web_top_k", v.web_top_k},
             {"fallback_keyword_count", v.fallback_keyword_count}};
}

void from_json(const json& j, FilterConfig& v) {
    FilterConfig defaults;
    v.coverage_threshold = j.value("coverage_threshold", defaults.coverage_threshold);
    v.literature_top_k = j.value("literature_top_k", defaults.literature_top_k);
    v.per_source_max = j.value("per_source_max", defaults.per_source_max);
    v.web_relevance_threshold =
        j.value("web_relevance_threshold", defaults.web_relevance_threshold);
    v.web_top_k = j.value("web_top_k", defaults.web_top_k);
    v.fallback_keyword_count = j.value("fallback_keyword_count", defaults.fallback_keyword_count);
}

void to_json(json& j, const Document& v) {
    j = json{{"source", to_string(v.source)},
             {"external_id", v.external_id},
             {"title", v.title},
             {"abstract", v.abstract_text},
             {"url", v.url},
             {"retrieved_at", to_rfc3339(v.retrieved_at)}};
    put_optional(j, "similarity", v.similarity);
}

void from_json(const json& j, Document& v) {
    v.source = literature_source_from_string(j.at("source").get<std::string>());
    j.at("external_id").get_to(v.external_id);
    j.at("title").get_to(v.title);
    j.at("abstract").get_to(v.abstract_text);
    j.at("url").get_to(v.url);
    v.retrieved_at = parse_rfc3339(j.at("retrieved_at").get<std::string>());
    get_optional(j, "similarity", v.similarity);
}

void to_json(json& j, const WebResult& v) {
    j = json{{"engine", to_string(v.engine)},
             {"title", v.title},
             {"url", v.url},
             {"snippet", v.snippet}};
    put_optional(j, "relevance", v.relevance);
}

void from_json(const json& j, WebResult& v) {
    v.engine = search_engine_from_string(j.at("engine").get<std::string>());
    j.at("title").get_to(v.title);
    j.at("url").get_to(v.url);
    j.at("snippet").get_to(v.snippet);
    get_optional(j, "relevance", v.relevance);
}

void to_json(json& j, const ProteinRecord& v) {
    j = json{{"uniprot_id", v.uniprot_id},
             {"gene", v.gene},
             {"function_text", v.function_text},
             {"interactions", v.interactions},
             {"sequence", v.sequence}};
    put_optional(j, "organism", v.organism);
    put_optional(j, "structure", v.structure_ref);
}

void from_json(const json& j, ProteinRecord& v) {
    j.at("uniprot_id").get_to(v.uniprot_id);
    j.at("gene").get_to(v.gene);
    j.at("function_text").get_to(v.function_text);
    j.at("interactions").get_to(v.interactions);
    j.at("sequence").get_to(v.sequence);
    get_optional(j, "organism", v.organism);
    get_optional(j, "structure", v.structure_ref);
}

void to_json(json& j, const StructureFile& v) {
    j = json{{"uniprot_id", v.uniprot_id},
             {"format", v.format},
             {"payload", v.payload},
             {"fetched_from", v.fetched_from}};
}

void from_json(const json& j, StructureFile& v) {
    j.at("uniprot_id").get_to(v.uniprot_id);
    j.at("format").get_to(v.format);
    j.at("payload").get_to(v.payload);
    j.at("fetched_from").get_to(v.fetched_from);
}

void to_json(json& j, const SubAnswer& v) {
    j = json{{"id", v.id},
             {"subquery", v.subquery},
             {"text", v.text},
             {"evidence", v.evidence},
             {"confident", v.confident}};
}

void from_json(const json& j, SubAnswer& v) {
    j.at("id").get_to(v.id);
    j.at("subquery").get_to(v.subquery);
    j.at("text").get_to(v.text);
    j.at("evidence").get_to(v.evidence);
    j.at("confident").get_to(v.confident);
}

void to_json(json& j, const Citation& v) {
    j = json{{"evidence_id", v.evidence_id},
             {"source", v.source},
             {"title", v.title},
             {"locator", v.locator}};
}

void from_json(const json& j, Citation& v) {
    j.at("evidence_id").get_to(v.evidence_id);
    j.at("source").get_to(v.source);
    j.at("title").get_to(v.title);
    j.at("locator").get_to(v.locator);
}

void to_json(json& j, const Report& v) {
    j = json{{"query", v.query},
             {"background", v.background},
             {"findings", v.findings},
             {"references", v.references},
             {"sub_answers", v.sub_answers},
             {"generated_at", to_rfc3339(v.generated_at)}};
}

void from_json(const json& j, Report& v) {
    j.at("query").get_to(v.query);
    j.at("background").get_to(v.background);
    j.at("findings").get_to(v.findings);
    j.at("references").get_to(v.references);
    j.at("sub_answers").get_to(v.sub_answers);
    v.generated_at = parse_rfc3339(j.at("generated_at").get<std::string>());
}

void to_json(json& j, const McqItem& v) {
    j = json{{"id", v.id},
             {"level", v.level},
             {"stem", v.stem},
             {"options", v.options},
             {"answer_key", std::string(1, v.answer_key)},
             {"context_refs", v.context_refs},
             {"provenance", to_string(v.provenance)}};
}

void from_json(const json& j, McqItem& v) {
    j.at("id").get_to(v.id);
    j.at("level").get_to(v.level);
    j.at("stem").get_to(v.stem);
    j.at("options").get_to(v.options);
    std::string key = j.at("answer_key").get<std::string>();
    if (key.size() != 1 || key[0] < 'A' || key[0] > 'D')
        raise(ErrorKind::parse, "answer_key must be one of A-D");
    v.answer_key = key[0];
    j.at("context_refs").get_to(v.context_refs);
    v.provenance = mcq_provenance_from_string(j.at("provenance").get<std::string>());
}

void to_json(json& j, const LevelStats& v) {
    j = json{{"mean", v.mean}, {"stddev", v.stddev}};
}

void from_json(const json& j, LevelStats& v) {
    j.at("mean").get_to(v.mean);
    j.at("stddev").get_to(v.stddev);
}

void to_json(json& j, const BenchmarkRun& v) {
    json levels = json::object();
    for (const auto& [level, stats] : v.per_level_accuracy)
        levels[std::to_string(level)] = stats;
    j = json{{"id", v.id},
             {"items", v.items},
             {"answers", v.answers},
             {"per_level_accuracy", levels},
             {"repeats", v.repeats}};
}

void from_json(const json& j, BenchmarkRun& v) {
    j.at("id").get_to(v.id);
    j.at("items").get_to(v.items);
    j.at("answers").get_to(v.answers);
    v.per_level_accuracy.clear();
    for (const auto& [key, stats] : j.at("per_level_accuracy").items())
        v.per_level_accuracy[std::stoi(key)] = stats.get<LevelStats>();
    j.at("repeats").get_to(v.repeats);
}

} // namespace bms
