#pragma once

#include "bms/types.hpp"

#include <nlohmann/json_fwd.hpp>

// Canonical on-disk encoding: JSON, snake_case fields, RFC 3339 timestamps.
// Optional fields are omitted when absent.

namespace bms {

void to_json(nlohmann::json& j, const UserQuery& v);
void from_json(const nlohmann::json& j, UserQuery& v);

void to_json(nlohmann::json& j, const SemanticDimension& v);
void from_json(const nlohmann::json& j, SemanticDimension& v);

void to_json(nlohmann::json& j, const SubQuery& v);
void from_json(const nlohmann::json& j, SubQuery& v);

void to_json(nlohmann::json& j, const Keyword& v);
void from_json(const nlohmann::json& j, Keyword& v);

void to_json(nlohmann::json& j, const KeywordSet& v);
void from_json(const nlohmann::json& j, KeywordSet& v);

void to_json(nlohmann::json& j, const FilterConfig& v);
void from_json(const nlohmann::json& j, FilterConfig& v);

void to_json(nlohmann::json& j, const Document& v);
void from_json(const nlohmann::json& j, Document& v);

void to_json(nlohmann::json& j, const WebResult& v);
void from_json(const nlohmann::json& j, WebResult& v);

void to_json(nlohmann::json& j, const ProteinRecord& v);
void from_json(const nlohmann::json& j, ProteinRecord& v);

void to_json(nlohmann::json& j, const StructureFile& v);
void from_json(const nlohmann::json& j, StructureFile& v);

void to_json(nlohmann::json& j, const SubAnswer& v);
void from_json(const nlohmann::json& j, SubAnswer& v);

void to_json(nlohmann::json& j, const Citation& v);
void from_json(const nlohmann::json& j, Citation& v);

void to_json(nlohmann::json& j, const Report& v);
void from_json(const nlohmann::json& j, Report& v);

void to_json(nlohmann::json& j, const McqItem& v);
void from_json(const nlohmann::json& j, McqItem& v);

void to_json(nlohmann::json& j, const LevelStats& v);
void from_json(const nlohmann::json& j, LevelStats& v);

void to_json(nlohmann::json& j, const BenchmarkRun& v);
void from_json(const nlohmann::json& j, BenchmarkRun& v);

} // namespace bms
