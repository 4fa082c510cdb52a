#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bms/config.hpp"
#include "bms/executor.hpp"
#include "bms/planner.hpp"
#include "bms/prompts.hpp"
#include "bms/providers.hpp"
#include "bms/reporting.hpp"

namespace bms {

// Mock runs pin their clock here (unless fixed_time overrides) so reruns
// produce byte-identical artifacts.
inline constexpr Timestamp kMockRunEpoch = 1735689600; // 2025-01-01T00:00:00Z

// One wired, runnable instance: validated config, providers, prompts, and
// vocabularies. Safe to copy; handles are shared.
struct Pipeline {
    AppConfig config;
    ProviderSet providers;
    PromptLibrary prompts;
    std::vector<SemanticDimension> dims;
    Lexicons lexicons;
    std::shared_ptr<Clock> clock;
};

// Mock wiring: in-memory providers seeded from the corpus file, extractive
// language model, hash embedder, fixed clock.
Pipeline wire_mock_pipeline(const AppConfig& cfg);

// Live wiring: HTTP retrieval clients (optionally behind the response cache)
// with the configured credentials, throttle, and retry budget. Generation
// stays on the deterministic extractive model.
Pipeline wire_live_pipeline(const AppConfig& cfg);

Pipeline wire_pipeline(const AppConfig& cfg); // dispatches on cfg.live

struct PlanArtifacts {
    UserQuery query;
    std::vector<SubQuery> subqueries;
    std::vector<KeywordSet> keyword_sets;
    GraphBuild build; // tools already assigned
    std::map<std::string, ProteinIntent> intents;
};

// Decompose, extract keywords, build the task graph, assign tools. Raises
// ErrorKind::usage on an empty query.
PlanArtifacts run_plan(Pipeline& p, const std::string& query_text);

struct AskArtifacts {
    PlanArtifacts plan;
    std::vector<RetrievalBundle> bundles;
    std::vector<SubAnswer> answers;
    std::vector<AnswerLink> links;
    Report report;
    std::string provenance_jsonl; // normalized: stable across reruns
};

AskArtifacts run_ask(Pipeline& p, const std::string& query_text);

nlohmann::json plan_payload(const PlanArtifacts& plan);
nlohmann::json graph_payload(const PlanArtifacts& plan);
nlohmann::json report_sidecar(const AskArtifacts& artifacts);

std::string render_plan_summary(const PlanArtifacts& plan);

struct PlanFiles {
    std::filesystem::path plan;  // query, sub-queries, keyword sets, intents
    std::filesystem::path graph; // nodes, edges, drops
};

PlanFiles write_plan_files(const std::filesystem::path& dir, const PlanArtifacts& plan);

struct AskFiles {
    std::filesystem::path markdown;
    std::filesystem::path sidecar;
    std::filesystem::path provenance;
};

AskFiles write_ask_files(const std::filesystem::path& dir, const AskArtifacts& artifacts);

} // namespace bms
