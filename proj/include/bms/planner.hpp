#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bms/prompts.hpp"
#include "bms/providers.hpp"
#include "bms/types.hpp"

namespace bms {

struct PlannerOptions {
    int max_subqueries = 8;
    int max_keywords = 8;
    int retry_budget = 2; // extra attempts after the first
};

// Vocabulary driving protein-intent detection. All entries are matched on
// normalized text.
struct Lexicons {
    std::vector<std::string> genes;
    std::vector<std::string> organisms;
    std::vector<std::string> structure_terms;
    std::vector<std::string> annotation_terms;

    static Lexicons load_file(const std::filesystem::path& path);
};

std::vector<SemanticDimension> load_dimensions(const std::filesystem::path& path);

enum class ProteinIntentKind { none, annotation, structure };

const char* to_string(ProteinIntentKind k);

struct ProteinIntent {
    ProteinIntentKind kind = ProteinIntentKind::none;
    std::optional<std::string> gene;     // present whenever kind != none
    std::optional<std::string> organism;

    bool operator==(const ProteinIntent&) const = default;
};

struct TaskNode {
    std::string id;
    std::string source_subquery; // SubQuery id
    Keyword keyword;
    ToolKind tool = ToolKind::literature;

    bool operator==(const TaskNode&) const = default;
};

struct TaskGraph {
    std::vector<TaskNode> nodes;
    std::vector<std::pair<std::string, std::string>> edges; // from before to

    const TaskNode* find(const std::string& id) const;
    bool operator==(const TaskGraph&) const = default;
};

// Graph construction outcome: accepted edges live in graph; proposals that
// would have closed a cycle are reported so callers can audit the drops.
struct GraphBuild {
    TaskGraph graph;
    std::vector<std::pair<std::string, std::string>> dropped_edges;
    int invalid_proposals = 0;
};

// Kahn order over node ids, ties resolved by node listing order. Throws
// ErrorKind::planner when the graph has a cycle.
std::vector<std::string> topo_order(const TaskGraph& g);

std::vector<SubQuery> decompose_query(const UserQuery& q,
                                      const std::vector<SemanticDimension>& dims,
                                      const PromptTemplate& tmpl, LanguageModel& lm,
                                      const PlannerOptions& opts = {});

KeywordSet extract_keywords(const SubQuery& sq, const std::vector<SemanticDimension>& dims,
                            const PromptTemplate& tmpl, LanguageModel& lm,
                            const PlannerOptions& opts = {});

GraphBuild build_task_graph(const std::vector<KeywordSet>& sets, const PromptTemplate& tmpl,
                            LanguageModel& lm, const PlannerOptions& opts = {});

ProteinIntent detect_protein_intent(const SubQuery& sq, const Lexicons& lexicons);

TaskGraph assign_tools(const TaskGraph& g,
                       const std::map<std::string, ProteinIntent>& intents);

} // namespace bms
