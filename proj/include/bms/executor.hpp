#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bms/planner.hpp"
#include "bms/providers.hpp"
#include "bms/timeutil.hpp"
#include "bms/types.hpp"

namespace bms {

// One provider call (or attempted call). seq values come from a run-global
// monotonic counter, giving a total order finer than the one-second clock.
struct RetrievalEvent {
    long long seq_start = 0;
    long long seq_end = 0;
    std::string subquery;
    std::string source; // "pubmed", "duckduckgo", "uniprot", "alphafold", ...
    std::string query;
    int raw_count = 0;
    int post_filter_count = 0;
    bool fallback = false;
    bool failed = false;
    Timestamp started_at = 0;
    Timestamp finished_at = 0;
    std::vector<std::string> returned_ids;
    std::string note;

    bool operator==(const RetrievalEvent&) const = default;
};

// Start/finish of one task-graph node.
struct NodeEvent {
    std::string node_id;
    std::string subquery;
    ToolKind tool = ToolKind::literature;
    bool group_owner = false; // first node of its (sub-query, tool) group does the work
    long long seq_start = 0;
    long long seq_end = 0;
    Timestamp started_at = 0;
    Timestamp finished_at = 0;

    bool operator==(const NodeEvent&) const = default;
};

void to_json(nlohmann::json& j, const RetrievalEvent& v);
void to_json(nlohmann::json& j, const NodeEvent& v);

// Thread-safe run log. Normalized emission strips seq numbers and timestamps
// and sorts canonically, so two runs doing the same logical work emit
// byte-identical files regardless of interleaving.
class ProvenanceLog {
public:
    explicit ProvenanceLog(Clock& clock);

    long long next_seq();
    Timestamp now() const;

    void add_event(RetrievalEvent event);
    void add_events(std::vector<RetrievalEvent> events);
    void add_node(NodeEvent event);

    std::vector<RetrievalEvent> events() const;
    std::vector<NodeEvent> node_events() const;

    std::string to_jsonl(bool normalized) const;
    void write_jsonl(const std::filesystem::path& path, bool normalized) const;

private:
    Clock& clock_;
    mutable std::mutex mu_;
    std::atomic<long long> seq_{0};
    std::vector<RetrievalEvent> events_;
    std::vector<NodeEvent> nodes_;
};

struct RetrievalBundle {
    std::string subquery;
    std::vector<Document> literature;
    std::vector<WebResult> web;
    std::optional<ProteinRecord> protein;
    std::optional<StructureFile> structure;
    std::vector<RetrievalEvent> provenance;
};

struct ExecutorOptions {
    int concurrency = 6; // in-flight provider call cap
    bool enable_literature = true;
    bool enable_web = true;
    bool enable_protein = true;
};

std::vector<Document> retrieve_literature(const SubQuery& sq, const KeywordSet& ks,
                                          const FilterConfig& cfg, LiteratureClient& client,
                                          Embedder& embedder, ProvenanceLog& log,
                                          std::vector<RetrievalEvent>* bundle_events = nullptr);

std::vector<WebResult> retrieve_web(const SubQuery& sq, const FilterConfig& cfg,
                                    WebSearchClient& client, Embedder& embedder,
                                    ProvenanceLog& log,
                                    std::vector<RetrievalEvent>* bundle_events = nullptr);

std::pair<std::optional<ProteinRecord>, std::optional<StructureFile>>
retrieve_protein(const ProteinIntent& intent, const std::string& subquery_id,
                 ProteinClient& client, ProvenanceLog& log,
                 std::vector<RetrievalEvent>* bundle_events = nullptr);

// Walks the graph in dependency waves with bounded provider concurrency. One
// bundle per sub-query comes back in sub-query order; per (sub-query, tool)
// group the first scheduled node performs the retrieval and the rest no-op.
std::vector<RetrievalBundle> execute_plan(const TaskGraph& g,
                                          const std::vector<SubQuery>& subqueries,
                                          const std::vector<KeywordSet>& keyword_sets,
                                          const std::map<std::string, ProteinIntent>& intents,
                                          const FilterConfig& cfg, const ProviderSet& providers,
                                          ProvenanceLog& log,
                                          const ExecutorOptions& options = {});

} // namespace bms
