#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bms/prompts.hpp"
#include "bms/providers.hpp"
#include "bms/reporting.hpp"
#include "bms/types.hpp"

namespace bms {

// Level glossary: 1 mechanistic identification, 2 non-adjacent semantic
// integration, 3 temporal and causal reasoning.
const char* mcq_level_name(int level);

struct BenchOptions {
    int retry_budget = 2;          // answer retries before abstention
    int context_top_k = 5;
    int max_iterations_factor = 5; // generation bound = factor * count
};

std::string generate_topic(const PromptTemplate& tmpl, LanguageModel& lm, std::uint64_t seed = 0,
                           int retry_budget = 2);

// nullopt when the item is structurally valid for the given paragraph count
// and level; otherwise the rejection reason.
std::optional<std::string> validate_mcq(const McqItem& item, int level, int paragraph_count);

struct McqRejection {
    int iteration = 0;
    std::string reason;

    bool operator==(const McqRejection&) const = default;
};

struct McqGeneration {
    std::vector<McqItem> items;
    std::vector<McqRejection> rejections;
    int iterations = 0;
    bool exhausted = false; // stopped at the iteration bound before count
};

McqGeneration generate_mcqs(const std::vector<ReportParagraph>& paragraphs, int level, int count,
                            const PromptTemplate& tmpl, LanguageModel& lm,
                            const BenchOptions& options = {});

std::vector<ReportParagraph> select_context(const McqItem& item,
                                            const std::vector<ReportParagraph>& paragraphs,
                                            Embedder& embedder, int k);

struct McqDecision {
    std::string item_id;
    std::string label;  // "A".."D", or "" for an abstention
    std::string prompt; // the exact text sent to the provider
    std::string reply;  // last reply received, empty when none arrived

    bool operator==(const McqDecision&) const = default;
};

McqDecision answer_mcq(const McqItem& item, const std::vector<ReportParagraph>& context,
                       const PromptTemplate& tmpl, LanguageModel& lm,
                       const BenchOptions& options = {});

// Label extraction rule: the last standalone uppercase A-D token of the
// reply; no such token means the reply is unparseable.
std::optional<char> extract_choice(const std::string& reply);

BenchmarkRun score_run(const std::vector<McqItem>& items,
                       const std::map<std::string, std::vector<std::string>>& answers,
                       int repeats);

std::vector<McqItem> load_mcqs(const std::filesystem::path& path);
void save_mcqs(const std::filesystem::path& path, const std::vector<McqItem>& items);

// <basename>.json carries the BenchmarkRun summary; <basename>.jsonl one
// decision per line.
struct BenchmarkFilePair {
    std::filesystem::path summary;
    std::filesystem::path decisions;
};

BenchmarkFilePair write_benchmark_files(const std::filesystem::path& dir,
                                        const std::string& basename, const BenchmarkRun& run,
                                        const std::vector<McqDecision>& decisions);

} // namespace bms
