#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bms/executor.hpp"
#include "bms/prompts.hpp"
#include "bms/providers.hpp"
#include "bms/timeutil.hpp"
#include "bms/types.hpp"

namespace bms {

// Fixed sentinel so downstream tooling can detect degraded sections
// mechanically.
inline constexpr const char* kInsufficientEvidenceMarker =
    "Insufficient evidence was retrieved to answer this sub-query.";

struct AnswerLink {
    std::string from; // SubAnswer id
    std::string to;   // SubAnswer id, never equal to from
    std::string relation;

    bool operator==(const AnswerLink&) const = default;
};

void to_json(nlohmann::json& j, const AnswerLink& v);
void from_json(const nlohmann::json& j, AnswerLink& v);

struct ReportOptions {
    int retry_budget = 2; // extra attempts after the first per provider call
};

SubAnswer extract_sub_answer(const SubQuery& sq, const RetrievalBundle& bundle,
                             const PromptTemplate& tmpl, LanguageModel& lm,
                             const ReportOptions& options = {});

std::vector<AnswerLink> link_sub_answers(const std::vector<SubAnswer>& answers,
                                         const PromptTemplate& tmpl, LanguageModel& lm,
                                         const ReportOptions& options = {});

Report generate_report(const UserQuery& q, const std::vector<SubAnswer>& answers,
                       const std::vector<AnswerLink>& links,
                       const std::vector<RetrievalBundle>& bundles, const PromptTemplate& tmpl,
                       LanguageModel& lm, const Clock& clock, const ReportOptions& options = {});

// Markdown with a fixed heading schema: # Research Report, ## Background,
// ## Key Findings, ## Sub-Answers (### per sub-query), ## References.
std::string render_markdown(const Report& report, const std::vector<SubAnswer>& answers);

struct ReportParagraph {
    int index = 0;       // stable 0-based position, referenced by context_refs
    std::string section; // owning heading text, headers never appear as content
    std::string text;

    bool operator==(const ReportParagraph&) const = default;
};

std::vector<ReportParagraph> split_paragraphs(const std::string& rendered);

// Writes <basename>.md and <basename>.json (typed report + answers + links).
struct ReportFilePair {
    std::filesystem::path markdown;
    std::filesystem::path sidecar;
};

ReportFilePair write_report_files(const std::filesystem::path& dir, const std::string& basename,
                                  const Report& report, const std::vector<SubAnswer>& answers,
                                  const std::vector<AnswerLink>& links);

} // namespace bms
