#include "bms/reporting.hpp"

#include "bms/error.hpp"
#include "bms/json_io.hpp"
#include "bms/text.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace bms {

void to_json(nlohmann::json& j, const AnswerLink& v) {
    j = nlohmann::json{{"from", v.from}, {"to", v.to}, {"relation", v.relation}};
}

void from_json(const nlohmann::json& j, AnswerLink& v) {
    j.at("from").get_to(v.from);
    j.at("to").get_to(v.to);
    j.at("relation").get_to(v.relation);
    if (v.from == v.to) raise(ErrorKind::parse, "answer link from == to: " + v.from);
}

namespace {

bool retryable(const Error& e) {
    return e.kind() == ErrorKind::provider || e.kind() == ErrorKind::source_unavailable;
}

std::string one_line(const std::string& s) { return collapse_whitespace(s); }

std::vector<std::string> lines_of(const std::string& text) { return split(text, '\n'); }

// Lines strictly between the header and the terminator (or end of reply).
std::vector<std::string> section_lines(const std::vector<std::string>& lines,
                                       const std::string& header,
                                       const std::string& terminator) {
    std::vector<std::string> out;
    bool in_section = false;
    for (const auto& line : lines) {
        std::string t = trim(line);
        if (!in_section) {
            if (t == header) in_section = true;
            continue;
        }
        if (!terminator.empty() && t == terminator) break;
        out.push_back(line);
    }
    return out;
}

std::vector<std::string> paragraphs_of(const std::vector<std::string>& lines) {
    std::vector<std::string> out;
    std::string current;
    auto flush = [&] {
        std::string t = trim(current);
        if (!t.empty()) out.push_back(t);
        current.clear();
    };
    for (const auto& line : lines) {
        if (trim(line).empty()) {
            flush();
        } else {
            if (!current.empty()) current += "\n";
            current += line;
        }
    }
    flush();
    return out;
}

struct EvidenceItem {
    std::string title;
    std::string body;
    std::string source;
    std::string locator;
};

// Flattens a bundle into listable evidence keyed by item id.
std::vector<std::pair<std::string, EvidenceItem>> evidence_items(const RetrievalBundle& bundle) {
    std::vector<std::pair<std::string, EvidenceItem>> items;
    for (const auto& d : bundle.literature) {
        EvidenceItem item;
        item.title = one_line(d.title);
        item.body = d.abstract_text.empty() ? "(no abstract)" : one_line(d.abstract_text);
        item.source = to_string(d.source);
        item.locator = d.url.empty() ? d.external_id : d.url;
        items.emplace_back(d.id(), std::move(item));
    }
    for (const auto& r : bundle.web) {
        EvidenceItem item;
        item.title = one_line(r.title);
        item.body = r.snippet.empty() ? "(no snippet)" : one_line(r.snippet);
        item.source = to_string(r.engine);
        item.locator = r.url;
        items.emplace_back(r.id(), std::move(item));
    }
    if (bundle.protein) {
        const auto& p = *bundle.protein;
        EvidenceItem item;
        item.title = one_line(p.gene + " (" + p.uniprot_id + ")");
        std::string body = p.function_text;
        if (!p.interactions.empty()) body += " Interactions: " + join(p.interactions, "; ") + ".";
        item.body = body.empty() ? "(no annotation)" : one_line(body);
        item.source = "uniprot";
        item.locator = p.uniprot_id;
        items.emplace_back(p.id(), std::move(item));
    }
    if (bundle.structure) {
        const auto& s = *bundle.structure;
        EvidenceItem item;
        item.title = one_line(s.uniprot_id + " structure");
        item.body = s.format + " model";
        item.source = "alphafold";
        item.locator = s.fetched_from.empty() ? s.uniprot_id : s.fetched_from;
        items.emplace_back(s.id(), std::move(item));
    }
    return items;
}

SubAnswer degraded_answer(const SubQuery& sq) {
    SubAnswer ans;
    ans.id = "ans:" + sq.id;
    ans.subquery = sq.id;
    ans.text = kInsufficientEvidenceMarker;
    ans.confident = false;
    return ans;
}

} // namespace

SubAnswer extract_sub_answer(const SubQuery& sq, const RetrievalBundle& bundle,
                             const PromptTemplate& tmpl, LanguageModel& lm,
                             const ReportOptions& options) {
    if (tmpl.name != TemplateName::sub_answer)
        raise(ErrorKind::precondition, "extract_sub_answer needs the sub_answer template");
    if (bundle.subquery != sq.id)
        raise(ErrorKind::precondition,
              "bundle belongs to " + bundle.subquery + ", not " + sq.id);

    const auto items = evidence_items(bundle);
    if (items.empty()) return degraded_answer(sq);

    std::set<std::string> known_ids;
    std::vector<std::string> listing;
    for (const auto& [id, item] : items) {
        known_ids.insert(id);
        listing.push_back("- " + id + " | " + item.title + " | " + item.body);
    }
    const std::string prompt =
        render_prompt(tmpl, {{"subquery", sq.text}, {"evidence", join(listing, "\n")}});

    for (int attempt = 0; attempt <= options.retry_budget; ++attempt) {
        std::string reply;
        try {
            reply = lm.complete(prompt);
        } catch (const Error& e) {
            if (!retryable(e)) throw;
            continue;
        }
        auto lines = lines_of(reply);

        // ANSWER text runs to the EVIDENCE line; both markers are mandatory.
        std::vector<std::string> answer_lines;
        std::vector<std::string> evidence_tokens;
        std::optional<bool> confident;
        enum { before, in_answer, in_evidence } state = before;
        for (const auto& raw : lines) {
            std::string t = trim(raw);
            if (t.rfind("ANSWER:", 0) == 0) {
                state = in_answer;
                auto rest = trim(t.substr(7));
                if (!rest.empty()) answer_lines.push_back(rest);
                continue;
            }
            if (t.rfind("EVIDENCE:", 0) == 0) {
                state = in_evidence;
                for (auto& tok : split(t.substr(9), ','))
                    if (!trim(tok).empty()) evidence_tokens.push_back(trim(tok));
                continue;
            }
            if (t.rfind("CONFIDENT:", 0) == 0) {
                auto v = to_lower_ascii(trim(t.substr(10)));
                confident = v.rfind("yes", 0) == 0;
                state = before;
                continue;
            }
            if (state == in_answer) answer_lines.push_back(raw);
            if (state == in_evidence)
                for (auto& tok : split(t, ','))
                    if (!trim(tok).empty()) evidence_tokens.push_back(trim(tok));
        }
        if (answer_lines.empty() && !confident.has_value()) continue; // not the reply shape

        SubAnswer ans;
        ans.id = "ans:" + sq.id;
        ans.subquery = sq.id;
        ans.text = trim(join(answer_lines, "\n"));

        std::set<std::string> seen;
        for (const auto& tok : evidence_tokens) {
            if (!known_ids.count(tok)) continue; // unknown ids are stripped
            if (seen.insert(tok).second) ans.evidence.push_back(tok);
        }
        ans.confident = confident.value_or(false) && !ans.text.empty();
        if (ans.evidence.empty()) ans.confident = false;
        if (ans.text.empty()) {
            ans.text = kInsufficientEvidenceMarker;
            ans.confident = false;
        }
        return ans;
    }
    return degraded_answer(sq);
}

std::vector<AnswerLink> link_sub_answers(const std::vector<SubAnswer>& answers,
                                         const PromptTemplate& tmpl, LanguageModel& lm,
                                         const ReportOptions& options) {
    if (tmpl.name != TemplateName::links)
        raise(ErrorKind::precondition, "link_sub_answers needs the links template");
    if (answers.empty()) raise(ErrorKind::precondition, "no sub-answers to link");
    if (answers.size() == 1) return {};

    std::vector<std::string> listing;
    for (size_t i = 0; i < answers.size(); ++i) {
        std::string first_line = split(answers[i].text, '\n').front();
        listing.push_back(std::to_string(i + 1) + ": " + answers[i].subquery + " | " +
                          one_line(first_line));
    }
    const std::string prompt = render_prompt(tmpl, {{"answers", join(listing, "\n")}});

    for (int attempt = 0; attempt <= options.retry_budget; ++attempt) {
        std::string reply;
        try {
            reply = lm.complete(prompt);
        } catch (const Error& e) {
            if (!retryable(e)) throw;
            continue;
        }
        if (reply.find("LINKS:") == std::string::npos) continue;
        if (contains_normalized(reply, "links: none")) return {};

        std::vector<AnswerLink> links;
        std::set<std::pair<int, int>> seen;
        bool in_links = false;
        for (const auto& raw : lines_of(reply)) {
            std::string t = trim(raw);
            if (t.rfind("LINKS:", 0) == 0) {
                in_links = true;
                continue;
            }
            if (!in_links || t.empty()) continue;
            int from = 0, to = 0;
            if (std::sscanf(t.c_str(), "%d -> %d", &from, &to) != 2) continue;
            if (from < 1 || to < 1 || from > static_cast<int>(answers.size()) ||
                to > static_cast<int>(answers.size()) || from == to)
                continue;
            if (!seen.insert({from, to}).second) continue;
            std::string relation = "related";
            auto bar = t.find('|');
            if (bar != std::string::npos && !trim(t.substr(bar + 1)).empty())
                relation = trim(t.substr(bar + 1));
            links.push_back(AnswerLink{answers[from - 1].id, answers[to - 1].id, relation});
        }
        return links;
    }
    return {}; // provider failure degrades to an unlinked report
}

namespace {

Report fallback_report(const UserQuery& q, const std::vector<SubAnswer>& answers,
                       const Clock& clock) {
    Report report;
    report.query = q.id;
    report.background = {"Synthesis was unavailable; each sub-answer is reproduced verbatim "
                         "in the findings below."};
    for (const auto& ans : answers) report.findings.push_back(ans.text);
    report.generated_at = clock.now();
    return report;
}

} // namespace

Report generate_report(const UserQuery& q, const std::vector<SubAnswer>& answers,
                       const std::vector<AnswerLink>& links,
                       const std::vector<RetrievalBundle>& bundles, const PromptTemplate& tmpl,
                       LanguageModel& lm, const Clock& clock, const ReportOptions& options) {
    if (tmpl.name != TemplateName::report)
        raise(ErrorKind::precondition, "generate_report needs the report template");
    if (answers.empty()) raise(ErrorKind::precondition, "no sub-answers to report on");
    {
        std::set<std::string> answered;
        for (const auto& ans : answers)
            if (!answered.insert(ans.subquery).second)
                raise(ErrorKind::precondition, "two answers for sub-query " + ans.subquery);
        for (const auto& bundle : bundles)
            if (!answered.count(bundle.subquery))
                raise(ErrorKind::precondition, "no answer for sub-query " + bundle.subquery);
    }

    std::vector<std::string> blocks;
    for (const auto& ans : answers) {
        blocks.push_back("SUBANSWER " + ans.id + " | " + ans.subquery + "\n" + ans.text +
                         "\nEND SUBANSWER");
    }
    std::vector<std::string> link_lines;
    for (const auto& link : links)
        link_lines.push_back(link.from + " -> " + link.to + " | " + link.relation);
    const std::string prompt =
        render_prompt(tmpl, {{"query", q.text},
                             {"sub_answers", join(blocks, "\n")},
                             {"links", link_lines.empty() ? "none" : join(link_lines, "\n")}});

    Report report;
    bool synthesized = false;
    for (int attempt = 0; attempt <= options.retry_budget && !synthesized; ++attempt) {
        std::string reply;
        try {
            reply = lm.complete(prompt);
        } catch (const Error& e) {
            if (!retryable(e)) throw;
            continue;
        }
        auto lines = lines_of(reply);
        if (reply.find("BACKGROUND:") == std::string::npos ||
            reply.find("FINDINGS:") == std::string::npos)
            continue;
        report.background = paragraphs_of(section_lines(lines, "BACKGROUND:", "FINDINGS:"));
        report.findings = paragraphs_of(section_lines(lines, "FINDINGS:", ""));
        synthesized = true;
    }
    if (!synthesized) {
        report = fallback_report(q, answers, clock);
    } else {
        report.query = q.id;
        report.generated_at = clock.now();
        if (report.background.empty())
            report.background = {"No background could be synthesized from the retrieved "
                                 "evidence."};
        if (report.findings.empty()) {
            for (const auto& ans : answers) report.findings.push_back(ans.text);
        }
    }

    // References in first-citation order, resolved through the bundles.
    std::map<std::string, EvidenceItem> by_id;
    for (const auto& bundle : bundles)
        for (auto& [id, item] : evidence_items(bundle)) by_id.emplace(id, std::move(item));
    std::set<std::string> cited;
    for (const auto& ans : answers) {
        report.sub_answers.push_back(ans.id);
        for (const auto& ev : ans.evidence) {
            auto it = by_id.find(ev);
            if (it == by_id.end() || !cited.insert(ev).second) continue;
            report.references.push_back(
                Citation{ev, it->second.source, it->second.title, it->second.locator});
        }
    }
    return report;
}

std::string render_markdown(const Report& report, const std::vector<SubAnswer>& answers) {
    std::map<std::string, const SubAnswer*> by_id;
    for (const auto& ans : answers) by_id.emplace(ans.id, &ans);

    std::ostringstream md;
    md << "# Research Report\n\n";
    md << "## Background\n\n";
    for (const auto& p : report.background) md << p << "\n\n";
    md << "## Key Findings\n\n";
    for (const auto& p : report.findings) md << p << "\n\n";
    md << "## Sub-Answers\n\n";
    for (const auto& id : report.sub_answers) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            raise(ErrorKind::precondition, "report cites unknown sub-answer " + id);
        const SubAnswer& ans = *it->second;
        md << "### " << ans.subquery << "\n\n";
        md << ans.text << "\n\n";
        if (!ans.evidence.empty()) md << "Evidence: " << join(ans.evidence, ", ") << "\n\n";
        if (!ans.confident)
            md << "Confidence: low; treat this section as provisional.\n\n";
    }
    md << "## References\n\n";
    if (report.references.empty()) {
        md << "No evidence items were cited.\n";
    } else {
        for (const auto& ref : report.references)
            md << "- " << ref.evidence_id << " (" << ref.source << ") " << ref.title << " — "
               << ref.locator << "\n";
    }
    return md.str();
}

std::vector<ReportParagraph> split_paragraphs(const std::string& rendered) {
    std::vector<ReportParagraph> out;
    std::string section;
    std::string current;
    auto flush = [&] {
        std::string t = trim(current);
        current.clear();
        if (t.empty()) return;
        ReportParagraph p;
        p.index = static_cast<int>(out.size());
        p.section = section;
        p.text = t;
        out.push_back(std::move(p));
    };
    for (const auto& line : split(rendered, '\n')) {
        std::string t = trim(line);
        if (t.rfind('#', 0) == 0) {
            flush();
            section = trim(t.substr(t.find_first_not_of('#')));
            continue;
        }
        if (t.empty()) {
            flush();
            continue;
        }
        if (!current.empty()) current += "\n";
        current += line;
    }
    flush();
    return out;
}

ReportFilePair write_report_files(const std::filesystem::path& dir, const std::string& basename,
                                  const Report& report, const std::vector<SubAnswer>& answers,
                                  const std::vector<AnswerLink>& links) {
    std::filesystem::create_directories(dir);
    ReportFilePair pair{dir / (basename + ".md"), dir / (basename + ".json")};

    std::ofstream md(pair.markdown, std::ios::binary);
    if (!md) raise(ErrorKind::io, "cannot write " + pair.markdown.string());
    md << render_markdown(report, answers);

    nlohmann::json sidecar{{"report", report}, {"answers", answers}, {"links", links}};
    std::ofstream js(pair.sidecar, std::ios::binary);
    if (!js) raise(ErrorKind::io, "cannot write " + pair.sidecar.string());
    js << sidecar.dump(2) << '\n';
    return pair;
}

} // namespace bms
