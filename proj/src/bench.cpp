#include "bms/bench.hpp"

#include "bms/error.hpp"
#include "bms/filtering.hpp"
#include "bms/ids.hpp"
#include "bms/json_io.hpp"
#include "bms/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace bms {

const char* mcq_level_name(int level) {
    switch (level) {
    case 1: return "mechanistic identification";
    case 2: return "non-adjacent semantic integration";
    case 3: return "temporal and causal reasoning";
    }
    raise(ErrorKind::precondition, "mcq level must be 1, 2, or 3");
}

namespace {

bool retryable(const Error& e) {
    return e.kind() == ErrorKind::provider || e.kind() == ErrorKind::source_unavailable;
}

} // namespace

std::string generate_topic(const PromptTemplate& tmpl, LanguageModel& lm, std::uint64_t seed,
                           int retry_budget) {
    if (tmpl.name != TemplateName::topic)
        raise(ErrorKind::precondition, "generate_topic needs the topic template");
    const std::string prompt = render_prompt(tmpl, {{"seed", std::to_string(seed)}});
    std::string last_error = "empty reply";
    for (int attempt = 0; attempt <= retry_budget; ++attempt) {
        std::string reply;
        try {
            reply = lm.complete(prompt);
        } catch (const Error& e) {
            if (!retryable(e)) throw;
            last_error = e.what();
            continue;
        }
        std::string topic = collapse_whitespace(reply);
        if (!topic.empty()) return topic;
    }
    raise(ErrorKind::harness, "no topic produced: " + last_error);
}

std::optional<std::string> validate_mcq(const McqItem& item, int level, int paragraph_count) {
    if (level < 1 || level > 3) return "requested level out of range";
    if (item.level != level)
        return "level tag " + std::to_string(item.level) + " does not match requested level " +
               std::to_string(level);
    if (trim(item.stem).empty()) return "empty stem";
    for (size_t i = 0; i < item.options.size(); ++i) {
        if (trim(item.options[i]).empty())
            return std::string("empty option ") + kOptionLabels[i];
        for (size_t j = i + 1; j < item.options.size(); ++j)
            if (item.options[i] == item.options[j])
                return std::string("options ") + kOptionLabels[i] + " and " + kOptionLabels[j] +
                       " are identical";
    }
    if (item.answer_key < 'A' || item.answer_key > 'D')
        return std::string("answer key '") + item.answer_key + "' outside A-D";
    if (item.context_refs.empty()) return "no context reference";
    for (int ref : item.context_refs)
        if (ref < 0 || ref >= paragraph_count)
            return "context reference " + std::to_string(ref) + " outside 0.." +
                   std::to_string(paragraph_count - 1);
    return std::nullopt;
}

namespace {

std::string paragraph_listing(const std::vector<ReportParagraph>& paragraphs) {
    std::vector<std::string> lines;
    lines.reserve(paragraphs.size());
    for (const auto& p : paragraphs)
        lines.push_back(std::to_string(p.index) + ": " + collapse_whitespace(p.text));
    return join(lines, "\n");
}

// Parses the STEM/A-D/ANSWER/CONTEXT reply shape; missing pieces surface as
// validation failures rather than parse exceptions.
McqItem parse_mcq_reply(const std::string& reply, int level) {
    McqItem item;
    item.level = level;
    item.provenance = McqProvenance::generated;
    item.answer_key = '?'; // stays invalid unless the reply names a key
    for (const auto& raw : split(reply, '\n')) {
        std::string t = trim(raw);
        if (t.rfind("STEM:", 0) == 0) {
            item.stem = trim(t.substr(5));
        } else if (t.size() >= 2 && t[1] == ':' && t[0] >= 'A' && t[0] <= 'D') {
            item.options[static_cast<size_t>(t[0] - 'A')] = trim(t.substr(2));
        } else if (t.rfind("ANSWER:", 0) == 0) {
            std::string v = trim(t.substr(7));
            if (!v.empty()) item.answer_key = v[0];
        } else if (t.rfind("CONTEXT:", 0) == 0) {
            for (auto& tok : split(t.substr(8), ',')) {
                std::string s = trim(tok);
                if (s.empty()) continue;
                try {
                    item.context_refs.push_back(std::stoi(s));
                } catch (const std::exception&) {
                    item.context_refs.push_back(-1); // flagged invalid downstream
                }
            }
        }
    }
    return item;
}

} // namespace

McqGeneration generate_mcqs(const std::vector<ReportParagraph>& paragraphs, int level, int count,
                            const PromptTemplate& tmpl, LanguageModel& lm,
                            const BenchOptions& options) {
    if (tmpl.name != TemplateName::mcq_generate)
        raise(ErrorKind::precondition, "generate_mcqs needs the mcq_generate template");
    if (count < 1) raise(ErrorKind::precondition, "count must be >= 1");
    if (paragraphs.empty()) raise(ErrorKind::precondition, "no report paragraphs to draw from");
    mcq_level_name(level); // validates the level

    const std::string listing = paragraph_listing(paragraphs);
    const int max_iterations = options.max_iterations_factor * count;

    McqGeneration out;
    int attempt = 1;
    while (out.iterations < max_iterations &&
           static_cast<int>(out.items.size()) < count) {
        ++out.iterations;
        const std::string prompt = render_prompt(
            tmpl, {{"level", std::to_string(level)},
                   {"level_name", mcq_level_name(level)},
                   {"paragraphs", listing},
                   {"index", std::to_string(out.items.size() + 1)},
                   {"attempt", std::to_string(attempt)}});
        std::string reply;
        try {
            reply = lm.complete(prompt);
        } catch (const Error& e) {
            if (!retryable(e)) throw;
            out.rejections.push_back({out.iterations, std::string("provider: ") + e.what()});
            ++attempt;
            continue;
        }
        McqItem item = parse_mcq_reply(reply, level);
        auto reason = validate_mcq(item, level, static_cast<int>(paragraphs.size()));
        if (reason) {
            out.rejections.push_back({out.iterations, *reason});
            ++attempt;
            continue;
        }
        item.id = "mcq:" + std::to_string(level) + ":" +
                  std::to_string(out.items.size() + 1);
        out.items.push_back(std::move(item));
        attempt = 1;
    }
    out.exhausted = static_cast<int>(out.items.size()) < count;
    if (out.items.empty()) {
        std::string reasons;
        for (size_t i = 0; i < out.rejections.size() && i < 5; ++i)
            reasons += "\n  iteration " + std::to_string(out.rejections[i].iteration) + ": " +
                       out.rejections[i].reason;
        raise(ErrorKind::harness,
              "no acceptable question after " + std::to_string(out.iterations) +
                  " iterations;" + (reasons.empty() ? " no attempts recorded" : reasons));
    }
    return out;
}

std::vector<ReportParagraph> select_context(const McqItem& item,
                                            const std::vector<ReportParagraph>& paragraphs,
                                            Embedder& embedder, int k) {
    if (k < 1) raise(ErrorKind::precondition, "k must be >= 1");
    if (paragraphs.empty()) raise(ErrorKind::precondition, "no paragraphs to select from");

    std::string query = item.stem;
    for (const auto& opt : item.options) query += " " + opt;

    std::vector<std::string> batch;
    batch.reserve(paragraphs.size() + 1);
    batch.push_back(query.empty() ? std::string(" ") : query);
    for (const auto& p : paragraphs) batch.push_back(p.text.empty() ? std::string(" ") : p.text);
    auto vectors = embedder.embed(batch);

    std::vector<std::pair<size_t, double>> order(paragraphs.size());
    for (size_t i = 0; i < paragraphs.size(); ++i)
        order[i] = {i, cosine_similarity(vectors[0], vectors[i + 1])};
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    std::vector<ReportParagraph> out;
    const size_t limit = std::min<size_t>(static_cast<size_t>(k), order.size());
    out.reserve(limit);
    for (size_t i = 0; i < limit; ++i) out.push_back(paragraphs[order[i].first]);
    return out;
}

std::optional<char> extract_choice(const std::string& reply) {
    std::optional<char> last;
    std::string token;
    auto consider = [&] {
        if (token.size() == 1 && token[0] >= 'A' && token[0] <= 'D') last = token[0];
        token.clear();
    };
    for (char c : reply) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            token += c;
        else
            consider();
    }
    consider();
    return last;
}

McqDecision answer_mcq(const McqItem& item, const std::vector<ReportParagraph>& context,
                       const PromptTemplate& tmpl, LanguageModel& lm,
                       const BenchOptions& options) {
    if (tmpl.name != TemplateName::mcq_answer)
        raise(ErrorKind::precondition, "answer_mcq needs the mcq_answer template");
    if (context.empty()) raise(ErrorKind::precondition, "empty answering context");

    std::vector<std::string> blocks;
    blocks.reserve(context.size());
    for (const auto& p : context) blocks.push_back(p.text);
    const std::string prompt =
        render_prompt(tmpl, {{"context", join(blocks, "\n\n")},
                             {"stem", item.stem},
                             {"option_a", item.options[0]},
                             {"option_b", item.options[1]},
                             {"option_c", item.options[2]},
                             {"option_d", item.options[3]}});

    McqDecision decision;
    decision.item_id = item.id;
    decision.prompt = prompt;
    for (int attempt = 0; attempt <= options.retry_budget; ++attempt) {
        std::string reply;
        try {
            reply = lm.complete(prompt);
        } catch (const Error& e) {
            if (!retryable(e)) throw;
            continue;
        }
        decision.reply = reply;
        if (auto choice = extract_choice(reply)) {
            decision.label = std::string(1, *choice);
            return decision;
        }
    }
    return decision; // label stays empty: an abstention
}

BenchmarkRun score_run(const std::vector<McqItem>& items,
                       const std::map<std::string, std::vector<std::string>>& answers,
                       int repeats) {
    if (repeats < 1) raise(ErrorKind::precondition, "repeats must be >= 1");
    if (items.empty()) raise(ErrorKind::precondition, "no items to score");

    std::set<std::string> item_ids;
    for (const auto& item : items) {
        if (!item_ids.insert(item.id).second)
            raise(ErrorKind::scoring, "duplicate item id " + item.id);
    }
    for (const auto& [id, labels] : answers) {
        if (!item_ids.count(id)) raise(ErrorKind::scoring, "answer for unknown item " + id);
        if (static_cast<int>(labels.size()) != repeats)
            raise(ErrorKind::scoring, "item " + id + " has " + std::to_string(labels.size()) +
                                          " answers for " + std::to_string(repeats) +
                                          " repeats");
        for (const auto& label : labels)
            if (!label.empty() && (label.size() != 1 || label[0] < 'A' || label[0] > 'D'))
                raise(ErrorKind::scoring, "label '" + label + "' for item " + id +
                                              " is not A-D or an abstention");
    }
    for (const auto& item : items)
        if (!answers.count(item.id))
            raise(ErrorKind::scoring, "no answers recorded for item " + item.id);

    BenchmarkRun run;
    run.items = items;
    run.answers = answers;
    run.repeats = repeats;

    std::map<int, std::vector<const McqItem*>> by_level;
    for (const auto& item : items) by_level[item.level].push_back(&item);
    for (const auto& [level, level_items] : by_level) {
        std::vector<double> accuracy(static_cast<size_t>(repeats), 0.0);
        for (int r = 0; r < repeats; ++r) {
            int correct = 0;
            for (const auto* item : level_items) {
                const std::string& label = run.answers.at(item->id)[static_cast<size_t>(r)];
                if (label.size() == 1 && label[0] == item->answer_key) ++correct;
            }
            accuracy[static_cast<size_t>(r)] =
                static_cast<double>(correct) / static_cast<double>(level_items.size());
        }
        double mean = 0.0;
        for (double a : accuracy) mean += a;
        mean /= static_cast<double>(repeats);
        double var = 0.0;
        for (double a : accuracy) var += (a - mean) * (a - mean);
        var /= static_cast<double>(repeats); // population variance over repeats
        run.per_level_accuracy[level] = LevelStats{mean, std::sqrt(var)};
    }

    std::string digest;
    for (const auto& item : items) digest += item.id + ";";
    for (const auto& [id, labels] : answers) digest += id + "=" + join(labels, ",") + ";";
    digest += std::to_string(repeats);
    run.id = "run:" + to_hex(fnv1a64(digest));
    return run;
}

std::vector<McqItem> load_mcqs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::io, "cannot read mcq file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::parse, "mcq file " + path.string() + ": " + e.what());
    }
    if (!j.is_array()) raise(ErrorKind::parse, "mcq file must hold a JSON array");
    try {
        return j.get<std::vector<McqItem>>();
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::parse, "mcq file " + path.string() + ": " + e.what());
    }
}

void save_mcqs(const std::filesystem::path& path, const std::vector<McqItem>& items) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::io, "cannot write mcq file: " + path.string());
    out << nlohmann::json(items).dump(2) << '\n';
}

BenchmarkFilePair write_benchmark_files(const std::filesystem::path& dir,
                                        const std::string& basename, const BenchmarkRun& run,
                                        const std::vector<McqDecision>& decisions) {
    std::filesystem::create_directories(dir);
    BenchmarkFilePair pair{dir / (basename + ".json"), dir / (basename + ".jsonl")};

    std::ofstream summary(pair.summary, std::ios::binary);
    if (!summary) raise(ErrorKind::io, "cannot write " + pair.summary.string());
    summary << nlohmann::json(run).dump(2) << '\n';

    std::ofstream lines(pair.decisions, std::ios::binary);
    if (!lines) raise(ErrorKind::io, "cannot write " + pair.decisions.string());
    for (const auto& d : decisions) {
        nlohmann::json j{{"item_id", d.item_id},
                         {"label", d.label},
                         {"prompt", d.prompt},
                         {"reply", d.reply}};
        lines << j.dump() << '\n';
    }
    return pair;
}

} // namespace bms
