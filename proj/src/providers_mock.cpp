#include "bms/providers_mock.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bms/error.hpp"
#include "bms/ids.hpp"
#include "bms/text.hpp"

namespace bms {

namespace {

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == '\n') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

// Value of the first line starting with the prefix, trimmed.
std::optional<std::string> line_value(const std::vector<std::string>& lines,
                                      const std::string& prefix) {
    for (const auto& line : lines) {
        if (line.rfind(prefix, 0) == 0) return trim(line.substr(prefix.size()));
    }
    return std::nullopt;
}

// Lines following the exact header line up to the first blank line.
std::vector<std::string> block_after(const std::vector<std::string>& lines,
                                     const std::string& header) {
    std::vector<std::string> out;
    bool in_block = false;
    for (const auto& line : lines) {
        if (!in_block) {
            if (trim(line) == header) in_block = true;
            continue;
        }
        if (trim(line).empty()) break;
        out.push_back(line);
    }
    return out;
}

// First "at most <n>" occurrence; templates use it to carry caps.
std::optional<std::size_t> parse_at_most(const std::string& text) {
    auto pos = text.find("at most ");
    if (pos == std::string::npos) return std::nullopt;
    pos += 8;
    std::size_t n = 0;
    bool any = false;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
        n = n * 10 + static_cast<std::size_t>(text[pos] - '0');
        ++pos;
        any = true;
    }
    if (!any) return std::nullopt;
    return n;
}

bool is_stopword(const std::string& token) {
    static const std::set<std::string> words = {
        "a",  "an",  "and", "are", "as",   "at",   "be",   "by",  "do",
        "does", "for", "from", "how", "in", "is",   "it",   "of",  "on",
        "or", "that", "the", "to",  "was", "were", "what", "which", "with"};
    return words.count(token) > 0;
}

std::string first_sentence(const std::string& paragraph) {
    auto pos = paragraph.find(". ");
    if (pos == std::string::npos) return trim(paragraph);
    return trim(paragraph.substr(0, pos + 1));
}

} // namespace

// --- ScriptedLanguageModel ---------------------------------------------------

ScriptedLanguageModel::ScriptedLanguageModel(std::shared_ptr<LanguageModel> fallback)
    : fallback_(std::move(fallback)) {}

std::string ScriptedLanguageModel::key_of(const std::string& prompt) {
    return to_hex(fnv1a64(prompt));
}

void ScriptedLanguageModel::script(const std::string& prompt, std::string reply) {
    script_key(key_of(prompt), Entry{std::move(reply), false});
}

void ScriptedLanguageModel::script_failure(const std::string& prompt) {
    script_key(key_of(prompt), Entry{"", true});
}

void ScriptedLanguageModel::script_key(const std::string& key, Entry entry) {
    std::lock_guard lock(mu_);
    script_[key].entries.push_back(std::move(entry));
}

std::size_t ScriptedLanguageModel::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

std::string ScriptedLanguageModel::do_complete(const std::string& prompt,
                                               const GenParams& params) {
    const std::string key = key_of(prompt);
    std::optional<Entry> entry;
    {
        std::lock_guard lock(mu_);
        ++calls_;
        auto it = script_.find(key);
        if (it != script_.end()) {
            auto& queue = it->second;
            entry = queue.entries[queue.next];
            if (queue.next + 1 < queue.entries.size()) ++queue.next;
        }
    }
    if (!entry) {
        if (fallback_) return fallback_->complete(prompt, params);
        std::string head = prompt.substr(0, std::min<std::size_t>(prompt.size(), 120));
        raise(ErrorKind::transcript_miss, "no scripted reply for prompt " + key + ": " + head);
    }
    if (entry->fail) raise(ErrorKind::provider, "scripted failure for prompt " + key);
    return entry->reply;
}

void ScriptedLanguageModel::save_transcript(const std::filesystem::path& path) const {
    nlohmann::json entries = nlohmann::json::array();
    std::lock_guard lock(mu_);
    for (const auto& [key, queue] : script_) {
        nlohmann::json replies = nlohmann::json::array();
        for (const auto& e : queue.entries)
            replies.push_back({{"text", e.reply}, {"fail", e.fail}});
        entries.push_back({{"key", key}, {"replies", replies}});
    }
    std::ofstream out(path);
    if (!out) raise(ErrorKind::io, "cannot write transcript: " + path.string());
    out << nlohmann::json{{"entries", entries}}.dump(2) << '\n';
}

void ScriptedLanguageModel::load_transcript(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::io, "cannot read transcript: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::parse, "bad transcript json: " + std::string(e.what()));
    }
    for (const auto& item : doc.at("entries")) {
        const std::string key = item.at("key").get<std::string>();
        for (const auto& r : item.at("replies"))
            script_key(key, Entry{r.at("text").get<std::string>(),
                                  r.value("fail", false)});
    }
}

// --- ExtractiveLanguageModel -------------------------------------------------

ExtractiveLanguageModel::ExtractiveLanguageModel(Options opts) : opts_(std::move(opts)) {}

std::size_t ExtractiveLanguageModel::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

std::string ExtractiveLanguageModel::do_complete(const std::string& prompt,
                                                 const GenParams&) {
    {
        std::lock_guard lock(mu_);
        ++calls_;
    }
    auto lines = lines_of(prompt);
    std::string task;
    for (const auto& line : lines) {
        if (line.rfind("@@task ", 0) == 0) {
            task = trim(line.substr(7));
            break;
        }
    }
    if (task == "decompose") return answer_decompose(prompt);
    if (task == "keywords") return answer_keywords(prompt);
    if (task == "graph") return "EDGES: none";
    if (task == "sub_answer") return answer_sub_answer(prompt);
    if (task == "links") return answer_links(prompt);
    if (task == "report") return answer_report(prompt);
    if (task == "mcq_generate") return answer_mcq_generate(prompt);
    if (task == "mcq_answer") return answer_mcq_answer(prompt);
    if (task == "relevance") return answer_relevance(prompt);
    if (task == "topic") return answer_topic(prompt);
    raise(ErrorKind::provider, "extractive model has no rule for task '" + task + "'");
}

std::string ExtractiveLanguageModel::answer_decompose(const std::string& prompt) const {
    auto lines = lines_of(prompt);
    auto query = line_value(lines, "QUERY:").value_or("");
    std::vector<std::string> dims;
    for (const auto& line : block_after(lines, "DIMENSIONS:")) {
        auto t = trim(line);
        if (t.rfind("- ", 0) != 0) continue;
        t = trim(t.substr(2));
        auto colon = t.find(':');
        if (colon != std::string::npos) t = trim(t.substr(0, colon));
        if (!t.empty()) dims.push_back(t);
    }
    if (dims.empty()) dims.push_back("overview");
    std::size_t cap = parse_at_most(prompt).value_or(dims.size());
    if (dims.size() > cap) dims.resize(std::max<std::size_t>(cap, 1));
    std::string out;
    for (const auto& d : dims) out += "- [" + d + "] " + query + "\n";
    return out;
}

std::string ExtractiveLanguageModel::answer_keywords(const std::string& prompt) const {
    auto lines = lines_of(prompt);
    auto subquery = line_value(lines, "SUBQUERY:").value_or("");
    std::size_t cap = parse_at_most(prompt).value_or(opts_.default_keyword_cap);
    if (cap == 0) cap = opts_.default_keyword_cap;
    std::vector<std::string> picked;
    for (const auto& token : tokenize(subquery)) {
        if (is_stopword(token)) continue;
        if (std::find(picked.begin(), picked.end(), token) != picked.end()) continue;
        picked.push_back(token);
        if (picked.size() >= cap) break;
    }
    if (picked.empty() && !trim(subquery).empty()) picked.push_back(normalize_text(subquery));
    return join(picked, "; ");
}

std::string ExtractiveLanguageModel::answer_sub_answer(const std::string& prompt) const {
    auto lines = lines_of(prompt);
    std::vector<std::string> ids;
    std::vector<std::string> texts;
    for (const auto& line : block_after(lines, "EVIDENCE:")) {
        auto t = trim(line);
        if (t.rfind("- ", 0) != 0) continue;
        auto fields = split(t.substr(2), '|');
        if (fields.empty()) continue;
        ids.push_back(trim(fields[0]));
        texts.push_back(fields.size() >= 3 ? trim(fields[2]) : std::string());
    }
    if (ids.empty())
        return "ANSWER: The retrieved evidence does not answer the sub-query.\n"
               "EVIDENCE:\nCONFIDENT: no";
    std::string answer;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty()) continue;
        if (!answer.empty()) answer += "\n\n";
        answer += texts[i];
    }
    if (answer.empty()) answer = "The evidence titles match the sub-query.";
    return "ANSWER: " + answer + "\nEVIDENCE: " + join(ids, ", ") + "\nCONFIDENT: yes";
}

std::string ExtractiveLanguageModel::answer_links(const std::string& prompt) const {
    auto lines = lines_of(prompt);
    int indexed = 0;
    for (const auto& line : block_after(lines, "ANSWERS:")) {
        auto t = trim(line);
        int idx = 0;
        if (std::sscanf(t.c_str(), "%d:", &idx) == 1) ++indexed;
    }
    if (indexed < 2) return "LINKS: none";
    std::string out = "LINKS:\n";
    for (int i = 1; i < indexed; ++i)
        out += std::to_string(i) + " -> " + std::to_string(i + 1) + " | builds on\n";
    return out;
}

std::string ExtractiveLanguageModel::answer_report(const std::string& prompt) const {
    auto lines = lines_of(prompt);
    auto query = line_value(lines, "QUERY:").value_or("");
    std::vector<std::string> subquery_texts;
    std::vector<std::string> leads;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].rfind("SUBANSWER ", 0) != 0) continue;
        auto header = lines[i].substr(10);
        auto bar = header.find('|');
        subquery_texts.push_back(bar == std::string::npos ? trim(header)
                                                          : trim(header.substr(bar + 1)));
        for (std::size_t j = i + 1; j < lines.size(); ++j) {
            if (trim(lines[j]) == "END SUBANSWER") break;
            if (!trim(lines[j]).empty()) {
                leads.push_back(trim(lines[j]));
                break;
            }
        }
    }
    std::string out = "BACKGROUND:\nThis report addresses the query: " + query +
                      ". Evidence was gathered for " +
                      std::to_string(subquery_texts.size()) + " sub-queries: " +
                      join(subquery_texts, "; ") + ".\nFINDINGS:\n";
    if (leads.empty()) out += "No confident findings were extracted.";
    else out += join(leads, "\n\n");
    return out;
}

std::string ExtractiveLanguageModel::answer_mcq_generate(const std::string& prompt) const {
    auto lines = lines_of(prompt);
    int level = 1;
    std::size_t index = 1, attempt = 1;
    for (const auto& line : lines) {
        int l = 0;
        unsigned long i = 0, a = 0;
        if (std::sscanf(line.c_str(), "Write one level %d", &l) == 1) level = l;
        auto pos = line.find("item ");
        if (pos != std::string::npos &&
            std::sscanf(line.c_str() + pos, "item %lu, attempt %lu", &i, &a) == 2) {
            index = i;
            attempt = a;
        }
    }
    std::vector<std::pair<int, std::string>> paragraphs;
    for (const auto& line : block_after(lines, "CONTEXT:")) {
        int n = 0;
        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        try {
            n = std::stoi(line.substr(0, colon));
        } catch (const std::exception&) {
            continue;
        }
        paragraphs.emplace_back(n, trim(line.substr(colon + 1)));
    }
    if (paragraphs.empty())
        raise(ErrorKind::provider, "no context paragraphs to build a question from");
    std::size_t pick = (index - 1 + (attempt - 1)) % paragraphs.size();
    const auto& [pnum, ptext] = paragraphs[pick];
    std::string correct = first_sentence(ptext);
    std::string stem = "Which statement is directly supported by the retrieved context? "
                       "(item " + std::to_string(index) + ", level " +
                       std::to_string(level) + ")";
    std::array<std::string, 4> options;
    std::size_t key_pos = (index - 1) % 4;
    int variant = 1;
    for (std::size_t i = 0; i < 4; ++i) {
        if (i == key_pos) {
            options[i] = correct;
        } else {
            options[i] = "No retrieved source states this (item " + std::to_string(index) +
                         ", variant " + std::to_string(variant) + ").";
            ++variant;
        }
    }
    std::ostringstream out;
    out << "STEM: " << stem << "\n";
    for (std::size_t i = 0; i < 4; ++i)
        out << kOptionLabels[i] << ": " << options[i] << "\n";
    out << "ANSWER: " << kOptionLabels[key_pos] << "\n";
    out << "CONTEXT: " << pnum;
    return out.str();
}

std::string ExtractiveLanguageModel::answer_mcq_answer(const std::string& prompt) const {
    auto lines = lines_of(prompt);
    std::string context;
    bool in_context = false;
    for (const auto& line : lines) {
        if (trim(line) == "CONTEXT:") {
            in_context = true;
            continue;
        }
        if (line.rfind("QUESTION:", 0) == 0) break;
        if (in_context) context += line + "\n";
    }
    std::string norm_context = normalize_text(context);
    bool in_options = false;
    for (const auto& line : lines) {
        if (trim(line) == "OPTIONS:") {
            in_options = true;
            continue;
        }
        if (!in_options || line.size() < 3 || line[1] != ':') continue;
        char label = line[0];
        if (label < 'A' || label > 'D') continue;
        std::string option = normalize_text(line.substr(2));
        if (!option.empty() && norm_context.find(option) != std::string::npos)
            return std::string("The answer is ") + label + ".";
    }
    return "None of the given statements appears in the retrieved passages.";
}

std::string ExtractiveLanguageModel::answer_relevance(const std::string& prompt) const {
    auto lines = lines_of(prompt);
    auto query = line_value(lines, "QUERY:").value_or("");
    auto result = line_value(lines, "RESULT:").value_or("");
    auto qt = tokenize(query);
    auto rt = tokenize(result);
    std::set<std::string> rset(rt.begin(), rt.end());
    std::size_t hit = 0;
    std::set<std::string> seen;
    for (const auto& t : qt) {
        if (seen.insert(t).second && rset.count(t)) ++hit;
    }
    double score = seen.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(seen.size());
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", score);
    return buf;
}

std::string ExtractiveLanguageModel::answer_topic(const std::string& prompt) const {
    std::uint64_t seed = opts_.topic_seed;
    auto pos = prompt.find("Draw seed:");
    if (pos != std::string::npos) {
        unsigned long long parsed = 0;
        if (std::sscanf(prompt.c_str() + pos, "Draw seed: %llu", &parsed) == 1) seed = parsed;
    }
    if (opts_.topics.empty()) return "synthetic reporter assay dynamics";
    return opts_.topics[seed % opts_.topics.size()];
}

// --- HashEmbedder ------------------------------------------------------------

HashEmbedder::HashEmbedder(int dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
    if (dimension <= 0) raise(ErrorKind::precondition, "embedder dimension must be positive");
}

std::size_t HashEmbedder::batch_calls() const {
    std::lock_guard lock(mu_);
    return batch_calls_;
}

std::vector<double> HashEmbedder::token_vector(const std::string& token) const {
    std::uint64_t state = seed_ ^ fnv1a64(token);
    std::vector<double> v(static_cast<std::size_t>(dimension_));
    for (auto& x : v) x = u64_to_unit_double(splitmix64(state)) * 2.0 - 1.0;
    return v;
}

std::vector<EmbeddingVector> HashEmbedder::do_embed(const std::vector<std::string>& texts) {
    {
        std::lock_guard lock(mu_);
        ++batch_calls_;
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        auto tokens = tokenize(text);
        if (tokens.empty()) tokens.push_back(text);
        std::vector<double> acc(static_cast<std::size_t>(dimension_), 0.0);
        for (const auto& tok : tokens) {
            auto tv = token_vector(tok);
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += tv[i];
        }
        double norm = 0.0;
        for (double x : acc) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            acc[0] = 1.0; // token vectors cancelled exactly; pin a unit axis
            norm = 1.0;
        }
        for (double& x : acc) x /= norm;
        out.push_back(EmbeddingVector{std::move(acc), model_tag()});
    }
    return out;
}

// --- InMemoryLiteratureClient ------------------------------------------------

void InMemoryLiteratureClient::add(LiteratureSource source, const std::string& query,
                                   std::vector<Document> docs) {
    std::lock_guard lock(mu_);
    exact_[source][query] = std::move(docs);
}

void InMemoryLiteratureClient::set_corpus(LiteratureSource source, std::vector<Document> docs) {
    std::lock_guard lock(mu_);
    corpus_[source] = std::move(docs);
}

void InMemoryLiteratureClient::set_failure(LiteratureSource source, bool fail) {
    std::lock_guard lock(mu_);
    fail_[source] = fail;
}

void InMemoryLiteratureClient::set_query_failure(LiteratureSource source,
                                                 const std::string& query) {
    std::lock_guard lock(mu_);
    fail_queries_[source].insert(query);
}

int InMemoryLiteratureClient::calls(LiteratureSource source) const {
    std::lock_guard lock(mu_);
    auto it = calls_.find(source);
    return it == calls_.end() ? 0 : it->second;
}

std::vector<std::string> InMemoryLiteratureClient::queries_seen(LiteratureSource source) const {
    std::lock_guard lock(mu_);
    auto it = seen_.find(source);
    return it == seen_.end() ? std::vector<std::string>{} : it->second;
}

std::vector<Document> InMemoryLiteratureClient::do_search(LiteratureSource source,
                                                          const std::string& query,
                                                          int max_results) {
    std::lock_guard lock(mu_);
    ++calls_[source];
    seen_[source].push_back(query);
    if (fail_.count(source) && fail_.at(source))
        raise(ErrorKind::source_unavailable,
              std::string(to_string(source)) + " is down");
    if (fail_queries_.count(source) && fail_queries_.at(source).count(query))
        raise(ErrorKind::source_unavailable,
              std::string(to_string(source)) + " failed for query " + query);
    auto per_source = exact_.find(source);
    if (per_source != exact_.end()) {
        auto hit = per_source->second.find(query);
        if (hit != per_source->second.end()) return hit->second;
    }
    auto corpus = corpus_.find(source);
    if (corpus == corpus_.end()) return {};
    // Token-overlap scan: any query token hitting title or abstract counts.
    std::vector<std::pair<int, const Document*>> scored;
    auto tokens = tokenize(query);
    for (const auto& doc : corpus->second) {
        std::string text = normalize_text(doc.title + " " + doc.abstract_text);
        int hits = 0;
        for (const auto& tok : tokens)
            if (contains_word(text, tok)) ++hits;
        if (hits > 0) scored.emplace_back(hits, &doc);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<Document> out;
    for (const auto& [hits, doc] : scored) {
        out.push_back(*doc);
        if (static_cast<int>(out.size()) >= max_results) break;
    }
    return out;
}

// --- InMemoryWebClient ---------------------------------------------------------

void InMemoryWebClient::add(SearchEngine engine, const std::string& query,
                            std::vector<WebResult> results) {
    std::lock_guard lock(mu_);
    exact_[engine][query] = std::move(results);
}

void InMemoryWebClient::set_default(SearchEngine engine, std::vector<WebResult> results) {
    std::lock_guard lock(mu_);
    defaults_[engine] = std::move(results);
}

void InMemoryWebClient::set_failure(SearchEngine engine, bool fail) {
    std::lock_guard lock(mu_);
    fail_[engine] = fail;
}

int InMemoryWebClient::calls(SearchEngine engine) const {
    std::lock_guard lock(mu_);
    auto it = calls_.find(engine);
    return it == calls_.end() ? 0 : it->second;
}

std::vector<WebResult> InMemoryWebClient::do_search(SearchEngine engine,
                                                    const std::string& query,
                                                    int max_results) {
    std::lock_guard lock(mu_);
    ++calls_[engine];
    if (fail_.count(engine) && fail_.at(engine))
        raise(ErrorKind::source_unavailable, std::string(to_string(engine)) + " is down");
    auto per_engine = exact_.find(engine);
    if (per_engine != exact_.end()) {
        auto hit = per_engine->second.find(query);
        if (hit != per_engine->second.end()) return hit->second;
    }
    auto def = defaults_.find(engine);
    if (def == defaults_.end()) return {};
    auto out = def->second;
    if (static_cast<int>(out.size()) > max_results) out.resize(static_cast<std::size_t>(max_results));
    return out;
}

// --- InMemoryProteinClient -----------------------------------------------------

namespace {
std::string protein_key(const std::string& gene, const std::string& organism) {
    return normalize_text(gene) + "|" + normalize_text(organism);
}
} // namespace

void InMemoryProteinClient::add_accession(const std::string& gene, const std::string& organism,
                                          std::string accession) {
    std::lock_guard lock(mu_);
    accession_by_key_[protein_key(gene, organism)] = std::move(accession);
}

void InMemoryProteinClient::add_record(ProteinRecord record) {
    std::lock_guard lock(mu_);
    records_[record.uniprot_id] = std::move(record);
}

void InMemoryProteinClient::add_structure(const std::string& accession, std::string pdb_payload) {
    std::lock_guard lock(mu_);
    structures_[accession] = std::move(pdb_payload);
}

void InMemoryProteinClient::set_failure(bool fail) {
    std::lock_guard lock(mu_);
    fail_ = fail;
}

void InMemoryProteinClient::check_fail() const {
    if (fail_) raise(ErrorKind::source_unavailable, "protein backend is down");
}

std::string InMemoryProteinClient::do_lookup(const std::string& gene,
                                             const std::optional<std::string>& organism) {
    std::lock_guard lock(mu_);
    check_fail();
    auto it = accession_by_key_.find(protein_key(gene, organism.value_or("")));
    if (it == accession_by_key_.end() && organism)
        it = accession_by_key_.find(protein_key(gene, ""));
    if (it == accession_by_key_.end())
        raise(ErrorKind::not_found, "no accession for gene " + gene);
    return it->second;
}

ProteinRecord InMemoryProteinClient::do_fetch_entry(const std::string& accession) {
    std::lock_guard lock(mu_);
    check_fail();
    auto it = records_.find(accession);
    if (it == records_.end()) raise(ErrorKind::not_found, "no record for " + accession);
    return it->second;
}

StructureFile InMemoryProteinClient::do_fetch_structure(const std::string& accession) {
    std::lock_guard lock(mu_);
    check_fail();
    auto it = structures_.find(accession);
    if (it == structures_.end()) raise(ErrorKind::not_found, "no structure for " + accession);
    StructureFile file;
    file.uniprot_id = accession;
    file.format = "PDB";
    file.payload = it->second;
    file.fetched_from = "memory://structures/" + accession;
    return file;
}

} // namespace bms
