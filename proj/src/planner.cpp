#include "bms/planner.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>

#include <nlohmann/json.hpp>

#include "bms/error.hpp"
#include "bms/text.hpp"

namespace bms {

namespace {

std::vector<std::string> read_string_array(const nlohmann::json& j, const std::string& key,
                                           const std::string& file) {
    std::vector<std::string> out;
    if (!j.contains(key)) return out;
    for (const auto& item : j.at(key)) {
        std::string v = normalize_text(item.get<std::string>());
        if (v.empty())
            raise(ErrorKind::config, file + ": empty entry under '" + key + "'");
        out.push_back(std::move(v));
    }
    return out;
}

nlohmann::json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::config, "cannot read " + path.string());
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::config, path.string() + ": " + e.what());
    }
}

// Strips "- ", "* ", "3. ", "3) " style lead-ins.
std::string strip_bullet(const std::string& line) {
    std::string t = trim(line);
    if (t.rfind("- ", 0) == 0 || t.rfind("* ", 0) == 0) return trim(t.substr(2));
    std::size_t i = 0;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
    if (i > 0 && i < t.size() && (t[i] == '.' || t[i] == ')')) return trim(t.substr(i + 1));
    return t;
}

// "[tag] rest" -> {tag, rest}; no tag -> {"", line}.
std::pair<std::string, std::string> split_dimension_tag(const std::string& line) {
    if (line.empty() || line[0] != '[') return {"", line};
    auto close = line.find(']');
    if (close == std::string::npos) return {"", line};
    return {normalize_text(line.substr(1, close - 1)), trim(line.substr(close + 1))};
}

std::string render_dimension_lines(const std::vector<SemanticDimension>& dims,
                                   DimensionKind kind) {
    std::string out;
    for (const auto& d : dims) {
        if (d.kind != kind) continue;
        out += "- " + d.name + "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

const SemanticDimension* find_dimension(const std::vector<SemanticDimension>& dims,
                                        const std::string& normalized_name,
                                        DimensionKind kind) {
    for (const auto& d : dims) {
        if (d.kind == kind && normalize_text(d.name) == normalized_name) return &d;
    }
    return nullptr;
}

bool retryable(const Error& e) {
    return e.kind() == ErrorKind::provider || e.kind() == ErrorKind::source_unavailable;
}

bool gene_like_pattern(const std::string& token) {
    // Letter-led alphanumeric with a digit somewhere, e.g. cyp17a1, p53, brca1.
    // Purely numeric or digit-led tokens (doses, "3d") do not qualify.
    if (token.size() < 2) return false;
    if (!std::isalpha(static_cast<unsigned char>(token[0]))) return false;
    bool has_digit = false;
    for (char c : token) {
        if (!std::isalnum(static_cast<unsigned char>(c))) return false;
        if (std::isdigit(static_cast<unsigned char>(c))) has_digit = true;
    }
    return has_digit;
}

} // namespace

Lexicons Lexicons::load_file(const std::filesystem::path& path) {
    auto j = load_json_file(path);
    Lexicons lex;
    lex.genes = read_string_array(j, "genes", path.string());
    lex.organisms = read_string_array(j, "organisms", path.string());
    lex.structure_terms = read_string_array(j, "structure_terms", path.string());
    lex.annotation_terms = read_string_array(j, "annotation_terms", path.string());
    return lex;
}

std::vector<SemanticDimension> load_dimensions(const std::filesystem::path& path) {
    auto j = load_json_file(path);
    std::vector<SemanticDimension> dims;
    std::set<std::string> seen;
    auto take = [&](const std::string& key, DimensionKind kind) {
        if (!j.contains(key)) return;
        for (const auto& item : j.at(key)) {
            std::string name = collapse_whitespace(trim(item.get<std::string>()));
            if (name.empty())
                raise(ErrorKind::config, path.string() + ": empty dimension name");
            if (!seen.insert(std::string(to_string(kind)) + "/" + normalize_text(name)).second)
                raise(ErrorKind::config, path.string() + ": duplicate dimension " + name);
            dims.push_back(SemanticDimension{name, kind});
        }
    };
    take("decomposition", DimensionKind::decomposition);
    take("keyword", DimensionKind::keyword);
    if (dims.empty())
        raise(ErrorKind::config, path.string() + ": no dimensions defined");
    return dims;
}

const char* to_string(ProteinIntentKind k) {
    switch (k) {
    case ProteinIntentKind::none: return "none";
    case ProteinIntentKind::annotation: return "annotation";
    case ProteinIntentKind::structure: return "structure";
    }
    return "none";
}

const TaskNode* TaskGraph::find(const std::string& id) const {
    for (const auto& n : nodes)
        if (n.id == id) return &n;
    return nullptr;
}

std::vector<std::string> topo_order(const TaskGraph& g) {
    std::map<std::string, int> indegree;
    std::map<std::string, std::vector<std::string>> out_edges;
    std::vector<std::string> order_hint;
    for (const auto& n : g.nodes) {
        indegree[n.id] = 0;
        order_hint.push_back(n.id);
    }
    for (const auto& [from, to] : g.edges) {
        if (!indegree.count(from) || !indegree.count(to))
            raise(ErrorKind::planner, "edge endpoint not in graph: " + from + " -> " + to);
        out_edges[from].push_back(to);
        ++indegree[to];
    }
    std::vector<std::string> result;
    std::set<std::string> emitted;
    while (result.size() < g.nodes.size()) {
        bool progressed = false;
        for (const auto& id : order_hint) {
            if (emitted.count(id) || indegree[id] != 0) continue;
            emitted.insert(id);
            result.push_back(id);
            for (const auto& next : out_edges[id]) --indegree[next];
            progressed = true;
        }
        if (!progressed)
            raise(ErrorKind::planner, "task graph contains a cycle");
    }
    return result;
}

std::vector<SubQuery> decompose_query(const UserQuery& q,
                                      const std::vector<SemanticDimension>& dims,
                                      const PromptTemplate& tmpl, LanguageModel& lm,
                                      const PlannerOptions& opts) {
    if (tmpl.name != TemplateName::decompose)
        raise(ErrorKind::precondition, "decompose_query needs the decompose template");
    bool any_decomposition = std::any_of(dims.begin(), dims.end(), [](const auto& d) {
        return d.kind == DimensionKind::decomposition;
    });
    if (!any_decomposition)
        raise(ErrorKind::precondition, "no decomposition dimensions configured");

    std::string prompt = render_prompt(
        tmpl, {{"dimensions", render_dimension_lines(dims, DimensionKind::decomposition)},
               {"query", q.text},
               {"max_subqueries", std::to_string(opts.max_subqueries)}});

    std::string last_problem = "no attempts made";
    for (int attempt = 0; attempt <= opts.retry_budget; ++attempt) {
        std::string reply;
        try {
            reply = lm.complete(prompt);
        } catch (const Error& e) {
            if (!retryable(e)) throw;
            last_problem = e.what();
            continue;
        }
        std::vector<SubQuery> out;
        std::set<std::string> seen;
        for (const auto& raw_line : split(reply, '\n')) {
            auto [tag, text] = split_dimension_tag(strip_bullet(raw_line));
            if (tag.empty() || text.empty()) continue;
            const auto* dim = find_dimension(dims, tag, DimensionKind::decomposition);
            if (!dim) continue;
            if (!seen.insert(normalize_text(dim->name) + "" + normalize_text(text)).second)
                continue;
            SubQuery sq;
            sq.parent_query = q.id;
            sq.text = text;
            sq.dimension = *dim;
            out.push_back(std::move(sq));
            if (static_cast<int>(out.size()) >= opts.max_subqueries) break;
        }
        if (!out.empty()) {
            for (std::size_t i = 0; i < out.size(); ++i) {
                out[i].ordinal = static_cast<int>(i) + 1;
                out[i].id = make_subquery_id(q.id, out[i].ordinal);
            }
            return out;
        }
        last_problem = "no parseable sub-queries in reply: " +
                       reply.substr(0, std::min<std::size_t>(reply.size(), 120));
    }
    raise(ErrorKind::planner, "query decomposition failed: " + last_problem);
}

KeywordSet extract_keywords(const SubQuery& sq, const std::vector<SemanticDimension>& dims,
                            const PromptTemplate& tmpl, LanguageModel& lm,
                            const PlannerOptions& opts) {
    if (tmpl.name != TemplateName::keywords)
        raise(ErrorKind::precondition, "extract_keywords needs the keywords template");

    std::string prompt = render_prompt(
        tmpl, {{"dimensions", render_dimension_lines(dims, DimensionKind::keyword)},
               {"subquery", sq.text},
               {"max_keywords", std::to_string(opts.max_keywords)}});

    SemanticDimension default_dim{"general", DimensionKind::keyword};
    for (const auto& d : dims) {
        if (d.kind == DimensionKind::keyword) {
            default_dim = d;
            break;
        }
    }

    std::string last_problem = "no attempts made";
    for (int attempt = 0; attempt <= opts.retry_budget; ++attempt) {
        std::string reply;
        try {
            reply = lm.complete(prompt);
        } catch (const Error& e) {
            if (!retryable(e)) throw;
            last_problem = e.what();
            continue;
        }
        KeywordSet set;
        set.subquery = sq.id;
        std::set<std::string> seen;
        for (const auto& line : split(reply, '\n')) {
            for (const auto& piece : split(line, ';')) {
                auto [tag, text] = split_dimension_tag(strip_bullet(piece));
                if (trim(text).empty()) continue;
                std::string surface = normalize_keyword(text);
                if (!seen.insert(surface).second) continue; // merged, earlier rank wins
                Keyword kw;
                kw.surface = surface;
                kw.salience_rank = static_cast<int>(set.keywords.size()) + 1;
                const auto* dim =
                    tag.empty() ? nullptr : find_dimension(dims, tag, DimensionKind::keyword);
                kw.dimension = dim ? *dim : default_dim;
                set.keywords.push_back(std::move(kw));
                if (set.size() >= opts.max_keywords) break;
            }
            if (set.size() >= opts.max_keywords) break;
        }
        if (!set.keywords.empty()) return set;
        last_problem = "no keywords in reply: " +
                       reply.substr(0, std::min<std::size_t>(reply.size(), 120));
    }
    raise(ErrorKind::planner,
          "keyword extraction failed for " + sq.id + ": " + last_problem);
}

GraphBuild build_task_graph(const std::vector<KeywordSet>& sets, const PromptTemplate& tmpl,
                            LanguageModel& lm, const PlannerOptions& opts) {
    if (tmpl.name != TemplateName::graph)
        raise(ErrorKind::precondition, "build_task_graph needs the graph template");
    if (sets.empty()) raise(ErrorKind::precondition, "no keyword sets");

    GraphBuild build;
    for (const auto& set : sets) {
        for (const auto& kw : set.keywords) {
            TaskNode node;
            node.id = set.subquery + "-k" + std::to_string(kw.salience_rank);
            node.source_subquery = set.subquery;
            node.keyword = kw;
            build.graph.nodes.push_back(std::move(node));
        }
    }
    if (build.graph.nodes.size() <= 1) return build;

    std::string listing;
    for (std::size_t i = 0; i < build.graph.nodes.size(); ++i) {
        const auto& n = build.graph.nodes[i];
        listing += std::to_string(i + 1) + ": " + n.keyword.surface + " (sub-query " +
                   n.source_subquery + ")\n";
    }
    listing.pop_back();
    std::string prompt = render_prompt(tmpl, {{"nodes", listing}});

    std::string reply;
    bool got_reply = false;
    for (int attempt = 0; attempt <= opts.retry_budget && !got_reply; ++attempt) {
        try {
            std::string candidate = lm.complete(prompt);
            if (candidate.find("EDGES:") != std::string::npos) {
                reply = candidate;
                got_reply = true;
            }
        } catch (const Error& e) {
            if (!retryable(e)) throw;
        }
    }
    if (!got_reply) return build; // degraded: edgeless graph

    // adjacency over accepted edges only, for the cycle check
    auto reaches = [&](std::size_t from, std::size_t to,
                       const std::vector<std::vector<std::size_t>>& adj) {
        std::vector<std::size_t> stack{from};
        std::set<std::size_t> visited;
        while (!stack.empty()) {
            auto cur = stack.back();
            stack.pop_back();
            if (cur == to) return true;
            if (!visited.insert(cur).second) continue;
            for (auto next : adj[cur]) stack.push_back(next);
        }
        return false;
    };

    std::vector<std::vector<std::size_t>> adj(build.graph.nodes.size());
    std::set<std::pair<std::size_t, std::size_t>> accepted;
    bool in_edges = false;
    for (const auto& raw_line : split(reply, '\n')) {
        std::string line = trim(raw_line);
        if (!in_edges) {
            if (line.rfind("EDGES:", 0) == 0) {
                in_edges = true;
                std::string rest = trim(line.substr(6));
                if (normalize_text(rest) == "none") break;
                if (!rest.empty()) line = rest;
                else continue;
            } else {
                continue;
            }
        }
        auto arrow = line.find("->");
        if (arrow == std::string::npos) {
            if (!line.empty()) ++build.invalid_proposals;
            continue;
        }
        int from_idx = 0, to_idx = 0;
        try {
            from_idx = std::stoi(trim(line.substr(0, arrow)));
            to_idx = std::stoi(trim(line.substr(arrow + 2)));
        } catch (const std::exception&) {
            ++build.invalid_proposals;
            continue;
        }
        if (from_idx < 1 || to_idx < 1 ||
            from_idx > static_cast<int>(build.graph.nodes.size()) ||
            to_idx > static_cast<int>(build.graph.nodes.size())) {
            ++build.invalid_proposals;
            continue;
        }
        std::size_t u = static_cast<std::size_t>(from_idx - 1);
        std::size_t v = static_cast<std::size_t>(to_idx - 1);
        if (accepted.count({u, v})) continue; // duplicate proposal, merged
        const std::string& from_id = build.graph.nodes[u].id;
        const std::string& to_id = build.graph.nodes[v].id;
        if (u == v || reaches(v, u, adj)) {
            build.dropped_edges.emplace_back(from_id, to_id);
            continue;
        }
        accepted.insert({u, v});
        adj[u].push_back(v);
        build.graph.edges.emplace_back(from_id, to_id);
    }
    return build;
}

ProteinIntent detect_protein_intent(const SubQuery& sq, const Lexicons& lexicons) {
    ProteinIntent intent;
    std::string text = normalize_text(sq.text);
    std::string padded = " " + text + " ";

    auto phrase_present = [&](const std::vector<std::string>& phrases) {
        return std::any_of(phrases.begin(), phrases.end(), [&](const std::string& p) {
            return !p.empty() && text.find(p) != std::string::npos;
        });
    };

    std::optional<std::string> gene;
    for (const auto& token : tokenize(text)) {
        bool in_lexicon = std::find(lexicons.genes.begin(), lexicons.genes.end(), token) !=
                          lexicons.genes.end();
        if (in_lexicon || gene_like_pattern(token)) {
            gene = token;
            break;
        }
    }
    if (!gene) return intent;

    bool structural = phrase_present(lexicons.structure_terms);
    bool descriptive = phrase_present(lexicons.annotation_terms);
    if (!structural && !descriptive) return intent;

    intent.kind = structural ? ProteinIntentKind::structure : ProteinIntentKind::annotation;
    intent.gene = gene;
    for (const auto& org : lexicons.organisms) {
        if (!org.empty() && padded.find(" " + org + " ") != std::string::npos) {
            intent.organism = org;
            break;
        }
    }
    return intent;
}

TaskGraph assign_tools(const TaskGraph& g, const std::map<std::string, ProteinIntent>& intents) {
    std::set<std::string> known;
    for (const auto& n : g.nodes) known.insert(n.source_subquery);
    for (const auto& [id, intent] : intents) {
        if (!known.count(id))
            raise(ErrorKind::planner, "intent for unknown sub-query " + id);
    }

    auto tools_for = [&](const std::string& subquery) {
        std::vector<ToolKind> tools{ToolKind::literature};
        auto it = intents.find(subquery);
        if (it != intents.end()) {
            if (it->second.kind == ProteinIntentKind::annotation)
                tools.push_back(ToolKind::protein_annotation);
            else if (it->second.kind == ProteinIntentKind::structure)
                tools.push_back(ToolKind::protein_structure);
        }
        tools.push_back(ToolKind::web);
        return tools;
    };

    TaskGraph out;
    std::map<std::string, std::vector<std::string>> variants; // base id -> expanded ids
    for (const auto& n : g.nodes) {
        for (ToolKind tool : tools_for(n.source_subquery)) {
            TaskNode dup = n;
            dup.tool = tool;
            dup.id = n.id + "-" + to_string(tool);
            variants[n.id].push_back(dup.id);
            out.nodes.push_back(std::move(dup));
        }
    }
    for (const auto& [from, to] : g.edges) {
        for (const auto& fv : variants[from])
            for (const auto& tv : variants[to]) out.edges.emplace_back(fv, tv);
    }
    return out;
}

} // namespace bms
