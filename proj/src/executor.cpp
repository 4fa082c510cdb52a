#include "bms/executor.hpp"

#include "bms/error.hpp"
#include "bms/filtering.hpp"
#include "bms/text.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <semaphore>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace bms {

void to_json(nlohmann::json& j, const RetrievalEvent& v) {
    j = nlohmann::json{{"seq_start", v.seq_start},
                       {"seq_end", v.seq_end},
                       {"subquery", v.subquery},
                       {"source", v.source},
                       {"query", v.query},
                       {"raw_count", v.raw_count},
                       {"post_filter_count", v.post_filter_count},
                       {"fallback", v.fallback},
                       {"failed", v.failed},
                       {"started_at", to_rfc3339(v.started_at)},
                       {"finished_at", to_rfc3339(v.finished_at)},
                       {"returned_ids", v.returned_ids},
                       {"note", v.note}};
}

void to_json(nlohmann::json& j, const NodeEvent& v) {
    j = nlohmann::json{{"node_id", v.node_id},
                       {"subquery", v.subquery},
                       {"tool", to_string(v.tool)},
                       {"group_owner", v.group_owner},
                       {"seq_start", v.seq_start},
                       {"seq_end", v.seq_end},
                       {"started_at", to_rfc3339(v.started_at)},
                       {"finished_at", to_rfc3339(v.finished_at)}};
}

ProvenanceLog::ProvenanceLog(Clock& clock) : clock_(clock) {}

long long ProvenanceLog::next_seq() { return seq_.fetch_add(1) + 1; }

Timestamp ProvenanceLog::now() const { return clock_.now(); }

void ProvenanceLog::add_event(RetrievalEvent event) {
    std::lock_guard<std::mutex> lock(mu_);
    events_.push_back(std::move(event));
}

void ProvenanceLog::add_events(std::vector<RetrievalEvent> events) {
    std::lock_guard<std::mutex> lock(mu_);
    for (auto& e : events) events_.push_back(std::move(e));
}

void ProvenanceLog::add_node(NodeEvent event) {
    std::lock_guard<std::mutex> lock(mu_);
    nodes_.push_back(std::move(event));
}

std::vector<RetrievalEvent> ProvenanceLog::events() const {
    std::lock_guard<std::mutex> lock(mu_);
    return events_;
}

std::vector<NodeEvent> ProvenanceLog::node_events() const {
    std::lock_guard<std::mutex> lock(mu_);
    return nodes_;
}

namespace {

nlohmann::json normalized_event(const RetrievalEvent& v) {
    return nlohmann::json{{"type", "retrieval"},
                          {"subquery", v.subquery},
                          {"source", v.source},
                          {"query", v.query},
                          {"raw_count", v.raw_count},
                          {"post_filter_count", v.post_filter_count},
                          {"fallback", v.fallback},
                          {"failed", v.failed},
                          {"returned_ids", v.returned_ids},
                          {"note", v.note}};
}

nlohmann::json normalized_node(const NodeEvent& v) {
    return nlohmann::json{{"type", "node"},
                          {"node_id", v.node_id},
                          {"subquery", v.subquery},
                          {"tool", to_string(v.tool)},
                          {"group_owner", v.group_owner}};
}

auto event_sort_key(const RetrievalEvent& v) {
    return std::make_tuple(v.subquery, v.source, v.fallback, v.query, v.note,
                           join(v.returned_ids, ","));
}

} // namespace

std::string ProvenanceLog::to_jsonl(bool normalized) const {
    std::vector<RetrievalEvent> events;
    std::vector<NodeEvent> nodes;
    {
        std::lock_guard<std::mutex> lock(mu_);
        events = events_;
        nodes = nodes_;
    }
    std::ostringstream out;
    if (normalized) {
        std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
            return event_sort_key(a) < event_sort_key(b);
        });
        std::stable_sort(nodes.begin(), nodes.end(),
                         [](const auto& a, const auto& b) { return a.node_id < b.node_id; });
        for (const auto& e : events) out << normalized_event(e).dump() << '\n';
        for (const auto& n : nodes) out << normalized_node(n).dump() << '\n';
    } else {
        std::stable_sort(events.begin(), events.end(),
                         [](const auto& a, const auto& b) { return a.seq_start < b.seq_start; });
        std::stable_sort(nodes.begin(), nodes.end(),
                         [](const auto& a, const auto& b) { return a.seq_start < b.seq_start; });
        for (const auto& e : events) {
            nlohmann::json j = e;
            j["type"] = "retrieval";
            out << j.dump() << '\n';
        }
        for (const auto& n : nodes) {
            nlohmann::json j = n;
            j["type"] = "node";
            out << j.dump() << '\n';
        }
    }
    return out.str();
}

void ProvenanceLog::write_jsonl(const std::filesystem::path& path, bool normalized) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::io, "cannot open for writing: " + path.string());
    out << to_jsonl(normalized);
    if (!out) raise(ErrorKind::io, "write failed: " + path.string());
}

namespace {

bool degradable(const Error& e) {
    switch (e.kind()) {
    case ErrorKind::source_unavailable:
    case ErrorKind::provider:
    case ErrorKind::parse:
    case ErrorKind::not_found:
        return true;
    default:
        return false;
    }
}

struct SourceRun {
    std::vector<Document> docs;
    std::vector<RetrievalEvent> events; // primary, then fallback when it fired
};

// One provider call wrapped in an event record. Degradable failures become
// failed events; anything else propagates.
RetrievalEvent timed_call(ProvenanceLog& log, const std::string& subquery,
                          const std::string& source, const std::string& query,
                          const std::function<std::vector<std::string>()>& call) {
    RetrievalEvent ev;
    ev.subquery = subquery;
    ev.source = source;
    ev.query = query;
    ev.seq_start = log.next_seq();
    ev.started_at = log.now();
    try {
        ev.returned_ids = call();
        ev.raw_count = static_cast<int>(ev.returned_ids.size());
    } catch (const Error& e) {
        if (!degradable(e)) throw;
        ev.failed = e.kind() != ErrorKind::not_found;
        ev.note = e.what();
    }
    ev.seq_end = log.next_seq();
    ev.finished_at = log.now();
    return ev;
}

std::string fallback_query_for(const KeywordSet& ks, int count) {
    std::vector<const Keyword*> by_rank;
    by_rank.reserve(ks.keywords.size());
    for (const auto& kw : ks.keywords) by_rank.push_back(&kw);
    std::stable_sort(by_rank.begin(), by_rank.end(),
                     [](const Keyword* a, const Keyword* b) {
                         return a->salience_rank < b->salience_rank;
                     });
    std::vector<std::string> parts;
    for (const auto* kw : by_rank) {
        if (static_cast<int>(parts.size()) >= count) break;
        parts.push_back(kw->surface);
    }
    return join(parts, " ");
}

void emit_events(ProvenanceLog& log, std::vector<RetrievalEvent> events,
                 std::vector<RetrievalEvent>* bundle_events) {
    if (bundle_events)
        bundle_events->insert(bundle_events->end(), events.begin(), events.end());
    log.add_events(std::move(events));
}

} // namespace

std::vector<Document> retrieve_literature(const SubQuery& sq, const KeywordSet& ks,
                                          const FilterConfig& cfg, LiteratureClient& client,
                                          Embedder& embedder, ProvenanceLog& log,
                                          std::vector<RetrievalEvent>* bundle_events) {
    if (sq.id.empty()) raise(ErrorKind::precondition, "sub-query id is empty");
    if (ks.subquery != sq.id)
        raise(ErrorKind::precondition, "keyword set belongs to " + ks.subquery + ", not " + sq.id);
    if (ks.keywords.empty()) raise(ErrorKind::precondition, "keyword set is empty");
    validate_config(cfg);

    const std::array<LiteratureSource, 3> sources = {
        LiteratureSource::pubmed, LiteratureSource::pmc, LiteratureSource::sciencedirect};
    const std::string fallback_query = fallback_query_for(ks, cfg.fallback_keyword_count);

    std::array<SourceRun, 3> runs;
    std::array<std::exception_ptr, 3> errors;
    std::vector<std::thread> workers;
    for (size_t i = 0; i < sources.size(); ++i) {
        workers.emplace_back([&, i] {
            try {
                const LiteratureSource src = sources[i];
                auto search_once = [&](const std::string& q, bool is_fallback) {
                    std::vector<Document> docs;
                    RetrievalEvent ev =
                        timed_call(log, sq.id, to_string(src), q, [&] {
                            docs = client.search(src, q, cfg.per_source_max);
                            std::vector<std::string> ids;
                            ids.reserve(docs.size());
                            for (const auto& d : docs) ids.push_back(d.id());
                            return ids;
                        });
                    ev.fallback = is_fallback;
                    runs[i].events.push_back(std::move(ev));
                    return docs;
                };
                runs[i].docs = search_once(sq.text, false);
                if (runs[i].docs.empty()) runs[i].docs = search_once(fallback_query, true);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);

    // Pool in source order, drop repeats of the same record and of the same
    // normalized title across sources.
    std::vector<Document> pool;
    std::set<std::pair<int, std::string>> seen_ids;
    std::set<std::string> seen_titles;
    for (size_t i = 0; i < sources.size(); ++i) {
        for (const auto& d : runs[i].docs) {
            if (!seen_ids.insert({static_cast<int>(d.source), d.external_id}).second) continue;
            const std::string title_key = normalize_text(d.title);
            if (!title_key.empty() && !seen_titles.insert(title_key).second) continue;
            pool.push_back(d);
        }
    }

    const std::vector<Document> covered =
        filter_by_coverage(pool, ks, cfg.coverage_threshold);
    std::vector<Document> out;
    if (!covered.empty()) {
        auto ranked = rank_documents_top_k(covered, sq.text, embedder, cfg.literature_top_k);
        out.reserve(ranked.size());
        for (auto& r : ranked) {
            Document d = std::move(r.item);
            d.similarity = r.score;
            out.push_back(std::move(d));
        }
    }

    // Attribute survivors to the contributing call per source: the fallback
    // call when it fired, otherwise the primary.
    std::vector<RetrievalEvent> events;
    for (size_t i = 0; i < sources.size(); ++i) {
        int survivors = 0;
        for (const auto& d : out)
            if (d.source == sources[i]) ++survivors;
        auto& src_events = runs[i].events;
        if (!src_events.empty()) src_events.back().post_filter_count = survivors;
        for (auto& ev : src_events) events.push_back(std::move(ev));
    }
    emit_events(log, std::move(events), bundle_events);
    return out;
}

std::vector<WebResult> retrieve_web(const SubQuery& sq, const FilterConfig& cfg,
                                    WebSearchClient& client, Embedder& embedder,
                                    ProvenanceLog& log,
                                    std::vector<RetrievalEvent>* bundle_events) {
    if (sq.id.empty()) raise(ErrorKind::precondition, "sub-query id is empty");
    validate_config(cfg);

    const std::array<SearchEngine, 3> engines = {SearchEngine::duckduckgo, SearchEngine::google,
                                                 SearchEngine::brave};
    struct EngineRun {
        std::vector<WebResult> results;
        RetrievalEvent event;
    };
    std::array<EngineRun, 3> runs;
    std::array<std::exception_ptr, 3> errors;
    std::vector<std::thread> workers;
    for (size_t i = 0; i < engines.size(); ++i) {
        workers.emplace_back([&, i] {
            try {
                runs[i].event = timed_call(log, sq.id, to_string(engines[i]), sq.text, [&] {
                    runs[i].results = client.search(engines[i], sq.text, cfg.per_source_max);
                    std::vector<std::string> ids;
                    ids.reserve(runs[i].results.size());
                    for (const auto& r : runs[i].results) ids.push_back(r.id());
                    return ids;
                });
            } catch (...) {
                errors[i] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);

    std::vector<WebResult> pool;
    std::set<std::string> seen_urls;
    for (size_t i = 0; i < engines.size(); ++i)
        for (const auto& r : runs[i].results)
            if (seen_urls.insert(r.url).second) pool.push_back(r);

    std::vector<WebResult> out =
        filter_web(pool, sq.text, embedder, cfg.web_relevance_threshold, cfg.web_top_k);

    std::vector<RetrievalEvent> events;
    for (size_t i = 0; i < engines.size(); ++i) {
        int survivors = 0;
        for (const auto& r : out)
            if (r.engine == engines[i]) ++survivors;
        runs[i].event.post_filter_count = survivors;
        events.push_back(std::move(runs[i].event));
    }
    emit_events(log, std::move(events), bundle_events);
    return out;
}

std::pair<std::optional<ProteinRecord>, std::optional<StructureFile>>
retrieve_protein(const ProteinIntent& intent, const std::string& subquery_id,
                 ProteinClient& client, ProvenanceLog& log,
                 std::vector<RetrievalEvent>* bundle_events) {
    if (intent.kind == ProteinIntentKind::none)
        raise(ErrorKind::precondition, "protein retrieval needs an annotation or structure intent");
    if (!intent.gene || intent.gene->empty())
        raise(ErrorKind::precondition, "protein intent carries no gene symbol");

    std::vector<RetrievalEvent> events;
    std::optional<ProteinRecord> record;
    std::optional<StructureFile> structure;

    std::string lookup_query = *intent.gene;
    if (intent.organism) lookup_query += " " + *intent.organism;
    std::optional<std::string> accession;
    events.push_back(timed_call(log, subquery_id, "uniprot", lookup_query, [&] {
        accession = client.lookup_accession(*intent.gene, intent.organism);
        return std::vector<std::string>{*accession};
    }));

    if (accession) {
        events.push_back(timed_call(log, subquery_id, "uniprot", *accession, [&] {
            record = client.fetch_entry(*accession);
            return std::vector<std::string>{record->id()};
        }));
        if (!record) {
            emit_events(log, std::move(events), bundle_events);
            return {std::nullopt, std::nullopt};
        }
        if (intent.kind == ProteinIntentKind::structure) {
            events.push_back(timed_call(log, subquery_id, "alphafold", *accession, [&] {
                structure = client.fetch_structure(*accession);
                return std::vector<std::string>{structure->id()};
            }));
            if (structure) record->structure_ref = structure->id();
        }
    }

    emit_events(log, std::move(events), bundle_events);
    return {record, structure};
}

namespace {

constexpr int kMaxConcurrency = 256;

class CallGate {
public:
    explicit CallGate(int permits) : sem_(permits) {}

    struct Token {
        CallGate& gate;
        ~Token() { gate.sem_.release(); }
    };

    Token acquire() {
        sem_.acquire();
        return Token{*this};
    }

private:
    std::counting_semaphore<kMaxConcurrency> sem_;
};

class GatedLiterature : public LiteratureClient {
public:
    GatedLiterature(LiteratureClient& inner, CallGate& gate) : inner_(inner), gate_(gate) {}

protected:
    std::vector<Document> do_search(LiteratureSource source, const std::string& query,
                                    int max_results) override {
        auto token = gate_.acquire();
        return inner_.search(source, query, max_results);
    }

private:
    LiteratureClient& inner_;
    CallGate& gate_;
};

class GatedWeb : public WebSearchClient {
public:
    GatedWeb(WebSearchClient& inner, CallGate& gate) : inner_(inner), gate_(gate) {}

protected:
    std::vector<WebResult> do_search(SearchEngine engine, const std::string& query,
                                     int max_results) override {
        auto token = gate_.acquire();
        return inner_.search(engine, query, max_results);
    }

private:
    WebSearchClient& inner_;
    CallGate& gate_;
};

class GatedProtein : public ProteinClient {
public:
    GatedProtein(ProteinClient& inner, CallGate& gate) : inner_(inner), gate_(gate) {}

protected:
    std::string do_lookup(const std::string& gene,
                          const std::optional<std::string>& organism) override {
        auto token = gate_.acquire();
        return inner_.lookup_accession(gene, organism);
    }

    ProteinRecord do_fetch_entry(const std::string& accession) override {
        auto token = gate_.acquire();
        return inner_.fetch_entry(accession);
    }

    StructureFile do_fetch_structure(const std::string& accession) override {
        auto token = gate_.acquire();
        return inner_.fetch_structure(accession);
    }

private:
    ProteinClient& inner_;
    CallGate& gate_;
};

bool tool_enabled(ToolKind tool, const ExecutorOptions& options) {
    switch (tool) {
    case ToolKind::literature: return options.enable_literature;
    case ToolKind::web: return options.enable_web;
    case ToolKind::protein_annotation:
    case ToolKind::protein_structure: return options.enable_protein;
    }
    return false;
}

} // namespace

std::vector<RetrievalBundle> execute_plan(const TaskGraph& g,
                                          const std::vector<SubQuery>& subqueries,
                                          const std::vector<KeywordSet>& keyword_sets,
                                          const std::map<std::string, ProteinIntent>& intents,
                                          const FilterConfig& cfg, const ProviderSet& providers,
                                          ProvenanceLog& log, const ExecutorOptions& options) {
    if (options.concurrency < 1 || options.concurrency > kMaxConcurrency)
        raise(ErrorKind::config, "concurrency must lie in [1, " +
                                     std::to_string(kMaxConcurrency) + "]");
    if (!providers.embedder) raise(ErrorKind::precondition, "provider set lacks an embedder");
    if (!providers.literature) raise(ErrorKind::precondition, "provider set lacks literature");
    if (!providers.web) raise(ErrorKind::precondition, "provider set lacks web search");
    if (!providers.protein) raise(ErrorKind::precondition, "provider set lacks protein lookup");
    validate_config(cfg);

    std::unordered_map<std::string, const SubQuery*> sq_by_id;
    for (const auto& sq : subqueries) {
        if (!sq_by_id.emplace(sq.id, &sq).second)
            raise(ErrorKind::executor, "duplicate sub-query id: " + sq.id);
    }
    std::unordered_map<std::string, const KeywordSet*> ks_by_sq;
    for (const auto& ks : keyword_sets) ks_by_sq.emplace(ks.subquery, &ks);

    const size_t n = g.nodes.size();
    std::unordered_map<std::string, size_t> index_of;
    for (size_t i = 0; i < n; ++i) {
        if (!index_of.emplace(g.nodes[i].id, i).second)
            raise(ErrorKind::executor, "duplicate node id: " + g.nodes[i].id);
    }
    for (const auto& node : g.nodes) {
        if (!sq_by_id.count(node.source_subquery))
            raise(ErrorKind::executor, "node " + node.id + " references unknown sub-query " +
                                           node.source_subquery);
        if (node.tool == ToolKind::literature && !ks_by_sq.count(node.source_subquery))
            raise(ErrorKind::executor,
                  "no keyword set for sub-query " + node.source_subquery);
        if (node.tool == ToolKind::protein_annotation || node.tool == ToolKind::protein_structure) {
            auto it = intents.find(node.source_subquery);
            if (it == intents.end() || it->second.kind == ProteinIntentKind::none)
                raise(ErrorKind::executor,
                      "protein node without intent for sub-query " + node.source_subquery);
        }
    }

    std::vector<std::vector<size_t>> adj(n);
    std::vector<int> indeg(n, 0);
    for (const auto& [from, to] : g.edges) {
        auto fi = index_of.find(from);
        auto ti = index_of.find(to);
        if (fi == index_of.end() || ti == index_of.end())
            raise(ErrorKind::executor, "edge references unknown node: " + from + " -> " + to);
        adj[fi->second].push_back(ti->second);
        ++indeg[ti->second];
    }

    std::vector<RetrievalBundle> bundles;
    bundles.reserve(subqueries.size());
    std::unordered_map<std::string, size_t> bundle_of;
    for (const auto& sq : subqueries) {
        bundle_of.emplace(sq.id, bundles.size());
        bundles.push_back(RetrievalBundle{sq.id, {}, {}, std::nullopt, std::nullopt, {}});
    }

    CallGate gate(options.concurrency);
    GatedLiterature lit(*providers.literature, gate);
    GatedWeb web(*providers.web, gate);
    GatedProtein protein(*providers.protein, gate);
    Embedder& embedder = *providers.embedder;

    std::mutex state_mu; // guards claimed groups and bundle writes
    std::set<std::pair<std::string, ToolKind>> claimed;

    std::vector<char> scheduled(n, 0);
    size_t done = 0;
    while (done < n) {
        std::vector<size_t> wave;
        for (size_t i = 0; i < n; ++i)
            if (!scheduled[i] && indeg[i] == 0) wave.push_back(i);
        if (wave.empty()) raise(ErrorKind::executor, "task graph contains a cycle");
        for (size_t i : wave) scheduled[i] = 1;

        std::vector<std::exception_ptr> errors(wave.size());
        std::vector<std::thread> workers;
        for (size_t w = 0; w < wave.size(); ++w) {
            workers.emplace_back([&, w] {
                const TaskNode& node = g.nodes[wave[w]];
                NodeEvent ne;
                ne.node_id = node.id;
                ne.subquery = node.source_subquery;
                ne.tool = node.tool;
                ne.seq_start = log.next_seq();
                ne.started_at = log.now();
                try {
                    bool owner;
                    {
                        std::lock_guard<std::mutex> lock(state_mu);
                        owner = claimed.insert({node.source_subquery, node.tool}).second;
                    }
                    ne.group_owner = owner;
                    if (owner && tool_enabled(node.tool, options)) {
                        const SubQuery& sq = *sq_by_id.at(node.source_subquery);
                        RetrievalBundle& bundle = bundles[bundle_of.at(node.source_subquery)];
                        std::vector<RetrievalEvent> local;
                        if (node.tool == ToolKind::literature) {
                            auto docs = retrieve_literature(
                                sq, *ks_by_sq.at(sq.id), cfg, lit, embedder, log, &local);
                            std::lock_guard<std::mutex> lock(state_mu);
                            bundle.literature = std::move(docs);
                            bundle.provenance.insert(bundle.provenance.end(), local.begin(),
                                                     local.end());
                        } else if (node.tool == ToolKind::web) {
                            auto results = retrieve_web(sq, cfg, web, embedder, log, &local);
                            std::lock_guard<std::mutex> lock(state_mu);
                            bundle.web = std::move(results);
                            bundle.provenance.insert(bundle.provenance.end(), local.begin(),
                                                     local.end());
                        } else {
                            ProteinIntent intent = intents.at(sq.id);
                            intent.kind = node.tool == ToolKind::protein_structure
                                              ? ProteinIntentKind::structure
                                              : ProteinIntentKind::annotation;
                            auto [record, file] =
                                retrieve_protein(intent, sq.id, protein, log, &local);
                            std::lock_guard<std::mutex> lock(state_mu);
                            bundle.protein = std::move(record);
                            bundle.structure = std::move(file);
                            bundle.provenance.insert(bundle.provenance.end(), local.begin(),
                                                     local.end());
                        }
                    }
                } catch (...) {
                    errors[w] = std::current_exception();
                }
                ne.seq_end = log.next_seq();
                ne.finished_at = log.now();
                log.add_node(ne);
            });
        }
        for (auto& worker : workers) worker.join();
        for (const auto& err : errors)
            if (err) std::rethrow_exception(err);

        for (size_t i : wave)
            for (size_t j : adj[i]) --indeg[j];
        done += wave.size();
    }

    // Retrieval threads race within a wave; fix a canonical order per bundle.
    for (auto& bundle : bundles) {
        std::stable_sort(bundle.provenance.begin(), bundle.provenance.end(),
                         [](const auto& a, const auto& b) {
                             return event_sort_key(a) < event_sort_key(b);
                         });
    }
    return bundles;
}

} // namespace bms
