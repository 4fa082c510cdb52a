#include "bms/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bms/cache.hpp"
#include "bms/error.hpp"
#include "bms/json_io.hpp"
#include "bms/providers_live.hpp"
#include "bms/providers_mock.hpp"
#include "bms/text.hpp"

namespace bms {

namespace {

using nlohmann::json;

constexpr std::chrono::seconds kCacheTtl{86400};

json read_json_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::config, std::string(what) + " not readable: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    json j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded())
        raise(ErrorKind::config, std::string(what) + " is not JSON: " + path.string());
    return j;
}

std::shared_ptr<Clock> make_clock(const AppConfig& cfg) {
    if (cfg.fixed_time) return std::make_shared<FixedClock>(*cfg.fixed_time);
    if (cfg.live) return std::make_shared<SystemClock>();
    return std::make_shared<FixedClock>(kMockRunEpoch);
}

std::shared_ptr<ExtractiveLanguageModel> make_lm(const AppConfig& cfg) {
    ExtractiveLanguageModel::Options opts;
    opts.topic_seed = cfg.seed;
    opts.default_keyword_cap = static_cast<std::size_t>(cfg.max_keywords);
    return std::make_shared<ExtractiveLanguageModel>(std::move(opts));
}

void seed_mock_providers(const json& corpus, Pipeline& p) {
    auto literature = std::make_shared<InMemoryLiteratureClient>();
    if (corpus.contains("documents")) {
        for (const auto& [source_name, docs_json] : corpus.at("documents").items()) {
            auto source = literature_source_from_string(source_name);
            std::vector<Document> docs = docs_json.get<std::vector<Document>>();
            literature->set_corpus(source, std::move(docs));
        }
    }

    auto web = std::make_shared<InMemoryWebClient>();
    if (corpus.contains("web")) {
        for (const auto& [engine_name, results_json] : corpus.at("web").items()) {
            auto engine = search_engine_from_string(engine_name);
            std::vector<WebResult> results = results_json.get<std::vector<WebResult>>();
            web->set_default(engine, std::move(results));
        }
    }

    auto protein = std::make_shared<InMemoryProteinClient>();
    if (corpus.contains("proteins")) {
        const json& prot = corpus.at("proteins");
        if (prot.contains("accessions"))
            for (const auto& row : prot.at("accessions"))
                protein->add_accession(row.at("gene").get<std::string>(),
                                       row.value("organism", std::string()),
                                       row.at("accession").get<std::string>());
        if (prot.contains("records"))
            for (const auto& row : prot.at("records")) protein->add_record(row.get<ProteinRecord>());
        if (prot.contains("structures"))
            for (const auto& row : prot.at("structures"))
                protein->add_structure(row.at("accession").get<std::string>(),
                                       row.at("pdb").get<std::string>());
    }

    p.providers.literature = std::move(literature);
    p.providers.web = std::move(web);
    p.providers.protein = std::move(protein);
}

PlannerOptions planner_options(const AppConfig& cfg) {
    PlannerOptions opts;
    opts.max_subqueries = cfg.max_subqueries;
    opts.max_keywords = cfg.max_keywords;
    opts.retry_budget = cfg.retry_budget;
    return opts;
}

json intents_payload(const std::map<std::string, ProteinIntent>& intents) {
    json out = json::object();
    for (const auto& [sq_id, intent] : intents) {
        json row{{"kind", to_string(intent.kind)}};
        if (intent.gene) row["gene"] = *intent.gene;
        if (intent.organism) row["organism"] = *intent.organism;
        out[sq_id] = std::move(row);
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::io, "cannot write " + path.string());
    out << content;
}

} // namespace

Pipeline wire_mock_pipeline(const AppConfig& cfg) {
    Pipeline p;
    p.config = cfg;
    p.prompts = PromptLibrary::load_dir(cfg.prompt_dir);
    p.dims = load_dimensions(cfg.dimensions_file);
    p.lexicons = Lexicons::load_file(cfg.lexicons_file);
    p.clock = make_clock(cfg);
    p.providers.lm = make_lm(cfg);
    p.providers.embedder = std::make_shared<HashEmbedder>();
    seed_mock_providers(read_json_file(cfg.mock_corpus_file, "mock corpus file"), p);
    return p;
}

Pipeline wire_live_pipeline(const AppConfig& cfg) {
    Pipeline p;
    p.config = cfg;
    p.prompts = PromptLibrary::load_dir(cfg.prompt_dir);
    p.dims = load_dimensions(cfg.dimensions_file);
    p.lexicons = Lexicons::load_file(cfg.lexicons_file);
    p.clock = make_clock(cfg);
    p.providers.lm = make_lm(cfg);
    p.providers.embedder = std::make_shared<HashEmbedder>();

    std::shared_ptr<HttpTransport> transport = std::make_shared<HttplibTransport>();
    if (!cfg.cache_dir.empty()) {
        std::filesystem::create_directories(cfg.cache_dir);
        auto cache = std::make_shared<ResponseCache>(cfg.cache_dir, kCacheTtl, *p.clock);
        transport = std::make_shared<CachingTransport>(std::move(transport), std::move(cache));
    }

    RetryPolicy retry;
    retry.max_retries = cfg.http_max_retries;

    HttpLiteratureClient::Options lit;
    lit.ncbi_api_key = cfg.credentials.ncbi_api_key;
    lit.sciencedirect_api_key = cfg.credentials.sciencedirect_api_key;
    lit.retry = retry;
    lit.requests_per_second = cfg.requests_per_second;
    lit.clock = p.clock.get();
    p.providers.literature = std::make_shared<HttpLiteratureClient>(transport, std::move(lit));

    HttpWebSearchClient::Options web;
    web.google_api_key = cfg.credentials.google_api_key;
    web.google_cx = cfg.credentials.google_cx;
    web.brave_api_key = cfg.credentials.brave_api_key;
    web.retry = retry;
    web.requests_per_second = cfg.requests_per_second;
    p.providers.web = std::make_shared<HttpWebSearchClient>(transport, std::move(web));

    HttpProteinClient::Options prot;
    prot.retry = retry;
    prot.requests_per_second = cfg.requests_per_second;
    p.providers.protein = std::make_shared<HttpProteinClient>(transport, std::move(prot));

    return p;
}

Pipeline wire_pipeline(const AppConfig& cfg) {
    return cfg.live ? wire_live_pipeline(cfg) : wire_mock_pipeline(cfg);
}

PlanArtifacts run_plan(Pipeline& p, const std::string& query_text) {
    std::string text = trim(query_text);
    if (text.empty()) raise(ErrorKind::usage, "query must be non-empty");

    PlanArtifacts plan;
    plan.query = UserQuery{make_query_id(text), text, p.clock->now()};

    auto opts = planner_options(p.config);
    plan.subqueries = decompose_query(plan.query, p.dims, p.prompts.get(TemplateName::decompose),
                                      *p.providers.lm, opts);
    plan.keyword_sets.reserve(plan.subqueries.size());
    for (const auto& sq : plan.subqueries)
        plan.keyword_sets.push_back(
            extract_keywords(sq, p.dims, p.prompts.get(TemplateName::keywords), *p.providers.lm, opts));

    plan.build = build_task_graph(plan.keyword_sets, p.prompts.get(TemplateName::graph),
                                  *p.providers.lm, opts);
    for (const auto& sq : plan.subqueries)
        plan.intents[sq.id] = detect_protein_intent(sq, p.lexicons);
    plan.build.graph = assign_tools(plan.build.graph, plan.intents);
    return plan;
}

AskArtifacts run_ask(Pipeline& p, const std::string& query_text) {
    AskArtifacts a;
    a.plan = run_plan(p, query_text);

    ProvenanceLog log(*p.clock);
    ExecutorOptions exec;
    exec.concurrency = p.config.concurrency;
    exec.enable_literature = p.config.enable_literature;
    exec.enable_web = p.config.enable_web;
    exec.enable_protein = p.config.enable_protein;

    a.bundles = execute_plan(a.plan.build.graph, a.plan.subqueries, a.plan.keyword_sets,
                             a.plan.intents, p.config.filter, p.providers, log, exec);

    ReportOptions report_opts;
    report_opts.retry_budget = p.config.retry_budget;

    a.answers.reserve(a.bundles.size());
    for (size_t i = 0; i < a.plan.subqueries.size(); ++i)
        a.answers.push_back(extract_sub_answer(a.plan.subqueries[i], a.bundles[i],
                                               p.prompts.get(TemplateName::sub_answer),
                                               *p.providers.lm, report_opts));

    a.links = link_sub_answers(a.answers, p.prompts.get(TemplateName::links), *p.providers.lm,
                               report_opts);
    a.report = generate_report(a.plan.query, a.answers, a.links, a.bundles,
                               p.prompts.get(TemplateName::report), *p.providers.lm, *p.clock,
                               report_opts);
    a.provenance_jsonl = log.to_jsonl(true);
    return a;
}

json plan_payload(const PlanArtifacts& plan) {
    return json{{"query", plan.query},
                {"subqueries", plan.subqueries},
                {"keyword_sets", plan.keyword_sets},
                {"protein_intents", intents_payload(plan.intents)}};
}

json graph_payload(const PlanArtifacts& plan) {
    json nodes = json::array();
    for (const auto& n : plan.build.graph.nodes)
        nodes.push_back(json{{"id", n.id},
                             {"subquery", n.source_subquery},
                             {"keyword", n.keyword},
                             {"tool", to_string(n.tool)}});
    json edges = json::array();
    for (const auto& [from, to] : plan.build.graph.edges) edges.push_back(json::array({from, to}));
    json dropped = json::array();
    for (const auto& [from, to] : plan.build.dropped_edges)
        dropped.push_back(json::array({from, to}));
    return json{{"nodes", std::move(nodes)},
                {"edges", std::move(edges)},
                {"dropped_edges", std::move(dropped)},
                {"invalid_proposals", plan.build.invalid_proposals}};
}

json report_sidecar(const AskArtifacts& a) {
    return json{{"report", a.report}, {"answers", a.answers}, {"links", a.links}};
}

std::string render_plan_summary(const PlanArtifacts& plan) {
    std::ostringstream out;
    out << "query " << plan.query.id << ": " << plan.query.text << "\n";
    out << "sub-queries: " << plan.subqueries.size() << "\n";
    for (size_t i = 0; i < plan.subqueries.size(); ++i) {
        const auto& sq = plan.subqueries[i];
        out << "  " << sq.ordinal << ". [" << sq.dimension.name << "] " << sq.text << "\n";

        const auto& ks = plan.keyword_sets[i];
        out << "     keywords:";
        for (const auto& kw : ks.keywords) out << " " << kw.surface << ";";
        out << "\n";

        std::vector<std::string> tools;
        for (const auto& n : plan.build.graph.nodes) {
            if (n.source_subquery != sq.id) continue;
            std::string t = to_string(n.tool);
            if (std::find(tools.begin(), tools.end(), t) == tools.end()) tools.push_back(t);
        }
        out << "     tools:";
        for (const auto& t : tools) out << " " << t;
        out << "\n";
    }
    out << "graph: " << plan.build.graph.nodes.size() << " nodes, "
        << plan.build.graph.edges.size() << " edges";
    if (!plan.build.dropped_edges.empty())
        out << " (" << plan.build.dropped_edges.size() << " cycle-inducing proposals dropped)";
    out << "\n";
    return out.str();
}

PlanFiles write_plan_files(const std::filesystem::path& dir, const PlanArtifacts& plan) {
    std::filesystem::create_directories(dir);
    PlanFiles files{dir / "plan.json", dir / "graph.json"};
    write_text_file(files.plan, plan_payload(plan).dump(2) + "\n");
    write_text_file(files.graph, graph_payload(plan).dump(2) + "\n");
    return files;
}

AskFiles write_ask_files(const std::filesystem::path& dir, const AskArtifacts& a) {
    auto pair = write_report_files(dir, "report", a.report, a.answers, a.links);
    AskFiles files{pair.markdown, pair.sidecar, dir / "provenance.jsonl"};
    write_text_file(files.provenance, a.provenance_jsonl);
    return files;
}

} // namespace bms
