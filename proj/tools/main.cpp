#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bms/bench.hpp"
#include "bms/config.hpp"
#include "bms/error.hpp"
#include "bms/pipeline.hpp"

namespace {

using bms::AppConfig;
using bms::ConfigOverrides;
using bms::Error;
using bms::ErrorKind;
using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path, const char* what) {
    if (!std::filesystem::is_regular_file(path))
        bms::raise(ErrorKind::usage, std::string(what) + " not found: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) bms::raise(ErrorKind::io, std::string("cannot read ") + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int cmd_plan(const AppConfig& cfg, const std::string& query) {
    auto pipeline = bms::wire_pipeline(cfg);
    auto plan = bms::run_plan(pipeline, query);
    auto files = bms::write_plan_files(cfg.out_dir, plan);
    std::cout << bms::render_plan_summary(plan);
    std::cout << "wrote " << files.plan.string() << "\n";
    std::cout << "wrote " << files.graph.string() << "\n";
    return 0;
}

int cmd_ask(const AppConfig& cfg, const std::string& query) {
    auto pipeline = bms::wire_pipeline(cfg);
    auto artifacts = bms::run_ask(pipeline, query);
    auto files = bms::write_ask_files(cfg.out_dir, artifacts);

    int degraded = 0;
    for (const auto& a : artifacts.answers)
        if (a.evidence_ids.empty()) ++degraded;
    std::cout << "sub-queries answered: " << artifacts.answers.size();
    if (degraded > 0) std::cout << " (" << degraded << " with insufficient evidence)";
    std::cout << "\nreferences cited: " << artifacts.report.references.size() << "\n";
    std::cout << "wrote " << files.markdown.string() << "\n";
    std::cout << "wrote " << files.sidecar.string() << "\n";
    std::cout << "wrote " << files.provenance.string() << "\n";
    return 0;
}

int cmd_bench_generate(const AppConfig& cfg, const std::filesystem::path& report_path) {
    auto pipeline = bms::wire_pipeline(cfg);
    auto paragraphs = bms::split_paragraphs(read_text_file(report_path, "report file"));

    bms::BenchOptions opts;
    opts.retry_budget = cfg.retry_budget;
    opts.context_top_k = cfg.context_top_k;
    auto generation =
        bms::generate_mcqs(paragraphs, cfg.bench_level, cfg.bench_count,
                           pipeline.prompts.get(bms::TemplateName::mcq_generate),
                           *pipeline.providers.lm, opts);

    if (generation.items.empty()) {
        std::cerr << "error: no acceptable questions after " << generation.iterations
                  << " iterations\n";
        return 1;
    }
    if (generation.exhausted)
        std::cerr << "warning: stopped at the iteration bound with "
                  << generation.items.size() << " of " << cfg.bench_count << " items\n";

    std::filesystem::create_directories(cfg.out_dir);
    auto out = cfg.out_dir / ("mcqs_level" + std::to_string(cfg.bench_level) + ".json");
    bms::save_mcqs(out, generation.items);
    std::cout << "generated " << generation.items.size() << " items in "
              << generation.iterations << " iterations ("
              << generation.rejections.size() << " rejected)\n";
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

int cmd_bench_answer(const AppConfig& cfg, const std::filesystem::path& mcq_path,
                     const std::filesystem::path& report_path, int repeats) {
    if (repeats < 1) bms::raise(ErrorKind::usage, "repeats must be >= 1");
    if (!std::filesystem::is_regular_file(mcq_path))
        bms::raise(ErrorKind::usage, "mcq file not found: " + mcq_path.string());
    auto items = bms::load_mcqs(mcq_path);
    auto pipeline = bms::wire_pipeline(cfg);
    auto paragraphs = bms::split_paragraphs(read_text_file(report_path, "report file"));

    bms::BenchOptions opts;
    opts.retry_budget = cfg.retry_budget;
    opts.context_top_k = cfg.context_top_k;

    std::vector<bms::McqDecision> decisions;
    decisions.reserve(items.size() * static_cast<size_t>(repeats));
    for (int r = 0; r < repeats; ++r)
        for (const auto& item : items) {
            auto context = bms::select_context(item, paragraphs, *pipeline.providers.embedder,
                                               cfg.context_top_k);
            decisions.push_back(bms::answer_mcq(item, context,
                                                pipeline.prompts.get(bms::TemplateName::mcq_answer),
                                                *pipeline.providers.lm, opts));
        }

    std::filesystem::create_directories(cfg.out_dir);
    auto out = cfg.out_dir / "decisions.jsonl";
    std::ofstream file(out, std::ios::binary);
    if (!file) bms::raise(ErrorKind::io, "cannot write " + out.string());
    int abstentions = 0;
    for (const auto& d : decisions) {
        if (d.label.empty()) ++abstentions;
        json row{{"item_id", d.item_id}, {"label", d.label}, {"prompt", d.prompt},
                 {"reply", d.reply}};
        file << row.dump() << '\n';
    }
    std::cout << "answered " << items.size() << " items x " << repeats << " repeats";
    if (abstentions > 0) std::cout << " (" << abstentions << " abstentions)";
    std::cout << "\nwrote " << out.string() << "\n";
    return 0;
}

int cmd_bench_score(const AppConfig& cfg, const std::filesystem::path& mcq_path,
                    const std::filesystem::path& decisions_path) {
    if (!std::filesystem::is_regular_file(mcq_path))
        bms::raise(ErrorKind::usage, "mcq file not found: " + mcq_path.string());
    if (!std::filesystem::is_regular_file(decisions_path))
        bms::raise(ErrorKind::usage, "decisions file not found: " + decisions_path.string());
    auto items = bms::load_mcqs(mcq_path);

    std::map<std::string, std::vector<std::string>> answers;
    std::ifstream in(decisions_path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json row = json::parse(line, nullptr, false);
        if (row.is_discarded() || !row.contains("item_id") || !row.contains("label"))
            bms::raise(ErrorKind::parse, "decisions file line " + std::to_string(line_no) +
                                             " is not a decision row");
        answers[row.at("item_id").get<std::string>()].push_back(
            row.at("label").get<std::string>());
    }
    if (answers.empty()) bms::raise(ErrorKind::scoring, "decisions file holds no rows");
    int repeats = static_cast<int>(answers.begin()->second.size());

    auto run = bms::score_run(items, answers, repeats);

    std::filesystem::create_directories(cfg.out_dir);
    auto out = cfg.out_dir / "bench.json";
    std::ofstream file(out, std::ios::binary);
    if (!file) bms::raise(ErrorKind::io, "cannot write " + out.string());
    file << json(run).dump(2) << '\n';

    std::cout << "run " << run.id << ": " << items.size() << " items x " << repeats
              << " repeats\n";
    for (const auto& [level, stats] : run.per_level_accuracy)
        std::cout << "  level " << level << " (" << bms::mcq_level_name(level) << "): "
                  << stats.mean << " +/- " << stats.stddev << " over " << stats.item_count
                  << " items\n";
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

void write_json_response(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
}

int run_server(const AppConfig& cfg, int port) {
    httplib::Server server;
    server.new_task_queue = [&cfg] {
        return new httplib::ThreadPool(static_cast<size_t>(cfg.concurrency));
    };

    auto handle = [&cfg](const httplib::Request& req, httplib::Response& res,
                         const std::function<json(const std::string&)>& op) {
        json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("query") ||
            !body.at("query").is_string()) {
            write_json_response(res, 400, json{{"error", "body must be {\"query\": \"...\"}"}});
            return;
        }
        try {
            write_json_response(res, 200, op(body.at("query").get<std::string>()));
        } catch (const Error& e) {
            int status = e.kind() == ErrorKind::usage ? 400 : 500;
            write_json_response(res, status, json{{"error", e.what()}});
        } catch (const std::exception& e) {
            write_json_response(res, 500, json{{"error", e.what()}});
        }
    };

    server.Post("/plan", [&](const httplib::Request& req, httplib::Response& res) {
        handle(req, res, [&](const std::string& q) {
            auto pipeline = bms::wire_pipeline(cfg);
            return bms::plan_payload(bms::run_plan(pipeline, q));
        });
    });
    server.Post("/ask", [&](const httplib::Request& req, httplib::Response& res) {
        handle(req, res, [&](const std::string& q) {
            auto pipeline = bms::wire_pipeline(cfg);
            return bms::report_sidecar(bms::run_ask(pipeline, q));
        });
    });

    std::cerr << "listening on 127.0.0.1:" << port << "\n";
    if (!server.listen("127.0.0.1", port)) {
        std::cerr << "error: cannot bind port " << port << "\n";
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"provider-abstracted biomedical search"};
    app.require_subcommand(0, 1);

    std::string config_file, out_dir, cache_dir, query;
    double theta = 0.0, tau = 0.0;
    int top_k = 0, level = 0, count = 0, serve_port = 0, repeats = 1;
    std::uint64_t seed = 0;
    bool live = false;

    app.add_option("--config", config_file, "config file path");
    app.add_option("--query", query, "user query text");
    app.add_option("--out-dir", out_dir, "artifact output directory");
    app.add_option("--top-k", top_k, "top-k for literature and web filtering");
    app.add_option("--theta", theta, "keyword coverage threshold in [0,1]");
    app.add_option("--tau", tau, "web relevance threshold in [0,1]");
    app.add_option("--level", level, "mcq difficulty level 1-3");
    app.add_option("--count", count, "mcq count");
    app.add_option("--seed", seed, "deterministic seed");
    app.add_flag("--live", live, "use real providers instead of the mock corpus");
    app.add_option("--serve", serve_port, "serve HTTP on this port instead of running a command");
    app.add_option("--cache-dir", cache_dir, "HTTP response cache directory");

    auto* plan_cmd = app.add_subcommand("plan", "decompose a query and write plan files");
    plan_cmd->fallthrough();
    auto* ask_cmd = app.add_subcommand("ask", "run the full pipeline and write a report");
    ask_cmd->fallthrough();

    auto* bench_cmd = app.add_subcommand("bench", "benchmark generation, answering, scoring");
    bench_cmd->fallthrough();
    bench_cmd->require_subcommand(1);

    std::string gen_report, ans_mcq, ans_report, score_mcq, score_decisions;
    auto* gen_cmd = bench_cmd->add_subcommand("generate", "generate MCQs from a report");
    gen_cmd->fallthrough();
    gen_cmd->add_option("report", gen_report, "report markdown file")->required();
    auto* ans_cmd = bench_cmd->add_subcommand("answer", "answer MCQs against a report");
    ans_cmd->fallthrough();
    ans_cmd->add_option("mcqs", ans_mcq, "MCQ JSON file")->required();
    ans_cmd->add_option("report", ans_report, "report markdown file")->required();
    ans_cmd->add_option("--repeats", repeats, "answer passes per item");
    auto* score_cmd = bench_cmd->add_subcommand("score", "score decisions against MCQ keys");
    score_cmd->fallthrough();
    score_cmd->add_option("mcqs", score_mcq, "MCQ JSON file")->required();
    score_cmd->add_option("decisions", score_decisions, "decisions JSONL file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        ConfigOverrides overrides;
        if (app.count("--config")) overrides.config_file = config_file;
        if (app.count("--theta")) overrides.theta = theta;
        if (app.count("--tau")) overrides.tau = tau;
        if (app.count("--top-k")) overrides.top_k = top_k;
        if (app.count("--out-dir")) overrides.out_dir = out_dir;
        if (app.count("--cache-dir")) overrides.cache_dir = cache_dir;
        if (app.count("--seed")) overrides.seed = seed;
        if (app.count("--level")) overrides.level = level;
        if (app.count("--count")) overrides.count = count;
        if (app.count("--live")) overrides.live = live;
        AppConfig cfg = bms::load_config(overrides);

        if (app.count("--serve")) return run_server(cfg, serve_port);

        if (plan_cmd->parsed()) return cmd_plan(cfg, query);
        if (ask_cmd->parsed()) return cmd_ask(cfg, query);
        if (bench_cmd->parsed()) {
            if (gen_cmd->parsed()) return cmd_bench_generate(cfg, gen_report);
            if (ans_cmd->parsed()) return cmd_bench_answer(cfg, ans_mcq, ans_report, repeats);
            if (score_cmd->parsed()) return cmd_bench_score(cfg, score_mcq, score_decisions);
        }
        std::cerr << "error: no command given (try plan, ask, bench, or --serve)\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::usage ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
