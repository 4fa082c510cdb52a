#include "bms/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "bms/error.hpp"

namespace bms {

namespace {

using nlohmann::json;

double parse_env_double(const char* name, const std::string& value) {
    try {
        size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        raise(ErrorKind::config, std::string(name) + " is not a number: " + value);
    }
}

int parse_env_int(const char* name, const std::string& value) {
    try {
        size_t pos = 0;
        int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        raise(ErrorKind::config, std::string(name) + " is not an integer: " + value);
    }
}

std::uint64_t parse_env_u64(const char* name, const std::string& value) {
    try {
        size_t pos = 0;
        unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        raise(ErrorKind::config, std::string(name) + " is not an unsigned integer: " + value);
    }
}

json read_config_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::config, "config file not readable: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    json j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) raise(ErrorKind::config, "config file is not JSON: " + path.string());
    if (!j.is_object()) raise(ErrorKind::config, "config file must hold a JSON object");
    return j;
}

template <typename T>
void take(const json& j, const char* field, T& out) {
    if (!j.contains(field)) return;
    try {
        j.at(field).get_to(out);
    } catch (const json::exception& e) {
        raise(ErrorKind::config, std::string("config file field ") + field + ": " + e.what());
    }
}

void take_path(const json& j, const char* field, std::filesystem::path& out) {
    std::string s;
    if (!j.contains(field)) return;
    take(j, field, s);
    out = s;
}

void apply_file(const json& j, AppConfig& cfg) {
    static const std::vector<std::string> known = {
        "filter",          "prompt_dir",      "dimensions_file", "lexicons_file",
        "mock_corpus_file", "cache_dir",      "out_dir",         "live",
        "concurrency",     "retry_budget",    "http_max_retries", "requests_per_second",
        "max_subqueries",  "max_keywords",    "context_top_k",   "seed",
        "fixed_time",      "enable_literature", "enable_web",    "enable_protein",
        "bench_level",     "bench_count",     "credentials",
    };
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end())
            raise(ErrorKind::config, "unknown config file field: " + key);
    }

    if (j.contains("filter")) {
        const json& f = j.at("filter");
        if (!f.is_object()) raise(ErrorKind::config, "config file field filter must be an object");
        static const std::vector<std::string> filter_known = {
            "coverage_threshold", "literature_top_k",        "per_source_max",
            "web_relevance_threshold", "web_top_k",          "fallback_keyword_count",
        };
        for (const auto& [key, value] : f.items()) {
            (void)value;
            if (std::find(filter_known.begin(), filter_known.end(), key) == filter_known.end())
                raise(ErrorKind::config, "unknown config file field: filter." + key);
        }
        take(f, "coverage_threshold", cfg.filter.coverage_threshold);
        take(f, "literature_top_k", cfg.filter.literature_top_k);
        take(f, "per_source_max", cfg.filter.per_source_max);
        take(f, "web_relevance_threshold", cfg.filter.web_relevance_threshold);
        take(f, "web_top_k", cfg.filter.web_top_k);
        take(f, "fallback_keyword_count", cfg.filter.fallback_keyword_count);
    }

    take_path(j, "prompt_dir", cfg.prompt_dir);
    take_path(j, "dimensions_file", cfg.dimensions_file);
    take_path(j, "lexicons_file", cfg.lexicons_file);
    take_path(j, "mock_corpus_file", cfg.mock_corpus_file);
    take_path(j, "cache_dir", cfg.cache_dir);
    take_path(j, "out_dir", cfg.out_dir);
    take(j, "live", cfg.live);
    take(j, "concurrency", cfg.concurrency);
    take(j, "retry_budget", cfg.retry_budget);
    take(j, "http_max_retries", cfg.http_max_retries);
    take(j, "requests_per_second", cfg.requests_per_second);
    take(j, "max_subqueries", cfg.max_subqueries);
    take(j, "max_keywords", cfg.max_keywords);
    take(j, "context_top_k", cfg.context_top_k);
    take(j, "seed", cfg.seed);
    if (j.contains("fixed_time")) {
        std::string stamp;
        take(j, "fixed_time", stamp);
        cfg.fixed_time = parse_rfc3339(stamp);
    }
    take(j, "enable_literature", cfg.enable_literature);
    take(j, "enable_web", cfg.enable_web);
    take(j, "enable_protein", cfg.enable_protein);
    take(j, "bench_level", cfg.bench_level);
    take(j, "bench_count", cfg.bench_count);

    if (j.contains("credentials")) {
        const json& c = j.at("credentials");
        if (!c.is_object())
            raise(ErrorKind::config, "config file field credentials must be an object");
        take(c, "ncbi_api_key", cfg.credentials.ncbi_api_key);
        take(c, "sciencedirect_api_key", cfg.credentials.sciencedirect_api_key);
        take(c, "google_api_key", cfg.credentials.google_api_key);
        take(c, "google_cx", cfg.credentials.google_cx);
        take(c, "brave_api_key", cfg.credentials.brave_api_key);
    }
}

void apply_env(const EnvLookup& env, AppConfig& cfg) {
    auto get = [&](const char* name) -> std::optional<std::string> {
        const char* v = env(name);
        if (v == nullptr) return std::nullopt;
        return std::string(v);
    };

    if (auto v = get("BMS_THETA")) cfg.filter.coverage_threshold = parse_env_double("BMS_THETA", *v);
    if (auto v = get("BMS_TAU"))
        cfg.filter.web_relevance_threshold = parse_env_double("BMS_TAU", *v);
    if (auto v = get("BMS_TOP_K")) {
        int k = parse_env_int("BMS_TOP_K", *v);
        cfg.filter.literature_top_k = k;
        cfg.filter.web_top_k = k;
    }
    if (auto v = get("BMS_OUT_DIR")) cfg.out_dir = *v;
    if (auto v = get("BMS_CACHE_DIR")) cfg.cache_dir = *v;
    if (auto v = get("BMS_SEED")) cfg.seed = parse_env_u64("BMS_SEED", *v);
    if (auto v = get("BMS_NCBI_API_KEY")) cfg.credentials.ncbi_api_key = *v;
    if (auto v = get("BMS_SCIENCEDIRECT_API_KEY")) cfg.credentials.sciencedirect_api_key = *v;
    if (auto v = get("BMS_GOOGLE_API_KEY")) cfg.credentials.google_api_key = *v;
    if (auto v = get("BMS_GOOGLE_CX")) cfg.credentials.google_cx = *v;
    if (auto v = get("BMS_BRAVE_API_KEY")) cfg.credentials.brave_api_key = *v;
}

void apply_overrides(const ConfigOverrides& o, AppConfig& cfg) {
    if (o.theta) cfg.filter.coverage_threshold = *o.theta;
    if (o.tau) cfg.filter.web_relevance_threshold = *o.tau;
    if (o.top_k) {
        cfg.filter.literature_top_k = *o.top_k;
        cfg.filter.web_top_k = *o.top_k;
    }
    if (o.out_dir) cfg.out_dir = *o.out_dir;
    if (o.cache_dir) cfg.cache_dir = *o.cache_dir;
    if (o.seed) cfg.seed = *o.seed;
    if (o.level) cfg.bench_level = *o.level;
    if (o.count) cfg.bench_count = *o.count;
    if (o.live) cfg.live = *o.live;
}

} // namespace

EnvLookup process_env() {
    return [](const char* name) { return std::getenv(name); };
}

AppConfig load_config(const ConfigOverrides& overrides, const EnvLookup& env) {
    AppConfig cfg;

    std::optional<std::filesystem::path> file = overrides.config_file;
    if (!file) {
        if (const char* v = env("BMS_CONFIG")) file = std::filesystem::path(v);
    }
    if (file) apply_file(read_config_json(*file), cfg);

    apply_env(env, cfg);
    apply_overrides(overrides, cfg);
    return validate_app_config(std::move(cfg));
}

AppConfig validate_app_config(AppConfig cfg) {
    cfg.filter = validate_config(cfg.filter);

    auto check_count = [](int v, const char* field) {
        if (v < 1) raise(ErrorKind::config, std::string(field) + " must be >= 1");
    };
    check_count(cfg.concurrency, "concurrency");
    check_count(cfg.max_subqueries, "max_subqueries");
    check_count(cfg.max_keywords, "max_keywords");
    check_count(cfg.context_top_k, "context_top_k");
    check_count(cfg.bench_count, "bench_count");
    if (cfg.retry_budget < 0) raise(ErrorKind::config, "retry_budget must be >= 0");
    if (cfg.http_max_retries < 0) raise(ErrorKind::config, "http_max_retries must be >= 0");
    if (!(cfg.requests_per_second >= 0.0) || !std::isfinite(cfg.requests_per_second))
        raise(ErrorKind::config, "requests_per_second must be a finite number >= 0");
    if (cfg.bench_level < 1 || cfg.bench_level > 3)
        raise(ErrorKind::config, "bench_level must be 1, 2, or 3");

    namespace fs = std::filesystem;
    if (!fs::is_directory(cfg.prompt_dir))
        raise(ErrorKind::config, "prompt directory not found: " + cfg.prompt_dir.string());
    if (!fs::is_regular_file(cfg.dimensions_file))
        raise(ErrorKind::config, "dimensions file not found: " + cfg.dimensions_file.string());
    if (!fs::is_regular_file(cfg.lexicons_file))
        raise(ErrorKind::config, "lexicons file not found: " + cfg.lexicons_file.string());
    if (!cfg.live && !fs::is_regular_file(cfg.mock_corpus_file))
        raise(ErrorKind::config, "mock corpus file not found: " + cfg.mock_corpus_file.string());
    return cfg;
}

} // namespace bms
