#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "bms/timeutil.hpp"
#include "bms/types.hpp"

namespace bms {

struct Credentials {
    std::string ncbi_api_key;
    std::string sciencedirect_api_key;
    std::string google_api_key;
    std::string google_cx;
    std::string brave_api_key;

    bool operator==(const Credentials&) const = default;
};

struct AppConfig {
    FilterConfig filter;
    std::filesystem::path prompt_dir = "configs/prompts";
    std::filesystem::path dimensions_file = "configs/dimensions.json";
    std::filesystem::path lexicons_file = "configs/lexicons.json";
    std::filesystem::path mock_corpus_file = "configs/mock_corpus.json";
    std::filesystem::path cache_dir; // empty disables the response cache
    std::filesystem::path out_dir = "out";
    bool live = false;
    int concurrency = 6;       // in-flight provider call cap
    int retry_budget = 2;      // generation-stage retries after the first attempt
    int http_max_retries = 2;  // live transport retries after the first attempt
    double requests_per_second = 3.0; // live throttle, 0 means unthrottled
    int max_subqueries = 8;
    int max_keywords = 8;
    int context_top_k = 5;
    std::uint64_t seed = 0;
    std::optional<Timestamp> fixed_time; // pins clocks for reproducible output
    bool enable_literature = true;
    bool enable_web = true;
    bool enable_protein = true;
    int bench_level = 1;
    int bench_count = 10;
    Credentials credentials;

    bool operator==(const AppConfig&) const = default;
};

// Command-line values. Every field is optional so precedence can be resolved
// per field: flag > environment variable > config file > built-in default.
struct ConfigOverrides {
    std::optional<std::filesystem::path> config_file;
    std::optional<double> theta;
    std::optional<double> tau;
    std::optional<int> top_k; // sets literature_top_k and web_top_k together
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::filesystem::path> cache_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> level;
    std::optional<int> count;
    std::optional<bool> live;
};

// Injectable environment so precedence is testable without mutating the
// process environment. Returns nullptr for unset names, like std::getenv.
using EnvLookup = std::function<const char*(const char*)>;

EnvLookup process_env();

// Recognized variables: BMS_CONFIG, BMS_THETA, BMS_TAU, BMS_TOP_K,
// BMS_OUT_DIR, BMS_CACHE_DIR, BMS_SEED, BMS_NCBI_API_KEY,
// BMS_SCIENCEDIRECT_API_KEY, BMS_GOOGLE_API_KEY, BMS_GOOGLE_CX,
// BMS_BRAVE_API_KEY. Unparseable numeric values raise a config error naming
// the variable. The result is already validated.
AppConfig load_config(const ConfigOverrides& overrides, const EnvLookup& env = process_env());

// Range checks plus existence of every referenced input path (the mock corpus
// only when live is off). Returns the config unchanged on success, raises
// ErrorKind::config naming the offending field otherwise.
AppConfig validate_app_config(AppConfig cfg);

} // namespace bms
