#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

namespace bms::test {

inline std::filesystem::path repo_root() {
    if (const char* env = std::getenv("BMS_REPO_ROOT")) return env;
    return std::filesystem::current_path();
}

inline std::filesystem::path fixture(const std::string& rel) {
    return repo_root() / "tests" / "fixtures" / rel;
}

inline std::filesystem::path prompts_dir() {
    return repo_root() / "configs" / "prompts";
}

// Scratch directory unique per test binary run.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("bms-test-" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

} // namespace bms::test
