#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace bms {

// FNV-1a, 64-bit. Stable across platforms; used for cache keys, transcript keys,
// and deterministic identifiers.
std::uint64_t fnv1a64(std::string_view data);

std::string to_hex(std::uint64_t v);

// splitmix64 step; deterministic stream generator for the mock embedder.
std::uint64_t splitmix64(std::uint64_t& state);

// Uniform double in [0, 1) from a 64-bit word.
double u64_to_unit_double(std::uint64_t v);

} // namespace bms
