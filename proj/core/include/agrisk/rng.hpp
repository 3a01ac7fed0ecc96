#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace agrisk {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a digest; stable across platforms and runs.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

/// Child seed for a (tag, index) pair under a parent seed. Every random stream
/// in the library is derived this way so results never depend on thread
/// scheduling or on how many streams were created before.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag, std::uint64_t index = 0) noexcept;

/// Engine seeded from derive_seed(parent, tag, index).
Rng make_rng(std::uint64_t parent, std::string_view tag, std::uint64_t index = 0);

}  // namespace agrisk
