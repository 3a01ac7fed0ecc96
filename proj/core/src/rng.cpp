#include "agrisk/rng.hpp"

namespace agrisk {

namespace {
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis) noexcept {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(parent ^ fnv1a(tag)) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

Rng make_rng(std::uint64_t parent, std::string_view tag, std::uint64_t index) {
  const std::uint64_t s = derive_seed(parent, tag, index);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
  return Rng(seq);
}

}  // namespace agrisk
