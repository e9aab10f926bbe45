#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace cmedl {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derives a seed for a named random stream from a base seed and counters
/// (epoch, sample index, ...). All randomness in the pipeline flows through
/// this so that every draw is a pure function of (seed, tag, counters).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::initializer_list<std::uint64_t> counters = {}) noexcept {
    std::uint64_t h = mix64(base ^ hash_tag(tag));
    for (auto c : counters) h = mix64(h ^ mix64(c + 0x632be59bd9b4e019ULL));
    return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t base, std::string_view tag,
                    std::initializer_list<std::uint64_t> counters = {}) {
    return Rng(derive_seed(base, tag, counters));
}

}  // namespace cmedl
