// Deterministic random streams. Everything here is defined in terms of
// std::mt19937_64 output, which the standard fixes bit for bit, so draws are
// reproducible across standard libraries (unlike std::shuffle or the
// std::*_distribution families).
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace ctxinfo {

using Rng = std::mt19937_64;

std::uint64_t stable_hash(std::string_view text);

// splitmix64 finalizer, used to combine seed components.
std::uint64_t mix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                          std::uint64_t b);

// Per-window substream: (experiment seed, document id, window offset).
Rng window_stream(std::uint64_t seed, std::string_view doc_id,
                  std::uint64_t offset);

// Uniform integer in [0, bound) by rejection; bound must be > 0.
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound);

// Uniform double in [0, 1) with 53 random bits.
double uniform_unit(Rng& rng);

template <typename T>
void fisher_yates(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(uniform_below(rng, i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace ctxinfo
