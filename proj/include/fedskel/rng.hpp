#pragma once

// Keyed RNG streams. Every random decision in the simulator draws from a
// stream keyed by (seed, purpose, identifiers...), never from a shared
// sequential generator, so results are independent of thread scheduling.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace fedskel {

enum class RngStream : std::uint64_t {
    ParamInit = 1,
    ClientSample = 2,
    BatchShuffle = 3,
    Synthetic = 4,
    ShardDeal = 5,
    Holdout = 6,
    BenchMask = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::mt19937_64 keyed_rng(std::uint64_t seed, RngStream stream,
                                 std::initializer_list<std::uint64_t> keys = {}) {
    std::uint64_t h = splitmix64(seed ^ 0xa5a5a5a5a5a5a5a5ULL);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    for (std::uint64_t k : keys) h = splitmix64(h ^ k);
    return std::mt19937_64(h);
}

// Fisher-Yates with an explicit index draw. std::shuffle's behaviour depends
// on the standard library's uniform_int_distribution, which is not pinned by
// the standard; protocol-level ordering must not change across toolchains.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = 0; i + 1 < items.size(); ++i) {
        const std::size_t j = i + std::size_t(rng() % (items.size() - i));
        std::swap(items[i], items[j]);
    }
}

// First k elements of a deterministic shuffle: uniform without replacement.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t k,
                                          std::mt19937_64& rng) {
    if (k > pool.size()) k = pool.size();
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + std::size_t(rng() % (pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

}  // namespace fedskel
