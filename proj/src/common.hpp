#pragma once

// Shared utilities: error types, a pinned deterministic RNG, hashing.
// Everything downstream of a seed must be reproducible byte-for-byte,
// so no std::uniform_*_distribution (implementation-defined streams).

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ordrec {

// Invalid arguments to an API entry point (maps to exit code 1).
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input data, malformed files, broken invariants (exit code 2).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical divergence: non-finite losses or gradients (exit code 3).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Splitmix64 stream. Small state, full 64-bit output, identical on every
// platform. Good enough statistically for data generation and shuffling.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t x = state_ += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    // uniform in [0, n)
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    // uniform in [0, 1)
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi]
    std::int64_t next_range(std::int64_t lo, std::int64_t hi) {
        return lo + std::int64_t(next_below(std::uint64_t(hi - lo + 1)));
    }

    bool next_bernoulli(double p) { return next_double() < p; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = std::size_t(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Keyed hash of (seed, string key, two integers). Used for tie-breaking and
// user-level splits; the stream is part of the on-disk contract.
inline std::uint64_t keyed_hash(std::uint64_t seed, std::string_view key,
                                std::int64_t a, std::int64_t b) {
    std::uint64_t h = fnv1a64(&seed, sizeof seed);
    h = fnv1a64(key.data(), key.size(), h);
    h = fnv1a64(&a, sizeof a, h);
    h = fnv1a64(&b, sizeof b, h);
    return splitmix64(h);
}

}  // namespace ordrec
