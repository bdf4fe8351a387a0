#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace bd {

// Compensated (double-double) accumulator. Used where a long recursion of
// small increments must keep relative accuracy below ~1e-15 even when the
// running value grows to O(1000), e.g. log Q-tilde accumulation.
struct DoubleDouble {
    double hi = 0.0;
    double lo = 0.0;

    void add(double x) {
        // Knuth two-sum
        double s = hi + x;
        double bb = s - hi;
        double err = (hi - (s - bb)) + (x - bb);
        hi = s;
        lo += err;
        // renormalize
        double t = hi + lo;
        lo = lo - (t - hi);
        hi = t;
    }

    [[nodiscard]] double value() const noexcept { return hi + lo; }
};

// SplitMix64: cheap, well-mixed stream derivation so that per-sample RNGs are
// independent of thread scheduling and loop order.
inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97f4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64{splitmix64(seed ^ splitmix64(index))};
}

// FNV-1a over a byte string; used for content-addressed config hashes.
inline std::uint64_t fnv1a64(const std::string& bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

// Static-partition parallel loop. Results must be written to per-index slots
// so the outcome is independent of the thread count.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const int nt = std::min<int>(threads, static_cast<int>(n));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) {
        pool.emplace_back([&, t]() {
            for (std::size_t i = static_cast<std::size_t>(t); i < n; i += static_cast<std::size_t>(nt)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

inline double sup_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace bd
