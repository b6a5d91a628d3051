#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace llps::rng {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Decorrelates seeds derived from (seed, stream ids); adjacent inputs map to
// unrelated engine states.
inline std::uint64_t mix(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                         std::uint64_t c = 0) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ splitmix64(a ^ 0x100000001b3ULL));
    h = splitmix64(h ^ splitmix64(b ^ 0xcbf29ce484222325ULL));
    h = splitmix64(h ^ splitmix64(c ^ 0x9ae16a3b2f90404fULL));
    return h;
}

inline Engine make_engine(std::uint64_t seed) { return Engine(splitmix64(seed)); }

// [0, 1)
inline double uniform01(Engine& e) { return static_cast<double>(e() >> 11) * 0x1.0p-53; }

// (0, 1), both endpoints excluded
inline double open_uniform01(Engine& e) {
    return (static_cast<double>(e() >> 11) + 0.5) * 0x1.0p-53;
}

// The distribution transforms below are hand-rolled so streams are
// bit-identical across standard library implementations.

inline double normal(Engine& e) {
    double u1 = 1.0 - uniform01(e);  // (0, 1]
    double u2 = uniform01(e);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double logistic(Engine& e) {
    double u = open_uniform01(e);
    return std::log(u / (1.0 - u));
}

inline double exponential(Engine& e) { return -std::log(1.0 - uniform01(e)); }

inline double cauchy(Engine& e) {
    double u = open_uniform01(e);
    return std::tan(std::numbers::pi * (u - 0.5));
}

// Draw in [0, n). Modulo bias is ~n/2^64, irrelevant at the sizes used here.
inline std::uint64_t bounded(Engine& e, std::uint64_t n) { return e() % n; }

template <typename T>
void shuffle(std::vector<T>& v, Engine& e) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(bounded(e, i));
        std::swap(v[i - 1], v[j]);
    }
}

inline std::vector<std::size_t> permutation(std::size_t n, Engine& e) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    shuffle(p, e);
    return p;
}

}  // namespace llps::rng
