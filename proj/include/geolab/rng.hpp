#pragma once

#include <cstdint>
#include <cmath>

#include "geolab/common.hpp"

namespace geolab {

// Counter-based generator: draw i of stream s under seed k is
// mix(mix(k ^ mix(s)) + i * GOLDEN). No sequence state is shared between
// streams, so (seed, worker, draw-index) fully determines every variate and
// parallel runs reproduce bit-for-bit regardless of scheduling.
namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(detail::splitmix64(seed ^ detail::splitmix64(stream * 0x9e3779b97f4a7c15ULL + 1))),
          counter_(0) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~0ULL; }

    result_type operator()() {
        return detail::splitmix64(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL);
    }

    // Uniform on [0, 1). 53-bit mantissa, identical on every platform.
    double uniform() { return double((*this)() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        std::uint64_t limit = max() - max() % n;
        std::uint64_t v;
        do { v = (*this)(); } while (v >= limit);
        return v % n;
    }

    // Box-Muller; std::normal_distribution is implementation-defined and
    // would break the bit-reproducibility contract.
    double gaussian() {
        double u1;
        do { u1 = uniform(); } while (u1 <= 0.0);
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }

    std::uint64_t stream_key() const { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

// Documented splitting rule: stream = worker * 2^32 + draw-block.
inline CounterRng worker_rng(std::uint64_t seed, std::uint64_t worker, std::uint64_t block = 0) {
    return CounterRng(seed, (worker << 32) | (block & 0xffffffffULL));
}

}  // namespace geolab
