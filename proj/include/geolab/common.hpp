#pragma once

#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace geolab {

using cplx = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

// Error taxonomy used across the library. Every throwing site names one of
// these so callers (and the CLI) can map failures to machine-readable codes.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};
struct DomainError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct NotMixing : Error { using Error::Error; };
struct ConvergenceError : Error { using Error::Error; };
struct DegenerateGap : Error { using Error::Error; };
struct InadmissibleWord : Error { using Error::Error; };
struct WindowTooShort : Error { using Error::Error; };
struct ArithmeticHeight : Error { using Error::Error; };
struct MemoryCap : Error { using Error::Error; };
struct BudgetExceeded : Error { using Error::Error; };
struct BracketFailure : Error { using Error::Error; };
struct NotHyperbolic : Error { using Error::Error; };
struct NumericDrift : Error { using Error::Error; };
struct NonTermination : Error { using Error::Error; };
struct InsufficientData : Error { using Error::Error; };
struct TooFewSamples : Error { using Error::Error; };
struct DegenerateInput : Error { using Error::Error; };
struct PrerequisiteFailed : Error { using Error::Error; };

inline double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0) a += kTwoPi;
    return a;
}

// Smallest representation of the unsigned angle between two directions,
// folded into [0, pi].
inline double angle_between(double a, double b) {
    double d = std::fabs(wrap_angle(a) - wrap_angle(b));
    if (d > kPi) d = kTwoPi - d;
    return d;
}

inline double sqr(double x) { return x * x; }

// Deterministic parallel map: work item i goes to worker i % nworkers and
// results land in caller-indexed slots, so aggregation does not depend on
// the worker count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    unsigned w = std::min<unsigned>(workers, std::thread::hardware_concurrency() > 0
                                                 ? std::thread::hardware_concurrency()
                                                 : 4);
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (unsigned t = 0; t < w; ++t) {
        pool.emplace_back([t, w, n, &fn] {
            for (std::size_t i = t; i < n; i += w) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace geolab
