#include <catch2/catch_amalgamated.hpp>

#include "geolab/rng.hpp"
#include "geolab/stats.hpp"

using namespace geolab;

TEST_CASE("ks statistic of a sample against itself is zero") {
    CounterRng rng(1, 0);
    std::vector<double> a;
    for (int i = 0; i < 200; ++i) a.push_back(rng.uniform());
    auto r = ks_test2(a, a);
    REQUIRE(r.statistic == 0.0);
    REQUIRE(r.p_value == 1.0);
}

TEST_CASE("ks calibration: uniform pseudo-samples vs uniform cdf") {
    int good = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        CounterRng rng(seed, 3);
        std::vector<double> a;
        for (int i = 0; i < 10000; ++i) a.push_back(rng.uniform());
        auto r = ks_test(a, [](double x) { return std::min(1.0, std::max(0.0, x)); });
        if (r.p_value > 0.001) ++good;
    }
    REQUIRE(good >= 99);
}

TEST_CASE("ks power: shifted gaussian vs standard gaussian") {
    CounterRng rng(7, 1);
    std::vector<double> a;
    for (int i = 0; i < 1000; ++i) a.push_back(rng.gaussian() + 1.0);
    auto r = ks_test(a, [](double x) { return normal_cdf(x); });
    REQUIRE(r.statistic > 0.3);
}

TEST_CASE("ks rejects tiny samples") {
    std::vector<double> a(10, 0.5);
    REQUIRE_THROWS_AS(ks_test(a, [](double) { return 0.5; }), TooFewSamples);
}

TEST_CASE("scaling regression recovers exact power laws") {
    std::vector<double> t = {250, 500, 1000, 2000};
    std::vector<double> v2, v3;
    for (double x : t) {
        v2.push_back(0.7 * x * x);
        v3.push_back(0.01 * x * x * x);
    }
    REQUIRE(scaling_regression(t, v2).slope == Catch::Approx(2.0).margin(1e-9));
    REQUIRE(scaling_regression(t, v3).slope == Catch::Approx(3.0).margin(1e-9));
}

TEST_CASE("scaling regression CI covers a noisy exponent") {
    std::vector<double> t = {100, 200, 400, 800, 1600};
    int covered = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        CounterRng rng(seed, 11);
        std::vector<double> v;
        for (double x : t) v.push_back(std::pow(x, 2.5) * std::exp(0.05 * rng.gaussian()));
        auto r = scaling_regression(t, v);
        if (std::fabs(r.slope - 2.5) <= r.ci_halfwidth) ++covered;
    }
    REQUIRE(covered >= 90);
}

TEST_CASE("scaling regression input validation") {
    REQUIRE_THROWS_AS(scaling_regression({1, 2}, {1, 2}), DegenerateInput);
    REQUIRE_THROWS_AS(scaling_regression({1, 2, 3}, {1, -2, 3}), DegenerateInput);
}

TEST_CASE("counter rng is reproducible and stream-independent") {
    CounterRng a(42, 5), b(42, 5), c(42, 6);
    std::vector<double> xs, ys;
    for (int i = 0; i < 100; ++i) {
        xs.push_back(a.uniform());
        ys.push_back(b.uniform());
    }
    REQUIRE(xs == ys);
    bool differs = false;
    for (int i = 0; i < 100; ++i)
        if (c.uniform() != xs[std::size_t(i)]) differs = true;
    REQUIRE(differs);
}

TEST_CASE("quantiles of a known sample") {
    std::vector<double> v;
    for (int i = 0; i <= 100; ++i) v.push_back(double(i));
    REQUIRE(quantile(v, 0.5) == Catch::Approx(50.0));
    REQUIRE(quantile(v, 0.0) == Catch::Approx(0.0));
    REQUIRE(quantile(v, 1.0) == Catch::Approx(100.0));
}
