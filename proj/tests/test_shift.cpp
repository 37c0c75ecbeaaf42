#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "geolab/shift.hpp"

using namespace geolab;

namespace {

ShiftSpace full2() { return build_shift(2, {1, 1, 1, 1}); }
ShiftSpace golden() { return build_shift(2, {1, 1, 1, 0}); }

// Bernoulli(1/3, 2/3) chain: f(0) = 0, f(1) = log 2.
GibbsChain bernoulli23(int block = 0) {
    return gibbs_from_potential(full2(), make_potential(2, 0, {0.0, std::log(2.0)}), block);
}

}  // namespace

TEST_CASE("build_shift mixing exponents") {
    REQUIRE(full2().m_mix == 1);
    REQUIRE(golden().m_mix == 2);
}

TEST_CASE("build_shift rejects the period-2 permutation") {
    REQUIRE_THROWS_AS(build_shift(2, {0, 1, 1, 0}), NotMixing);
}

TEST_CASE("build_shift rejects empty rows") {
    REQUIRE_THROWS_AS(build_shift(2, {1, 1, 0, 0}), ConfigError);
}

TEST_CASE("pressure of the full shift with zero potential is log 2") {
    auto chain = gibbs_from_potential(full2(), constant_fn(2, 0.0));
    REQUIRE(chain.pressure == Catch::Approx(std::log(2.0)).margin(1e-12));
    // uniform Bernoulli
    REQUIRE(chain.cylinder_measure({0}) == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(chain.cylinder_measure({1, 0, 1}) == Catch::Approx(0.125).margin(1e-12));
}

TEST_CASE("one-step potential gives pressure log 3 and p(1) = 2/3") {
    auto chain = bernoulli23();
    REQUIRE(chain.pressure == Catch::Approx(std::log(3.0)).margin(1e-12));
    REQUIRE(chain.cylinder_measure({1}) == Catch::Approx(2.0 / 3.0).margin(1e-12));
    REQUIRE(chain.cylinder_measure({1, 1, 0}) ==
            Catch::Approx((2.0 / 3.0) * (2.0 / 3.0) * (1.0 / 3.0)).margin(1e-12));
}

TEST_CASE("golden-mean pressure is the log golden ratio") {
    auto chain = gibbs_from_potential(golden(), constant_fn(2, 0.0));
    REQUIRE(chain.pressure == Catch::Approx(std::log((1.0 + std::sqrt(5.0)) / 2.0)).margin(1e-10));
}

TEST_CASE("cylinder measures partition at every length") {
    auto chain = gibbs_from_potential(golden(), make_potential(2, 1, {0.2, -0.1, 0.4, 0.0}));
    for (int n = 1; n <= 8; ++n) {
        double total = 0;
        chain.enumerate_cylinders(n, [&](const std::vector<int>&, double pr) { total += pr; });
        REQUIRE(total == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("cylinder measure rejects inadmissible words") {
    auto chain = gibbs_from_potential(golden(), constant_fn(2, 0.0));
    REQUIRE_THROWS_AS(chain.cylinder_measure({1, 1}), InadmissibleWord);
}

TEST_CASE("shift invariance: enumerate agrees with chain-walk measure") {
    auto chain = gibbs_from_potential(golden(), make_potential(2, 2, {0.3, -0.2, 0.1, 0.0, 0.25, -0.15, 0.0, 0.0}));
    // cylinder_measure computed from the stationary chain must equal the
    // value found by summing refinements one step later.
    std::vector<int> w = {0, 1, 0};
    double direct = chain.cylinder_measure(w);
    double refined = 0;
    for (int c = 0; c < 2; ++c) {
        std::vector<int> ext = {c, 0, 1, 0};
        bool ok = true;
        for (std::size_t i = 0; i + 1 < ext.size(); ++i)
            if (!chain.shift.allowed(ext[i], ext[i + 1])) ok = false;
        if (ok) refined += chain.cylinder_measure(ext);
    }
    REQUIRE(direct == Catch::Approx(refined).margin(1e-14));
}

TEST_CASE("eigen residuals of the transfer matrix") {
    auto chain = gibbs_from_potential(golden(), make_potential(2, 1, {0.5, -0.3, 0.2, 0.0}));
    // Rebuild W and check L h = lambda h and nu L = lambda nu.
    int n = chain.n_states();
    std::vector<double> Lh(std::size_t(n), 0.0), nuL(std::size_t(n), 0.0);
    for (int s = 0; s < n; ++s) {
        auto w = chain.word_of_state(s);
        for (const auto& [t, pr] : chain.trans[std::size_t(s)]) {
            // recover weight from P: w = P * lambda * h(s) / h(t)
            double wgt = pr * chain.lambda * chain.h[std::size_t(s)] / chain.h[std::size_t(t)];
            Lh[std::size_t(s)] += wgt * chain.h[std::size_t(t)];
            nuL[std::size_t(t)] += wgt * chain.nu[std::size_t(s)];
        }
    }
    for (int s = 0; s < n; ++s) {
        REQUIRE(std::fabs(Lh[std::size_t(s)] - chain.lambda * chain.h[std::size_t(s)]) <=
                1e-12 * chain.lambda);
        REQUIRE(std::fabs(nuL[std::size_t(s)] - chain.lambda * chain.nu[std::size_t(s)]) <=
                1e-12 * chain.lambda);
    }
}

TEST_CASE("rows of P are stochastic and p is stationary") {
    auto chain = gibbs_from_potential(golden(), make_potential(2, 1, {0.5, -0.3, 0.2, 0.0}));
    int n = chain.n_states();
    std::vector<double> pP(std::size_t(n), 0.0);
    for (int s = 0; s < n; ++s) {
        double rowsum = 0;
        for (const auto& [t, pr] : chain.trans[std::size_t(s)]) {
            rowsum += pr;
            pP[std::size_t(t)] += chain.p[std::size_t(s)] * pr;
        }
        REQUIRE(rowsum == Catch::Approx(1.0).margin(1e-12));
    }
    for (int s = 0; s < n; ++s)
        REQUIRE(pP[std::size_t(s)] == Catch::Approx(chain.p[std::size_t(s)]).margin(1e-10));
}

TEST_CASE("pressure convexity spot check") {
    auto shift = golden();
    CounterRng rng(11, 2);
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<double> t1(4), t2(4);
        for (auto& x : t1) x = rng.uniform(-1.0, 1.0);
        for (auto& x : t2) x = rng.uniform(-1.0, 1.0);
        auto p1 = make_potential(2, 1, t1);
        auto p2 = make_potential(2, 1, t2);
        std::vector<double> tm(4);
        for (int i = 0; i < 4; ++i) tm[std::size_t(i)] = 0.5 * (t1[std::size_t(i)] + t2[std::size_t(i)]);
        double lhs = pressure(shift, p1) + pressure(shift, p2);
        double rhs = 2.0 * pressure(shift, make_potential(2, 1, tm));
        REQUIRE(lhs >= rhs - 1e-9);
    }
}

TEST_CASE("coboundary neutrality: phi and phi + u - u o sigma share pressure and cylinders") {
    auto shift = golden();
    auto phi = make_potential(2, 1, {0.4, -0.2, 0.3, 0.0});
    auto u = make_potential(2, 0, {0.7, -0.4});
    auto cob = subtract(shift_window(u, 1), u);  // u o sigma - u
    auto psi = add(phi, scale(cob, -1.0));       // phi + u - u o sigma
    // psi has window lo 0 after combine? combine aligns windows automatically.
    REQUIRE(psi.lo == 0);
    auto c1 = gibbs_from_potential(shift, phi, 3);
    auto c2 = gibbs_from_potential(shift, psi, 3);
    REQUIRE(c1.pressure == Catch::Approx(c2.pressure).margin(1e-10));
    for (int L = 2; L <= 6; ++L) {
        c1.enumerate_cylinders(L, [&](const std::vector<int>& w, double pr) {
            REQUIRE(c2.cylinder_measure(w) == Catch::Approx(pr).margin(1e-9));
        });
    }
}

TEST_CASE("sampling is bit-reproducible and matches cylinder frequencies") {
    auto chain = bernoulli23();
    auto a = sample_path(chain, 99, 1);
    auto b = sample_path(chain, 99, 1);
    for (long j = -50; j <= 50; ++j) REQUIRE(a.at(j) == b.at(j));

    // Length-3 cylinder frequencies over a long stationary sample.
    auto s = sample_path(chain, 123, 7);
    const long n = 1000000;
    s.ensure(0, n + 2);
    std::map<std::vector<int>, long> counts;
    for (long j = 0; j < n; ++j) {
        std::vector<int> w = {s.at(j), s.at(j + 1), s.at(j + 2)};
        counts[w]++;
    }
    chain.enumerate_cylinders(3, [&](const std::vector<int>& w, double pr) {
        double freq = double(counts[w]) / double(n);
        double se = std::sqrt(pr * (1 - pr) / double(n));
        // serial correlation inflates the error a bit; 4 s.e. plus slack
        REQUIRE(std::fabs(freq - pr) <= 6 * se + 1e-6);
    });
}

TEST_CASE("stationarity: shifting the window leaves frequencies unchanged") {
    auto chain = gibbs_from_potential(golden(), make_potential(2, 1, {0.3, 0.0, -0.2, 0.0}));
    auto s = sample_path(chain, 5, 3);
    const long n = 200000;
    s.ensure(-1, n + 3);
    std::map<std::vector<int>, std::pair<long, long>> counts;
    for (long j = 0; j < n; ++j) {
        counts[{s.at(j), s.at(j + 1), s.at(j + 2)}].first++;
        counts[{s.at(j + 1), s.at(j + 2), s.at(j + 3)}].second++;
    }
    // chi-square over observed cells
    double chi2 = 0;
    int cells = 0;
    for (const auto& [w, c] : counts) {
        double e = 0.5 * double(c.first + c.second);
        if (e < 5) continue;
        chi2 += sqr(double(c.first) - e) / e + sqr(double(c.second) - e) / e;
        ++cells;
    }
    // dof ~ cells; the bound below corresponds to p > 0.001 comfortably
    REQUIRE(chi2 <= 3.0 * double(cells) + 20.0);
}

TEST_CASE("bilateral extension keeps pair admissibility") {
    auto chain = gibbs_from_potential(golden(), constant_fn(2, 0.0));
    auto s = sample_path(chain, 17, 0);
    s.ensure(-200, 200);
    for (long j = -200; j < 200; ++j) REQUIRE(chain.shift.allowed(s.at(j), s.at(j + 1)));
}

TEST_CASE("mixing_check basics") {
    auto chain = bernoulli23(2);
    auto f = make_potential(2, 0, {0.0, 1.0});

    SECTION("constant observable has zero covariances") {
        auto rep = mixing_check(chain, f, constant_fn(2, 3.0), 10);
        for (double c : rep.covariances) REQUIRE(std::fabs(c) < 1e-12);
    }

    SECTION("independence: one-symbol observables decorrelate at lag >= 1") {
        auto rep = mixing_check(chain, f, f, 10);
        REQUIRE(rep.covariances[0] == Catch::Approx((2.0 / 3.0) * (1.0 / 3.0)).margin(1e-12));
        for (std::size_t k = 1; k < rep.covariances.size(); ++k)
            REQUIRE(std::fabs(rep.covariances[k]) < 1e-12);
    }
}

TEST_CASE("mixing_check decay rate is bounded by the spectral gap") {
    auto chain = gibbs_from_potential(golden(), make_potential(2, 1, {0.6, -0.1, 0.2, 0.0}), 2);
    auto v = make_potential(2, 1, {1.0, 0.0, -0.5, 0.0});
    auto rep = mixing_check(chain, v, v, 25);
    REQUIRE(rep.fitted_rate <= chain.gap + 0.05);
}

TEST_CASE("repeat probability on the uniform full shift") {
    auto chain = gibbs_from_potential(full2(), constant_fn(2, 0.0));
    for (int m = 1; m <= 10; ++m) {
        int k = m + 1;  // k > m
        REQUIRE(repeat_probability(chain, k, m) ==
                Catch::Approx(std::pow(2.0, -(m + 1))).margin(1e-12));
    }
}

TEST_CASE("repeat probability by brute-force enumeration") {
    auto chain = gibbs_from_potential(golden(), make_potential(2, 1, {0.3, -0.1, 0.2, 0.0}));
    int k = 2;
    for (int m = 1; m <= 6; ++m) {
        // brute force: sum cylinder measures of all words of length m+k+1
        // satisfying the repeat constraint
        int L = m + k + 1;
        double brute = 0;
        chain.enumerate_cylinders(L, [&](const std::vector<int>& w, double pr) {
            for (int i = 0; i <= m; ++i)
                if (w[std::size_t(i)] != w[std::size_t(i + k)]) return;
            brute += pr;
        });
        REQUIRE(repeat_probability(chain, k, m) == Catch::Approx(brute).margin(1e-12));
    }
}

TEST_CASE("repeat probability is nonincreasing in m and decays geometrically") {
    auto chain = gibbs_from_potential(golden(), constant_fn(2, 0.0));
    double prev = 1.0;
    std::vector<double> logs;
    for (int m = 1; m <= 18; ++m) {
        double p = repeat_probability(chain, 1, m);
        REQUIRE(p <= prev + 1e-15);
        prev = p;
        if (m >= 10) logs.push_back(std::log(p));
    }
    // slope of log p vs m must be <= log beta < 0
    double slope = (logs.back() - logs.front()) / double(logs.size() - 1);
    REQUIRE(slope < -0.1);
}

TEST_CASE("periodic orbit enumeration counts primitive necklaces") {
    auto shift = full2();
    std::map<int, int> counts;
    for_each_periodic_orbit(shift, 6, [&](const std::vector<int>& w) { counts[int(w.size())]++; });
    // primitive binary necklaces: 2, 1, 2, 3, 6, 9 for n = 1..6
    REQUIRE(counts[1] == 2);
    REQUIRE(counts[2] == 1);
    REQUIRE(counts[3] == 2);
    REQUIRE(counts[4] == 3);
    REQUIRE(counts[5] == 6);
    REQUIRE(counts[6] == 9);
}

TEST_CASE("periodic orbits respect admissibility") {
    auto shift = golden();
    for_each_periodic_orbit(shift, 8, [&](const std::vector<int>& w) {
        for (std::size_t i = 0; i < w.size(); ++i)
            REQUIRE(shift.allowed(w[i], w[(i + 1) % w.size()]));
    });
}
