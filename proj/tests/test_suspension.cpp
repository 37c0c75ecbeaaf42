#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "geolab/suspension.hpp"

using namespace geolab;

namespace {

ShiftSpace full2() { return build_shift(2, {1, 1, 1, 1}); }

GibbsChain uniform2() { return gibbs_from_potential(full2(), constant_fn(2, 0.0)); }

const double kGamma = (std::sqrt(5.0) - 1.0) / 2.0;  // irrational increment

HeightFunction certified_height() {
    return certify_height(full2(), two_valued_height(kGamma));
}

}  // namespace

TEST_CASE("birkhoff sums: constant height and the cocycle identity") {
    auto chain = uniform2();
    auto one = constant_fn(2, 1.0);
    auto x = sample_path(chain, 4, 0);
    REQUIRE(birkhoff_sum(x, one, 7) == Catch::Approx(7.0));

    auto F = two_valued_height(0.37).F;
    for (long n : {3L, 10L}) {
        for (long m : {2L, 8L}) {
            double total = birkhoff_sum(x, F, n + m);
            double head = birkhoff_sum(x, F, n);
            double tail = 0;
            for (long j = n; j < n + m; ++j) tail += x.eval(F, j);
            REQUIRE(total == Catch::Approx(head + tail).margin(1e-12));
        }
    }
}

TEST_CASE("birkhoff average converges to the exact expectation") {
    auto chain = gibbs_from_potential(full2(), make_potential(2, 0, {0.0, std::log(2.0)}));
    auto F = two_valued_height(0.5).F;
    double ef = chain.expectation(F);
    REQUIRE(ef == Catch::Approx(1.0 + 0.5 * 2.0 / 3.0).margin(1e-12));
    const long n = 100000;
    auto x = sample_path(chain, 21, 9);
    double avg = birkhoff_sum(x, F, n) / double(n);
    REQUIRE(std::fabs(avg - ef) <= 3.0 * 0.25 / std::sqrt(double(n)));
}

TEST_CASE("first passage with unit height") {
    auto chain = uniform2();
    auto one = constant_fn(2, 1.0);
    auto x = sample_path(chain, 5, 1);
    auto fp = first_passage(x, one, 5.5);
    REQUIRE(fp.tau == 6);
    REQUIRE(fp.overshoot == Catch::Approx(0.5).margin(1e-12));

    auto fp0 = first_passage(x, one, 0.3);  // T < min F
    REQUIRE(fp0.tau == 1);
}

TEST_CASE("first passage postcondition replay") {
    auto chain = uniform2();
    auto F = certified_height().F;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        BiSequence x(&chain, 77, i);
        double T = 5.0 + 20.0 * CounterRng(3, i).uniform();
        auto fp = first_passage(x, F, T);
        double s_tau = 0, s_tau_m1 = 0;
        for (long j = 1; j <= fp.tau; ++j) {
            s_tau += x.eval(F, j);
            if (j < fp.tau) s_tau_m1 = s_tau;
        }
        REQUIRE(s_tau_m1 <= T);
        REQUIRE(s_tau > T);
        REQUIRE(fp.overshoot == Catch::Approx(s_tau - T).margin(1e-12));
        REQUIRE(fp.overshoot >= 0.0);
        REQUIRE(fp.overshoot < 1.0 + kGamma);
    }
}

TEST_CASE("arithmetic test flags integer heights with lattice 1") {
    auto cert = arithmetic_test(full2(), constant_fn(2, 1.0), 6);
    REQUIRE_FALSE(cert.nonarithmetic);
    REQUIRE(cert.lattice == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("arithmetic test finds the hidden 0.1 lattice of a rational increment") {
    // 1 + 0.3 [x0 = 1]: every orbit sum lies in 0.1 Z, so this height is
    // arithmetic even though no single orbit shows it directly.
    auto cert = arithmetic_test(full2(), two_valued_height(0.3).F, 8);
    REQUIRE_FALSE(cert.nonarithmetic);
    REQUIRE(cert.lattice == Catch::Approx(0.1).margin(1e-7));
}

TEST_CASE("arithmetic test passes an irrational increment") {
    auto cert = arithmetic_test(full2(), two_valued_height(kGamma).F, 8);
    REQUIRE(cert.nonarithmetic);
}

TEST_CASE("arithmetic verdict is scale invariant") {
    auto F = two_valued_height(0.3).F;
    auto c1 = arithmetic_test(full2(), F, 7);
    auto c2 = arithmetic_test(full2(), scale(F, 2.0), 7);
    REQUIRE(c1.nonarithmetic == c2.nonarithmetic);
    REQUIRE(c2.lattice == Catch::Approx(2.0 * c1.lattice).margin(1e-7));

    auto g1 = arithmetic_test(full2(), two_valued_height(kGamma).F, 7);
    auto g2 = arithmetic_test(full2(), scale(two_valued_height(kGamma).F, 2.0), 7);
    REQUIRE(g1.nonarithmetic);
    REQUIRE(g2.nonarithmetic);
}

TEST_CASE("overshoot limit law: step density, unit mass") {
    auto chain = uniform2();
    auto F = two_valued_height(kGamma).F;
    auto law = overshoot_limit_law(chain, F);
    REQUIRE(law.total_mass() == Catch::Approx(1.0).margin(1e-12));
    double ef = 1.0 + kGamma / 2.0;
    REQUIRE(law.mean_height == Catch::Approx(ef).margin(1e-12));
    // density: mu{F > t} = 1 on [0,1), 1/2 on [1, 1+gamma)
    REQUIRE(law.density(0.5) == Catch::Approx(1.0 / ef).margin(1e-12));
    REQUIRE(law.density(1.2) == Catch::Approx(0.5 / ef).margin(1e-12));
    REQUIRE(law.density(1.0 + kGamma + 0.01) == 0.0);
}

TEST_CASE("overshoot experiment matches the exact renewal limit") {
    auto chain = uniform2();
    auto h = certified_height();
    auto rep = overshoot_experiment(chain, h, 500.0, 4000, 2024, 4);
    REQUIRE(rep.law_total_mass == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(rep.ks.statistic < 0.05);
    REQUIRE(std::fabs(rep.indep_correlation) < 4.0 / std::sqrt(4000.0));
    for (double r : rep.overshoots) {
        REQUIRE(r >= 0.0);
        REQUIRE(r < h.max_value);
    }
}

TEST_CASE("overshoot experiment refuses arithmetic heights") {
    auto chain = uniform2();
    auto h = certify_height(full2(), two_valued_height(0.3));
    REQUIRE_THROWS_AS(overshoot_experiment(chain, h, 100.0, 100, 1, 1), ArithmeticHeight);
}

TEST_CASE("clt experiment: gaussian tau fluctuations and degenerate direction") {
    auto chain = uniform2();
    auto h = certified_height();

    SECTION("tau_tilde is asymptotically gaussian and centered") {
        auto g = make_potential(2, 0, {0.0, 1.0});
        auto rep = clt_experiment(chain, h, g, {800.0}, 3000, 31, 4);
        REQUIRE(rep.slices[0].ks_tau.statistic < 0.05);
        double m = mean(rep.slices[0].tau_tilde);
        double se = stderr_of_mean(rep.slices[0].tau_tilde);
        REQUIRE(std::fabs(m) <= 3.0 * se + 1e-9);
        REQUIRE(rep.slices[0].ks_g.statistic < 0.05);
    }

    SECTION("g = F collapses: normalized variance shrinks with T") {
        auto rep = clt_experiment(chain, h, h.F, {400.0, 1600.0}, 2000, 32, 4);
        // S_tau F - T = R_T, so the normalized statistic is R_T/sqrt(T)
        REQUIRE(rep.slices[1].var_g < rep.slices[0].var_g / 2.0);
    }

    SECTION("diffusive scale stability for tau_tilde") {
        auto g = make_potential(2, 0, {0.0, 1.0});
        auto rep = clt_experiment(chain, h, g, {500.0, 2000.0}, 3000, 33, 4);
        double v1 = variance(rep.slices[0].tau_tilde);
        double v2 = variance(rep.slices[1].tau_tilde);
        REQUIRE(v2 / v1 < 1.5);
        REQUIRE(v1 / v2 < 1.5);
    }
}
