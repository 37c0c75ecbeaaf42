#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "geolab/common.hpp"
#include "geolab/rng.hpp"
#include "geolab/shift.hpp"
#include "geolab/stats.hpp"

namespace geolab {

// ---------------------------------------------------------------------------
// Height functions and the arithmetic-lattice falsifier
// ---------------------------------------------------------------------------

struct ArithmeticCertificate {
    bool nonarithmetic = false;  // PASS: no common lattice found at tolerance
    double lattice = 0;          // spacing when FAIL
    int max_period_checked = 0;
    double witness_a = 0, witness_b = 0;  // incommensurable orbit-sum differences on PASS
};

struct HeightFunction {
    WindowFn F;
    double min_value = 0, max_value = 0;
    std::optional<ArithmeticCertificate> certificate;
};

inline HeightFunction make_height(const WindowFn& F) {
    if (F.lo != 0) throw ConfigError("make_height: height must have lo = 0");
    HeightFunction h;
    h.F = F;
    h.min_value = *std::min_element(F.table.begin(), F.table.end());
    h.max_value = *std::max_element(F.table.begin(), F.table.end());
    if (!(h.min_value > 0)) throw ConfigError("make_height: height must be strictly positive");
    return h;
}

// Two-valued height 1 + gamma * [x_0 = 1] on a binary shift.
inline HeightFunction two_valued_height(double gamma) {
    return make_height(make_potential(2, 0, {1.0, 1.0 + gamma}));
}

namespace detail {
// Real gcd by Euclid with an absolute tolerance; returns 0 when the chain of
// remainders drops below the resolution floor (no lattice at tolerance).
inline double real_gcd(double a, double b, double tol, double floor_) {
    a = std::fabs(a);
    b = std::fabs(b);
    if (a < b) std::swap(a, b);
    while (b > floor_) {
        double r = std::fmod(a, b);
        if (r > b - tol) r = 0.0;  // b divides a within tolerance
        if (r < tol) r = 0.0;
        a = b;
        b = r;
    }
    return b > 0 ? b : a;
}
}  // namespace detail

// Collects periodic-orbit sums S_p F for periods <= max_period and scans the
// pairwise differences for a common lattice c Z. This is a falsifier: FAIL
// (arithmetic) is sound, PASS only says no lattice was found at tolerance.
inline ArithmeticCertificate arithmetic_test(const ShiftSpace& shift, const WindowFn& F,
                                             int max_period = 8, double tol = 1e-9) {
    if (max_period < 3) throw ConfigError("arithmetic_test: max_period >= 3");
    std::vector<double> sums;
    for_each_periodic_orbit(shift, max_period,
                            [&](const std::vector<int>& w) { sums.push_back(orbit_sum(F, w)); });
    std::sort(sums.begin(), sums.end());
    std::vector<double> diffs;
    for (std::size_t i = 0; i + 1 < sums.size(); ++i)
        for (std::size_t j = i + 1; j < sums.size(); ++j) {
            double d = sums[j] - sums[i];
            if (d > tol) diffs.push_back(d);
        }
    ArithmeticCertificate cert;
    cert.max_period_checked = max_period;
    if (diffs.empty()) {
        // all orbit sums equal: lattice spanned by the common sum
        cert.nonarithmetic = false;
        cert.lattice = sums.empty() ? 0.0 : sums.front();
        return cert;
    }
    const double floor_ = 1e-6;
    double g = diffs[0];
    double prev = g;
    for (std::size_t i = 1; i < diffs.size(); ++i) {
        double ng = detail::real_gcd(g, diffs[i], tol, floor_);
        if (ng < floor_) {
            cert.nonarithmetic = true;
            cert.witness_a = prev;
            cert.witness_b = diffs[i];
            return cert;
        }
        prev = diffs[i];
        g = ng;
    }
    // candidate lattice found; verify every difference sits on it
    for (double d : diffs) {
        double r = std::fmod(d, g);
        if (std::min(r, g - r) > 1e-7 * std::max(1.0, d)) {
            cert.nonarithmetic = true;
            cert.witness_a = g;
            cert.witness_b = d;
            return cert;
        }
    }
    cert.nonarithmetic = false;
    cert.lattice = g;
    return cert;
}

inline HeightFunction certify_height(const ShiftSpace& shift, HeightFunction h, int max_period = 8) {
    h.certificate = arithmetic_test(shift, h.F, max_period);
    return h;
}

// ---------------------------------------------------------------------------
// Birkhoff sums and first passage
// ---------------------------------------------------------------------------

inline double birkhoff_sum(BiSequence& x, const WindowFn& f, long n) {
    double s = 0;
    for (long j = 0; j < n; ++j) s += x.eval(f, j);
    return s;
}

struct FirstPassage {
    long tau = 0;
    double overshoot = 0;   // R_T = S_tau F - T in [0, max F)
    double sum = 0;         // S_tau F
};

// Least n >= 1 with S_n F > T. Evaluation starts at position 1, matching the
// double-sum indexing of the U-statistics downstream.
inline FirstPassage first_passage(BiSequence& x, const WindowFn& F, double T, long start = 1) {
    FirstPassage fp;
    double s = 0;
    long n = 0;
    while (true) {
        s += x.eval(F, start + n);
        ++n;
        if (s > T) break;
    }
    fp.tau = n;
    fp.sum = s;
    fp.overshoot = s - T;
    return fp;
}

// First passage on a periodic word (used by the periodic ensembles).
inline FirstPassage first_passage_periodic(const std::vector<int>& word, const WindowFn& F,
                                           double T, long start = 1) {
    FirstPassage fp;
    double s = 0;
    long n = 0;
    while (true) {
        s += eval_periodic(F, word, start + n);
        ++n;
        if (s > T) break;
    }
    fp.tau = n;
    fp.sum = s;
    fp.overshoot = s - T;
    return fp;
}

// ---------------------------------------------------------------------------
// The exact renewal limit law of the overshoot
// ---------------------------------------------------------------------------

// Limit density t -> mu{F > t} / E_mu F on [0, max F), computed exactly from
// cylinder measures of the height's window.
struct OvershootLaw {
    std::vector<double> knots;  // sorted distinct values of F, prefixed by 0
    std::vector<double> tails;  // mu{F > t} on [knots[i], knots[i+1])
    double mean_height = 0;

    double density(double t) const {
        if (t < 0 || t >= knots.back()) return 0.0;
        std::size_t i = std::size_t(std::upper_bound(knots.begin(), knots.end(), t) - knots.begin());
        return tails[i - 1] / mean_height;
    }

    double cdf(double r) const {
        if (r <= 0) return 0.0;
        double acc = 0;
        for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
            double a = knots[i], b = knots[i + 1];
            if (r <= a) break;
            acc += tails[i] * (std::min(r, b) - a);
        }
        return std::min(1.0, acc / mean_height);
    }

    double total_mass() const { return cdf(knots.back()); }
};

inline OvershootLaw overshoot_limit_law(const GibbsChain& chain, const WindowFn& F) {
    std::vector<std::pair<double, double>> mass;  // (value, mu-mass)
    chain.enumerate_cylinders(F.len, [&](const std::vector<int>& w, double pr) {
        mass.emplace_back(F.table[WindowFn::word_id(w.data(), F.len, F.q)], pr);
    });
    std::sort(mass.begin(), mass.end());
    OvershootLaw law;
    law.knots.push_back(0.0);
    double total = 1.0;
    double ef = 0;
    for (const auto& [v, pr] : mass) ef += v * pr;
    law.mean_height = ef;
    std::size_t i = 0;
    while (i < mass.size()) {
        double v = mass[i].first;
        double lump = 0;
        while (i < mass.size() && mass[i].first <= v + 1e-15) {
            lump += mass[i].second;
            ++i;
        }
        law.tails.push_back(total);  // mu{F > t} for t in [prev knot, v)
        law.knots.push_back(v);
        total -= lump;
    }
    return law;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct OvershootReport {
    std::vector<double> overshoots;
    KsResult ks;                 // empirical R_T vs the exact limit law
    double interval_bound = 0;   // sup over bins of P(a <= R <= a+eps)/eps
    double indep_correlation = 0;  // corr(R_T, centered first-symbol observable)
    double law_total_mass = 0;
};

inline OvershootReport overshoot_experiment(const GibbsChain& chain, const HeightFunction& height,
                                            double T, int n_samples, std::uint64_t seed,
                                            unsigned workers = 1) {
    if (!height.certificate || !height.certificate->nonarithmetic)
        throw ArithmeticHeight("overshoot_experiment requires a PASS nonarithmetic certificate");
    const WindowFn& F = height.F;
    OvershootReport rep;
    rep.overshoots.assign(std::size_t(n_samples), 0.0);
    std::vector<double> first_sym(std::size_t(n_samples), 0.0);
    parallel_for(std::size_t(n_samples), workers, [&](std::size_t i) {
        BiSequence x(&chain, seed, i);
        auto fp = first_passage(x, F, T);
        rep.overshoots[i] = fp.overshoot;
        first_sym[i] = double(x.at(0));
    });
    auto law = overshoot_limit_law(chain, F);
    rep.law_total_mass = law.total_mass();
    rep.ks = ks_test(rep.overshoots, [&law](double r) { return law.cdf(r); });
    // Interval bound: empirical P(a <= R <= a + eps) <= C eps over a grid.
    double eps = height.max_value / 20.0;
    double worst = 0;
    for (double a = 0; a < height.max_value; a += eps) {
        long c = 0;
        for (double r : rep.overshoots)
            if (r >= a && r <= a + eps) ++c;
        worst = std::max(worst, double(c) / double(n_samples) / eps);
    }
    rep.interval_bound = worst;
    // Asymptotic independence of R_T from the state at time 0.
    double mr = mean(rep.overshoots), ms = mean(first_sym);
    double num = 0, dr = 0, ds = 0;
    for (std::size_t i = 0; i < rep.overshoots.size(); ++i) {
        num += (rep.overshoots[i] - mr) * (first_sym[i] - ms);
        dr += sqr(rep.overshoots[i] - mr);
        ds += sqr(first_sym[i] - ms);
    }
    rep.indep_correlation = (dr > 0 && ds > 0) ? num / std::sqrt(dr * ds) : 0.0;
    return rep;
}

struct CltSlice {
    double T = 0;
    std::vector<double> tau_tilde;     // (tau - T/EF)/sqrt(T)
    std::vector<double> g_normalized;  // (S_tau g - T Eg/EF)/sqrt(T)
    KsResult ks_tau;                   // tau_tilde vs fitted gaussian
    KsResult ks_g;
    double var_g = 0;
};

struct CltReport {
    std::vector<CltSlice> slices;
    double mean_height = 0, mean_g = 0;
};

// Samples the first-passage CLT statistics at each T. The observable g is
// summed along the same trajectory up to tau.
inline CltReport clt_experiment(const GibbsChain& chain, const HeightFunction& height,
                                const WindowFn& g, const std::vector<double>& T_list,
                                int n_samples, std::uint64_t seed, unsigned workers = 1) {
    if (!height.certificate || !height.certificate->nonarithmetic)
        throw ArithmeticHeight("clt_experiment requires a PASS nonarithmetic certificate");
    const WindowFn& F = height.F;
    CltReport rep;
    rep.mean_height = chain.expectation(F);
    rep.mean_g = chain.expectation(g);
    for (std::size_t ti = 0; ti < T_list.size(); ++ti) {
        double T = T_list[ti];
        CltSlice slice;
        slice.T = T;
        slice.tau_tilde.assign(std::size_t(n_samples), 0.0);
        slice.g_normalized.assign(std::size_t(n_samples), 0.0);
        parallel_for(std::size_t(n_samples), workers, [&](std::size_t i) {
            BiSequence x(&chain, seed, (std::uint64_t(ti) << 40) | i);
            auto fp = first_passage(x, F, T);
            double sg = 0;
            for (long j = 1; j <= fp.tau; ++j) sg += x.eval(g, j);
            slice.tau_tilde[i] = (double(fp.tau) - T / rep.mean_height) / std::sqrt(T);
            slice.g_normalized[i] = (sg - T * rep.mean_g / rep.mean_height) / std::sqrt(T);
        });
        slice.ks_tau = ks_test_fitted_gaussian(slice.tau_tilde);
        slice.var_g = variance(slice.g_normalized);
        // The degenerate direction g = F + c collapses; a gaussian fit can
        // fail there, so guard it.
        if (slice.var_g > 1e-12) slice.ks_g = ks_test_fitted_gaussian(slice.g_normalized);
        rep.slices.push_back(std::move(slice));
    }
    return rep;
}

}  // namespace geolab
