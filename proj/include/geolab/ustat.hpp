#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geolab/common.hpp"
#include "geolab/rng.hpp"
#include "geolab/shift.hpp"
#include "geolab/stats.hpp"
#include "geolab/suspension.hpp"

namespace geolab {

// ---------------------------------------------------------------------------
// Symmetric finite-memory kernels
// ---------------------------------------------------------------------------

// One piece h_m(x, y): symmetric, depends on the coordinates x_j, y_j with
// |j| <= m. Stored densely over pairs of window words.
struct KernelPiece {
    int m = 0;
    int q = 2;
    int wlen = 1;                // 2m + 1
    std::size_t n_words = 0;     // q^wlen
    std::vector<double> table;   // n_words^2, row = x word id
    double sup_abs = 0;

    double at(std::size_t xid, std::size_t yid) const { return table[xid * n_words + yid]; }
};

struct SymbolicKernel {
    int q = 2;
    std::vector<KernelPiece> pieces;

    int max_memory() const {
        int m = 0;
        for (const auto& p : pieces) m = std::max(m, p.m);
        return m;
    }
    double sup_bound() const {
        double c = 0;
        for (const auto& p : pieces) c += p.sup_abs;
        return c;
    }
};

// Builds a piece from an arbitrary pair function of window word ids,
// symmetrizing is the caller's job; symmetry is enforced here.
inline KernelPiece make_kernel_piece(int q, int m,
                                     const std::function<double(std::size_t, std::size_t)>& fn) {
    KernelPiece p;
    p.q = q;
    p.m = m;
    p.wlen = 2 * m + 1;
    std::size_t n = 1;
    for (int i = 0; i < p.wlen; ++i) {
        n *= std::size_t(q);
        if (n > 4096) throw MemoryCap("kernel piece window too large");
    }
    p.n_words = n;
    p.table.resize(n * n);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y) {
            double v = fn(x, y);
            p.table[x * n + y] = v;
            p.sup_abs = std::max(p.sup_abs, std::fabs(v));
        }
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < x; ++y)
            if (p.table[x * n + y] != p.table[y * n + x])
                throw ConfigError("kernel piece is not symmetric");
    return p;
}

namespace detail {
// Restriction map: id of the sub-window [lo, lo+len) inside a centered
// window of half-width m (word length 2m+1).
inline std::size_t restrict_id(std::size_t wid, int wlen, int q, int sub_off, int sub_len) {
    // decode, then re-encode the slice starting at sub_off
    std::size_t digits[32];
    for (int i = wlen - 1; i >= 0; --i) {
        digits[i] = wid % std::size_t(q);
        wid /= std::size_t(q);
    }
    std::size_t id = 0;
    for (int i = 0; i < sub_len; ++i) id = id * std::size_t(q) + digits[sub_off + i];
    return id;
}
}  // namespace detail

// h(x, y) = f(x) f(y) for a finite-window f.
inline SymbolicKernel product_kernel(const WindowFn& f) {
    int m = std::max(-f.lo, f.lo + f.len - 1);
    m = std::max(m, 0);
    int wlen = 2 * m + 1;
    int off = f.lo + m;  // f's window inside the centered window
    SymbolicKernel k;
    k.q = f.q;
    k.pieces.push_back(make_kernel_piece(f.q, m, [&](std::size_t x, std::size_t y) {
        double fx = f.table[detail::restrict_id(x, wlen, f.q, off, f.len)];
        double fy = f.table[detail::restrict_id(y, wlen, f.q, off, f.len)];
        return fx * fy;
    }));
    return k;
}

// h(x, y) = g(x) + g(y).
inline SymbolicKernel additive_kernel(const WindowFn& g) {
    int m = std::max(-g.lo, g.lo + g.len - 1);
    m = std::max(m, 0);
    int wlen = 2 * m + 1;
    int off = g.lo + m;
    SymbolicKernel k;
    k.q = g.q;
    k.pieces.push_back(make_kernel_piece(g.q, m, [&](std::size_t x, std::size_t y) {
        double gx = g.table[detail::restrict_id(x, wlen, g.q, off, g.len)];
        double gy = g.table[detail::restrict_id(y, wlen, g.q, off, g.len)];
        return gx + gy;
    }));
    return k;
}

inline SymbolicKernel constant_kernel(int q, double c) {
    SymbolicKernel k;
    k.q = q;
    k.pieces.push_back(make_kernel_piece(q, 0, [c](std::size_t, std::size_t) { return c; }));
    return k;
}

// ---------------------------------------------------------------------------
// Hoeffding projection and Hypothesis (H3)
// ---------------------------------------------------------------------------

// h_+(x) = sum_y h(x, y) mu(y-window), exact from cylinder measures. The
// result is a finite-window function on [-M, M].
inline WindowFn hoeffding_projection(const SymbolicKernel& k, const GibbsChain& chain) {
    int M = k.max_memory();
    int q = k.q;
    WindowFn out;
    out.q = q;
    out.lo = -M;
    out.len = 2 * M + 1;
    std::size_t total = 1;
    for (int i = 0; i < out.len; ++i) {
        total *= std::size_t(q);
        if (total > (1u << 22)) throw MemoryCap("hoeffding projection window too large");
    }
    out.table.assign(total, 0.0);
    for (const auto& piece : k.pieces) {
        // y-marginal of the piece: rowsum[xid] = sum_y h_m(x, y) mu(y)
        std::vector<double> ydist(piece.n_words, 0.0);
        chain.enumerate_cylinders(piece.wlen, [&](const std::vector<int>& w, double pr) {
            ydist[WindowFn::word_id(w.data(), piece.wlen, q)] += pr;
        });
        std::vector<double> rowsum(piece.n_words, 0.0);
        for (std::size_t x = 0; x < piece.n_words; ++x) {
            double acc = 0;
            for (std::size_t y = 0; y < piece.n_words; ++y) acc += piece.at(x, y) * ydist[y];
            rowsum[x] = acc;
        }
        int off = M - piece.m;  // piece window inside the full window
        for (std::size_t id = 0; id < total; ++id)
            out.table[id] += rowsum[detail::restrict_id(id, out.len, q, off, piece.wlen)];
    }
    return out;
}

struct H3Report {
    struct Row {
        int m = 0;
        int j = 0;
        double integral = 0;  // exact E_mu |h_m(x, sigma^j x)|
    };
    std::vector<Row> rows;
    double beta_hat = 0;  // fitted decay across declared memories
    bool pass = false;
};

// Exact diagonal integrals E |h_m(x, sigma^j x)| over a j-range, and a decay
// fit across the declared pieces.
inline H3Report verify_h3(const SymbolicKernel& k, const GibbsChain& chain, int j_abs_max = 0) {
    int M = k.max_memory();
    if (j_abs_max <= 0) j_abs_max = 2 * M + 10;
    H3Report rep;
    std::map<int, double> worst_by_m;
    for (const auto& piece : k.pieces) {
        for (int j = -j_abs_max; j <= j_abs_max; ++j) {
            // window spanning both argument windows
            int lo = std::min(-piece.m, j - piece.m);
            int hi = std::max(piece.m, j + piece.m);
            int L = hi - lo + 1;
            if (L > 40) throw MemoryCap("verify_h3: window too large");
            double integral = 0;
            int xoff = -piece.m - lo, yoff = j - piece.m - lo;
            chain.enumerate_cylinders(L, [&](const std::vector<int>& w, double pr) {
                std::size_t xid = WindowFn::word_id(w.data() + xoff, piece.wlen, k.q);
                std::size_t yid = WindowFn::word_id(w.data() + yoff, piece.wlen, k.q);
                integral += pr * std::fabs(piece.at(xid, yid));
            });
            rep.rows.push_back({piece.m, j, integral});
            auto it = worst_by_m.find(piece.m);
            if (it == worst_by_m.end() || integral > it->second) worst_by_m[piece.m] = integral;
        }
    }
    // log-linear fit of the per-memory maxima
    std::vector<double> xs, ys;
    for (const auto& [m, v] : worst_by_m) {
        if (v > 1e-300) {
            xs.push_back(double(m));
            ys.push_back(std::log(v));
        }
    }
    if (xs.size() < 2) {
        rep.pass = true;  // a single finite piece is summable by construction
        rep.beta_hat = 0;
        return rep;
    }
    double mx = mean_of(xs), my = mean_of(ys), sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += sqr(xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    double slope = sxy / sxx;
    rep.beta_hat = std::exp(slope);
    rep.pass = slope < 0;
    return rep;
}

// ---------------------------------------------------------------------------
// U-statistics
// ---------------------------------------------------------------------------

struct UStatSample {
    double U = 0;
    long tau = 0;
    double overshoot = 0;
};

namespace detail {
// U = sum_{i,j=1..tau} h(sigma^i x, sigma^j x) via window-word frequency
// counts: U = c^T H c per piece. Exact, O(tau + W^2).
template <typename SymbolAt>
double u_quadratic_form(const SymbolicKernel& k, long tau, SymbolAt&& sym) {
    double total = 0;
    for (const auto& piece : k.pieces) {
        std::vector<double> counts(piece.n_words, 0.0);
        // rolling word id over the window [i - m, i + m]
        std::size_t mod = piece.n_words / std::size_t(piece.q);
        std::size_t id = 0;
        for (long j = 1 - piece.m; j <= 1 + piece.m; ++j)
            id = id * std::size_t(piece.q) + std::size_t(sym(j));
        counts[id] += 1.0;
        for (long i = 2; i <= tau; ++i) {
            id = (id % mod) * std::size_t(piece.q) + std::size_t(sym(i + piece.m));
            counts[id] += 1.0;
        }
        for (std::size_t x = 0; x < piece.n_words; ++x) {
            if (counts[x] == 0.0) continue;
            double row = 0;
            const double* tr = piece.table.data() + x * piece.n_words;
            for (std::size_t y = 0; y < piece.n_words; ++y)
                if (counts[y] != 0.0) row += tr[y] * counts[y];
            total += counts[x] * row;
        }
    }
    return total;
}
}  // namespace detail

inline UStatSample u_statistic(BiSequence& x, const SymbolicKernel& k, const WindowFn& F,
                               double T) {
    auto fp = first_passage(x, F, T);
    int M = k.max_memory();
    x.ensure(1 - M, fp.tau + M);
    UStatSample s;
    s.tau = fp.tau;
    s.overshoot = fp.overshoot;
    s.U = detail::u_quadratic_form(k, fp.tau, [&x](long j) { return x.at(j); });
    return s;
}

inline UStatSample u_statistic_periodic(const std::vector<int>& word, const SymbolicKernel& k,
                                        const WindowFn& F, double T) {
    auto fp = first_passage_periodic(word, F, T);
    UStatSample s;
    s.tau = fp.tau;
    s.overshoot = fp.overshoot;
    long n = long(word.size());
    s.U = detail::u_quadratic_form(k, fp.tau, [&word, n](long j) {
        long r = j % n;
        if (r < 0) r += n;
        return word[std::size_t(r)];
    });
    return s;
}

// ---------------------------------------------------------------------------
// Livsic periodic-orbit cohomology tests
// ---------------------------------------------------------------------------

struct CohomologyVerdict {
    enum class Status { Cohomologous, NotCohomologous, Inconclusive };
    Status status = Status::Inconclusive;
    double a = 0;                         // f ~ a g (or a F + c 1 in the affine test)
    double c = 0;
    int max_period_checked = 0;
    std::vector<std::vector<int>> witnesses;  // violating orbits
    double worst_mismatch = 0;
};

// Tests whether f is cohomologous to a scalar multiple of g by comparing
// sums over all periodic orbits with period <= max_period. Refutation is
// sound; confirmation is heuristic "up to period max_period".
inline CohomologyVerdict livsic_test(const WindowFn& f, const WindowFn& g, const ShiftSpace& shift,
                                     int max_period) {
    CohomologyVerdict v;
    v.max_period_checked = max_period;
    std::vector<std::pair<std::vector<int>, std::pair<double, double>>> orbits;
    for_each_periodic_orbit(shift, max_period, [&](const std::vector<int>& w) {
        orbits.push_back({w, {orbit_sum(f, w), orbit_sum(g, w)}});
    });
    std::optional<double> a;
    for (const auto& [w, s] : orbits) {
        if (std::fabs(s.second) > 1e-12) {
            a = s.first / s.second;
            break;
        }
    }
    if (!a) {
        // g sums vanish on every orbit; f must too for a verdict
        bool all_zero = true;
        for (const auto& [w, s] : orbits)
            if (std::fabs(s.first) > 1e-12) all_zero = false;
        if (all_zero) {
            v.status = CohomologyVerdict::Status::Cohomologous;
            v.a = 0;
        }
        return v;
    }
    v.a = *a;
    bool ok = true;
    for (const auto& [w, s] : orbits) {
        double mismatch = std::fabs(s.first - v.a * s.second);
        if (mismatch > 1e-8 * double(w.size())) {
            ok = false;
            v.worst_mismatch = std::max(v.worst_mismatch, mismatch);
            if (v.witnesses.size() < 4) v.witnesses.push_back(w);
        }
    }
    v.status = ok ? CohomologyVerdict::Status::Cohomologous
                  : CohomologyVerdict::Status::NotCohomologous;
    return v;
}

// Affine variant: f ~ a F + c 1 over span{F, 1}.
inline CohomologyVerdict livsic_affine_test(const WindowFn& f, const WindowFn& F,
                                            const ShiftSpace& shift, int max_period) {
    CohomologyVerdict v;
    v.max_period_checked = max_period;
    struct Row {
        std::vector<int> w;
        double sf, sF, n;
    };
    std::vector<Row> rows;
    for_each_periodic_orbit(shift, max_period, [&](const std::vector<int>& w) {
        rows.push_back({w, orbit_sum(f, w), orbit_sum(F, w), double(w.size())});
    });
    // pick two orbits with independent (S_p F, p) rows
    std::optional<std::pair<std::size_t, std::size_t>> pick;
    for (std::size_t i = 0; i < rows.size() && !pick; ++i)
        for (std::size_t j = i + 1; j < rows.size() && !pick; ++j) {
            double det = rows[i].sF * rows[j].n - rows[j].sF * rows[i].n;
            if (std::fabs(det) > 1e-9) pick = {i, j};
        }
    if (!pick) return v;  // inconclusive: F is a multiple of 1 on all orbits
    const Row &r1 = rows[pick->first], &r2 = rows[pick->second];
    double det = r1.sF * r2.n - r2.sF * r1.n;
    v.a = (r1.sf * r2.n - r2.sf * r1.n) / det;
    v.c = (r1.sF * r2.sf - r2.sF * r1.sf) / det;
    bool ok = true;
    for (const auto& r : rows) {
        double mismatch = std::fabs(r.sf - v.a * r.sF - v.c * r.n);
        if (mismatch > 1e-8 * r.n) {
            ok = false;
            v.worst_mismatch = std::max(v.worst_mismatch, mismatch);
            if (v.witnesses.size() < 4) v.witnesses.push_back(r.w);
        }
    }
    v.status = ok ? CohomologyVerdict::Status::Cohomologous
                  : CohomologyVerdict::Status::NotCohomologous;
    return v;
}

// ---------------------------------------------------------------------------
// The fluctuation dichotomy
// ---------------------------------------------------------------------------

struct DichotomySlice {
    double T = 0;
    std::vector<double> u_raw;
    std::vector<double> normalized;
    double var_raw = 0;
    KsResult ks_gaussian;  // meaningful in case B
};

struct DichotomyReport {
    bool case_A = false;
    double a = 0;             // scalar when case A
    double mean_hplus = 0, mean_F = 0;
    RegressionResult slope;   // log Var(U_T) on log T
    std::vector<DichotomySlice> slices;
    H3Report h3;
};

inline DichotomyReport fluctuation_experiment(const SymbolicKernel& k, const GibbsChain& chain,
                                              const HeightFunction& height,
                                              const std::vector<double>& T_list, int n_samples,
                                              std::uint64_t seed, unsigned workers = 1,
                                              int livsic_period = 10) {
    if (!height.certificate || !height.certificate->nonarithmetic)
        throw PrerequisiteFailed("fluctuation_experiment: nonarithmetic certificate missing");
    DichotomyReport rep;
    rep.h3 = verify_h3(k, chain);
    if (!rep.h3.pass) throw PrerequisiteFailed("fluctuation_experiment: kernel fails (H3)");
    WindowFn hplus = hoeffding_projection(k, chain);
    rep.mean_hplus = chain.expectation(hplus);
    rep.mean_F = chain.expectation(height.F);
    auto verdict = livsic_test(hplus, height.F, chain.shift, livsic_period);
    rep.case_A = verdict.status == CohomologyVerdict::Status::Cohomologous;
    rep.a = verdict.a;

    for (std::size_t ti = 0; ti < T_list.size(); ++ti) {
        double T = T_list[ti];
        DichotomySlice slice;
        slice.T = T;
        slice.u_raw.assign(std::size_t(n_samples), 0.0);
        parallel_for(std::size_t(n_samples), workers, [&](std::size_t i) {
            BiSequence x(&chain, seed, (std::uint64_t(ti) << 40) | i);
            slice.u_raw[i] = u_statistic(x, k, height.F, T).U;
        });
        slice.var_raw = variance(slice.u_raw);
        slice.normalized.reserve(slice.u_raw.size());
        for (double u : slice.u_raw) {
            if (rep.case_A)
                slice.normalized.push_back((u - (rep.a / rep.mean_F) * T * T) / T);
            else
                slice.normalized.push_back(
                    (u - (rep.mean_hplus / sqr(rep.mean_F)) * T * T) / std::pow(T, 1.5));
        }
        if (!rep.case_A) slice.ks_gaussian = ks_test_fitted_gaussian(slice.normalized);
        rep.slices.push_back(std::move(slice));
    }
    std::vector<double> vars;
    for (const auto& s : rep.slices) vars.push_back(s.var_raw);
    rep.slope = scaling_regression(T_list, vars);
    return rep;
}

// ---------------------------------------------------------------------------
// theta and the periodic ensembles
// ---------------------------------------------------------------------------

// Unique root of Pr(-theta F) = 0; theta is the entropy of the suspension.
inline double solve_theta(const ShiftSpace& shift, const WindowFn& F) {
    for (double v : F.table)
        if (!(v > 0)) throw ConfigError("solve_theta: F must be strictly positive");
    auto pr = [&](double theta) { return pressure(shift, scale(F, -theta)); };
    double lo = 0.0;
    double p_lo = pr(lo);
    if (p_lo <= 0) throw BracketFailure("solve_theta: Pr(0) <= 0");
    double hi = 1.0;
    int guard = 0;
    while (pr(hi) > 0) {
        hi *= 2;
        if (++guard > 60) throw BracketFailure("solve_theta: no sign change");
    }
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double p = pr(mid);
        if (std::fabs(p) <= 1e-13) return mid;
        if (p > 0)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-15 * std::max(1.0, hi)) break;
    }
    double theta = 0.5 * (lo + hi);
    if (std::fabs(pr(theta)) > 1e-12) throw ConvergenceError("solve_theta: |Pr| > 1e-12 at root");
    return theta;
}

// B_{T,eps}: periodic sequences whose minimal period equals tau_T and whose
// overshoot lies in (0, eps]. Since eps < min F, these are exactly the
// primitive cycles of length n with S_n F in (T, T+eps]. Members are
// sequences (all rotations); we store one canonical necklace with its
// rotation multiplicity.
struct PeriodicEnsemble {
    double T = 0, eps = 0, theta = 0;
    struct Necklace {
        std::vector<int> word;
        double sum = 0;       // S_n F
        long multiplicity = 0;  // = period (primitive)
    };
    std::vector<Necklace> necklaces;
    long member_count = 0;
};

inline PeriodicEnsemble periodic_ensemble(const ShiftSpace& shift, const WindowFn& F, double T,
                                          double eps, long entry_cap = 2000000) {
    double min_f = *std::min_element(F.table.begin(), F.table.end());
    double max_f = *std::max_element(F.table.begin(), F.table.end());
    if (!(min_f > 0)) throw ConfigError("periodic_ensemble: F must be positive");
    if (!(eps < min_f)) throw ConfigError("periodic_ensemble: requires eps < min F");
    PeriodicEnsemble ens;
    ens.T = T;
    ens.eps = eps;
    ens.theta = solve_theta(shift, F);
    int n_max = int(std::floor((T + eps) / min_f)) + 1;
    // Enumerate primitive canonical cycles with partial-sum pruning. The sum
    // uses eval_periodic, which needs the whole word, so prune on the crude
    // per-symbol bounds and evaluate exactly at the leaves.
    for (int n = 1; n <= n_max; ++n) {
        if (double(n) * max_f <= T) continue;  // cannot reach (T, T+eps]
        std::vector<int> w(std::size_t(n), 0);
        std::function<void(int)> dfs = [&](int depth) {
            if (depth == n) {
                if (!shift.allowed(w[std::size_t(n - 1)], w[0])) return;
                for (int r = 1; r < n; ++r) {
                    for (int i = 0; i < n; ++i) {
                        int a = w[std::size_t((i + r) % n)], b = w[std::size_t(i)];
                        if (a != b) {
                            if (a < b) return;
                            break;
                        }
                    }
                }
                for (int d = 1; d < n; ++d) {
                    if (n % d != 0) continue;
                    bool per = true;
                    for (int i = 0; per && i < n; ++i)
                        if (w[std::size_t(i)] != w[std::size_t(i % d)]) per = false;
                    if (per) return;
                }
                double s = orbit_sum(F, w);
                if (s > T && s <= T + eps) {
                    ens.necklaces.push_back({w, s, long(n)});
                    ens.member_count += n;
                    if (ens.member_count > entry_cap)
                        throw BudgetExceeded("periodic_ensemble: entry cap exceeded");
                }
                return;
            }
            for (int c = 0; c < shift.q; ++c) {
                if (depth > 0 && !shift.allowed(w[std::size_t(depth - 1)], c)) continue;
                w[std::size_t(depth)] = c;
                dfs(depth + 1);
            }
        };
        dfs(0);
    }
    return ens;
}

// ---------------------------------------------------------------------------
// Periodic-ensemble vs Gibbs comparison (the max-entropy matching test)
// ---------------------------------------------------------------------------

struct StabilityRow {
    int m = 0;
    double q50 = 0, q90 = 0, worst = 0;  // |U' - U| / T over rerandomized tails
};

struct TwoSampleReport {
    std::vector<double> u_ensemble, u_gibbs;  // normalized statistics
    KsResult ks;
    bool case_A = false;
    double a = 0, mean_hplus = 0, mean_F = 0;
    std::vector<StabilityRow> stability;
};

// Draws the normalized U-statistic under nu_{T,eps} (uniform over member
// sequences) and under the Gibbs state mu_{-theta F}, compares by two-sample
// KS, and probes the tail-stability hypothesis by rerandomizing coordinates
// outside [-m, tau + m].
inline TwoSampleReport periodic_ustat_compare(const PeriodicEnsemble& ens,
                                              const SymbolicKernel& k,
                                              const GibbsChain& chain_max_entropy,
                                              const WindowFn& F, int n_draws, std::uint64_t seed,
                                              unsigned workers = 1) {
    if (ens.necklaces.empty()) throw ConfigError("periodic_ustat_compare: empty ensemble");
    auto h3 = verify_h3(k, chain_max_entropy);
    if (!h3.pass) throw PrerequisiteFailed("periodic_ustat_compare: kernel fails (H3)");
    TwoSampleReport rep;
    WindowFn hplus = hoeffding_projection(k, chain_max_entropy);
    rep.mean_hplus = chain_max_entropy.expectation(hplus);
    rep.mean_F = chain_max_entropy.expectation(F);
    auto verdict = livsic_test(hplus, F, chain_max_entropy.shift, 10);
    rep.case_A = verdict.status == CohomologyVerdict::Status::Cohomologous;
    rep.a = verdict.a;
    double T = ens.T;
    auto normalize = [&](double u) {
        if (rep.case_A) return (u - (rep.a / rep.mean_F) * T * T) / T;
        return (u - (rep.mean_hplus / sqr(rep.mean_F)) * T * T) / std::pow(T, 1.5);
    };

    // Per-necklace U values are rotation-invariant; cache them.
    std::vector<double> u_neck(ens.necklaces.size(), 0.0);
    parallel_for(ens.necklaces.size(), workers, [&](std::size_t i) {
        u_neck[i] = u_statistic_periodic(ens.necklaces[i].word, k, F, T).U;
    });
    // cumulative multiplicity for uniform-over-sequences draws
    std::vector<double> cum;
    cum.reserve(ens.necklaces.size());
    double total = 0;
    for (const auto& nk : ens.necklaces) {
        total += double(nk.multiplicity);
        cum.push_back(total);
    }
    rep.u_ensemble.resize(std::size_t(n_draws));
    CounterRng pick(seed, 0xabcdef);
    for (int i = 0; i < n_draws; ++i) {
        double u = pick.uniform() * total;
        std::size_t idx =
            std::size_t(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
        if (idx >= u_neck.size()) idx = u_neck.size() - 1;
        rep.u_ensemble[std::size_t(i)] = normalize(u_neck[idx]);
    }
    rep.u_gibbs.assign(std::size_t(n_draws), 0.0);
    parallel_for(std::size_t(n_draws), workers, [&](std::size_t i) {
        BiSequence x(&chain_max_entropy, seed, i + 1);
        rep.u_gibbs[i] = normalize(u_statistic(x, k, F, T).U);
    });
    rep.ks = ks_test2(rep.u_ensemble, rep.u_gibbs);

    // Stability probe: coordinates outside [-m, tau+m] rerandomized; the
    // deviation must die as m grows (it is exactly 0 once m >= kernel memory).
    int M = k.max_memory();
    CounterRng srng(seed, 0x57ab);
    for (int m = 0; m <= M; ++m) {
        std::vector<double> devs;
        for (std::size_t nidx = 0; nidx < ens.necklaces.size(); ++nidx) {
            const auto& nk = ens.necklaces[nidx];
            auto fp = first_passage_periodic(nk.word, F, T);
            long tau = fp.tau;
            long lo = 1 - M - 1, hi = tau + M + 1;
            std::vector<int> buf(std::size_t(hi - lo + 1), 0);
            auto set_from_word = [&](long j) {
                long r = j % long(nk.word.size());
                if (r < 0) r += long(nk.word.size());
                return nk.word[std::size_t(r)];
            };
            for (int trial = 0; trial < 4; ++trial) {
                for (long j = lo; j <= hi; ++j) {
                    bool inside = (j >= -m) && (j <= tau + m);
                    if (inside) {
                        buf[std::size_t(j - lo)] = set_from_word(j);
                    } else {
                        // admissible uniform rerandomization, left-to-right
                        buf[std::size_t(j - lo)] = -1;
                    }
                }
                for (long j = lo; j <= hi; ++j) {
                    if (buf[std::size_t(j - lo)] >= 0) continue;
                    std::vector<int> cand;
                    for (int ci = 0; ci < k.q; ++ci) {
                        bool ok = true;
                        if (j > lo && buf[std::size_t(j - 1 - lo)] >= 0 &&
                            !chain_max_entropy.shift.allowed(buf[std::size_t(j - 1 - lo)], ci))
                            ok = false;
                        if (j < hi && buf[std::size_t(j + 1 - lo)] >= 0 &&
                            !chain_max_entropy.shift.allowed(ci, buf[std::size_t(j + 1 - lo)]))
                            ok = false;
                        if (ok) cand.push_back(ci);
                    }
                    if (cand.empty()) { buf[std::size_t(j - lo)] = set_from_word(j); continue; }
                    buf[std::size_t(j - lo)] = cand[srng.below(cand.size())];
                }
                double u2 = detail::u_quadratic_form(k, tau, [&](long j) {
                    return buf[std::size_t(j - lo)];
                });
                devs.push_back(std::fabs(u2 - u_neck[nidx]) / T);
            }
        }
        StabilityRow row;
        row.m = m;
        row.q50 = quantile(devs, 0.5);
        row.q90 = quantile(devs, 0.9);
        row.worst = *std::max_element(devs.begin(), devs.end());
        rep.stability.push_back(row);
    }
    return rep;
}

}  // namespace geolab
