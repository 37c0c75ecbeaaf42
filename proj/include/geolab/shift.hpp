#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "geolab/common.hpp"
#include "geolab/rng.hpp"

namespace geolab {

// ---------------------------------------------------------------------------
// Shift of finite type
// ---------------------------------------------------------------------------

struct ShiftSpace {
    int q = 0;                   // alphabet size
    std::vector<std::uint8_t> A; // q x q transition matrix, row-major
    int m_mix = 0;               // least m with A^m strictly positive

    bool allowed(int a, int b) const { return A[std::size_t(a) * q + b] != 0; }
};

// Validates the matrix and certifies topological mixing by repeated squaring.
// Throws NotMixing with a witness entry if no power up to 2 q^2 is positive.
inline ShiftSpace build_shift(int q, std::vector<std::uint8_t> A) {
    if (q < 1 || A.size() != std::size_t(q) * q)
        throw ConfigError("build_shift: matrix must be q x q");
    for (int i = 0; i < q; ++i) {
        bool row = false, col = false;
        for (int j = 0; j < q; ++j) {
            row |= A[std::size_t(i) * q + j] != 0;
            col |= A[std::size_t(j) * q + i] != 0;
        }
        if (!row || !col) throw ConfigError("build_shift: all-zero row or column");
    }
    // Track which powers are strictly positive using boolean products.
    auto positive = [q](const std::vector<std::uint8_t>& M) {
        return std::all_of(M.begin(), M.end(), [](std::uint8_t x) { return x != 0; });
    };
    auto bmul = [q](const std::vector<std::uint8_t>& X, const std::vector<std::uint8_t>& Y) {
        std::vector<std::uint8_t> Z(std::size_t(q) * q, 0);
        for (int i = 0; i < q; ++i)
            for (int k = 0; k < q; ++k)
                if (X[std::size_t(i) * q + k])
                    for (int j = 0; j < q; ++j)
                        if (Y[std::size_t(k) * q + j]) Z[std::size_t(i) * q + j] = 1;
        return Z;
    };
    int cap = 2 * q * q;
    std::vector<std::uint8_t> M = A;
    int m = 1;
    while (m <= cap && !positive(M)) {
        M = bmul(M, A);
        ++m;
    }
    if (!positive(M)) {
        std::size_t z = 0;
        while (z < M.size() && M[z] != 0) ++z;
        throw NotMixing("shift not topologically mixing: zero entry of A^" + std::to_string(cap) +
                        " at (" + std::to_string(z / q) + "," + std::to_string(z % q) + ")");
    }
    ShiftSpace s;
    s.q = q;
    s.A = std::move(A);
    s.m_mix = m;
    return s;
}

// ---------------------------------------------------------------------------
// Finite-memory functions of a sequence
// ---------------------------------------------------------------------------

// f(x) depends on the window x_{i+lo}, ..., x_{i+lo+len-1} when evaluated at
// position i. A potential in the usual one-sided convention has lo = 0.
struct WindowFn {
    int lo = 0;
    int len = 1;
    std::vector<double> table;  // size q^len, big-endian word index
    int q = 2;

    double value_of_word(std::size_t id) const { return table[id]; }

    static std::size_t word_id(const int* syms, int len, int q) {
        std::size_t id = 0;
        for (int i = 0; i < len; ++i) id = id * std::size_t(q) + std::size_t(syms[i]);
        return id;
    }
};

using Potential = WindowFn;  // lo = 0, len = memory + 1

inline WindowFn constant_fn(int q, double c) {
    WindowFn f;
    f.q = q;
    f.lo = 0;
    f.len = 1;
    f.table.assign(std::size_t(q), c);
    return f;
}

inline WindowFn make_potential(int q, int memory, std::vector<double> table) {
    WindowFn f;
    f.q = q;
    f.lo = 0;
    f.len = memory + 1;
    std::size_t want = 1;
    for (int i = 0; i < f.len; ++i) want *= std::size_t(q);
    if (table.size() != want) throw ConfigError("make_potential: table size mismatch");
    f.table = std::move(table);
    return f;
}

// Pointwise combinations share a common refined window.
inline WindowFn combine(const WindowFn& f, const WindowFn& g,
                        const std::function<double(double, double)>& op) {
    if (f.q != g.q) throw ConfigError("combine: alphabet mismatch");
    int q = f.q;
    int lo = std::min(f.lo, g.lo);
    int hi = std::max(f.lo + f.len, g.lo + g.len);
    WindowFn r;
    r.q = q;
    r.lo = lo;
    r.len = hi - lo;
    std::size_t total = 1;
    for (int i = 0; i < r.len; ++i) total *= std::size_t(q);
    r.table.resize(total);
    std::vector<int> syms(std::size_t(r.len), 0);
    for (std::size_t id = 0; id < total; ++id) {
        std::size_t t = id;
        for (int i = r.len - 1; i >= 0; --i) {
            syms[std::size_t(i)] = int(t % q);
            t /= std::size_t(q);
        }
        std::size_t fid = WindowFn::word_id(syms.data() + (f.lo - lo), f.len, q);
        std::size_t gid = WindowFn::word_id(syms.data() + (g.lo - lo), g.len, q);
        r.table[id] = op(f.table[fid], g.table[gid]);
    }
    return r;
}

inline WindowFn add(const WindowFn& f, const WindowFn& g) {
    return combine(f, g, [](double a, double b) { return a + b; });
}
inline WindowFn subtract(const WindowFn& f, const WindowFn& g) {
    return combine(f, g, [](double a, double b) { return a - b; });
}
inline WindowFn scale(const WindowFn& f, double c) {
    WindowFn r = f;
    for (double& v : r.table) v *= c;
    return r;
}
inline WindowFn shift_window(const WindowFn& f, int by) {
    WindowFn r = f;
    r.lo += by;
    return r;
}

// Evaluate on a periodic word (index mod n), used for orbit sums.
inline double eval_periodic(const WindowFn& f, const std::vector<int>& word, long pos) {
    long n = long(word.size());
    std::size_t id = 0;
    for (int i = 0; i < f.len; ++i) {
        long j = (pos + f.lo + i) % n;
        if (j < 0) j += n;
        id = id * std::size_t(f.q) + std::size_t(word[std::size_t(j)]);
    }
    return f.table[id];
}

// ---------------------------------------------------------------------------
// Gibbs chains: the Ruelle transfer matrix on B-blocks
// ---------------------------------------------------------------------------

struct GibbsChain {
    ShiftSpace shift;
    int block = 1;  // B
    std::vector<std::size_t> states;       // admissible B-word ids
    std::vector<int> state_of_word;        // q^B -> state index or -1
    double lambda = 0, pressure = 0, gap = 0;
    std::vector<double> h, nu, p;          // right/left eigendata, stationary law
    // P rows: (successor state, probability), successor word = shift by one.
    std::vector<std::vector<std::pair<int, double>>> trans;

    int n_states() const { return int(states.size()); }

    std::vector<int> word_of_state(int s) const {
        std::vector<int> w(std::size_t(block), 0);
        std::size_t id = states[std::size_t(s)];
        for (int i = block - 1; i >= 0; --i) {
            w[std::size_t(i)] = int(id % std::size_t(shift.q));
            id /= std::size_t(shift.q);
        }
        return w;
    }

    // --- cylinder measures -------------------------------------------------

    // Exact probability of the cylinder fixing word at consecutive positions.
    double cylinder_measure(const std::vector<int>& word) const {
        if (word.empty()) throw InadmissibleWord("empty word");
        for (int c : word)
            if (c < 0 || c >= shift.q) throw InadmissibleWord("symbol out of range");
        for (std::size_t i = 0; i + 1 < word.size(); ++i)
            if (!shift.allowed(word[i], word[i + 1])) throw InadmissibleWord("forbidden pair");
        int B = block;
        if (int(word.size()) >= B) {
            std::size_t id = WindowFn::word_id(word.data(), B, shift.q);
            int s = state_of_word[id];
            if (s < 0) return 0.0;
            double prob = p[std::size_t(s)];
            for (std::size_t i = std::size_t(B); i < word.size(); ++i) {
                int c = word[i];
                double step = 0.0;
                int next = -1;
                for (const auto& [t, pr] : trans[std::size_t(s)]) {
                    if (word_last_symbol(t) == c) {
                        step = pr;
                        next = t;
                        break;
                    }
                }
                if (next < 0) return 0.0;
                prob *= step;
                s = next;
            }
            return prob;
        }
        // Short word: marginalize the stationary block law over extensions.
        double prob = 0.0;
        for (int s = 0; s < n_states(); ++s) {
            auto w = word_of_state(s);
            bool match = true;
            for (std::size_t i = 0; i < word.size(); ++i)
                if (w[i] != word[i]) { match = false; break; }
            if (match) prob += p[std::size_t(s)];
        }
        return prob;
    }

    int word_last_symbol(int s) const {
        return int(states[std::size_t(s)] % std::size_t(shift.q));
    }

    // Enumerate all admissible words of length L with their exact measures.
    void enumerate_cylinders(int L, const std::function<void(const std::vector<int>&, double)>& fn) const {
        if (L < 1) throw ConfigError("enumerate_cylinders: L >= 1");
        int B = block;
        if (L < B) {
            // Group the stationary block law by prefix.
            std::size_t total = 1;
            for (int i = 0; i < L; ++i) total *= std::size_t(shift.q);
            std::vector<double> acc(total, 0.0);
            for (int s = 0; s < n_states(); ++s) {
                std::size_t id = states[std::size_t(s)];
                for (int i = 0; i < B - L; ++i) id /= std::size_t(shift.q);
                acc[id] += p[std::size_t(s)];
            }
            std::vector<int> w(std::size_t(L), 0);
            for (std::size_t id = 0; id < total; ++id) {
                if (acc[id] <= 0.0) continue;
                std::size_t t = id;
                for (int i = L - 1; i >= 0; --i) {
                    w[std::size_t(i)] = int(t % std::size_t(shift.q));
                    t /= std::size_t(shift.q);
                }
                fn(w, acc[id]);
            }
            return;
        }
        // DFS over chain transitions starting from every block state.
        std::vector<int> w(std::size_t(L), 0);
        std::function<void(int, int, double)> dfs = [&](int s, int depth, double prob) {
            if (prob <= 0.0) return;
            if (depth == L) {
                fn(w, prob);
                return;
            }
            for (const auto& [t, pr] : trans[std::size_t(s)]) {
                w[std::size_t(depth)] = word_last_symbol(t);
                dfs(t, depth + 1, prob * pr);
            }
        };
        for (int s = 0; s < n_states(); ++s) {
            if (p[std::size_t(s)] <= 0.0) continue;
            auto w0 = word_of_state(s);
            std::copy(w0.begin(), w0.end(), w.begin());
            dfs(s, B, p[std::size_t(s)]);
        }
    }

    // Exact E_mu f for a finite-window function (stationarity makes the
    // window offset irrelevant).
    double expectation(const WindowFn& f) const {
        double e = 0.0;
        enumerate_cylinders(f.len, [&](const std::vector<int>& w, double prob) {
            e += prob * f.table[WindowFn::word_id(w.data(), f.len, f.q)];
        });
        return e;
    }
};

// Successor word id: drop the first symbol of ext[0..B].
inline std::size_t word_succ_id(const std::vector<int>& ext, int B, int q) {
    return WindowFn::word_id(ext.data() + 1, B, q);
}

inline double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

namespace detail {

// Deflated power iteration growth rate: |lambda_2| of the weighted matrix,
// given the leading triple.
inline double second_eigenvalue_modulus(
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply,
    const std::vector<double>& h, const std::vector<double>& nu, double lambda, int n) {
    double nh = std::inner_product(nu.begin(), nu.end(), h.begin(), 0.0);
    std::vector<double> y(std::size_t(n), 0.0), z(std::size_t(n), 0.0);
    CounterRng rng(0x9e3779b9, 7);
    for (auto& v : y) v = rng.uniform() - 0.5;
    auto deflate = [&](std::vector<double>& v) {
        double c = std::inner_product(nu.begin(), nu.end(), v.begin(), 0.0) / nh;
        for (int i = 0; i < n; ++i) v[std::size_t(i)] -= c * h[std::size_t(i)];
    };
    deflate(y);
    double norm = 0;
    for (double v : y) norm = std::max(norm, std::fabs(v));
    if (norm == 0) return 0.0;
    for (double& v : y) v /= norm;
    double rate = 0.0;
    const int burn = 60, window = 40;
    for (int it = 0; it < burn + window; ++it) {
        apply(y, z);
        deflate(z);
        double zn = 0;
        for (double v : z) zn = std::max(zn, std::fabs(v));
        if (zn < 1e-280) return 0.0;
        if (it >= burn) rate += std::log(zn);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = z[i] / zn;
    }
    return std::exp(rate / window);
}

}  // namespace detail

// Builds the Gibbs state of a finite-memory potential as a stationary block
// Markov chain. block_length can be raised above the potential memory when
// downstream consumers (kernels, observables) need wider windows.
inline GibbsChain gibbs_from_potential(const ShiftSpace& shift, const WindowFn& phi,
                                       int block_length = 0) {
    if (phi.lo != 0) throw ConfigError("gibbs_from_potential: potential must have lo = 0");
    int memory = phi.len - 1;
    int B = std::max({1, memory, block_length});
    std::size_t n_words = 1;
    for (int i = 0; i < B; ++i) {
        n_words *= std::size_t(shift.q);
        if (n_words > 4096) throw MemoryCap("gibbs_from_potential: q^B > 4096 states");
    }

    GibbsChain c;
    c.shift = shift;
    c.block = B;
    c.state_of_word.assign(n_words, -1);
    std::vector<int> w(std::size_t(B), 0);
    for (std::size_t id = 0; id < n_words; ++id) {
        std::size_t t = id;
        bool ok = true;
        for (int i = B - 1; i >= 0; --i) {
            w[std::size_t(i)] = int(t % std::size_t(shift.q));
            t /= std::size_t(shift.q);
        }
        for (int i = 0; i + 1 < B; ++i)
            if (!shift.allowed(w[std::size_t(i)], w[std::size_t(i + 1)])) { ok = false; break; }
        if (ok) {
            c.state_of_word[id] = int(c.states.size());
            c.states.push_back(id);
        }
    }
    int n = c.n_states();

    // Sparse weighted transfer matrix: state -> (successor, exp(phi)).
    std::vector<std::vector<std::pair<int, double>>> W;
    W.resize(std::size_t(n));
    std::vector<int> ext(std::size_t(B + 1), 0);
    for (int s = 0; s < n; ++s) {
        auto ws = c.word_of_state(s);
        std::copy(ws.begin(), ws.end(), ext.begin());
        for (int sym = 0; sym < shift.q; ++sym) {
            if (!shift.allowed(ws[std::size_t(B - 1)], sym)) continue;
            ext[std::size_t(B)] = sym;
            std::size_t succ_id = word_succ_id(ext, B, shift.q);
            int t = c.state_of_word[succ_id];
            if (t < 0) continue;
            double weight = std::exp(phi.table[WindowFn::word_id(ext.data(), phi.len, shift.q)]);
            W[std::size_t(s)].emplace_back(t, weight);
        }
    }

    auto apply_right = [&](const std::vector<double>& x, std::vector<double>& out) {
        out.assign(std::size_t(n), 0.0);
        for (int s = 0; s < n; ++s)
            for (const auto& [t, wgt] : W[std::size_t(s)])
                out[std::size_t(s)] += wgt * x[std::size_t(t)];
    };
    auto apply_left = [&](const std::vector<double>& x, std::vector<double>& out) {
        out.assign(std::size_t(n), 0.0);
        for (int s = 0; s < n; ++s)
            for (const auto& [t, wgt] : W[std::size_t(s)])
                out[std::size_t(t)] += wgt * x[std::size_t(s)];
    };

    auto power = [&](auto&& apply) {
        std::vector<double> v(std::size_t(n), 1.0), u(std::size_t(n), 0.0);
        double lam = 0, best = 1e300;
        int stale = 0;
        for (int it = 0; it < 50000; ++it) {
            apply(v, u);
            double norm = 0;
            for (double x : u) norm = std::max(norm, std::fabs(x));
            if (norm == 0) throw ConvergenceError("transfer matrix power iteration collapsed");
            for (double& x : u) x /= norm;
            double resid = 0;
            for (int i = 0; i < n; ++i)
                resid = std::max(resid, std::fabs(u[std::size_t(i)] - v[std::size_t(i)]));
            v.swap(u);
            lam = norm;
            if (resid < 1e-14 && it > 3) return std::make_pair(v, lam);
            if (resid < 0.9 * best) {
                best = resid;
                stale = 0;
            } else if (++stale > 500) {
                break;  // rounding floor; Rayleigh quotient recovers accuracy
            }
        }
        if (best > 1e-6) throw ConvergenceError("transfer matrix power iteration did not converge");
        return std::make_pair(v, lam);
    };

    auto [h, lam_r] = power(apply_right);
    auto [nu, lam_l] = power(apply_left);
    (void)lam_l;

    // Stationarity-weighted Rayleigh quotient: quadratically accurate lambda.
    std::vector<double> Wh;
    apply_right(h, Wh);
    double nh = std::inner_product(nu.begin(), nu.end(), h.begin(), 0.0);
    double lambda = std::inner_product(nu.begin(), nu.end(), Wh.begin(), 0.0) / nh;
    (void)lam_r;

    // Normalize: nu total mass 1, h*nu total mass 1.
    double nu_sum = std::accumulate(nu.begin(), nu.end(), 0.0);
    for (double& x : nu) x /= nu_sum;
    double hnu = std::inner_product(nu.begin(), nu.end(), h.begin(), 0.0);
    for (double& x : h) x /= hnu;

    c.lambda = lambda;
    c.pressure = std::log(lambda);
    c.h = h;
    c.nu = nu;

    double l2 = detail::second_eigenvalue_modulus(apply_right, h, nu, lambda, n);
    c.gap = l2 / lambda;
    if (c.gap > 1.0 - 1e-9) throw DegenerateGap("transfer matrix spectral gap below tolerance");

    // Markov transitions P and stationary law p = h * nu.
    c.trans.resize(std::size_t(n));
    for (int s = 0; s < n; ++s) {
        double rowsum = 0;
        for (const auto& [t, wgt] : W[std::size_t(s)]) {
            double pr = wgt * h[std::size_t(t)] / (lambda * h[std::size_t(s)]);
            c.trans[std::size_t(s)].emplace_back(t, pr);
            rowsum += pr;
        }
        if (std::fabs(rowsum - 1.0) > 1e-12)
            throw ConvergenceError("transfer eigendata row sum off by " + std::to_string(rowsum - 1.0));
        for (auto& [t, pr] : c.trans[std::size_t(s)]) pr /= rowsum;  // exact stochasticity
    }
    c.p.resize(std::size_t(n));
    double psum = 0;
    for (int s = 0; s < n; ++s) {
        c.p[std::size_t(s)] = h[std::size_t(s)] * nu[std::size_t(s)];
        psum += c.p[std::size_t(s)];
    }
    for (double& x : c.p) x /= psum;
    return c;
}

// Topological pressure of a finite-memory potential.
inline double pressure(const ShiftSpace& shift, const WindowFn& phi) {
    return gibbs_from_potential(shift, phi).pressure;
}

// ---------------------------------------------------------------------------
// Bilateral stationary sampling
// ---------------------------------------------------------------------------

// A lazily extended window of a stationary sample path. Coordinates are
// absolute; the initial block covers [0, B).
class BiSequence {
public:
    BiSequence(const GibbsChain* chain, std::uint64_t seed, std::uint64_t stream)
        : chain_(chain), rng_(seed, stream) {
        int s = sample_from(chain_->p);
        auto w = chain_->word_of_state(s);
        buf_.assign(w.begin(), w.end());
        base_ = 0;
        first_state_ = s;
        last_state_ = s;
    }

    long lo() const { return base_; }
    long hi() const { return base_ + long(buf_.size()) - 1; }

    int at(long j) {
        ensure(j, j);
        return buf_[std::size_t(j - base_)];
    }

    void ensure(long lo, long hi) {
        while (hi > this->hi()) extend_right();
        while (lo < this->lo()) extend_left();
    }

    double eval(const WindowFn& f, long pos) {
        ensure(pos + f.lo, pos + f.lo + f.len - 1);
        std::size_t id = 0;
        for (int i = 0; i < f.len; ++i)
            id = id * std::size_t(f.q) + std::size_t(buf_[std::size_t(pos + f.lo + i - base_)]);
        return f.table[id];
    }

private:
    int sample_from(const std::vector<double>& probs) {
        double u = rng_.uniform();
        double acc = 0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return int(i);
        }
        return int(probs.size()) - 1;
    }

    void extend_right() {
        const auto& row = chain_->trans[std::size_t(last_state_)];
        double u = rng_.uniform();
        double acc = 0;
        int next = row.back().first;
        for (const auto& [t, pr] : row) {
            acc += pr;
            if (u < acc) { next = t; break; }
        }
        buf_.push_back(std::int8_t(chain_->word_last_symbol(next)));
        last_state_ = next;
    }

    void extend_left() {
        // Time-reversed step: predecessor w' ~ p(w') P[w' -> w] / p(w).
        int B = chain_->block;
        int q = chain_->shift.q;
        std::size_t cur = chain_->states[std::size_t(first_state_)];
        std::size_t prefix = cur / std::size_t(q);  // drop last symbol
        double total = 0;
        std::vector<std::pair<int, double>> cand;
        std::size_t pw = 1;
        for (int i = 0; i < B - 1; ++i) pw *= std::size_t(q);
        for (int c0 = 0; c0 < q; ++c0) {
            std::size_t prev_id = std::size_t(c0) * pw + prefix;
            int s = chain_->state_of_word[prev_id];
            if (s < 0) continue;
            for (const auto& [t, pr] : chain_->trans[std::size_t(s)]) {
                if (t == first_state_) {
                    double wgt = chain_->p[std::size_t(s)] * pr;
                    cand.emplace_back(s, wgt);
                    total += wgt;
                }
            }
        }
        if (cand.empty()) throw ConvergenceError("BiSequence: no admissible predecessor");
        double u = rng_.uniform() * total;
        double acc = 0;
        int prev = cand.back().first;
        for (const auto& [s, wgt] : cand) {
            acc += wgt;
            if (u < acc) { prev = s; break; }
        }
        auto w = chain_->word_of_state(prev);
        buf_.insert(buf_.begin(), std::int8_t(w[0]));
        --base_;
        first_state_ = prev;
    }

    const GibbsChain* chain_;
    CounterRng rng_;
    std::vector<std::int8_t> buf_;
    long base_ = 0;
    int first_state_ = 0, last_state_ = 0;
};

inline BiSequence sample_path(const GibbsChain& chain, std::uint64_t seed, std::uint64_t stream) {
    return BiSequence(&chain, seed, stream);
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct MixingReport {
    std::vector<double> covariances;  // n = 0 .. n_max
    double fitted_rate = 0;           // beta-hat from log|cov| slope
    double second_eigen_ratio = 0;    // |lambda_2| / lambda_1 of the chain
};

// Exact stationary covariances E[v (w o sigma^n)] - Ev Ew via P powers.
inline MixingReport mixing_check(const GibbsChain& chain, const WindowFn& v, const WindowFn& w,
                                 int n_max) {
    if (v.len > chain.block || w.len > chain.block)
        throw MemoryCap("mixing_check: observable window exceeds chain block length");
    int n = chain.n_states();
    // Lift observables to block states; exact because the window fits in one block.
    auto lift = [&](const WindowFn& f) {
        std::vector<double> out(std::size_t(n), 0.0);
        for (int s = 0; s < n; ++s) {
            auto word = chain.word_of_state(s);
            out[std::size_t(s)] = f.table[WindowFn::word_id(word.data(), f.len, f.q)];
        }
        return out;
    };
    std::vector<double> vs = lift(v), ws = lift(w);
    double ev = 0, ew = 0;
    for (int s = 0; s < n; ++s) {
        ev += chain.p[std::size_t(s)] * vs[std::size_t(s)];
        ew += chain.p[std::size_t(s)] * ws[std::size_t(s)];
    }
    MixingReport rep;
    rep.second_eigen_ratio = chain.gap;
    std::vector<double> r = ws, next(std::size_t(n), 0.0);
    for (int k = 0; k <= n_max; ++k) {
        double cov = 0;
        for (int s = 0; s < n; ++s) cov += chain.p[std::size_t(s)] * vs[std::size_t(s)] * r[std::size_t(s)];
        rep.covariances.push_back(cov - ev * ew);
        // r <- P r
        next.assign(std::size_t(n), 0.0);
        for (int s = 0; s < n; ++s)
            for (const auto& [t, pr] : chain.trans[std::size_t(s)])
                next[std::size_t(s)] += pr * r[std::size_t(t)];
        r.swap(next);
    }
    // Fit the decay rate over the entries that are numerically alive.
    std::vector<double> xs, ys;
    for (int k = 1; k < int(rep.covariances.size()); ++k) {
        double a = std::fabs(rep.covariances[std::size_t(k)]);
        if (a > 1e-14) {
            xs.push_back(double(k));
            ys.push_back(std::log(a));
        }
    }
    if (xs.size() >= 2) {
        double mx = mean_of(xs), my = mean_of(ys), sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxx += sqr(xs[i] - mx);
            sxy += (xs[i] - mx) * (ys[i] - my);
        }
        rep.fitted_rate = std::exp(sxy / sxx);
    }
    return rep;
}

// mu{ x_i = x_{i+k} for 0 <= i <= m }: the constrained string is determined
// by its first k symbols repeated, so the exact value is a sum of cylinder
// measures over admissible k-cycles.
inline double repeat_probability(const GibbsChain& chain, int k, int m) {
    if (k == 0) throw ConfigError("repeat_probability: k must be nonzero");
    if (m < 1) throw ConfigError("repeat_probability: m >= 1");
    k = std::abs(k);
    if (k > 24) throw BudgetExceeded("repeat_probability: k too large");
    int q = chain.shift.q;
    std::size_t total = 1;
    for (int i = 0; i < k; ++i) total *= std::size_t(q);
    int L = m + k + 1;
    double prob = 0.0;
    std::vector<int> cyc(std::size_t(k), 0), word(std::size_t(L), 0);
    for (std::size_t id = 0; id < total; ++id) {
        std::size_t t = id;
        for (int i = k - 1; i >= 0; --i) {
            cyc[std::size_t(i)] = int(t % std::size_t(q));
            t /= std::size_t(q);
        }
        bool ok = true;
        for (int i = 0; ok && i < L; ++i) {
            word[std::size_t(i)] = cyc[std::size_t(i % k)];
            if (i > 0 && !chain.shift.allowed(word[std::size_t(i - 1)], word[std::size_t(i)])) ok = false;
        }
        if (!ok) continue;
        prob += chain.cylinder_measure(word);
    }
    return prob;
}

// ---------------------------------------------------------------------------
// Periodic orbits
// ---------------------------------------------------------------------------

// Visits one canonical representative (lexicographically minimal rotation) of
// every primitive admissible cycle with period in [1, max_period].
inline void for_each_periodic_orbit(const ShiftSpace& shift, int max_period,
                                    const std::function<void(const std::vector<int>&)>& fn) {
    double budget = std::pow(double(shift.q), double(max_period));
    if (budget > double(1 << 24)) throw BudgetExceeded("periodic orbit enumeration too large");
    for (int n = 1; n <= max_period; ++n) {
        std::vector<int> w(std::size_t(n), 0);
        std::function<void(int)> dfs = [&](int depth) {
            if (depth == n) {
                if (!shift.allowed(w[std::size_t(n - 1)], w[0])) return;
                // canonical: minimal rotation
                for (int r = 1; r < n; ++r) {
                    for (int i = 0; i < n; ++i) {
                        int a = w[std::size_t((i + r) % n)], b = w[std::size_t(i)];
                        if (a != b) {
                            if (a < b) return;  // a smaller rotation exists
                            break;
                        }
                    }
                }
                // primitive: no proper period
                for (int d = 1; d < n; ++d) {
                    if (n % d != 0) continue;
                    bool per = true;
                    for (int i = 0; per && i < n; ++i)
                        if (w[std::size_t(i)] != w[std::size_t(i % d)]) per = false;
                    if (per) return;
                }
                fn(w);
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
}

// Birkhoff sum of f over one period of a periodic word.
inline double orbit_sum(const WindowFn& f, const std::vector<int>& word) {
    double s = 0;
    for (long j = 0; j < long(word.size()); ++j) s += eval_periodic(f, word, j);
    return s;
}

}  // namespace geolab
