#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "geolab/common.hpp"

namespace geolab {

inline double mean(const std::vector<double>& v) {
    if (v.empty()) throw DegenerateInput("mean of empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

// Unbiased sample variance.
inline double variance(const std::vector<double>& v) {
    if (v.size() < 2) throw DegenerateInput("variance needs >= 2 samples");
    double m = mean(v);
    double s = 0.0;
    for (double x : v) s += sqr(x - m);
    return s / double(v.size() - 1);
}

inline double stddev(const std::vector<double>& v) { return std::sqrt(variance(v)); }

inline double stderr_of_mean(const std::vector<double>& v) {
    return stddev(v) / std::sqrt(double(v.size()));
}

inline double skewness(const std::vector<double>& v) {
    double m = mean(v), s = stddev(v);
    if (s == 0.0) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += sqr(x - m) * (x - m);
    return acc / (double(v.size()) * s * s * s);
}

// Linear-interpolated quantile of a sorted copy, q in [0,1].
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw DegenerateInput("quantile of empty sample");
    std::sort(v.begin(), v.end());
    double pos = q * double(v.size() - 1);
    std::size_t lo = std::size_t(std::floor(pos));
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = pos - double(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

struct SummaryStats {
    std::size_t n = 0;
    double mean = 0, variance = 0, skewness = 0;
    double q05 = 0, q25 = 0, q50 = 0, q75 = 0, q95 = 0;
};

inline SummaryStats summarize(const std::vector<double>& v) {
    SummaryStats s;
    s.n = v.size();
    s.mean = mean(v);
    s.variance = v.size() > 1 ? variance(v) : 0.0;
    s.skewness = v.size() > 2 ? skewness(v) : 0.0;
    s.q05 = quantile(v, 0.05);
    s.q25 = quantile(v, 0.25);
    s.q50 = quantile(v, 0.50);
    s.q75 = quantile(v, 0.75);
    s.q95 = quantile(v, 0.95);
    return s;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Asymptotic Kolmogorov tail Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_tail(double lambda) {
    if (lambda < 1e-8) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-14) break;
    }
    return std::min(1.0, std::max(0.0, 2.0 * sum));
}

struct KsResult {
    double statistic = 0;
    double p_value = 1;
};

// One-sample KS against a CDF.
inline KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.size() < 30) throw TooFewSamples("ks_test needs >= 30 samples");
    std::sort(samples.begin(), samples.end());
    double n = double(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double f = cdf(samples[i]);
        d = std::max(d, f - double(i) / n);
        d = std::max(d, double(i + 1) / n - f);
    }
    double sn = std::sqrt(n);
    KsResult r;
    r.statistic = d;
    r.p_value = kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d);
    return r;
}

// Two-sample KS.
inline KsResult ks_test2(std::vector<double> a, std::vector<double> b) {
    if (a.size() < 30 || b.size() < 30) throw TooFewSamples("ks_test2 needs >= 30 samples each");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::fabs(double(i) / double(a.size()) - double(j) / double(b.size())));
    }
    double ne = double(a.size()) * double(b.size()) / double(a.size() + b.size());
    double sn = std::sqrt(ne);
    KsResult r;
    r.statistic = d;
    r.p_value = kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d);
    return r;
}

inline KsResult ks_test_fitted_gaussian(const std::vector<double>& samples) {
    double m = mean(samples), s = stddev(samples);
    if (s <= 0) throw DegenerateInput("degenerate sample for gaussian fit");
    return ks_test(samples, [m, s](double x) { return normal_cdf((x - m) / s); });
}

struct RegressionResult {
    double slope = 0;
    double intercept = 0;
    double ci_halfwidth = 0;  // 95% on the slope
};

namespace detail {
// Two-sided 97.5% Student t quantiles for small df; 1.96 beyond the table.
inline double t975(int df) {
    static const double tab[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365,
                                 2.306,  2.262, 2.228, 2.201, 2.179, 2.160, 2.145,
                                 2.131,  2.120, 2.110, 2.101, 2.093, 2.086};
    if (df < 1) return 12.706;
    if (df <= 20) return tab[df - 1];
    return 1.96;
}
}  // namespace detail

// Least squares of log(variance) on log(T); the dichotomy's slope estimator.
inline RegressionResult scaling_regression(const std::vector<double>& t_values,
                                           const std::vector<double>& variances) {
    if (t_values.size() != variances.size() || t_values.size() < 3)
        throw DegenerateInput("scaling_regression needs >= 3 matched points");
    std::vector<double> x, y;
    for (std::size_t i = 0; i < t_values.size(); ++i) {
        if (t_values[i] <= 0 || variances[i] <= 0)
            throw DegenerateInput("scaling_regression needs positive inputs");
        x.push_back(std::log(t_values[i]));
        y.push_back(std::log(variances[i]));
    }
    double n = double(x.size());
    double mx = mean(x), my = mean(y);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += sqr(x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    RegressionResult r;
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sse += sqr(y[i] - (r.intercept + r.slope * x[i]));
    int df = int(x.size()) - 2;
    double se = df > 0 ? std::sqrt(sse / double(df) / sxx) : 0.0;
    r.ci_halfwidth = detail::t975(df) * se;
    return r;
}

}  // namespace geolab
