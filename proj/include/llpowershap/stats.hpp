#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "llpowershap/common.hpp"

namespace llps::stats {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::string method_note;  // "exact", "normal_approx", "degenerate", ...
};

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace detail {

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Sample variance, ddof = 1.
inline double variance_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Continued fraction for the regularized incomplete beta (Lentz's method).
inline double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 400;
    constexpr double kEps = 3e-16;
    constexpr double kTiny = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double log_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log1p(-x);
    double bt = std::exp(log_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * detail::beta_cf(a, b, x) / a;
    return 1.0 - bt * detail::beta_cf(b, a, 1.0 - x) / b;
}

// Survival function of chi-square with 1 degree of freedom.
inline double chi2_sf_1df(double x) {
    if (x <= 0.0) return 1.0;
    return std::erfc(std::sqrt(0.5 * x));
}

// Survival function of the F distribution with (d1, d2) degrees of freedom.
inline double f_sf(double f, double d1, double d2) {
    if (!(f > 0.0)) return 1.0;
    if (std::isinf(f)) return 0.0;
    return incomplete_beta(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * f));
}

inline double t_cdf(double t, double df) {
    double x = df / (df + t * t);
    double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
    return t >= 0.0 ? 1.0 - tail : tail;
}

// Central t quantile by bisection on t_cdf.
inline double t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) throw DataError("t_quantile requires p in (0, 1)");
    if (p == 0.5) return 0.0;
    bool upper = p > 0.5;
    double target = upper ? p : 1.0 - p;
    double lo = 0.0, hi = 1.0;
    while (t_cdf(hi, df) < target) {
        hi *= 2.0;
        if (hi > 1e12) break;
    }
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (t_cdf(mid, df) < target)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-13 * std::max(1.0, hi)) break;
    }
    double q = 0.5 * (lo + hi);
    return upper ? q : -q;
}

// Cumulative distribution of the noncentral t (df, noncentrality delta),
// evaluated by the incomplete-beta series with forward recurrences.
// Absolute tolerance 1e-10.
inline double noncentral_t_cdf(double t, double df, double delta) {
    constexpr double kTol = 1e-10;
    constexpr int kMaxIter = 5000;
    bool flipped = false;
    double tt = t, del = delta;
    if (t < 0.0) {
        flipped = true;
        tt = -t;
        del = -delta;
    }
    double x = tt * tt / (tt * tt + df);
    double value = 0.0;
    if (x > 0.0) {
        double lambda = del * del;
        double p = 0.5 * std::exp(-0.5 * lambda);
        double q = std::sqrt(2.0 / std::numbers::pi) * p * del;
        double s = 0.5 - p;
        const double a0 = 0.5;
        const double b = 0.5 * df;
        double a = a0;
        double rxb = std::exp(b * std::log1p(-x));  // (1-x)^b
        double albeta = std::lgamma(a0) + std::lgamma(b) - std::lgamma(a0 + b);
        double xodd = incomplete_beta(a0, b, x);
        double godd = 2.0 * rxb * std::exp(a0 * std::log(x) - albeta);
        double xeven = 1.0 - rxb;
        double geven = b * x * rxb;
        value = p * xodd + q * xeven;
        for (int it = 1; it <= kMaxIter; ++it) {
            a += 1.0;
            xodd -= godd;
            xeven -= geven;
            godd *= x * (a + b - 1.0) / a;
            geven *= x * (a + b - 0.5) / (a + 0.5);
            p *= lambda / (2.0 * it);
            q *= lambda / (2.0 * it + 1.0);
            s -= p;
            value += p * xodd + q * xeven;
            double errbd = 2.0 * s * (xodd - godd);
            if (std::fabs(errbd) < kTol && it > static_cast<int>(0.5 * lambda)) break;
        }
    }
    value += normal_cdf(-del);
    value = std::clamp(value, 0.0, 1.0);
    return flipped ? 1.0 - value : value;
}

namespace detail {

// Null counts of the Mann-Whitney U statistic for sample sizes (m, n):
// counts[u] = number of interleavings with statistic exactly u. Values stay
// below 2^53 for m, n <= 20, so doubles hold them exactly.
inline std::vector<double> mwu_exact_counts(std::size_t m, std::size_t n) {
    std::vector<std::vector<double>> prev(n + 1), cur(n + 1);
    for (std::size_t j = 0; j <= n; ++j) prev[j] = {1.0};  // m' = 0
    for (std::size_t i = 1; i <= m; ++i) {
        for (std::size_t j = 0; j <= n; ++j) {
            cur[j].assign(i * j + 1, 0.0);
            for (std::size_t u = 0; u <= i * j; ++u) {
                double v = 0.0;
                if (u >= j && u - j < prev[j].size()) v += prev[j][u - j];
                if (j >= 1 && u < cur[j - 1].size()) v += cur[j - 1][u];
                cur[j][u] = v;
            }
        }
        std::swap(prev, cur);
    }
    return prev[n];
}

inline bool has_any_tie(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> all;
    all.reserve(a.size() + b.size());
    all.insert(all.end(), a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    return std::adjacent_find(all.begin(), all.end()) != all.end();
}

}  // namespace detail

// One-sided Mann-Whitney U test of "a stochastically greater than b".
// Exact null distribution when both samples have at most 20 entries and no
// ties exist; otherwise normal approximation with tie and continuity
// corrections. The exact p-value is P(U >= u_observed).
inline TestResult mann_whitney_u_greater(const std::vector<double>& a,
                                         const std::vector<double>& b) {
    const std::size_t na = a.size(), nb = b.size();
    if (na < 2 || nb < 2) throw DataError("mann_whitney_u_greater requires lengths >= 2");
    double u = 0.0;
    for (double x : a)
        for (double y : b) {
            if (x > y)
                u += 1.0;
            else if (x == y)
                u += 0.5;
        }
    TestResult res;
    res.statistic = u;

    bool degenerate = true;
    for (double x : a)
        if (x != a[0]) degenerate = false;
    for (double y : b)
        if (y != a[0]) degenerate = false;
    if (degenerate) {
        res.p_value = 1.0;
        res.method_note = "degenerate";
        return res;
    }

    bool ties = detail::has_any_tie(a, b);
    if (!ties && na <= 20 && nb <= 20) {
        std::vector<double> counts = detail::mwu_exact_counts(na, nb);
        double total = 0.0, ge = 0.0;
        std::size_t u_int = static_cast<std::size_t>(std::llround(u));
        for (std::size_t k = 0; k < counts.size(); ++k) {
            total += counts[k];
            if (k >= u_int) ge += counts[k];
        }
        res.p_value = ge / total;
        res.method_note = "exact";
        return res;
    }

    // Normal approximation with tie correction.
    const double dn_a = static_cast<double>(na), dn_b = static_cast<double>(nb);
    const double big_n = dn_a + dn_b;
    std::vector<double> all;
    all.reserve(na + nb);
    all.insert(all.end(), a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    double tie_sum = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j < all.size() && all[j] == all[i]) ++j;
        double t = static_cast<double>(j - i);
        tie_sum += t * t * t - t;
        i = j;
    }
    double var = dn_a * dn_b / 12.0 *
                 ((big_n + 1.0) - tie_sum / (big_n * (big_n - 1.0)));
    if (var <= 0.0) {
        res.p_value = 1.0;
        res.method_note = "degenerate";
        return res;
    }
    double z = (u - 0.5 * dn_a * dn_b - 0.5) / std::sqrt(var);
    res.p_value = std::clamp(1.0 - normal_cdf(z), 0.0, 1.0);
    res.method_note = "normal_approx";
    return res;
}

// Median-centered (Brown-Forsythe) variance-equality test; p from the F
// distribution with (1, n_a + n_b - 2) degrees of freedom.
inline TestResult levene_test(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t na = a.size(), nb = b.size();
    if (na < 2 || nb < 2) throw DataError("levene_test requires lengths >= 2");
    double med_a = detail::median_of(a), med_b = detail::median_of(b);
    std::vector<double> za(na), zb(nb);
    for (std::size_t i = 0; i < na; ++i) za[i] = std::fabs(a[i] - med_a);
    for (std::size_t i = 0; i < nb; ++i) zb[i] = std::fabs(b[i] - med_b);
    double ma = detail::mean_of(za), mb = detail::mean_of(zb);
    double grand = (ma * static_cast<double>(na) + mb * static_cast<double>(nb)) /
                   static_cast<double>(na + nb);
    double between = static_cast<double>(na) * (ma - grand) * (ma - grand) +
                     static_cast<double>(nb) * (mb - grand) * (mb - grand);
    double within = 0.0;
    for (double z : za) within += (z - ma) * (z - ma);
    for (double z : zb) within += (z - mb) * (z - mb);
    double df2 = static_cast<double>(na + nb - 2);
    TestResult res;
    if (within <= 0.0) {
        if (between <= 0.0) {
            res.statistic = 0.0;
            res.p_value = 1.0;
            res.method_note = "degenerate";
        } else {
            res.statistic = std::numeric_limits<double>::infinity();
            res.p_value = 0.0;
            res.method_note = "degenerate";
        }
        return res;
    }
    res.statistic = df2 * between / within;
    res.p_value = f_sf(res.statistic, 1.0, df2);
    res.method_note = "brown_forsythe";
    return res;
}

// Standardized mean difference. Equal variances: pooled denominator
// sqrt((s_a^2 + s_b^2) / 2); otherwise Glass's delta with the second
// (noise) sample's deviation.
inline double effect_size(const std::vector<double>& a, const std::vector<double>& b,
                          bool variances_equal) {
    if (a.size() < 2 || b.size() < 2) throw DataError("effect_size requires lengths >= 2");
    double ma = detail::mean_of(a), mb = detail::mean_of(b);
    double denom;
    if (variances_equal) {
        denom = std::sqrt(0.5 * (detail::variance_of(a) + detail::variance_of(b)));
    } else {
        denom = std::sqrt(detail::variance_of(b));
    }
    if (denom <= 0.0) throw DataError("degenerate spread");
    return (ma - mb) / denom;
}

inline constexpr std::size_t kRequiredIterationsCap = 10000;

// Power of the one-sided one-sample t test at level alpha with n observations
// and standardized effect `effect` (noncentrality effect * sqrt(n)).
inline double t_test_power(double effect, std::size_t n, double alpha) {
    if (n < 2) return 0.0;
    double df = static_cast<double>(n - 1);
    double t_crit = t_quantile(1.0 - alpha, df);
    return 1.0 - noncentral_t_cdf(t_crit, df, effect * std::sqrt(static_cast<double>(n)));
}

// Smallest n >= 2 whose one-sided one-sample t test reaches the target power
// at level alpha; capped at kRequiredIterationsCap. Non-positive effects
// return the cap (the feature cannot be powered).
inline std::size_t solve_required_iterations(double effect, double alpha, double power) {
    if (!(alpha > 0.0 && alpha < power && power < 1.0))
        throw DataError("solve_required_iterations requires 0 < alpha < power < 1");
    if (!(effect > 0.0)) return kRequiredIterationsCap;
    if (t_test_power(effect, 2, alpha) >= power) return 2;
    // Exponential bracket, then bisection; power is monotone in n.
    std::size_t lo = 2, hi = 4;
    while (hi < kRequiredIterationsCap && t_test_power(effect, hi, alpha) < power) {
        lo = hi;
        hi = std::min<std::size_t>(hi * 2, kRequiredIterationsCap);
    }
    if (t_test_power(effect, hi, alpha) < power) return kRequiredIterationsCap;
    while (hi - lo > 1) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (t_test_power(effect, mid, alpha) >= power)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

}  // namespace llps::stats
