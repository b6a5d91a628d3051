#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <vector>

#include "llpowershap/random.hpp"
#include "llpowershap/stats.hpp"

using namespace llps;

namespace {

// Enumeration oracle: p = fraction of the C(na+nb, na) rank interleavings
// whose U statistic is at least the observed one. Tie-free samples only.
double mwu_enumeration_p(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t na = a.size(), nb = b.size(), n = na + nb;
    double u_obs = 0.0;
    for (double x : a)
        for (double y : b)
            if (x > y) u_obs += 1.0;
    std::size_t ge = 0, total = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != na) continue;
        ++total;
        // set bits mark ranks held by sample a when walking ranks upward
        std::size_t u = 0, b_seen = 0;
        for (std::size_t pos = 0; pos < n; ++pos) {
            if (mask & (1u << pos))
                u += b_seen;
            else
                ++b_seen;
        }
        if (static_cast<double>(u) >= u_obs) ++ge;
    }
    return static_cast<double>(ge) / static_cast<double>(total);
}

std::vector<double> draw_normal(std::size_t n, double mean, double sd, std::uint64_t seed) {
    rng::Engine e = rng::make_engine(seed);
    std::vector<double> v(n);
    for (double& x : v) x = mean + sd * rng::normal(e);
    return v;
}

// Monte Carlo oracle for the noncentral t distribution.
double mc_noncentral_t_cdf(double t, int df, double delta, std::size_t n, std::uint64_t seed) {
    rng::Engine e = rng::make_engine(seed);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double z = rng::normal(e);
        double v = 0.0;
        for (int k = 0; k < df; ++k) {
            double w = rng::normal(e);
            v += w * w;
        }
        if ((z + delta) / std::sqrt(v / df) <= t) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

TEST_CASE("mann-whitney: pinned exact cases") {
    auto res = stats::mann_whitney_u_greater({5, 6, 7}, {1, 2, 3});
    CHECK(res.statistic == doctest::Approx(9.0));
    CHECK(res.p_value == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(res.method_note == "exact");

    // Mirror case checked against the same enumeration convention.
    auto mirror = stats::mann_whitney_u_greater({1, 2, 3}, {5, 6, 7});
    CHECK(mirror.p_value ==
          doctest::Approx(mwu_enumeration_p({1, 2, 3}, {5, 6, 7})).epsilon(1e-12));

    // Identical samples: no stochastic dominance.
    auto same = stats::mann_whitney_u_greater({1, 2, 3, 4}, {1, 2, 3, 4});
    CHECK(same.p_value >= 0.5);
}

TEST_CASE("mann-whitney: exact path agrees with enumeration oracle") {
    std::mt19937_64 g(11);
    for (int rep = 0; rep < 40; ++rep) {
        std::size_t na = 2 + g() % 6, nb = 2 + g() % 6;
        std::vector<double> pool;
        for (std::size_t i = 0; i < na + nb; ++i)
            pool.push_back(static_cast<double>(i) + 0.25);
        std::shuffle(pool.begin(), pool.end(), g);
        std::vector<double> a(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(na));
        std::vector<double> b(pool.begin() + static_cast<std::ptrdiff_t>(na), pool.end());
        auto res = stats::mann_whitney_u_greater(a, b);
        CHECK(res.method_note == "exact");
        CHECK(res.p_value == doctest::Approx(mwu_enumeration_p(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("mann-whitney: U reversal identity and degenerate input") {
    for (int rep = 0; rep < 20; ++rep) {
        auto a = draw_normal(8, 0.0, 1.0, 100 + rep);
        auto b = draw_normal(11, 0.5, 2.0, 200 + rep);
        double u1 = stats::mann_whitney_u_greater(a, b).statistic;
        double u2 = stats::mann_whitney_u_greater(b, a).statistic;
        CHECK(u1 + u2 == doctest::Approx(8.0 * 11.0).epsilon(1e-12));
    }
    auto res = stats::mann_whitney_u_greater({2, 2, 2}, {2, 2});
    CHECK(res.p_value == 1.0);
    CHECK(res.method_note == "degenerate");
}

TEST_CASE("mann-whitney: exact path and normal approximation agree at n=20") {
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        auto a = draw_normal(20, 0.3, 1.0, 300 + rep);
        auto b = draw_normal(20, 0.0, 1.0, 700 + rep);
        auto exact = stats::mann_whitney_u_greater(a, b);
        REQUIRE(exact.method_note == "exact");
        double u = exact.statistic;
        double mu = 20.0 * 20.0 / 2.0;
        double var = 20.0 * 20.0 * 41.0 / 12.0;  // tie-free
        double z = (u - mu - 0.5) / std::sqrt(var);
        double p_norm = 1.0 - stats::normal_cdf(z);
        worst = std::max(worst, std::fabs(exact.p_value - p_norm));
    }
    CHECK(worst < 0.02);
}

TEST_CASE("mann-whitney and levene: p-values stay in [0,1] on rough input") {
    std::mt19937_64 g(17);
    for (int rep = 0; rep < 10000; ++rep) {
        std::size_t na = 2 + g() % 8, nb = 2 + g() % 8;
        std::vector<double> a(na), b(nb);
        for (double& x : a) x = (g() % 5 == 0) ? 1.0 : static_cast<double>(g() % 7) * 0.5;
        for (double& x : b) x = (g() % 3 == 0) ? 1.0 : static_cast<double>(g() % 7) * 0.5;
        auto mw = stats::mann_whitney_u_greater(a, b);
        CHECK(mw.p_value >= 0.0);
        CHECK(mw.p_value <= 1.0);
        auto lv = stats::levene_test(a, b);
        CHECK(lv.p_value >= 0.0);
        CHECK(lv.p_value <= 1.0);
    }
}

TEST_CASE("levene: size calibration under equal variances") {
    std::size_t rejections = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        auto a = draw_normal(50, 0.0, 1.0, 1000 + rep);
        auto b = draw_normal(50, 0.0, 1.0, 5000 + rep);
        if (stats::levene_test(a, b).p_value < 0.05) ++rejections;
    }
    double rate = static_cast<double>(rejections) / 1000.0;
    CHECK(rate >= 0.03);
    CHECK(rate <= 0.07);
}

TEST_CASE("levene: detects a tenfold spread difference") {
    std::size_t rejections = 0;
    for (int rep = 0; rep < 50; ++rep) {
        auto a = draw_normal(50, 0.0, 1.0, 9000 + rep);
        std::vector<double> b = a;
        for (double& x : b) x *= 10.0;
        if (stats::levene_test(a, b).p_value < 0.01) ++rejections;
    }
    CHECK(rejections >= 48);
}

TEST_CASE("levene: identical samples give statistic 0, p 1") {
    std::vector<double> a = {1.0, 2.5, -0.5, 4.0};
    auto res = stats::levene_test(a, a);
    CHECK(res.statistic == 0.0);
    CHECK(res.p_value == 1.0);
}

TEST_CASE("effect size: pinned evaluations") {
    // sd(a)=sd(b)=2 and mean gap 2 -> effect 1 under pooling.
    std::vector<double> a = {0.0, 2.0, 4.0};
    std::vector<double> b = {-2.0, 0.0, 2.0};
    CHECK(stats::effect_size(a, b, true) == doctest::Approx(1.0).epsilon(1e-12));

    // Glass's delta: gap 8 over noise sd 4 -> 2.
    std::vector<double> f = {10.0, 10.0, 10.0, 10.0};
    std::vector<double> n2 = {-2.0, 6.0, 2.0};  // mean 2, sd 4
    CHECK(stats::effect_size(f, n2, false) == doctest::Approx(2.0).epsilon(1e-12));

    // Pooled with sd_a=3, sd_b=4, gap 5 -> 5/sqrt(12.5) ~ 1.41421.
    std::vector<double> p = {2.0, 5.0, 8.0};
    std::vector<double> q = {-4.0, 0.0, 4.0};
    CHECK(stats::effect_size(p, q, true) ==
          doctest::Approx(5.0 / std::sqrt(12.5)).epsilon(1e-12));
    CHECK(stats::effect_size(p, q, true) == doctest::Approx(1.41421).epsilon(1e-5));
}

TEST_CASE("effect size: invariance under common rescaling and degenerate error") {
    auto a = draw_normal(30, 1.0, 2.0, 42);
    auto b = draw_normal(25, 0.2, 0.7, 43);
    for (bool eq : {true, false}) {
        double base = stats::effect_size(a, b, eq);
        std::vector<double> a2 = a, b2 = b;
        for (double& x : a2) x *= 37.5;
        for (double& x : b2) x *= 37.5;
        CHECK(stats::effect_size(a2, b2, eq) == doctest::Approx(base).epsilon(1e-10));
    }
    std::vector<double> flat = {3.0, 3.0, 3.0};
    CHECK_THROWS_AS(stats::effect_size(flat, flat, true), DataError);
    CHECK_THROWS_AS(stats::effect_size(a, flat, false), DataError);
}

TEST_CASE("noncentral t cdf matches a Monte Carlo oracle") {
    struct Case {
        double t, delta;
        int df;
    };
    const Case cases[] = {{2.0, 1.0, 5}, {31.8205, 14.1421, 1}, {0.5, 3.0, 10}, {-1.0, 2.0, 4}};
    for (const Case& c : cases) {
        double series = stats::noncentral_t_cdf(c.t, c.df, c.delta);
        double mc = mc_noncentral_t_cdf(c.t, c.df, c.delta, 400000, 1234);
        CHECK(std::fabs(series - mc) < 5e-3);
    }
}

TEST_CASE("power solver: round-trip, monotonicity, caps") {
    // Saturated effect bottoms out at the minimum sample size.
    CHECK(stats::solve_required_iterations(100.0, 0.01, 0.99) == 2);

    // power(n=2) sits far below 0.99 at alpha 0.01 even for effect 10 (the
    // df=1 denominator is heavy-tailed), so the smallest adequate n is 3.
    // Cross-checked against the Monte Carlo oracle above.
    CHECK(stats::t_test_power(10.0, 2, 0.01) < 0.5);
    CHECK(stats::solve_required_iterations(10.0, 0.01, 0.99) == 3);

    // Monotone in effect, alpha, and power.
    std::size_t n_half = stats::solve_required_iterations(0.5, 0.01, 0.99);
    std::size_t n_one = stats::solve_required_iterations(1.0, 0.01, 0.99);
    CHECK(n_half > n_one);
    CHECK(stats::solve_required_iterations(0.5, 0.05, 0.99) <= n_half);
    CHECK(stats::solve_required_iterations(0.5, 0.01, 0.8) <= n_half);

    // Cap semantics.
    CHECK(stats::solve_required_iterations(0.0, 0.01, 0.99) == stats::kRequiredIterationsCap);
    CHECK(stats::solve_required_iterations(-1.0, 0.01, 0.99) == stats::kRequiredIterationsCap);
    CHECK(stats::solve_required_iterations(1e-8, 0.01, 0.99) == stats::kRequiredIterationsCap);

    // Round-trip on a random grid.
    std::mt19937_64 g(7);
    for (int rep = 0; rep < 200; ++rep) {
        double eff = 0.2 + 2.8 * static_cast<double>(g() >> 11) * 0x1.0p-53;
        double alpha = (g() & 1) ? 0.01 : 0.05;
        double power = (g() & 2) ? 0.8 : 0.99;
        std::size_t n = stats::solve_required_iterations(eff, alpha, power);
        REQUIRE(n >= 2);
        if (n == stats::kRequiredIterationsCap) continue;
        CHECK(stats::t_test_power(eff, n, alpha) >= power);
        if (n > 2) CHECK(stats::t_test_power(eff, n - 1, alpha) < power);
    }
}

TEST_CASE("t quantiles match reference values") {
    CHECK(stats::t_quantile(0.99, 1) == doctest::Approx(31.8205).epsilon(1e-4));
    CHECK(stats::t_quantile(0.99, 2) == doctest::Approx(6.9646).epsilon(1e-4));
    CHECK(stats::t_quantile(0.95, 10) == doctest::Approx(1.8125).epsilon(1e-4));
    CHECK(stats::t_quantile(0.975, 30) == doctest::Approx(2.0423).epsilon(1e-4));
    CHECK(stats::t_quantile(0.5, 7) == doctest::Approx(0.0));
    CHECK(stats::t_quantile(0.05, 10) == doctest::Approx(-1.8125).epsilon(1e-4));
}
