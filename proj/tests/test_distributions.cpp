#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "penmeta/distributions.hpp"
#include "penmeta/quadrature.hpp"

using namespace penmeta;

TEST_CASE("weibull cdf basics") {
    CHECK(PenetranceModel{4.55, 95.25}.cdf(0.0) == 0.0);
    CHECK(PenetranceModel{1.0, 1.0}.cdf(1.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
    CHECK_THROWS(PenetranceModel{4.55, 95.25}.cdf(-1.0));
    CHECK_THROWS(PenetranceModel(0.0, 1.0));
}

TEST_CASE("weibull cdf vs Monte Carlo empirical cdf") {
    const PenetranceModel model{3.65, 143.2426};
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const long n = 10'000'000;
    long below = 0;
    for (long i = 0; i < n; ++i)
        if (model.quantile(u01(rng)) <= 80.0) ++below;
    const double empirical = static_cast<double>(below) / n;
    CHECK(std::abs(model.cdf(80.0) - empirical) < 0.001);
}

TEST_CASE("weibull pdf basics") {
    CHECK(PenetranceModel{2.0, 1.0}.pdf(0.0) == 0.0);
    const PenetranceModel model{4.55, 95.25};
    const double mass = integrate([&](double t) { return model.pdf(t); }, 0.0, 500.0);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));

    // Finite difference of the cdf at t = 60.
    const double h = 1e-5;
    const double fd = (model.cdf(60.0 + h) - model.cdf(60.0 - h)) / (2.0 * h);
    CHECK(fd == doctest::Approx(model.pdf(60.0)).epsilon(1e-6));
}

TEST_CASE("cdf/pdf consistency and monotonicity at random parameters") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> shape_d(0.8, 8.0), scale_d(40.0, 180.0),
        t_d(5.0, 120.0);
    for (int i = 0; i < 20; ++i) {
        const PenetranceModel m{shape_d(rng), scale_d(rng)};
        const double t = t_d(rng);
        const double h = 1e-5 * t;
        const double fd = (m.cdf(t + h) - m.cdf(t - h)) / (2.0 * h);
        CHECK(fd == doctest::Approx(m.pdf(t)).epsilon(1e-6));
        // Strict monotonicity, except once the cdf has saturated to 1 in
        // double precision.
        if (m.cdf(t + 1.0) < 1.0)
            CHECK(m.cdf(t + 1.0) > m.cdf(t));
        else
            CHECK(m.cdf(t + 1.0) >= m.cdf(t));
    }
}

TEST_CASE("logit and inverse logit") {
    CHECK(logit(0.5) == 0.0);
    CHECK(inv_logit(0.0) == 0.5);
    CHECK(logit(0.253) == doctest::Approx(std::log(0.253 / 0.747)).epsilon(1e-12));
    CHECK(logit(0.253) == doctest::Approx(-1.0826).epsilon(1e-4));
    CHECK_THROWS_AS(logit(0.0), std::domain_error);
    CHECK_THROWS_AS(logit(1.0), std::domain_error);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.001, 0.999);
    for (int i = 0; i < 50; ++i) {
        const double p = u(rng);
        CHECK(inv_logit(logit(p)) == doctest::Approx(p).epsilon(1e-14));
    }
}

TEST_CASE("expectation under an age distribution") {
    const AgeDistribution q{63.0, 14.00726};
    // The integration range is clipped at age 0, dropping Phi(-63/14.00726)
    // ~ 3.4e-6 of normal mass; the expectation of a constant reflects that.
    CHECK(expect_under_age_dist([](double) { return 1.0; }, q) ==
          doctest::Approx(1.0).epsilon(1e-5));
    CHECK(expect_under_age_dist([](double a) { return a; }, q) ==
          doctest::Approx(63.0).epsilon(0.01 / 63.0));
    AgeDistribution degenerate;
    degenerate.sd = 0.0;
    CHECK_THROWS(expect_under_age_dist([](double) { return 1.0; }, degenerate));
}

TEST_CASE("quadrature matches Monte Carlo for the weibull density expectation") {
    const PenetranceModel model{4.55, 95.25};
    const AgeDistribution q{63.0, 14.00726};
    const double quad = expect_under_age_dist([&](double a) { return model.pdf(a); }, q);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> ages(q.mean, q.sd);
    const long n = 10'000'000;
    double sum = 0.0;
    for (long i = 0; i < n; ++i) {
        const double a = ages(rng);
        if (a >= 0.0) sum += model.pdf(a);
    }
    const double mc = sum / n;
    CHECK(quad == doctest::Approx(mc).epsilon(0.001));
}

TEST_CASE("quadrature within 3 MC standard errors over random integrands") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> shape_d(2.0, 6.0), scale_d(70.0, 150.0),
        mean_d(45.0, 75.0), sd_d(8.0, 18.0);
    for (int trial = 0; trial < 10; ++trial) {
        const PenetranceModel model{shape_d(rng), scale_d(rng)};
        const AgeDistribution q{mean_d(rng), sd_d(rng)};
        const double quad = expect_under_age_dist([&](double a) { return model.pdf(a); }, q);

        std::normal_distribution<double> ages(q.mean, q.sd);
        const long n = 1'000'000;
        double sum = 0.0, sumsq = 0.0;
        for (long i = 0; i < n; ++i) {
            const double a = ages(rng);
            const double v = a >= 0.0 ? model.pdf(a) : 0.0;
            sum += v;
            sumsq += v * v;
        }
        const double mc = sum / n;
        const double se = std::sqrt((sumsq / n - mc * mc) / n);
        CHECK(std::abs(quad - mc) < 3.0 * se);
    }
}

TEST_CASE("truncated weibull: analytic cdf and inverse-cdf sampling agree") {
    const TruncatedWeibull tw{3.65, 143.2426, 185.0};
    CHECK(tw.cdf(185.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tw.cdf(0.0) == 0.0);

    std::mt19937_64 rng(9);
    const long n = 1'000'000;
    std::vector<double> draws(n);
    for (auto& d : draws) d = tw.sample(rng);
    std::sort(draws.begin(), draws.end());
    double ks = 0.0;
    for (long i = 0; i < n; ++i) {
        const double f = tw.cdf(draws[i]);
        ks = std::max(ks, std::max(std::abs(f - static_cast<double>(i) / n),
                                   std::abs(f - static_cast<double>(i + 1) / n)));
    }
    CHECK(ks < 0.002);
}
