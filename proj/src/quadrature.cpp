#include "penmeta/quadrature.hpp"

#include <cmath>

namespace penmeta {

namespace {

struct GaussLegendre64 {
    std::array<double, 64> nodes{};
    std::array<double, 64> weights{};

    // Roots of P_64 by Newton iteration from the Chebyshev initial guess.
    GaussLegendre64() {
        constexpr int n = 64;
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            const double w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
    }
};

const GaussLegendre64& rule() {
    static const GaussLegendre64 r;
    return r;
}

}  // namespace

const std::array<double, 64>& gauss_legendre_nodes() { return rule().nodes; }
const std::array<double, 64>& gauss_legendre_weights() { return rule().weights; }

double integrate(const std::function<double(double)>& f, double lo, double hi) {
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    const auto& x = rule().nodes;
    const auto& w = rule().weights;
    double acc = 0.0;
    for (int i = 0; i < 64; ++i) acc += w[i] * f(mid + half * x[i]);
    return half * acc;
}

double expect_under_age_dist(const std::function<double(double)>& f, const AgeDistribution& q) {
    if (!(q.sd > 0.0)) throw std::invalid_argument("expect_under_age_dist: degenerate age distribution");
    const double lo = std::max(0.0, q.mean - 8.0 * q.sd);
    const double hi = q.mean + 8.0 * q.sd;
    return integrate([&](double a) { return f(a) * q.pdf(a); }, lo, hi);
}

}  // namespace penmeta
