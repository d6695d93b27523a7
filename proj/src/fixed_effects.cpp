#include "penmeta/fixed_effects.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

namespace penmeta {

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> start, double step, double tol, int max_iter) {
    const size_t n = start.size();
    struct Vertex {
        std::vector<double> x;
        double v;
    };
    std::vector<Vertex> simplex;
    simplex.push_back({start, f(start)});
    for (size_t i = 0; i < n; ++i) {
        auto x = start;
        x[i] += step * std::max(1.0, std::abs(x[i]));
        simplex.push_back({x, f(x)});
    }
    auto by_value = [](const Vertex& a, const Vertex& b) { return a.v < b.v; };

    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
        std::sort(simplex.begin(), simplex.end(), by_value);
        if (std::abs(simplex.back().v - simplex.front().v) <
            tol * (std::abs(simplex.front().v) + tol)) {
            converged = true;
            break;
        }
        std::vector<double> centroid(n, 0.0);
        for (size_t j = 0; j < n; ++j) {
            for (size_t i = 0; i < n; ++i) centroid[i] += simplex[j].x[i];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        auto blend = [&](double t) {
            std::vector<double> x(n);
            for (size_t i = 0; i < n; ++i)
                x[i] = centroid[i] + t * (simplex.back().x[i] - centroid[i]);
            return x;
        };

        const auto reflected = blend(-1.0);
        const double fr = f(reflected);
        if (fr < simplex.front().v) {
            const auto expanded = blend(-2.0);
            const double fe = f(expanded);
            simplex.back() = fe < fr ? Vertex{expanded, fe} : Vertex{reflected, fr};
            continue;
        }
        if (fr < simplex[n - 1].v) {
            simplex.back() = {reflected, fr};
            continue;
        }
        const auto contracted = blend(0.5);
        const double fc = f(contracted);
        if (fc < simplex.back().v) {
            simplex.back() = {contracted, fc};
            continue;
        }
        for (size_t j = 1; j <= n; ++j) {  // shrink toward the best vertex
            for (size_t i = 0; i < n; ++i)
                simplex[j].x[i] = 0.5 * (simplex[j].x[i] + simplex[0].x[i]);
            simplex[j].v = f(simplex[j].x);
        }
    }
    std::sort(simplex.begin(), simplex.end(), by_value);
    return {simplex.front().x, simplex.front().v, converged};
}

namespace {

double shared_negloglik(const std::vector<PreparedStudy>& studies,
                        const BaselinePenetrance& baseline, double kappa, double lambda) {
    if (!(kappa > 0.0) || !(lambda > 0.0)) return 1e300;
    const PenetranceModel theta{kappa, lambda};
    double acc = 0.0;
    for (const auto& s : studies) {
        const double ll = study_loglik(s, theta, baseline);
        if (!std::isfinite(ll)) return 1e300;
        acc += ll;
    }
    return -acc;
}

}  // namespace

FixedEffectsFit fit_fixed_effects(const std::vector<PreparedStudy>& studies,
                                  const BaselinePenetrance& baseline,
                                  const std::vector<double>& ages) {
    if (studies.empty()) throw std::invalid_argument("fit_fixed_effects: need >= 1 study");

    auto objective = [&](const std::vector<double>& x) {
        return shared_negloglik(studies, baseline, x[0], x[1]);
    };

    const double kappa_starts[] = {2.0, 4.0, 6.0};
    const double lambda_starts[] = {70.0, 95.0, 130.0};
    SimplexResult best;
    best.value = 1e301;
    bool any_converged = false;
    for (double k0 : kappa_starts) {
        for (double l0 : lambda_starts) {
            const auto res = nelder_mead(objective, {k0, l0}, 0.1);
            any_converged = any_converged || res.converged;
            if (res.value < best.value) best = res;
        }
    }
    if (!any_converged || best.value >= 1e300)
        throw std::runtime_error("fit_fixed_effects: optimizer failed from all starts");

    FixedEffectsFit fit;
    fit.kappa_hat = best.x[0];
    fit.lambda_hat = best.x[1];
    fit.converged = true;
    fit.log_likelihood = -best.value;
    fit.ages = ages;
    const PenetranceModel theta{fit.kappa_hat, fit.lambda_hat};
    for (double a : ages) fit.penetrance.push_back(theta.cdf(a));
    return fit;
}

std::vector<FixedEffectsInterval> fixed_effects_intervals(const FixedEffectsFit& fit,
                                                          const std::vector<PreparedStudy>& studies,
                                                          const BaselinePenetrance& baseline,
                                                          const std::vector<double>& ages,
                                                          int draws, std::uint64_t seed) {
    if (!fit.converged) throw std::invalid_argument("fixed_effects_intervals: fit not converged");

    // Central finite-difference Hessian of the negative log-likelihood.
    const double k = fit.kappa_hat, l = fit.lambda_hat;
    const double hk = 1e-4 * std::max(1.0, std::abs(k));
    const double hl = 1e-4 * std::max(1.0, std::abs(l));
    auto nll = [&](double kk, double ll) { return shared_negloglik(studies, baseline, kk, ll); };
    const double f0 = nll(k, l);
    Eigen::Matrix2d hess;
    hess(0, 0) = (nll(k + hk, l) - 2.0 * f0 + nll(k - hk, l)) / (hk * hk);
    hess(1, 1) = (nll(k, l + hl) - 2.0 * f0 + nll(k, l - hl)) / (hl * hl);
    hess(0, 1) = hess(1, 0) =
        (nll(k + hk, l + hl) - nll(k + hk, l - hl) - nll(k - hk, l + hl) + nll(k - hk, l - hl)) /
        (4.0 * hk * hl);

    bool repaired = false;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(hess);
    Eigen::Vector2d ev = es.eigenvalues();
    if (ev.minCoeff() <= 0.0) {
        ev = ev.cwiseMax(1e-8);
        repaired = true;
    }
    // Covariance = H^-1; sample via H^-1/2.
    const Eigen::Matrix2d half_cov =
        es.eigenvectors() * ev.cwiseInverse().cwiseSqrt().asDiagonal();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z01;
    std::vector<std::vector<double>> samples(ages.size());
    for (int i = 0; i < draws; ++i) {
        const Eigen::Vector2d z{z01(rng), z01(rng)};
        const Eigen::Vector2d p = Eigen::Vector2d{k, l} + half_cov * z;
        if (!(p[0] > 0.0) || !(p[1] > 0.0)) continue;
        const PenetranceModel theta{p[0], p[1]};
        for (size_t j = 0; j < ages.size(); ++j) samples[j].push_back(theta.cdf(ages[j]));
    }

    std::vector<FixedEffectsInterval> out(ages.size());
    for (size_t j = 0; j < ages.size(); ++j) {
        auto& v = samples[j];
        if (v.size() < 100)
            throw std::runtime_error("fixed_effects_intervals: too few valid parameter draws");
        std::sort(v.begin(), v.end());
        auto quantile = [&](double p) {
            const double pos = p * (v.size() - 1);
            const size_t i = static_cast<size_t>(pos);
            const double frac = pos - i;
            return i + 1 < v.size() ? v[i] * (1.0 - frac) + v[i + 1] * frac : v[i];
        };
        out[j] = {ages[j], std::min(quantile(0.025), fit.penetrance[j]),
                  std::max(quantile(0.975), fit.penetrance[j]), repaired};
    }
    return out;
}

}  // namespace penmeta
