#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "penmeta/likelihood.hpp"

namespace penmeta {

struct FixedEffectsFit {
    double kappa_hat = 0.0;
    double lambda_hat = 0.0;
    std::vector<double> ages;
    std::vector<double> penetrance;  // Weibull(kappa_hat, lambda_hat) cdf at ages
    bool converged = false;
    double log_likelihood = 0.0;
};

/// Fixed-effects maximum likelihood: a single (kappa, lambda) shared by all
/// studies, optimized by Nelder-Mead simplex from a 3x3 grid of starts.
FixedEffectsFit fit_fixed_effects(const std::vector<PreparedStudy>& studies,
                                  const BaselinePenetrance& baseline,
                                  const std::vector<double>& ages);

struct FixedEffectsInterval {
    double age = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    bool hessian_repaired = false;
};

/// Per-age 95% intervals by parametric sampling from the asymptotic normal
/// approximation at the MLE (finite-difference Hessian, eigenvalue-clipped
/// to PSD when needed).
std::vector<FixedEffectsInterval> fixed_effects_intervals(const FixedEffectsFit& fit,
                                                          const std::vector<PreparedStudy>& studies,
                                                          const BaselinePenetrance& baseline,
                                                          const std::vector<double>& ages,
                                                          int draws, std::uint64_t seed);

/// Minimal Nelder-Mead on R^n; returns the best point found.
struct SimplexResult {
    std::vector<double> x;
    double value = 0.0;
    bool converged = false;
};
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> start, double step, double tol = 1e-10,
                          int max_iter = 2000);

}  // namespace penmeta
