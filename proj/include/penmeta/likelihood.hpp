#pragma once

#include <limits>
#include <vector>

#include "penmeta/baseline.hpp"
#include "penmeta/quadrature.hpp"
#include "penmeta/study.hpp"

namespace penmeta {

/// Degenerate likelihood values propagate as -inf; the sampler treats any
/// non-finite log target as an automatic reject.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

/// Age-weighted density expectation int f_theta(a) q(a) da.
double expected_density(const PenetranceModel& theta, const AgeDistribution& q);
double expected_density(const BaselinePenetrance& baseline, const AgeDistribution& q);

/// Mean of log RR implied by the model: log of the ratio of carrier to
/// non-carrier age-weighted onset densities.
double rr_mean(const PenetranceModel& theta, const BaselinePenetrance& baseline,
               const AgeDistribution& q1, const AgeDistribution& q0);

/// Mean of log SIR; the denominator mixes carriers and non-carriers by
/// prevalence. Reduces to rr_mean as prevalence -> 0.
double sir_mean(const PenetranceModel& theta, const BaselinePenetrance& baseline,
                const AgeDistribution& q1, const AgeDistribution& q0, double prevalence);

/// Mean of log OR: case-density ratio over control disease-free ratio.
double or_mean(const PenetranceModel& theta, const BaselinePenetrance& baseline,
               const AgeDistribution& qc1, const AgeDistribution& qc0,
               const AgeDistribution& qh1, const AgeDistribution& qh0);

double loglik_penetrance(const PreparedStudy& study, const PenetranceModel& theta);
double loglik_rr(const PreparedStudy& study, const PenetranceModel& theta,
                 const BaselinePenetrance& baseline);
double loglik_sir(const PreparedStudy& study, const PenetranceModel& theta,
                  const BaselinePenetrance& baseline);
double loglik_or(const PreparedStudy& study, const PenetranceModel& theta,
                 const BaselinePenetrance& baseline);

double study_loglik(const PreparedStudy& study, const PenetranceModel& theta,
                    const BaselinePenetrance& baseline);

double total_loglik(const std::vector<PreparedStudy>& studies,
                    const std::vector<PenetranceModel>& thetas, const BaselinePenetrance& baseline);

}  // namespace penmeta
