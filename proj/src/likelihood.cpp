#include "penmeta/likelihood.hpp"

#include <cmath>

namespace penmeta {

double expected_density(const PenetranceModel& theta, const AgeDistribution& q) {
    return expect_under_age_dist([&](double a) { return theta.pdf(a); }, q);
}

double expected_density(const BaselinePenetrance& baseline, const AgeDistribution& q) {
    return expect_under_age_dist([&](double a) { return baseline.pdf(a); }, q);
}

double rr_mean(const PenetranceModel& theta, const BaselinePenetrance& baseline,
               const AgeDistribution& q1, const AgeDistribution& q0) {
    const double num = expected_density(theta, q1);
    const double den = expected_density(baseline, q0);
    if (!(den > 0.0)) throw std::runtime_error("rr_mean: degenerate baseline integral");
    if (!(num > 0.0)) return kLogZero;
    return std::log(num) - std::log(den);
}

double sir_mean(const PenetranceModel& theta, const BaselinePenetrance& baseline,
                const AgeDistribution& q1, const AgeDistribution& q0, double prevalence) {
    if (!(prevalence > 0.0 && prevalence < 1.0))
        throw std::invalid_argument("sir_mean: prevalence must be in (0, 1)");
    const double num = expected_density(theta, q1);
    const double den0 = expected_density(baseline, q0);
    const double den = (1.0 - prevalence) * den0 + prevalence * num;
    if (!(den > 0.0)) throw std::runtime_error("sir_mean: degenerate denominator");
    if (!(num > 0.0)) return kLogZero;
    return std::log(num) - std::log(den);
}

double or_mean(const PenetranceModel& theta, const BaselinePenetrance& baseline,
               const AgeDistribution& qc1, const AgeDistribution& qc0,
               const AgeDistribution& qh1, const AgeDistribution& qh0) {
    const double case_num = expected_density(theta, qc1);
    const double case_den = expected_density(baseline, qc0);
    const double healthy_num =
        expect_under_age_dist([&](double a) { return 1.0 - theta.cdf(a); }, qh1);
    const double healthy_den =
        expect_under_age_dist([&](double a) { return 1.0 - baseline.cdf(a); }, qh0);
    if (!(case_den > 0.0) || !(healthy_den > 0.0) || !(healthy_num > 0.0))
        throw std::runtime_error("or_mean: degenerate integral");
    if (!(case_num > 0.0)) return kLogZero;
    return std::log(case_num) - std::log(case_den) - std::log(healthy_num) + std::log(healthy_den);
}

double loglik_penetrance(const PreparedStudy& study, const PenetranceModel& theta) {
    const int m = static_cast<int>(study.ages.size());
    Eigen::VectorXd resid(m);
    for (int k = 0; k < m; ++k) {
        const double f = theta.cdf(study.ages[k]);
        if (!(f > 0.0) || !(f < 1.0)) return kLogZero;
        resid[k] = study.logit_targets[k] - std::log(f / (1.0 - f));
    }
    const Eigen::VectorXd y = study.llt.matrixL().solve(resid);
    return study.log_norm_const - 0.5 * y.squaredNorm();
}

namespace {
double scalar_loglik(const PreparedStudy& study, double mean) {
    if (!std::isfinite(mean)) return kLogZero;
    return normal_log_pdf(study.log_estimate, mean, study.log_variance);
}
}  // namespace

double loglik_rr(const PreparedStudy& study, const PenetranceModel& theta,
                 const BaselinePenetrance& baseline) {
    return scalar_loglik(study, rr_mean(theta, baseline, study.q1, study.q0));
}

double loglik_sir(const PreparedStudy& study, const PenetranceModel& theta,
                  const BaselinePenetrance& baseline) {
    // Without a prevalence the rare-mutation reduction to the RR form applies.
    if (!study.carrier_prevalence) return loglik_rr(study, theta, baseline);
    return scalar_loglik(
        study, sir_mean(theta, baseline, study.q1, study.q0, *study.carrier_prevalence));
}

double loglik_or(const PreparedStudy& study, const PenetranceModel& theta,
                 const BaselinePenetrance& baseline) {
    return scalar_loglik(study,
                         or_mean(theta, baseline, study.qc, study.qc, study.gh, study.gh));
}

double study_loglik(const PreparedStudy& study, const PenetranceModel& theta,
                    const BaselinePenetrance& baseline) {
    switch (study.modality) {
        case Modality::Penetrance: return loglik_penetrance(study, theta);
        case Modality::RR: return loglik_rr(study, theta, baseline);
        case Modality::SIR: return loglik_sir(study, theta, baseline);
        case Modality::OR: return loglik_or(study, theta, baseline);
    }
    return kLogZero;
}

double total_loglik(const std::vector<PreparedStudy>& studies,
                    const std::vector<PenetranceModel>& thetas,
                    const BaselinePenetrance& baseline) {
    if (studies.size() != thetas.size())
        throw std::invalid_argument("total_loglik: one theta per study required");
    double acc = 0.0;
    for (size_t s = 0; s < studies.size(); ++s) {
        const double ll = study_loglik(studies[s], thetas[s], baseline);
        if (!std::isfinite(ll)) return kLogZero;
        acc += ll;
    }
    return acc;
}

}  // namespace penmeta
