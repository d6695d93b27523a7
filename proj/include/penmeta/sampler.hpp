#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "penmeta/likelihood.hpp"

namespace penmeta {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

/// Uniform hyper-prior bounds on (a, b, c, d); defaults span a wide range of
/// plausible penetrance curves and carry over to most gene-cancer pairs.
struct HyperPriorConfig {
    Interval a{7.5, 27.5};
    Interval b{0.15, 0.25};
    Interval c{43.0, 63.0};
    Interval d{1.32, 2.02};
};

/// Full MCMC state: hyper-parameters plus study-level Weibull parameters.
struct HyperState {
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    std::vector<double> kappa;   // per-study shapes
    std::vector<double> lambda;  // per-study scales
};

double log_prior(const HyperState& state, const HyperPriorConfig& config);

struct McmcConfig {
    int iterations = 30'000;
    int burn_in = 15'000;
    int chains = 2;
    std::uint64_t seed = 1;
    int threads = 0;  // 0 => one thread per chain
    std::vector<double> ages{40.0, 50.0, 60.0, 70.0, 80.0};
    HyperPriorConfig prior;
};

/// Per-block acceptance bookkeeping.
struct AcceptanceStats {
    long kappa_accept = 0, kappa_total = 0;
    long lambda_accept = 0, lambda_total = 0;
    long hyper_accept = 0, hyper_total = 0;
    long refresh_accept = 0, refresh_total = 0;  // joint prior-refresh moves
};

struct ChainDraws {
    // Post-burn-in draws, one entry per retained iteration.
    std::vector<double> a, b, c, d;
    std::vector<double> kappa_consensus, lambda_consensus;   // a*b, c*d
    std::vector<std::vector<double>> penetrance;             // [iter][age]
    std::vector<std::vector<double>> kappa_study;            // [study][iter]
    std::vector<std::vector<double>> lambda_study;
    AcceptanceStats acceptance;
};

struct PosteriorDraws {
    std::vector<ChainDraws> chains;
    McmcConfig config;
    size_t study_count = 0;
};

/// Metropolis-within-Gibbs sweep order: kappa_1..kappa_S, lambda_1..lambda_S,
/// a, b, c, d, then one joint prior-refresh move per study (an independence
/// proposal from Gamma(a,b) x Gamma(c,d) that lets weakly identified
/// scalar-study parameters hop between likelihood basins). Chains run from
/// over-dispersed starts with sub-seeds derived from the master seed;
/// results are deterministic given the seed.
PosteriorDraws run_mcmc(const std::vector<PreparedStudy>& studies,
                        const BaselinePenetrance& baseline, const McmcConfig& config);

struct ConsensusRow {
    double age = 0.0;
    double mean = 0.0;
    double lower = 0.0;  // 2.5%
    double upper = 0.0;  // 97.5%
};

/// Pooled post-burn-in consensus penetrance with equal-tailed 95% intervals.
std::vector<ConsensusRow> consensus_penetrance(const PosteriorDraws& draws,
                                               const std::vector<double>& ages);

/// Potential scale reduction factor over >= 2 equal-length chains.
double gelman_rubin(const std::vector<std::vector<double>>& chains);

struct DiagnosticsEntry {
    std::string parameter;
    double gelman_rubin = 0.0;
};

std::vector<DiagnosticsEntry> compute_diagnostics(const PosteriorDraws& draws);

/// Columnar posterior dump: iteration, chain, a, b, c, d, kappa, lambda,
/// penetrance at each configured age.
std::string posterior_to_csv(const PosteriorDraws& draws);

// Internals exposed for the unit tests.
namespace detail {

/// Proposal variance schedules from the per-modality tuning rules
/// (log base 500 of the shifted current value).
double kappa_proposal_variance(Modality modality, double kappa);
double lambda_proposal_variance(Modality modality, double lambda);

struct MhResult {
    double value = 0.0;
    bool accepted = false;
};

/// One MH step for a study-level parameter with a Gamma proposal matched to
/// mean = current and the scheduled variance; the variance schedule is
/// re-evaluated at the proposed point for the reverse-move density, and the
/// asymmetric proposal ratio enters the acceptance probability.
template <class LogTarget, class VarianceSchedule>
MhResult mh_gamma_step(double current, const VarianceSchedule& variance_at,
                       const LogTarget& log_target, std::mt19937_64& rng) {
    MhResult out{current, false};
    const double fwd_var = variance_at(current);
    if (!(fwd_var > 0.0) || !(current > 0.0)) return out;  // invalid proposal: reject
    const double shape_fwd = current * current / fwd_var;
    const double scale_fwd = fwd_var / current;
    std::gamma_distribution<double> fwd(shape_fwd, scale_fwd);
    const double proposed = fwd(rng);
    if (!(proposed > 0.0)) return out;
    const double rev_var = variance_at(proposed);
    if (!(rev_var > 0.0)) return out;
    const double shape_rev = proposed * proposed / rev_var;
    const double scale_rev = rev_var / proposed;
    const double lt_prop = log_target(proposed);
    if (!std::isfinite(lt_prop)) return out;
    const double lt_cur = log_target(current);
    const double log_ratio = lt_prop - lt_cur +
                             gamma_log_pdf(current, shape_rev, scale_rev) -
                             gamma_log_pdf(proposed, shape_fwd, scale_fwd);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    if (std::log(u01(rng)) < log_ratio) {
        out.value = proposed;
        out.accepted = true;
    }
    return out;
}

/// One MH step with a boundary-clipped uniform window proposal. The clipped
/// window is asymmetric, so the ratio of window lengths enters the
/// acceptance probability.
template <class LogTarget>
MhResult mh_uniform_window_step(double current, double halfwidth, Interval bounds,
                                const LogTarget& log_target, std::mt19937_64& rng) {
    const double lo_cur = std::max(bounds.lo, current - halfwidth);
    const double hi_cur = std::min(current + halfwidth, bounds.hi);
    std::uniform_real_distribution<double> window(lo_cur, hi_cur);
    const double proposed = window(rng);
    const double lo_prop = std::max(bounds.lo, proposed - halfwidth);
    const double hi_prop = std::min(proposed + halfwidth, bounds.hi);
    const double lt_prop = log_target(proposed);
    MhResult out{current, false};
    if (!std::isfinite(lt_prop)) return out;
    const double log_ratio = lt_prop - log_target(current) +
                             std::log(hi_cur - lo_cur) - std::log(hi_prop - lo_prop);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    if (std::log(u01(rng)) < log_ratio) {
        out.value = proposed;
        out.accepted = true;
    }
    return out;
}

// Proposal window half-widths for a, b, c, d.
inline constexpr double kWindowA = 9.0;
inline constexpr double kWindowB = 0.04;
inline constexpr double kWindowC = 8.0;
inline constexpr double kWindowD = 0.22;

}  // namespace detail

}  // namespace penmeta
