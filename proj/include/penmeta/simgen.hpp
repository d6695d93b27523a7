#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "penmeta/fixed_effects.hpp"
#include "penmeta/sampler.hpp"
#include "penmeta/study.hpp"

namespace penmeta {

struct NormalSpec {
    double mean = 0.0;
    double sd = 1.0;
};

/// One planned study in a simulation replicate. Reporting flags implement
/// Scenario 1 (partial age-summary reporting); Scenario 2 clears them all.
struct StudyPlanEntry {
    Modality modality = Modality::RR;
    int sample_size = 0;
    bool report_onset_carriers = false;     // q_1 (RR)
    bool report_onset_noncarriers = false;  // q_0 (RR)
    bool report_case_control_ages = false;  // q_c / g_h (OR)
};

struct SimulationSetting {
    std::string name;
    NormalSpec kappa_dist;
    NormalSpec lambda_dist;
    std::vector<StudyPlanEntry> plan;
    int scenario = 1;
    long population_size = 2'000'000;
    double carrier_prob = 0.01;
    TruncatedWeibull noncarrier_model{3.65, 143.2426, 185.0};
    NormalSpec censoring{85.0, 10.0};
    double max_age = 95.0;
    std::vector<double> ages{40.0, 50.0, 60.0, 70.0, 80.0};
};

/// Study plans follow the published study compositions the settings are
/// modeled on (2 penetrance / 5 RR / 10 OR for ATM; 4 / 4 / 4 for PALB2).
SimulationSetting atm_setting(int scenario = 1);
SimulationSetting palb2_setting(int scenario = 1);

/// Per-study Weibull parameters, redrawn on nonpositive values.
std::vector<std::pair<double, double>> generate_study_params(const SimulationSetting& setting,
                                                             std::mt19937_64& rng);

/// Simulated carrier/non-carrier population; struct-of-arrays.
struct SyntheticCohort {
    std::vector<std::uint8_t> carrier;
    std::vector<std::uint8_t> affected;
    std::vector<double> observed_age;

    std::vector<std::size_t> carriers, noncarriers;  // index lists
    std::vector<std::size_t> cases, controls;
};

SyntheticCohort simulate_cohort(const SimulationSetting& setting, double kappa, double lambda,
                                std::mt19937_64& rng);

/// Kaplan-Meier estimate of cumulative incidence at query ages, with
/// Greenwood-variance 95% CIs on the log(-log) scale.
struct KaplanMeierCurve {
    std::vector<double> ages;
    std::vector<double> estimate;  // 1 - S(age)
    std::vector<double> lower, upper;
};
KaplanMeierCurve kaplan_meier_incidence(const std::vector<double>& observed,
                                        const std::vector<std::uint8_t>& event,
                                        const std::vector<double>& query_ages);

/// Carrier-only penetrance study: Weibull event times, normal censoring,
/// administrative cutoff at max_age; regenerated (and counted) when the KM
/// estimates are not strictly increasing probabilities at all query ages.
StudyRecord simulate_penetrance_study(const SimulationSetting& setting, double kappa,
                                      double lambda, int n, const std::string& id,
                                      std::mt19937_64& rng, long* regenerated = nullptr);

/// RR study from a cohort: affected proportions in sampled carrier and
/// non-carrier arms. Subsampling falls back to with-replacement when a
/// stratum is smaller than requested.
StudyRecord sample_rr_study(const SyntheticCohort& cohort, const StudyPlanEntry& entry,
                            const std::string& id, std::mt19937_64& rng,
                            long* resampled = nullptr);

/// OR study from a cohort: 2x2 carrier-by-case table from sampled cases and
/// controls, 0.5 added to each cell when any cell is zero. Reported case age
/// summaries are matched to the control summaries.
StudyRecord sample_or_study(const SyntheticCohort& cohort, const StudyPlanEntry& entry,
                            const std::string& id, std::mt19937_64& rng,
                            long* resampled = nullptr);

/// Mean Weibull cdf over the (kappa, lambda) generating distribution;
/// the per-age truth the simulation estimates are scored against.
std::vector<double> true_penetrance_oracle(const SimulationSetting& setting,
                                           const std::vector<double>& ages, long n_outer,
                                           std::mt19937_64& rng);

/// Carrier interval risks implied by a constant RR or OR applied to baseline
/// interval risks; returns the cumulative curve at each interval's right edge.
enum class RiskMeasure { RR, OR };
std::vector<double> rr_or_to_penetrance(RiskMeasure measure, double value,
                                        const std::vector<double>& baseline_interval_risks);

/// Least-squares Weibull fit on the log(-log(1-F)) = k (log t - log lambda)
/// scale.
PenetranceModel fit_weibull_to_curve(const std::vector<double>& ages,
                                     const std::vector<double>& cumulative_risks);

struct ReplicateEstimate {
    std::vector<double> estimate, lower, upper;  // per age
};

struct MetricsRow {
    double age = 0.0;
    double mean_estimate = 0.0;
    double mse = 0.0;
    double coverage = 0.0;
};

std::vector<MetricsRow> evaluate_replicates(const std::vector<ReplicateEstimate>& replicates,
                                            const std::vector<double>& ages,
                                            const std::vector<double>& truth);

struct SimRunConfig {
    int replicates = 500;
    int iterations = 30'000;
    int burn_in = 15'000;
    int chains = 2;
    long covariance_draws = 10'000'000;
    std::uint64_t seed = 1;
    int threads = 0;  // 0 => hardware concurrency
    int interval_draws = 4000;

    /// Desk-scale preset: 50 replicates, 200k cohort, 6k/3k iterations.
    static SimRunConfig desk_scale(std::uint64_t seed);
};

struct SimulationResults {
    std::vector<double> ages;
    std::vector<double> truth;
    std::vector<ReplicateEstimate> bayesian, fixed;
    std::vector<MetricsRow> bayesian_metrics, fixed_metrics;
    std::vector<double> max_gelman_rubin;  // per replicate
    long regenerated_studies = 0;
    long resampled_studies = 0;
};

/// Full simulation study: generates replicates in parallel (per-replicate
/// sub-seeds, deterministic aggregation order) and scores both methods.
SimulationResults run_simulation(const SimulationSetting& setting, const SimRunConfig& config);

/// One replicate's simulated study set (exposed for tests and the CLI).
std::vector<StudyRecord> generate_replicate_studies(const SimulationSetting& setting,
                                                    std::mt19937_64& rng,
                                                    long* regenerated = nullptr,
                                                    long* resampled = nullptr);

}  // namespace penmeta
