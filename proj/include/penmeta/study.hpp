#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "penmeta/distributions.hpp"

namespace penmeta {

enum class Modality { Penetrance, RR, SIR, OR };

std::string to_string(Modality m);
Modality modality_from_string(const std::string& s);

/// One published study's reported risk estimate and supporting summaries.
struct StudyRecord {
    std::string id;
    Modality modality = Modality::RR;
    int sample_size = 0;

    // Penetrance modality: per-age vectors (strictly increasing ages).
    std::vector<double> ages;
    std::vector<double> estimates;
    std::vector<double> ci_lower;
    std::vector<double> ci_upper;

    // Scalar modalities reuse the first element of the three vectors above.
    double estimate() const { return estimates.at(0); }

    // Optional age summaries; names follow their role in the likelihood.
    std::optional<AgeDistribution> onset_carriers;      // q_1 (RR/SIR)
    std::optional<AgeDistribution> onset_noncarriers;   // q_0 (RR/SIR)
    std::optional<AgeDistribution> onset_cases;         // q_c (OR)
    std::optional<AgeDistribution> inclusion_controls;  // g_h (OR)

    std::optional<double> carrier_prevalence;  // SIR only; absent => RR reduction

    void validate() const;
};

/// z_{0.975}: half-width of a 95% normal interval in SD units.
inline constexpr double kZ975 = 1.959964;

/// Penetrance estimates from Kaplan-Meier output can hit 0 or 1 exactly;
/// clamp before logit so the likelihood stays finite.
inline constexpr double kProbClamp = 1e-6;

/// ((T(upper) - T(lower)) / (2 z))^2 with T = logit or log.
enum class CiTransform { Logit, Log };
double variance_from_ci(double lower, double upper, CiTransform transform);

/// Off-diagonals of the logit-scale covariance for a penetrance study:
/// draw independent normals per age, keep monotone-increasing joint draws,
/// take their sample covariances. Diagonal stays at the CI-derived values.
/// Result is projected to PSD by eigenvalue clipping if needed.
Eigen::MatrixXd covariance_matrix_from_cis(const StudyRecord& record, long draws, unsigned seed);

/// Nearest-PSD projection by clipping negative eigenvalues at zero.
Eigen::MatrixXd nearest_psd(const Eigen::MatrixXd& m);

/// Fill absent age summaries with the default; unify OR-study case/control
/// distributions (controls default to the case distribution when absent).
StudyRecord resolve_age_distributions(StudyRecord record, const AgeDistribution& fallback);

/// Default age-of-onset summary (SEER breast cancer).
inline AgeDistribution default_age_distribution() { return {63.0, 14.00726}; }

/// Study data transformed to likelihood scale, ready for repeated
/// evaluation inside the sampler.
struct PreparedStudy {
    std::string id;
    Modality modality = Modality::RR;

    // Penetrance modality.
    std::vector<double> ages;
    Eigen::VectorXd logit_targets;
    Eigen::MatrixXd covariance;      // W*
    Eigen::LLT<Eigen::MatrixXd> llt; // cached factor of W*
    double log_norm_const = 0.0;     // -(m/2) log 2pi - (1/2) log|W*|

    // Scalar modalities.
    double log_estimate = 0.0;
    double log_variance = 0.0;  // w_s*

    AgeDistribution q1{63.0, 14.00726}, q0{63.0, 14.00726};  // RR/SIR
    AgeDistribution qc{63.0, 14.00726}, gh{63.0, 14.00726};  // OR
    std::optional<double> carrier_prevalence;
};

struct PrepareOptions {
    long covariance_draws = 10'000'000;
    unsigned seed = 20240817;
    AgeDistribution fallback = default_age_distribution();
};

PreparedStudy prepare_study(const StudyRecord& record, const PrepareOptions& opts = {});
std::vector<PreparedStudy> prepare_studies(const std::vector<StudyRecord>& records,
                                           const PrepareOptions& opts = {});

// JSON array <-> records (schema documented in the README).
std::vector<StudyRecord> parse_studies_json(const std::string& text);
std::vector<StudyRecord> load_studies(const std::string& path);
std::string studies_to_json(const std::vector<StudyRecord>& records);

// CSV with columns id,modality,n,estimate,ci_lower,ci_upper[,...]; scalar
// modalities only.
std::vector<StudyRecord> parse_studies_csv(const std::string& text);

}  // namespace penmeta
