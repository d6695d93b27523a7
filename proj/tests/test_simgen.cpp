#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "penmeta/simgen.hpp"

using namespace penmeta;

namespace {

// Cohort with hand-picked case/control pools for deterministic 2x2 tables:
// when the requested sample equals the pool, sampling returns everyone.
SyntheticCohort manual_case_control_cohort(int case_carriers, int case_noncarriers,
                                           int control_carriers, int control_noncarriers) {
    SyntheticCohort c;
    auto add = [&](bool carrier, bool affected, double age) {
        const std::size_t i = c.carrier.size();
        c.carrier.push_back(carrier);
        c.affected.push_back(affected);
        c.observed_age.push_back(age);
        (carrier ? c.carriers : c.noncarriers).push_back(i);
        (affected ? c.cases : c.controls).push_back(i);
    };
    for (int i = 0; i < case_carriers; ++i) add(true, true, 50.0 + i);
    for (int i = 0; i < case_noncarriers; ++i) add(false, true, 55.0 + i);
    for (int i = 0; i < control_carriers; ++i) add(true, false, 60.0 + i);
    for (int i = 0; i < control_noncarriers; ++i) add(false, false, 65.0 + i);
    return c;
}

}  // namespace

TEST_CASE("simulation settings mirror the published study compositions") {
    const auto atm = atm_setting();
    CHECK(atm.plan.size() == 17);
    int pen = 0, rr = 0, orx = 0;
    for (const auto& e : atm.plan) {
        pen += e.modality == Modality::Penetrance;
        rr += e.modality == Modality::RR;
        orx += e.modality == Modality::OR;
    }
    CHECK(pen == 2);
    CHECK(rr == 5);
    CHECK(orx == 10);
    CHECK(atm.kappa_dist.mean == 4.55);
    CHECK(atm.kappa_dist.sd == 0.525);
    CHECK(atm.lambda_dist.mean == 95.25);
    CHECK(atm.lambda_dist.sd == 12.375);
    CHECK(atm.population_size == 2'000'000);
    CHECK(atm.carrier_prob == 0.01);

    const auto palb2 = palb2_setting();
    CHECK(palb2.plan.size() == 12);
    CHECK(palb2.kappa_dist.mean == 3.7);
    CHECK(palb2.lambda_dist.mean == 84.5);
}

TEST_CASE("study parameter generation") {
    auto setting = atm_setting();
    std::mt19937_64 rng(19);
    // Mean of 10^5 kappa draws recovers the generating mean.
    double sum_k = 0.0, sum_l = 0.0;
    const int reps = 100'000 / static_cast<int>(setting.plan.size()) + 1;
    long n = 0;
    for (int r = 0; r < reps; ++r) {
        for (const auto& [k, l] : generate_study_params(setting, rng)) {
            CHECK(k > 0.0);
            CHECK(l > 0.0);
            sum_k += k;
            sum_l += l;
            ++n;
        }
    }
    CHECK(sum_k / n == doctest::Approx(4.55).epsilon(0.01 / 4.55));
    CHECK(sum_l / n == doctest::Approx(95.25).epsilon(0.01));

    // Degenerate spread: every study identical.
    setting.kappa_dist.sd = 0.0;
    setting.lambda_dist.sd = 0.0;
    for (const auto& [k, l] : generate_study_params(setting, rng)) {
        CHECK(k == 4.55);
        CHECK(l == 95.25);
    }
}

TEST_CASE("kaplan-meier without censoring is the empirical cdf") {
    std::mt19937_64 rng(20);
    std::uniform_real_distribution<double> t_d(20.0, 90.0);
    const int n = 200;
    std::vector<double> observed(n);
    std::vector<std::uint8_t> event(n, 1);
    for (auto& t : observed) t = t_d(rng);

    const std::vector<double> queries{30.5, 50.5, 70.5, 89.5};
    const auto km = kaplan_meier_incidence(observed, event, queries);
    for (size_t q = 0; q < queries.size(); ++q) {
        long below = std::count_if(observed.begin(), observed.end(),
                                   [&](double t) { return t <= queries[q]; });
        CHECK(km.estimate[q] ==
              doctest::Approx(static_cast<double>(below) / n).epsilon(1e-12));
    }
    CHECK_THROWS(kaplan_meier_incidence({}, {}, queries));
    CHECK_THROWS(kaplan_meier_incidence({1.0}, {1, 0}, queries));
}

TEST_CASE("kaplan-meier large-n consistency under censoring") {
    const PenetranceModel model{4.55, 95.25};
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> censor(85.0, 10.0);
    const long n = 1'000'000;
    std::vector<double> observed(n);
    std::vector<std::uint8_t> event(n);
    for (long i = 0; i < n; ++i) {
        const double t = model.quantile(u01(rng));
        const double c = censor(rng);
        observed[i] = std::min({t, c, 95.0});
        event[i] = t <= std::min(c, 95.0);
    }
    const auto km = kaplan_meier_incidence(observed, event, {70.0});
    CHECK(std::abs(km.estimate[0] - model.cdf(70.0)) < 0.005);
}

TEST_CASE("simulated penetrance studies are valid monotone records") {
    const auto setting = atm_setting();
    std::mt19937_64 rng(24);
    long regenerated = 0;
    for (int i = 0; i < 5; ++i) {
        const auto r =
            simulate_penetrance_study(setting, 4.55, 95.25, 156, "pen", rng, &regenerated);
        r.validate();
        CHECK(r.modality == Modality::Penetrance);
        CHECK(r.ages == setting.ages);
        for (size_t k = 0; k < r.estimates.size(); ++k) {
            CHECK(r.ci_lower[k] > 0.0);
            CHECK(r.ci_upper[k] < 1.0);
            if (k > 0) CHECK(r.estimates[k] > r.estimates[k - 1]);
        }
        // Ingestion round trip: the logit variance implied by the emitted CI
        // is exactly what prepare_study will reconstruct.
        const auto p = prepare_study(r, PrepareOptions{.covariance_draws = 100'000});
        for (size_t k = 0; k < r.estimates.size(); ++k)
            CHECK(p.covariance(k, k) ==
                  doctest::Approx(variance_from_ci(r.ci_lower[k], r.ci_upper[k],
                                                   CiTransform::Logit))
                      .epsilon(1e-10));
    }
    CHECK_THROWS(simulate_penetrance_study(setting, 4.55, 95.25, 10, "small", rng, nullptr));
}

TEST_CASE("cohort generation matches its generative inputs") {
    const auto setting = atm_setting();
    std::mt19937_64 rng(26);
    const auto cohort = simulate_cohort(setting, 4.55, 95.25, rng);
    REQUIRE(cohort.carrier.size() == 2'000'000);
    CHECK(cohort.carriers.size() + cohort.noncarriers.size() == cohort.carrier.size());
    CHECK(cohort.cases.size() + cohort.controls.size() == cohort.carrier.size());

    const double frac =
        static_cast<double>(cohort.carriers.size()) / static_cast<double>(cohort.carrier.size());
    CHECK(std::abs(frac - 0.01) < 0.0002);

    // Carrier incidence, censoring handled by KM, matches the Weibull cdf
    // within 3 Greenwood SEs (CI half-width is ~1.96 SE).
    std::vector<double> obs1;
    std::vector<std::uint8_t> ev1;
    for (auto i : cohort.carriers) {
        obs1.push_back(cohort.observed_age[i]);
        ev1.push_back(cohort.affected[i]);
    }
    const PenetranceModel carrier_model{4.55, 95.25};
    const auto km1 = kaplan_meier_incidence(obs1, ev1, setting.ages);
    for (size_t k = 0; k < setting.ages.size(); ++k) {
        const double se = (km1.upper[k] - km1.lower[k]) / (2.0 * kZ975);
        CHECK(std::abs(km1.estimate[k] - carrier_model.cdf(setting.ages[k])) <
              3.0 * std::max(se, 1e-4));
    }

    // Non-carrier incidence by 80 matches the truncated-Weibull cdf.
    std::vector<double> obs0;
    std::vector<std::uint8_t> ev0;
    for (auto i : cohort.noncarriers) {
        obs0.push_back(cohort.observed_age[i]);
        ev0.push_back(cohort.affected[i]);
    }
    const auto km0 = kaplan_meier_incidence(obs0, ev0, {80.0});
    const double se0 = (km0.upper[0] - km0.lower[0]) / (2.0 * kZ975);
    CHECK(std::abs(km0.estimate[0] - setting.noncarrier_model.cdf(80.0)) < 3.0 * se0);

    auto tiny = setting;
    tiny.population_size = 5'000;
    CHECK_THROWS(simulate_cohort(tiny, 4.55, 95.25, rng));

    auto no_carriers = setting;
    no_carriers.population_size = 20'000;
    no_carriers.carrier_prob = 0.0;
    const auto all_noncarrier = simulate_cohort(no_carriers, 4.55, 95.25, rng);
    CHECK(all_noncarrier.carriers.empty());
}

TEST_CASE("null cohorts give RR and OR estimates centered at 1") {
    // Carrier model identical to the (effectively untruncated) non-carrier
    // model: log RR and log OR must average to ~0 over fresh cohorts.
    auto setting = atm_setting();
    setting.population_size = 50'000;
    setting.carrier_prob = 0.05;
    setting.noncarrier_model = TruncatedWeibull{3.65, 143.2426, 1e6};

    std::mt19937_64 rng(28);
    StudyPlanEntry rr_entry{Modality::RR, 1000};
    StudyPlanEntry or_entry{Modality::OR, 1000};
    const int draws = 100;
    double sum_rr = 0.0, ss_rr = 0.0, sum_or = 0.0, ss_or = 0.0;
    for (int i = 0; i < draws; ++i) {
        const auto cohort = simulate_cohort(setting, 3.65, 143.2426, rng);
        const double lr = std::log(sample_rr_study(cohort, rr_entry, "rr", rng).estimate());
        const double lo = std::log(sample_or_study(cohort, or_entry, "or", rng).estimate());
        sum_rr += lr;
        ss_rr += lr * lr;
        sum_or += lo;
        ss_or += lo * lo;
    }
    const double mean_rr = sum_rr / draws;
    const double se_rr = std::sqrt((ss_rr / draws - mean_rr * mean_rr) / draws);
    CHECK(std::abs(mean_rr) < 3.0 * se_rr);
    const double mean_or = sum_or / draws;
    const double se_or = std::sqrt((ss_or / draws - mean_or * mean_or) / draws);
    CHECK(std::abs(mean_or) < 3.0 * se_or);
}

TEST_CASE("RR study round trip and reporting flags") {
    auto setting = atm_setting();
    setting.population_size = 100'000;
    std::mt19937_64 rng(30);
    const auto cohort = simulate_cohort(setting, 4.55, 95.25, rng);

    StudyPlanEntry entry{Modality::RR, 919, true, true, false};
    const auto r = sample_rr_study(cohort, entry, "rr1", rng);
    r.validate();
    CHECK(r.modality == Modality::RR);
    CHECK(r.sample_size == 919);
    CHECK(r.onset_carriers.has_value());
    CHECK(r.onset_noncarriers.has_value());
    CHECK(r.onset_carriers->sd > 0.0);

    // The emitted CI encodes exactly the analytic SE of log RR.
    const double v = variance_from_ci(r.ci_lower[0], r.ci_upper[0], CiTransform::Log);
    CHECK(std::sqrt(v) > 0.0);
    CHECK(r.ci_lower[0] == doctest::Approx(r.estimate() * std::exp(-kZ975 * std::sqrt(v)))
                               .epsilon(1e-10));

    entry.report_onset_carriers = false;
    entry.report_onset_noncarriers = false;
    const auto bare = sample_rr_study(cohort, entry, "rr2", rng);
    CHECK(!bare.onset_carriers.has_value());
    CHECK(!bare.onset_noncarriers.has_value());
}

TEST_CASE("OR study: 2x2 arithmetic and the 0.5 continuity correction") {
    // Balanced table (10, 10, 10, 10): OR 1, log-SE sqrt(0.4).
    {
        const auto cohort = manual_case_control_cohort(10, 10, 10, 10);
        StudyPlanEntry entry{Modality::OR, 40, false, false, false};
        std::mt19937_64 rng(32);
        const auto r = sample_or_study(cohort, entry, "bal", rng);
        CHECK(r.estimate() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.ci_upper[0] ==
              doctest::Approx(std::exp(kZ975 * std::sqrt(0.4))).epsilon(1e-10));
    }

    // Zero cell (0 carrier cases): 0.5 added to every cell.
    {
        const auto cohort = manual_case_control_cohort(0, 20, 5, 15);
        StudyPlanEntry entry{Modality::OR, 40, false, false, true};
        std::mt19937_64 rng(33);
        const auto r = sample_or_study(cohort, entry, "zero", rng);
        CHECK(r.estimate() ==
              doctest::Approx((0.5 * 15.5) / (20.5 * 5.5)).epsilon(1e-12));
        // Matched ages: case summaries equal control summaries.
        REQUIRE(r.onset_cases.has_value());
        REQUIRE(r.inclusion_controls.has_value());
        CHECK(r.onset_cases->mean == r.inclusion_controls->mean);
        CHECK(r.onset_cases->sd == r.inclusion_controls->sd);
    }

    // No carriers at all: the OR carries no signal and sampling gives up.
    {
        const auto cohort = manual_case_control_cohort(0, 20, 0, 20);
        StudyPlanEntry entry{Modality::OR, 40, false, false, false};
        std::mt19937_64 rng(34);
        long resampled = 0;
        CHECK_THROWS(sample_or_study(cohort, entry, "nul", rng, &resampled));
        CHECK(resampled == 1000);
    }
}

TEST_CASE("true penetrance oracle") {
    std::mt19937_64 rng(36);
    const auto atm = true_penetrance_oracle(atm_setting(), {40, 50, 60, 70, 80}, 200'000, rng);
    const std::vector<double> atm_truth{0.026, 0.067, 0.141, 0.253, 0.398};
    for (size_t j = 0; j < atm_truth.size(); ++j)
        CHECK(std::abs(atm[j] - atm_truth[j]) < 0.002);

    const auto palb2 =
        true_penetrance_oracle(palb2_setting(), {40, 50, 60, 70, 80}, 200'000, rng);
    const std::vector<double> palb2_truth{0.066, 0.143, 0.257, 0.404, 0.565};
    for (size_t j = 0; j < palb2_truth.size(); ++j)
        CHECK(std::abs(palb2[j] - palb2_truth[j]) < 0.002);

    // Zero spread collapses to a single Weibull cdf.
    auto degenerate = atm_setting();
    degenerate.kappa_dist.sd = 0.0;
    degenerate.lambda_dist.sd = 0.0;
    const auto point = true_penetrance_oracle(degenerate, {60.0}, 1000, rng);
    CHECK(point[0] == doctest::Approx(PenetranceModel{4.55, 95.25}.cdf(60.0)).epsilon(1e-12));
}

TEST_CASE("RR/OR inversion to interval penetrance") {
    const std::vector<double> base{0.01, 0.02, 0.03, 0.05, 0.08};
    std::vector<double> cum_base;
    double t = 0.0;
    for (double p : base) cum_base.push_back(t += p);

    const auto rr1 = rr_or_to_penetrance(RiskMeasure::RR, 1.0, base);
    const auto or1 = rr_or_to_penetrance(RiskMeasure::OR, 1.0, base);
    for (size_t i = 0; i < base.size(); ++i) {
        CHECK(rr1[i] == doctest::Approx(cum_base[i]).epsilon(1e-12));
        CHECK(or1[i] == doctest::Approx(cum_base[i]).epsilon(1e-12));
    }

    const auto rr3 = rr_or_to_penetrance(RiskMeasure::RR, 3.0, base);
    for (size_t i = 0; i < base.size(); ++i)
        CHECK(rr3[i] == doctest::Approx(3.0 * cum_base[i]).epsilon(1e-12));

    // OR between RR and 1 effect: odds inflation is weaker than risk scaling.
    const auto or3 = rr_or_to_penetrance(RiskMeasure::OR, 3.0, base);
    for (size_t i = 0; i < base.size(); ++i) {
        CHECK(or3[i] > cum_base[i]);
        CHECK(or3[i] < rr3[i]);
    }

    // Huge OR drives each interval risk to 1; the cumulative curve caps.
    const auto extreme = rr_or_to_penetrance(RiskMeasure::OR, 1e12, base);
    CHECK(extreme.front() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(extreme.back() == 1.0);
}

TEST_CASE("weibull curve fitting on the cloglog scale") {
    const std::vector<double> ages{40, 50, 60, 70, 80};
    for (const PenetranceModel truth : {PenetranceModel{4.55, 95.25},
                                        PenetranceModel{3.65, 143.2426}}) {
        std::vector<double> risks;
        for (double a : ages) risks.push_back(truth.cdf(a));
        const auto fit = fit_weibull_to_curve(ages, risks);
        CHECK(fit.shape == doctest::Approx(truth.shape).epsilon(1e-4));
        CHECK(fit.scale == doctest::Approx(truth.scale).epsilon(1e-4));
    }

    // Two points determine the line exactly.
    const PenetranceModel m{2.5, 120.0};
    const auto two = fit_weibull_to_curve({45.0, 75.0}, {m.cdf(45.0), m.cdf(75.0)});
    CHECK(two.shape == doctest::Approx(m.shape).epsilon(1e-10));
    CHECK(two.scale == doctest::Approx(m.scale).epsilon(1e-10));

    CHECK_THROWS(fit_weibull_to_curve({40.0}, {0.1}));
    CHECK_THROWS(fit_weibull_to_curve({40.0, 50.0}, {0.2, 0.1}));
    CHECK_THROWS(fit_weibull_to_curve({40.0, 50.0}, {0.0, 0.1}));
}

TEST_CASE("replicate metrics") {
    const std::vector<double> ages{40, 60, 80};
    const std::vector<double> truth{0.03, 0.14, 0.40};

    // Perfect estimates: zero MSE, mean equals truth.
    std::vector<ReplicateEstimate> perfect(3);
    for (auto& r : perfect) {
        r.estimate = truth;
        r.lower = {0.0, 0.0, 0.0};
        r.upper = {1.0, 1.0, 1.0};
    }
    auto rows = evaluate_replicates(perfect, ages, truth);
    for (size_t j = 0; j < ages.size(); ++j) {
        CHECK(rows[j].mean_estimate == doctest::Approx(truth[j]).epsilon(1e-14));
        CHECK(rows[j].mse == 0.0);
        CHECK(rows[j].coverage == 1.0);
    }

    // Hand-computable mixed case, and permutation invariance.
    std::vector<ReplicateEstimate> mixed(2);
    mixed[0].estimate = {0.05, 0.14, 0.40};
    mixed[0].lower = {0.04, 0.10, 0.45};  // misses truth at 80
    mixed[0].upper = {0.06, 0.20, 0.55};
    mixed[1].estimate = {0.03, 0.10, 0.40};
    mixed[1].lower = {0.01, 0.05, 0.30};
    mixed[1].upper = {0.05, 0.15, 0.50};
    rows = evaluate_replicates(mixed, ages, truth);
    CHECK(rows[0].mean_estimate == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(rows[0].mse == doctest::Approx(0.5 * (0.02 * 0.02)).epsilon(1e-12));
    CHECK(rows[0].coverage == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rows[1].mse == doctest::Approx(0.5 * (0.04 * 0.04)).epsilon(1e-12));
    CHECK(rows[2].coverage == doctest::Approx(0.5).epsilon(1e-12));

    std::swap(mixed[0], mixed[1]);
    const auto swapped = evaluate_replicates(mixed, ages, truth);
    for (size_t j = 0; j < ages.size(); ++j) {
        CHECK(swapped[j].mse == rows[j].mse);
        CHECK(swapped[j].coverage == rows[j].coverage);
    }

    CHECK_THROWS(evaluate_replicates({perfect[0]}, ages, truth));
    CHECK_THROWS(evaluate_replicates(perfect, ages, {0.03, 0.14}));
}

TEST_CASE("replicate study generation follows the scenario reporting masks") {
    auto setting = atm_setting(1);
    setting.population_size = 50'000;  // desk-size cohorts for the unit test
    std::mt19937_64 rng(38);
    long regenerated = 0, resampled = 0;
    const auto studies = generate_replicate_studies(setting, rng, &regenerated, &resampled);
    REQUIRE(studies.size() == setting.plan.size());

    for (size_t i = 0; i < studies.size(); ++i) {
        studies[i].validate();
        CHECK(studies[i].modality == setting.plan[i].modality);
        CHECK(studies[i].sample_size == setting.plan[i].sample_size);
        if (studies[i].modality == Modality::RR) {
            CHECK(studies[i].onset_carriers.has_value() ==
                  setting.plan[i].report_onset_carriers);
            CHECK(studies[i].onset_noncarriers.has_value() ==
                  setting.plan[i].report_onset_noncarriers);
        }
        if (studies[i].modality == Modality::OR)
            CHECK(studies[i].onset_cases.has_value() ==
                  setting.plan[i].report_case_control_ages);
    }

    // Scenario 2 strips every age summary.
    auto blind = atm_setting(2);
    blind.population_size = 50'000;
    std::mt19937_64 rng2(39);
    for (const auto& s : generate_replicate_studies(blind, rng2)) {
        CHECK(!s.onset_carriers.has_value());
        CHECK(!s.onset_noncarriers.has_value());
        CHECK(!s.onset_cases.has_value());
        CHECK(!s.inclusion_controls.has_value());
    }
}
