#include "penmeta/simgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace penmeta {

namespace {

std::mt19937_64 sub_rng(std::uint64_t master, std::uint64_t stream) {
    std::seed_seq seq{master, stream};
    return std::mt19937_64(seq);
}

double positive_normal(const NormalSpec& spec, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(spec.mean, spec.sd);
    for (;;) {
        const double x = dist(rng);
        if (x > 0.0) return x;
    }
}

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

MeanSd mean_sd(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

/// Sample `count` indices from `pool`; without replacement when the pool is
/// large enough, with replacement otherwise.
std::vector<std::size_t> sample_indices(const std::vector<std::size_t>& pool, std::size_t count,
                                        std::mt19937_64& rng) {
    std::vector<std::size_t> out;
    out.reserve(count);
    if (count <= pool.size()) {
        std::vector<std::size_t> copy = pool;
        for (std::size_t i = 0; i < count; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, copy.size() - 1);
            std::swap(copy[i], copy[pick(rng)]);
            out.push_back(copy[i]);
        }
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (std::size_t i = 0; i < count; ++i) out.push_back(pool[pick(rng)]);
    }
    return out;
}

}  // namespace

SimulationSetting atm_setting(int scenario) {
    SimulationSetting s;
    s.name = "atm";
    s.scenario = scenario;
    s.kappa_dist = {4.55, 0.525};
    s.lambda_dist = {95.25, 12.375};
    auto pen = [](int n) { return StudyPlanEntry{Modality::Penetrance, n}; };
    auto rr = [](int n, bool q1, bool q0) { return StudyPlanEntry{Modality::RR, n, q1, q0, false}; };
    auto orx = [](int n, bool ages) { return StudyPlanEntry{Modality::OR, n, false, false, ages}; };
    s.plan = {
        pen(156),          pen(1160),
        rr(919, true, true),  rr(5173, true, true), rr(660, true, false),
        rr(712, true, false), rr(708, false, false),
        orx(95561, true),  orx(18292, true), orx(97997, true), orx(64791, true), orx(200, true),
        orx(193, false),   orx(2231, false), orx(2133, false), orx(298, false),  orx(603, false),
    };
    return s;
}

SimulationSetting palb2_setting(int scenario) {
    SimulationSetting s;
    s.name = "palb2";
    s.scenario = scenario;
    s.kappa_dist = {3.7, 0.35};
    s.lambda_dist = {84.5, 7.25};
    auto pen = [](int n) { return StudyPlanEntry{Modality::Penetrance, n}; };
    auto rr = [](int n, bool rep) { return StudyPlanEntry{Modality::RR, n, rep, rep, false}; };
    auto orx = [](int n, bool rep) { return StudyPlanEntry{Modality::OR, n, false, false, rep}; };
    s.plan = {
        pen(1000), pen(500), pen(1000), pen(500),
        rr(1000, true), rr(1800, true), rr(2500, false), rr(5000, false),
        orx(500, true), orx(1000, true), orx(3000, false), orx(5000, false),
    };
    return s;
}

std::vector<std::pair<double, double>> generate_study_params(const SimulationSetting& setting,
                                                             std::mt19937_64& rng) {
    std::vector<std::pair<double, double>> out;
    out.reserve(setting.plan.size());
    for (size_t i = 0; i < setting.plan.size(); ++i)
        out.emplace_back(positive_normal(setting.kappa_dist, rng),
                         positive_normal(setting.lambda_dist, rng));
    return out;
}

SyntheticCohort simulate_cohort(const SimulationSetting& setting, double kappa, double lambda,
                                std::mt19937_64& rng) {
    if (setting.population_size < 10'000)
        throw std::invalid_argument("simulate_cohort: population size below 10^4");
    const PenetranceModel carrier_model{kappa, lambda};
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> censor(setting.censoring.mean, setting.censoring.sd);

    SyntheticCohort c;
    const std::size_t n = static_cast<std::size_t>(setting.population_size);
    c.carrier.resize(n);
    c.affected.resize(n);
    c.observed_age.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool is_carrier = u01(rng) < setting.carrier_prob;
        const double event_time = is_carrier ? carrier_model.quantile(u01(rng))
                                             : setting.noncarrier_model.sample(rng);
        const double censor_time = censor(rng);
        const double observed = std::min({event_time, censor_time, setting.max_age});
        const bool affected = event_time <= std::min(censor_time, setting.max_age);
        c.carrier[i] = is_carrier;
        c.affected[i] = affected;
        c.observed_age[i] = observed;
        (is_carrier ? c.carriers : c.noncarriers).push_back(i);
        (affected ? c.cases : c.controls).push_back(i);
    }
    return c;
}

KaplanMeierCurve kaplan_meier_incidence(const std::vector<double>& observed,
                                        const std::vector<std::uint8_t>& event,
                                        const std::vector<double>& query_ages) {
    if (observed.size() != event.size() || observed.empty())
        throw std::invalid_argument("kaplan_meier_incidence: mismatched inputs");

    std::vector<std::size_t> order(observed.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return observed[i] < observed[j]; });

    KaplanMeierCurve curve;
    curve.ages = query_ages;
    curve.estimate.resize(query_ages.size());
    curve.lower.resize(query_ages.size());
    curve.upper.resize(query_ages.size());

    double survival = 1.0;
    double greenwood = 0.0;  // sum d / (n (n - d)), variance of log S
    std::size_t pos = 0;
    std::size_t at_risk = observed.size();
    size_t q = 0;

    auto record_up_to = [&](double age) {
        while (q < query_ages.size() && query_ages[q] < age) {
            curve.estimate[q] = 1.0 - survival;
            if (survival > 0.0 && survival < 1.0 && greenwood > 0.0) {
                // log(-log S) transform keeps the interval inside (0, 1).
                const double se = std::sqrt(greenwood) / std::abs(std::log(survival));
                const double theta = std::exp(kZ975 * se);
                const double s_lo = std::pow(survival, theta);
                const double s_hi = std::pow(survival, 1.0 / theta);
                curve.lower[q] = 1.0 - s_hi;
                curve.upper[q] = 1.0 - s_lo;
            } else {
                curve.lower[q] = curve.estimate[q];
                curve.upper[q] = curve.estimate[q];
            }
            ++q;
        }
    };

    while (pos < order.size()) {
        const double t = observed[order[pos]];
        record_up_to(t + 1e-12);
        std::size_t deaths = 0, leaving = 0;
        while (pos < order.size() && observed[order[pos]] == t) {
            deaths += event[order[pos]] ? 1 : 0;
            ++leaving;
            ++pos;
        }
        if (deaths > 0) {
            const double n = static_cast<double>(at_risk);
            const double d = static_cast<double>(deaths);
            survival *= 1.0 - d / n;
            if (at_risk > deaths) greenwood += d / (n * (n - d));
        }
        at_risk -= leaving;
        record_up_to(pos < order.size() ? observed[order[pos]] : 1e30);
    }
    return curve;
}

StudyRecord simulate_penetrance_study(const SimulationSetting& setting, double kappa,
                                      double lambda, int n, const std::string& id,
                                      std::mt19937_64& rng, long* regenerated) {
    if (n < 30) throw std::invalid_argument("simulate_penetrance_study: need n >= 30");
    const PenetranceModel model{kappa, lambda};
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> censor(setting.censoring.mean, setting.censoring.sd);

    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<double> observed(n);
        std::vector<std::uint8_t> event(n);
        for (int i = 0; i < n; ++i) {
            const double t = model.quantile(u01(rng));
            const double c = censor(rng);
            observed[i] = std::min({t, c, setting.max_age});
            event[i] = t <= std::min(c, setting.max_age);
        }
        const auto km = kaplan_meier_incidence(observed, event, setting.ages);

        bool valid = true;
        for (size_t k = 0; k < km.estimate.size() && valid; ++k) {
            valid = km.estimate[k] > 0.0 && km.estimate[k] < 1.0 &&
                    km.lower[k] < km.estimate[k] && km.estimate[k] < km.upper[k] &&
                    km.upper[k] < 1.0 && km.lower[k] > 0.0 &&
                    (k == 0 || km.estimate[k] > km.estimate[k - 1]);
        }
        if (!valid) {
            if (regenerated) ++*regenerated;
            continue;
        }
        StudyRecord r;
        r.id = id;
        r.modality = Modality::Penetrance;
        r.sample_size = n;
        r.ages = setting.ages;
        r.estimates = km.estimate;
        r.ci_lower = km.lower;
        r.ci_upper = km.upper;
        r.validate();
        return r;
    }
    throw std::runtime_error("simulate_penetrance_study: no valid study in 1000 attempts");
}

StudyRecord sample_rr_study(const SyntheticCohort& cohort, const StudyPlanEntry& entry,
                            const std::string& id, std::mt19937_64& rng, long* resampled) {
    const std::size_t n1 = static_cast<std::size_t>(entry.sample_size) / 2;
    const std::size_t n0 = static_cast<std::size_t>(entry.sample_size) - n1;
    if (cohort.carriers.empty() || cohort.noncarriers.empty())
        throw std::invalid_argument("sample_rr_study: cohort lacks carriers or non-carriers");

    for (int attempt = 0; attempt < 1000; ++attempt) {
        const auto carrier_sample = sample_indices(cohort.carriers, n1, rng);
        const auto noncarrier_sample = sample_indices(cohort.noncarriers, n0, rng);
        std::vector<double> onset1, onset0;
        for (auto i : carrier_sample)
            if (cohort.affected[i]) onset1.push_back(cohort.observed_age[i]);
        for (auto i : noncarrier_sample)
            if (cohort.affected[i]) onset0.push_back(cohort.observed_age[i]);
        if (onset1.size() < 2 || onset0.size() < 2) {
            if (resampled) ++*resampled;
            continue;
        }
        const double x1 = static_cast<double>(onset1.size());
        const double x0 = static_cast<double>(onset0.size());
        const double rr = (x1 / static_cast<double>(n1)) / (x0 / static_cast<double>(n0));
        const double se =
            std::sqrt(1.0 / x1 - 1.0 / static_cast<double>(n1) + 1.0 / x0 -
                      1.0 / static_cast<double>(n0));
        if (!(se > 0.0)) {
            if (resampled) ++*resampled;
            continue;
        }
        StudyRecord r;
        r.id = id;
        r.modality = Modality::RR;
        r.sample_size = entry.sample_size;
        r.estimates = {rr};
        r.ci_lower = {rr * std::exp(-kZ975 * se)};
        r.ci_upper = {rr * std::exp(kZ975 * se)};
        if (entry.report_onset_carriers) {
            const auto ms = mean_sd(onset1);
            r.onset_carriers = AgeDistribution{ms.mean, ms.sd};
        }
        if (entry.report_onset_noncarriers) {
            const auto ms = mean_sd(onset0);
            r.onset_noncarriers = AgeDistribution{ms.mean, ms.sd};
        }
        r.validate();
        return r;
    }
    throw std::runtime_error("sample_rr_study: no valid sample in 1000 attempts");
}

StudyRecord sample_or_study(const SyntheticCohort& cohort, const StudyPlanEntry& entry,
                            const std::string& id, std::mt19937_64& rng, long* resampled) {
    const std::size_t n_cases = static_cast<std::size_t>(entry.sample_size) / 2;
    const std::size_t n_controls = static_cast<std::size_t>(entry.sample_size) - n_cases;
    if (cohort.cases.empty() || cohort.controls.empty())
        throw std::invalid_argument("sample_or_study: cohort lacks cases or controls");

    for (int attempt = 0; attempt < 1000; ++attempt) {
        const auto case_sample = sample_indices(cohort.cases, n_cases, rng);
        const auto control_sample = sample_indices(cohort.controls, n_controls, rng);
        double a = 0, b = 0, c = 0, d = 0;  // carrier/non-carrier by case/control
        std::vector<double> control_ages;
        control_ages.reserve(n_controls);
        for (auto i : case_sample) (cohort.carrier[i] ? a : b) += 1.0;
        for (auto i : control_sample) {
            (cohort.carrier[i] ? c : d) += 1.0;
            control_ages.push_back(cohort.observed_age[i]);
        }
        if (a + c == 0.0) {  // no carriers anywhere: OR carries no signal
            if (resampled) ++*resampled;
            continue;
        }
        if (a == 0.0 || b == 0.0 || c == 0.0 || d == 0.0) {
            a += 0.5;
            b += 0.5;
            c += 0.5;
            d += 0.5;
        }
        const double odds_ratio = (a * d) / (b * c);
        const double se = std::sqrt(1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d);

        StudyRecord r;
        r.id = id;
        r.modality = Modality::OR;
        r.sample_size = entry.sample_size;
        r.estimates = {odds_ratio};
        r.ci_lower = {odds_ratio * std::exp(-kZ975 * se)};
        r.ci_upper = {odds_ratio * std::exp(kZ975 * se)};
        if (entry.report_case_control_ages && control_ages.size() >= 2) {
            // Cases are matched to controls: case summaries mirror controls'.
            const auto ms = mean_sd(control_ages);
            r.onset_cases = AgeDistribution{ms.mean, ms.sd};
            r.inclusion_controls = AgeDistribution{ms.mean, ms.sd};
        }
        r.validate();
        return r;
    }
    throw std::runtime_error("sample_or_study: no valid sample in 1000 attempts");
}

std::vector<double> true_penetrance_oracle(const SimulationSetting& setting,
                                           const std::vector<double>& ages, long n_outer,
                                           std::mt19937_64& rng) {
    std::vector<double> acc(ages.size(), 0.0);
    for (long i = 0; i < n_outer; ++i) {
        const PenetranceModel model{positive_normal(setting.kappa_dist, rng),
                                    positive_normal(setting.lambda_dist, rng)};
        for (size_t j = 0; j < ages.size(); ++j) acc[j] += model.cdf(ages[j]);
    }
    for (double& v : acc) v /= static_cast<double>(n_outer);
    return acc;
}

std::vector<double> rr_or_to_penetrance(RiskMeasure measure, double value,
                                        const std::vector<double>& baseline_interval_risks) {
    std::vector<double> cumulative;
    cumulative.reserve(baseline_interval_risks.size());
    double total = 0.0;
    for (double p0 : baseline_interval_risks) {
        double p1;
        if (measure == RiskMeasure::RR) {
            p1 = value * p0;
        } else {
            const double odds = value * p0 / (1.0 - p0);
            p1 = odds / (1.0 + odds);
        }
        p1 = std::min(p1, 1.0);  // OR/RR inversion can exceed 1 for extreme inputs
        total = std::min(total + p1, 1.0);
        cumulative.push_back(total);
    }
    return cumulative;
}

PenetranceModel fit_weibull_to_curve(const std::vector<double>& ages,
                                     const std::vector<double>& cumulative_risks) {
    if (ages.size() != cumulative_risks.size() || ages.size() < 2)
        throw std::invalid_argument("fit_weibull_to_curve: need >= 2 (age, risk) points");
    for (size_t i = 0; i < cumulative_risks.size(); ++i) {
        if (!(cumulative_risks[i] > 0.0 && cumulative_risks[i] < 1.0) ||
            (i > 0 && !(cumulative_risks[i] > cumulative_risks[i - 1])))
            throw std::invalid_argument("fit_weibull_to_curve: risks must increase within (0, 1)");
    }
    // log(-log(1 - F)) = shape * log t - shape * log scale
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(ages.size());
    for (size_t i = 0; i < ages.size(); ++i) {
        const double x = std::log(ages[i]);
        const double y = std::log(-std::log1p(-cumulative_risks[i]));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    return PenetranceModel{slope, std::exp(-intercept / slope)};
}

std::vector<MetricsRow> evaluate_replicates(const std::vector<ReplicateEstimate>& replicates,
                                            const std::vector<double>& ages,
                                            const std::vector<double>& truth) {
    if (replicates.size() < 2) throw std::invalid_argument("evaluate_replicates: need >= 2 replicates");
    if (truth.size() != ages.size())
        throw std::invalid_argument("evaluate_replicates: truth/age grids differ");
    for (const auto& r : replicates)
        if (r.estimate.size() != ages.size() || r.lower.size() != ages.size() ||
            r.upper.size() != ages.size())
            throw std::invalid_argument("evaluate_replicates: replicate age grid mismatch");

    std::vector<MetricsRow> out(ages.size());
    const double n = static_cast<double>(replicates.size());
    for (size_t j = 0; j < ages.size(); ++j) {
        double mean = 0.0, mse = 0.0, cover = 0.0;
        for (const auto& r : replicates) {
            mean += r.estimate[j];
            mse += (r.estimate[j] - truth[j]) * (r.estimate[j] - truth[j]);
            cover += (r.lower[j] <= truth[j] && truth[j] <= r.upper[j]) ? 1.0 : 0.0;
        }
        out[j] = {ages[j], mean / n, mse / n, cover / n};
    }
    return out;
}

std::vector<StudyRecord> generate_replicate_studies(const SimulationSetting& setting,
                                                    std::mt19937_64& rng, long* regenerated,
                                                    long* resampled) {
    const auto params = generate_study_params(setting, rng);
    std::vector<StudyRecord> studies;
    studies.reserve(setting.plan.size());
    for (size_t i = 0; i < setting.plan.size(); ++i) {
        StudyPlanEntry entry = setting.plan[i];
        if (setting.scenario == 2) {
            entry.report_onset_carriers = false;
            entry.report_onset_noncarriers = false;
            entry.report_case_control_ages = false;
        }
        const auto [kappa, lambda] = params[i];
        const std::string id = setting.name + "_s" + std::to_string(i + 1);
        switch (entry.modality) {
            case Modality::Penetrance:
                studies.push_back(simulate_penetrance_study(setting, kappa, lambda,
                                                            entry.sample_size, id, rng,
                                                            regenerated));
                break;
            case Modality::RR:
            case Modality::SIR: {
                const auto cohort = simulate_cohort(setting, kappa, lambda, rng);
                studies.push_back(sample_rr_study(cohort, entry, id, rng, resampled));
                break;
            }
            case Modality::OR: {
                const auto cohort = simulate_cohort(setting, kappa, lambda, rng);
                studies.push_back(sample_or_study(cohort, entry, id, rng, resampled));
                break;
            }
        }
    }
    return studies;
}

SimRunConfig SimRunConfig::desk_scale(std::uint64_t seed) {
    SimRunConfig cfg;
    cfg.replicates = 50;
    cfg.iterations = 6000;
    cfg.burn_in = 3000;
    cfg.chains = 2;
    cfg.covariance_draws = 1'000'000;
    cfg.seed = seed;
    return cfg;
}

SimulationResults run_simulation(const SimulationSetting& setting, const SimRunConfig& config) {
    SimulationResults results;
    results.ages = setting.ages;
    {
        auto rng = sub_rng(config.seed, 0);
        results.truth = true_penetrance_oracle(setting, setting.ages, 200'000, rng);
    }

    const BaselinePenetrance baseline = BaselinePenetrance::from_truncated_weibull(
        setting.noncarrier_model.shape, setting.noncarrier_model.scale,
        setting.noncarrier_model.truncation);

    results.bayesian.resize(config.replicates);
    results.fixed.resize(config.replicates);
    results.max_gelman_rubin.resize(config.replicates, 0.0);
    std::atomic<long> regenerated{0}, resampled{0};
    std::atomic<size_t> next{0};
    std::vector<std::exception_ptr> errors(config.replicates);

    auto run_one = [&](int r) {
        long regen = 0, resamp = 0;
        auto rng = sub_rng(config.seed, static_cast<std::uint64_t>(r) + 1);
        const auto records = generate_replicate_studies(setting, rng, &regen, &resamp);

        PrepareOptions opts;
        opts.covariance_draws = config.covariance_draws;
        opts.seed = static_cast<unsigned>(config.seed * 977 + r * 131071 + 7);
        const auto prepared = prepare_studies(records, opts);

        McmcConfig mcmc;
        mcmc.iterations = config.iterations;
        mcmc.burn_in = config.burn_in;
        mcmc.chains = config.chains;
        mcmc.seed = config.seed + 7919 * (static_cast<std::uint64_t>(r) + 1);
        mcmc.ages = setting.ages;
        mcmc.threads = 1;  // replicates already run in parallel
        const auto draws = run_mcmc(prepared, baseline, mcmc);

        const auto consensus = consensus_penetrance(draws, setting.ages);
        ReplicateEstimate bayes;
        for (const auto& row : consensus) {
            bayes.estimate.push_back(row.mean);
            bayes.lower.push_back(row.lower);
            bayes.upper.push_back(row.upper);
        }
        results.bayesian[r] = std::move(bayes);

        if (config.chains >= 2) {
            double worst = 0.0;
            for (const auto& diag : compute_diagnostics(draws))
                worst = std::max(worst, diag.gelman_rubin);
            results.max_gelman_rubin[r] = worst;
        }

        const auto fit = fit_fixed_effects(prepared, baseline, setting.ages);
        const auto intervals = fixed_effects_intervals(fit, prepared, baseline, setting.ages,
                                                       config.interval_draws, mcmc.seed + 13);
        ReplicateEstimate fixed;
        fixed.estimate = fit.penetrance;
        for (const auto& iv : intervals) {
            fixed.lower.push_back(iv.lower);
            fixed.upper.push_back(iv.upper);
        }
        results.fixed[r] = std::move(fixed);

        regenerated += regen;
        resampled += resamp;
    };

    const int threads = config.threads > 0
                            ? config.threads
                            : static_cast<int>(std::thread::hardware_concurrency());
    const int pool_size = std::max(1, std::min(threads, config.replicates));
    std::vector<std::thread> pool;
    for (int i = 0; i < pool_size; ++i)
        pool.emplace_back([&] {
            for (size_t r = next.fetch_add(1); r < static_cast<size_t>(config.replicates);
                 r = next.fetch_add(1)) {
                try {
                    run_one(static_cast<int>(r));
                } catch (...) {
                    errors[r] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    results.regenerated_studies = regenerated;
    results.resampled_studies = resampled;
    results.bayesian_metrics = evaluate_replicates(results.bayesian, setting.ages, results.truth);
    results.fixed_metrics = evaluate_replicates(results.fixed, setting.ages, results.truth);
    return results;
}

}  // namespace penmeta
