// penmeta: Bayesian random-effects meta-analysis of cancer penetrance from
// published penetrance curves, RR, SIR, and OR estimates, plus a fixed-effects
// baseline and a simulation harness.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "penmeta/fixed_effects.hpp"
#include "penmeta/sampler.hpp"
#include "penmeta/simgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace penmeta;

namespace {

constexpr const char* kVersion = "penmeta 0.1.0";

int default_threads() {
    if (const char* env = std::getenv("PENMETA_THREADS")) {
        const int t = std::atoi(env);
        if (t > 0) return t;
    }
    return 0;  // library default: one thread per chain / hardware concurrency
}

/// Write-to-temp + atomic rename so failed runs never leave partial files.
void write_file(const fs::path& path, const std::string& contents) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << contents;
    }
    fs::rename(tmp, path);
}

BaselinePenetrance parse_baseline(const std::string& spec) {
    auto parse_params = [&](const std::string& body, size_t expected) {
        std::vector<double> params;
        std::istringstream ss(body);
        std::string cell;
        while (std::getline(ss, cell, ',')) params.push_back(std::stod(cell));
        if (params.size() != expected)
            throw std::invalid_argument("baseline '" + spec + "': expected " +
                                        std::to_string(expected) + " parameters");
        return params;
    };
    if (spec.rfind("weibull:", 0) == 0) {
        const auto p = parse_params(spec.substr(8), 2);
        return BaselinePenetrance::from_weibull(p[0], p[1]);
    }
    if (spec.rfind("trunc-weibull:", 0) == 0) {
        const auto p = parse_params(spec.substr(14), 3);
        return BaselinePenetrance::from_truncated_weibull(p[0], p[1], p[2]);
    }
    return BaselinePenetrance::from_csv(spec);
}

SimulationSetting parse_preset(const std::string& preset, int scenario) {
    if (preset == "atm") return atm_setting(scenario);
    if (preset == "palb2") return palb2_setting(scenario);
    throw std::invalid_argument("unknown preset '" + preset + "' (use atm or palb2)");
}

std::string format_csv_cell(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

void write_manifest(const fs::path& out_dir, const std::string& command, const json& config) {
    json manifest{{"tool", kVersion}, {"command", command}, {"config", config}};
    write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

std::string consensus_csv(const std::string& method, const std::vector<ConsensusRow>& rows) {
    std::ostringstream os;
    os << "method,age,mean,lower,upper\n";
    for (const auto& r : rows)
        os << method << ',' << format_csv_cell(r.age) << ',' << format_csv_cell(r.mean) << ','
           << format_csv_cell(r.lower) << ',' << format_csv_cell(r.upper) << "\n";
    return os.str();
}

std::vector<StudyRecord> load_required_studies(const std::string& path) {
    const auto records = load_studies(path);
    if (records.empty()) throw std::runtime_error("no studies in " + path);
    return records;
}

struct CommonMcmcOptions {
    std::string studies_path;
    std::string baseline_spec = "trunc-weibull:3.65,143.2426,185";
    std::vector<double> ages{40, 50, 60, 70, 80};
    int iterations = 30'000;
    int burn_in = 15'000;
    int chains = 2;
    std::uint64_t seed = 1;
    long covariance_draws = 10'000'000;
    int threads = default_threads();
    std::string out_dir;
};

void add_common_flags(CLI::App* cmd, CommonMcmcOptions& opt, bool with_mcmc) {
    cmd->add_option("--studies", opt.studies_path, "Study file (.json or .csv)")->required();
    cmd->add_option("--baseline", opt.baseline_spec,
                    "Non-carrier baseline: CSV path, weibull:SHAPE,SCALE, or "
                    "trunc-weibull:SHAPE,SCALE,TRUNC");
    cmd->add_option("--ages", opt.ages, "Ages at which penetrance is reported");
    cmd->add_option("--seed", opt.seed, "RNG seed");
    cmd->add_option("--cov-draws", opt.covariance_draws,
                    "Monte Carlo draws for penetrance-study covariance reconstruction");
    cmd->add_option("--threads", opt.threads, "Worker threads (default: PENMETA_THREADS)");
    cmd->add_option("--out", opt.out_dir, "Output directory")->required();
    if (with_mcmc) {
        cmd->add_option("--iters", opt.iterations, "MCMC iterations per chain");
        cmd->add_option("--burnin", opt.burn_in, "Burn-in iterations");
        cmd->add_option("--chains", opt.chains, "Number of chains");
    }
}

json common_config_json(const CommonMcmcOptions& opt) {
    return json{{"studies", opt.studies_path}, {"baseline", opt.baseline_spec},
                {"ages", opt.ages},           {"seed", opt.seed},
                {"cov_draws", opt.covariance_draws}, {"threads", opt.threads}};
}

int run_meta(const CommonMcmcOptions& opt) {
    const auto records = load_required_studies(opt.studies_path);
    const auto baseline = parse_baseline(opt.baseline_spec);

    PrepareOptions prep;
    prep.covariance_draws = opt.covariance_draws;
    prep.seed = static_cast<unsigned>(opt.seed);
    const auto studies = prepare_studies(records, prep);

    McmcConfig config;
    config.iterations = opt.iterations;
    config.burn_in = opt.burn_in;
    config.chains = opt.chains;
    config.seed = opt.seed;
    config.threads = opt.threads;
    config.ages = opt.ages;
    const auto draws = run_mcmc(studies, baseline, config);
    const auto consensus = consensus_penetrance(draws, opt.ages);

    std::ostringstream diag;
    diag << "parameter,gelman_rubin\n";
    if (config.chains >= 2) {
        diag.precision(10);
        for (const auto& e : compute_diagnostics(draws))
            diag << e.parameter << ',' << e.gelman_rubin << "\n";
    }

    std::ostringstream acc;
    acc << "chain,block,accepted,proposed\n";
    for (size_t c = 0; c < draws.chains.size(); ++c) {
        const auto& a = draws.chains[c].acceptance;
        acc << c << ",kappa," << a.kappa_accept << ',' << a.kappa_total << "\n"
            << c << ",lambda," << a.lambda_accept << ',' << a.lambda_total << "\n"
            << c << ",hyper," << a.hyper_accept << ',' << a.hyper_total << "\n"
            << c << ",refresh," << a.refresh_accept << ',' << a.refresh_total << "\n";
    }

    fs::create_directories(opt.out_dir);
    const fs::path out(opt.out_dir);
    write_file(out / "consensus.csv", consensus_csv("bayes", consensus));
    write_file(out / "posterior.csv", posterior_to_csv(draws));
    write_file(out / "diagnostics.csv", diag.str());
    write_file(out / "acceptance.csv", acc.str());

    json config_json = common_config_json(opt);
    config_json["iters"] = opt.iterations;
    config_json["burnin"] = opt.burn_in;
    config_json["chains"] = opt.chains;
    write_manifest(out, "meta", config_json);

    for (const auto& row : consensus)
        std::printf("age %g: %.4f (%.4f - %.4f)\n", row.age, row.mean, row.lower, row.upper);
    return 0;
}

int run_fixed(const CommonMcmcOptions& opt, int interval_draws) {
    const auto records = load_required_studies(opt.studies_path);
    const auto baseline = parse_baseline(opt.baseline_spec);

    PrepareOptions prep;
    prep.covariance_draws = opt.covariance_draws;
    prep.seed = static_cast<unsigned>(opt.seed);
    const auto studies = prepare_studies(records, prep);

    const auto fit = fit_fixed_effects(studies, baseline, opt.ages);
    const auto intervals =
        fixed_effects_intervals(fit, studies, baseline, opt.ages, interval_draws, opt.seed);

    std::vector<ConsensusRow> rows(opt.ages.size());
    for (size_t j = 0; j < opt.ages.size(); ++j)
        rows[j] = {opt.ages[j], fit.penetrance[j], intervals[j].lower, intervals[j].upper};

    fs::create_directories(opt.out_dir);
    const fs::path out(opt.out_dir);
    write_file(out / "consensus.csv", consensus_csv("fixed", rows));

    json config_json = common_config_json(opt);
    config_json["interval_draws"] = interval_draws;
    config_json["kappa_hat"] = fit.kappa_hat;
    config_json["lambda_hat"] = fit.lambda_hat;
    config_json["log_likelihood"] = fit.log_likelihood;
    write_manifest(out, "fixed", config_json);

    for (const auto& row : rows)
        std::printf("age %g: %.4f (%.4f - %.4f)\n", row.age, row.mean, row.lower, row.upper);
    return 0;
}

struct SimulateOptions {
    std::string preset = "atm";
    int scenario = 1;
    bool desk_scale = false;
    int replicates = 500;
    long population = 0;  // 0 => preset default (desk scale overrides)
    SimRunConfig config;
    std::string out_dir;
};

int run_simulate(const SimulateOptions& opt) {
    SimulationSetting setting = parse_preset(opt.preset, opt.scenario);
    SimRunConfig config = opt.config;
    if (opt.desk_scale) {
        const auto desk = SimRunConfig::desk_scale(opt.config.seed);
        config.replicates = desk.replicates;
        config.iterations = desk.iterations;
        config.burn_in = desk.burn_in;
        config.chains = desk.chains;
        config.covariance_draws = desk.covariance_draws;
        setting.population_size = 200'000;
    } else {
        config.replicates = opt.replicates;
    }
    if (opt.population > 0) setting.population_size = opt.population;

    const auto results = run_simulation(setting, config);

    std::ostringstream rows;
    rows.precision(10);
    rows << "replicate,method,age,estimate,lower,upper\n";
    auto emit = [&](const char* method, const std::vector<ReplicateEstimate>& reps) {
        for (size_t r = 0; r < reps.size(); ++r)
            for (size_t j = 0; j < results.ages.size(); ++j)
                rows << r << ',' << method << ',' << results.ages[j] << ','
                     << reps[r].estimate[j] << ',' << reps[r].lower[j] << ','
                     << reps[r].upper[j] << "\n";
    };
    emit("bayes", results.bayesian);
    emit("fixed", results.fixed);

    std::ostringstream summary;
    summary.precision(10);
    summary << "method,age,mean_estimate,mse,coverage\n";
    auto emit_metrics = [&](const char* method, const std::vector<MetricsRow>& metrics) {
        for (const auto& m : metrics)
            summary << method << ',' << m.age << ',' << m.mean_estimate << ',' << m.mse << ','
                    << m.coverage << "\n";
    };
    emit_metrics("bayes", results.bayesian_metrics);
    emit_metrics("fixed", results.fixed_metrics);

    std::ostringstream truth;
    truth.precision(10);
    truth << "age,penetrance\n";
    for (size_t j = 0; j < results.ages.size(); ++j)
        truth << results.ages[j] << ',' << results.truth[j] << "\n";

    std::ostringstream diag;
    diag.precision(10);
    diag << "replicate,max_gelman_rubin\n";
    for (size_t r = 0; r < results.max_gelman_rubin.size(); ++r)
        diag << r << ',' << results.max_gelman_rubin[r] << "\n";

    fs::create_directories(opt.out_dir);
    const fs::path out(opt.out_dir);
    write_file(out / "results.csv", rows.str());
    write_file(out / "summary.csv", summary.str());
    write_file(out / "truth.csv", truth.str());
    write_file(out / "diagnostics.csv", diag.str());

    write_manifest(out, "simulate",
                   json{{"preset", opt.preset},
                        {"scenario", opt.scenario},
                        {"desk_scale", opt.desk_scale},
                        {"replicates", config.replicates},
                        {"population", setting.population_size},
                        {"iters", config.iterations},
                        {"burnin", config.burn_in},
                        {"chains", config.chains},
                        {"cov_draws", config.covariance_draws},
                        {"seed", config.seed},
                        {"threads", config.threads},
                        {"regenerated_studies", results.regenerated_studies},
                        {"resampled_studies", results.resampled_studies}});

    std::printf("%s", summary.str().c_str());
    return 0;
}

int run_oracle(const std::string& preset, const std::vector<double>& ages, long draws,
               std::uint64_t seed, const std::string& out_dir) {
    const auto setting = parse_preset(preset, 1);
    std::mt19937_64 rng(seed);
    const auto truth = true_penetrance_oracle(setting, ages, draws, rng);

    std::ostringstream os;
    os.precision(10);
    os << "age,penetrance\n";
    for (size_t j = 0; j < ages.size(); ++j) os << ages[j] << ',' << truth[j] << "\n";

    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "oracle.csv", os.str());
    write_manifest(out_dir, "oracle",
                   json{{"preset", preset}, {"ages", ages}, {"draws", draws}, {"seed", seed}});
    std::printf("%s", os.str().c_str());
    return 0;
}

struct PlotdataOptions {
    std::string studies_path;
    std::string baseline_spec = "trunc-weibull:3.65,143.2426,185";
    std::string consensus_path;  // optional consensus.csv to re-emit as a series
    double grid_start = 20.0;
    double grid_stop = 90.0;
    std::string out_dir;
};

int run_plotdata(const PlotdataOptions& opt) {
    const auto records = load_required_studies(opt.studies_path);
    const auto baseline = parse_baseline(opt.baseline_spec);

    std::vector<double> grid;
    for (double a = opt.grid_start; a <= opt.grid_stop + 1e-9; a += 1.0) grid.push_back(a);

    // Baseline cumulative risks at the grid's right edges; interval risks
    // feed the RR/OR inversion for scalar studies.
    std::vector<double> base_intervals;
    for (size_t i = 0; i + 1 < grid.size(); ++i)
        base_intervals.push_back(baseline.cdf(grid[i + 1]) - baseline.cdf(grid[i]));

    std::ostringstream os;
    os.precision(10);
    os << "series,age,value\n";
    auto emit_model = [&](const std::string& series, const PenetranceModel& model) {
        for (double a : grid) os << series << ',' << a << ',' << model.cdf(a) << "\n";
    };

    for (const auto& r : records) {
        if (r.modality == Modality::Penetrance) {
            emit_model(r.id, fit_weibull_to_curve(r.ages, r.estimates));
            continue;
        }
        // SIR studies are handled like RR (rare-mutation reduction).
        const RiskMeasure measure = r.modality == Modality::OR ? RiskMeasure::OR : RiskMeasure::RR;
        const auto carrier = rr_or_to_penetrance(measure, r.estimate(), base_intervals);
        std::vector<double> ages, risks;
        for (size_t i = 0; i < carrier.size(); ++i) {
            if (!(carrier[i] > 0.0 && carrier[i] < 1.0)) continue;
            if (!risks.empty() && !(carrier[i] > risks.back())) continue;
            ages.push_back(grid[i + 1]);
            risks.push_back(carrier[i]);
        }
        emit_model(r.id, fit_weibull_to_curve(ages, risks));
    }

    for (double a : grid) os << "baseline," << a << ',' << baseline.cdf(a) << "\n";

    if (!opt.consensus_path.empty()) {
        std::ifstream in(opt.consensus_path);
        if (!in) throw std::runtime_error("cannot open consensus file: " + opt.consensus_path);
        std::string line;
        std::getline(in, line);  // header: method,age,mean,lower,upper
        std::vector<double> ages, means;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ss(line);
            std::string method, age, mean;
            std::getline(ss, method, ',');
            std::getline(ss, age, ',');
            std::getline(ss, mean, ',');
            ages.push_back(std::stod(age));
            means.push_back(std::stod(mean));
        }
        const auto model = fit_weibull_to_curve(ages, means);
        for (double a : grid) os << "consensus," << a << ',' << model.cdf(a) << "\n";
    }

    fs::create_directories(opt.out_dir);
    write_file(fs::path(opt.out_dir) / "plotdata.csv", os.str());
    write_manifest(opt.out_dir, "plotdata",
                   json{{"studies", opt.studies_path},
                        {"baseline", opt.baseline_spec},
                        {"consensus", opt.consensus_path},
                        {"grid_start", opt.grid_start},
                        {"grid_stop", opt.grid_stop}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian meta-analysis of cancer penetrance", "penmeta"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    CommonMcmcOptions meta_opt;
    auto* meta = app.add_subcommand("meta", "Random-effects Bayesian meta-analysis");
    add_common_flags(meta, meta_opt, true);

    CommonMcmcOptions fixed_opt;
    int interval_draws = 4000;
    auto* fixed = app.add_subcommand("fixed", "Fixed-effects maximum-likelihood baseline");
    add_common_flags(fixed, fixed_opt, false);
    fixed->add_option("--interval-draws", interval_draws,
                      "Parameter draws for asymptotic-normal intervals");

    SimulateOptions sim_opt;
    sim_opt.config.threads = default_threads();
    auto* sim = app.add_subcommand("simulate", "Simulation study with both methods");
    sim->add_option("--preset", sim_opt.preset, "Simulation setting: atm or palb2")->required();
    sim->add_option("--scenario", sim_opt.scenario, "Age-summary reporting scenario (1 or 2)")
        ->check(CLI::Range(1, 2));
    sim->add_flag("--desk-scale", sim_opt.desk_scale,
                  "50 replicates, 200k cohort, 6k iterations / 3k burn-in");
    sim->add_option("--replicates", sim_opt.replicates, "Replicates (ignored with --desk-scale)");
    sim->add_option("--population", sim_opt.population, "Cohort size override");
    sim->add_option("--iters", sim_opt.config.iterations, "MCMC iterations per chain");
    sim->add_option("--burnin", sim_opt.config.burn_in, "Burn-in iterations");
    sim->add_option("--chains", sim_opt.config.chains, "Chains per replicate");
    sim->add_option("--cov-draws", sim_opt.config.covariance_draws, "Covariance draws");
    sim->add_option("--seed", sim_opt.config.seed, "RNG seed");
    sim->add_option("--threads", sim_opt.config.threads, "Worker threads");
    sim->add_option("--out", sim_opt.out_dir, "Output directory")->required();

    std::string oracle_preset = "atm";
    std::vector<double> oracle_ages{40, 50, 60, 70, 80};
    long oracle_draws = 200'000;
    std::uint64_t oracle_seed = 1;
    std::string oracle_out;
    auto* oracle = app.add_subcommand("oracle", "True-penetrance oracle for a preset");
    oracle->add_option("--preset", oracle_preset, "atm or palb2")->required();
    oracle->add_option("--ages", oracle_ages, "Query ages");
    oracle->add_option("--draws", oracle_draws, "Parameter draws");
    oracle->add_option("--seed", oracle_seed, "RNG seed");
    oracle->add_option("--out", oracle_out, "Output directory")->required();

    PlotdataOptions plot_opt;
    auto* plot = app.add_subcommand("plotdata", "Per-study approximate penetrance curves");
    plot->add_option("--studies", plot_opt.studies_path, "Study file")->required();
    plot->add_option("--baseline", plot_opt.baseline_spec, "Baseline spec (as in meta)");
    plot->add_option("--consensus", plot_opt.consensus_path,
                     "Optional consensus.csv to include as a series");
    plot->add_option("--grid-start", plot_opt.grid_start, "First grid age");
    plot->add_option("--grid-stop", plot_opt.grid_stop, "Last grid age");
    plot->add_option("--out", plot_opt.out_dir, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (meta->parsed()) return run_meta(meta_opt);
        if (fixed->parsed()) return run_fixed(fixed_opt, interval_draws);
        if (sim->parsed()) return run_simulate(sim_opt);
        if (oracle->parsed())
            return run_oracle(oracle_preset, oracle_ages, oracle_draws, oracle_seed, oracle_out);
        if (plot->parsed()) return run_plotdata(plot_opt);
    } catch (const std::exception& e) {
        std::cerr << "penmeta: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
