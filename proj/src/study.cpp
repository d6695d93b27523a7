#include "penmeta/study.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace penmeta {

std::string to_string(Modality m) {
    switch (m) {
        case Modality::Penetrance: return "penetrance";
        case Modality::RR: return "RR";
        case Modality::SIR: return "SIR";
        case Modality::OR: return "OR";
    }
    return "?";
}

Modality modality_from_string(const std::string& s) {
    std::string t;
    for (char c : s) t.push_back(static_cast<char>(std::tolower(c)));
    if (t == "penetrance") return Modality::Penetrance;
    if (t == "rr") return Modality::RR;
    if (t == "sir") return Modality::SIR;
    if (t == "or") return Modality::OR;
    throw std::invalid_argument("unknown modality: " + s);
}

void StudyRecord::validate() const {
    auto fail = [&](const std::string& what) {
        throw std::invalid_argument("study '" + id + "': " + what);
    };
    if (sample_size <= 0) fail("sample_size must be positive");
    if (estimates.empty() || ci_lower.size() != estimates.size() ||
        ci_upper.size() != estimates.size())
        fail("estimate/ci_lower/ci_upper must be present with matching lengths");
    for (size_t i = 0; i < estimates.size(); ++i) {
        if (!(ci_lower[i] < estimates[i] && estimates[i] < ci_upper[i]))
            fail("requires ci_lower < estimate < ci_upper");
    }
    if (modality == Modality::Penetrance) {
        if (ages.size() != estimates.size()) fail("penetrance study needs one age per estimate");
        for (size_t i = 0; i < ages.size(); ++i) {
            if (i > 0 && !(ages[i] > ages[i - 1])) fail("ages must be strictly increasing");
            if (i > 0 && !(estimates[i] > estimates[i - 1]))
                fail("penetrance estimates must be strictly increasing across ages");
            if (!(estimates[i] > 0.0 && estimates[i] < 1.0))
                fail("penetrance estimates must lie in (0, 1)");
        }
    } else {
        if (estimates.size() != 1) fail("scalar modality expects a single estimate");
        if (!(estimates[0] > 0.0 && ci_lower[0] > 0.0)) fail("risk estimate and CI must be positive");
    }
    if (carrier_prevalence && !(carrier_prevalence.value() > 0.0 && carrier_prevalence.value() < 1.0))
        fail("carrier prevalence must be in (0, 1)");
}

double variance_from_ci(double lower, double upper, CiTransform transform) {
    if (!(lower < upper)) throw std::invalid_argument("variance_from_ci: requires lower < upper");
    double tl, tu;
    if (transform == CiTransform::Logit) {
        tl = logit(lower);
        tu = logit(upper);
    } else {
        if (!(lower > 0.0)) throw std::invalid_argument("variance_from_ci: log transform needs lower > 0");
        tl = std::log(lower);
        tu = std::log(upper);
    }
    const double half = (tu - tl) / (2.0 * kZ975);
    return half * half;
}

Eigen::MatrixXd nearest_psd(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.eigenvalues().minCoeff() >= 0.0) return sym;
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

namespace {
double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }
}  // namespace

Eigen::MatrixXd covariance_matrix_from_cis(const StudyRecord& record, long draws, unsigned seed) {
    if (record.modality != Modality::Penetrance)
        throw std::invalid_argument("covariance_matrix_from_cis: penetrance studies only");
    const int m = static_cast<int>(record.ages.size());
    Eigen::VectorXd mean(m), var(m);
    for (int k = 0; k < m; ++k) {
        mean[k] = logit(clamp_prob(record.estimates[k]));
        var[k] = variance_from_ci(clamp_prob(record.ci_lower[k]), clamp_prob(record.ci_upper[k]),
                                  CiTransform::Logit);
    }
    Eigen::MatrixXd w = var.asDiagonal();
    if (m == 1) return w;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z01;
    Eigen::VectorXd x(m), sum = Eigen::VectorXd::Zero(m);
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(m, m);
    long kept = 0;
    for (long i = 0; i < draws; ++i) {
        bool monotone = true;
        for (int k = 0; k < m; ++k) {
            x[k] = mean[k] + std::sqrt(var[k]) * z01(rng);
            if (k > 0 && x[k] <= x[k - 1]) monotone = false;
        }
        if (!monotone) continue;
        ++kept;
        sum += x;
        cross.selfadjointView<Eigen::Lower>().rankUpdate(x);
    }
    if (kept < std::max<long>(2, draws / 1000))
        throw std::runtime_error("study '" + record.id +
                                 "': monotone retention below 0.1%; reported CIs look inconsistent");

    const Eigen::VectorXd xbar = sum / static_cast<double>(kept);
    Eigen::MatrixXd cov =
        (Eigen::MatrixXd(cross.selfadjointView<Eigen::Lower>()) -
         static_cast<double>(kept) * xbar * xbar.transpose()) /
        static_cast<double>(kept - 1);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (i != j) w(i, j) = cov(i, j);
    return nearest_psd(w);
}

StudyRecord resolve_age_distributions(StudyRecord record, const AgeDistribution& fallback) {
    switch (record.modality) {
        case Modality::RR:
        case Modality::SIR:
            if (!record.onset_carriers) record.onset_carriers = fallback;
            if (!record.onset_noncarriers) record.onset_noncarriers = fallback;
            break;
        case Modality::OR:
            if (!record.onset_cases) record.onset_cases = fallback;
            if (!record.inclusion_controls) record.inclusion_controls = record.onset_cases;
            break;
        case Modality::Penetrance:
            break;
    }
    return record;
}

PreparedStudy prepare_study(const StudyRecord& raw, const PrepareOptions& opts) {
    raw.validate();
    const StudyRecord record = resolve_age_distributions(raw, opts.fallback);

    PreparedStudy p;
    p.id = record.id;
    p.modality = record.modality;
    if (record.modality == Modality::Penetrance) {
        const int m = static_cast<int>(record.ages.size());
        p.ages = record.ages;
        p.logit_targets.resize(m);
        for (int k = 0; k < m; ++k) p.logit_targets[k] = logit(clamp_prob(record.estimates[k]));
        p.covariance = covariance_matrix_from_cis(record, opts.covariance_draws, opts.seed);
        p.llt.compute(p.covariance);
        if (p.llt.info() != Eigen::Success)
            throw std::runtime_error("study '" + record.id + "': covariance not positive definite");
        double logdet = 0.0;
        for (int k = 0; k < m; ++k) logdet += 2.0 * std::log(p.llt.matrixL()(k, k));
        p.log_norm_const = -0.5 * (m * std::log(2.0 * M_PI) + logdet);
    } else {
        p.log_estimate = std::log(record.estimate());
        p.log_variance = variance_from_ci(record.ci_lower[0], record.ci_upper[0], CiTransform::Log);
        p.q1 = record.onset_carriers.value_or(opts.fallback);
        p.q0 = record.onset_noncarriers.value_or(opts.fallback);
        p.qc = record.onset_cases.value_or(opts.fallback);
        p.gh = record.inclusion_controls.value_or(opts.fallback);
        p.carrier_prevalence = record.carrier_prevalence;
    }
    return p;
}

std::vector<PreparedStudy> prepare_studies(const std::vector<StudyRecord>& records,
                                           const PrepareOptions& opts) {
    std::vector<PreparedStudy> out;
    out.reserve(records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        PrepareOptions o = opts;
        o.seed = opts.seed + static_cast<unsigned>(i);  // independent per study
        out.push_back(prepare_study(records[i], o));
    }
    return out;
}

namespace {

using nlohmann::json;

std::optional<AgeDistribution> age_dist_from(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    const auto& a = j.at(key);
    return AgeDistribution{a.at("mean").get<double>(), a.at("sd").get<double>()};
}

json age_dist_to(const AgeDistribution& a) { return json{{"mean", a.mean}, {"sd", a.sd}}; }

StudyRecord record_from_json(const json& j) {
    StudyRecord r;
    r.id = j.at("id").get<std::string>();
    r.modality = modality_from_string(j.at("modality").get<std::string>());
    r.sample_size = j.at("n").get<int>();
    if (j.contains("estimates")) {
        r.estimates = j.at("estimates").get<std::vector<double>>();
        r.ages = j.at("ages").get<std::vector<double>>();
        r.ci_lower = j.at("ci_lower").get<std::vector<double>>();
        r.ci_upper = j.at("ci_upper").get<std::vector<double>>();
    } else {
        r.estimates = {j.at("estimate").get<double>()};
        r.ci_lower = {j.at("ci_lower").get<double>()};
        r.ci_upper = {j.at("ci_upper").get<double>()};
    }
    r.onset_carriers = age_dist_from(j, "onset_carriers");
    r.onset_noncarriers = age_dist_from(j, "onset_noncarriers");
    r.onset_cases = age_dist_from(j, "onset_cases");
    r.inclusion_controls = age_dist_from(j, "inclusion_controls");
    if (j.contains("prevalence") && !j["prevalence"].is_null())
        r.carrier_prevalence = j.at("prevalence").get<double>();
    r.validate();
    return r;
}

json record_to_json(const StudyRecord& r) {
    json j{{"id", r.id}, {"modality", to_string(r.modality)}, {"n", r.sample_size}};
    if (r.modality == Modality::Penetrance) {
        j["ages"] = r.ages;
        j["estimates"] = r.estimates;
        j["ci_lower"] = r.ci_lower;
        j["ci_upper"] = r.ci_upper;
    } else {
        j["estimate"] = r.estimates[0];
        j["ci_lower"] = r.ci_lower[0];
        j["ci_upper"] = r.ci_upper[0];
    }
    if (r.onset_carriers) j["onset_carriers"] = age_dist_to(*r.onset_carriers);
    if (r.onset_noncarriers) j["onset_noncarriers"] = age_dist_to(*r.onset_noncarriers);
    if (r.onset_cases) j["onset_cases"] = age_dist_to(*r.onset_cases);
    if (r.inclusion_controls) j["inclusion_controls"] = age_dist_to(*r.inclusion_controls);
    if (r.carrier_prevalence) j["prevalence"] = *r.carrier_prevalence;
    return j;
}

}  // namespace

std::vector<StudyRecord> parse_studies_json(const std::string& text) {
    const auto doc = nlohmann::json::parse(text);
    if (!doc.is_array()) throw std::invalid_argument("study file: expected a JSON array");
    std::vector<StudyRecord> out;
    for (const auto& j : doc) out.push_back(record_from_json(j));
    return out;
}

std::string studies_to_json(const std::vector<StudyRecord>& records) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records) arr.push_back(record_to_json(r));
    return arr.dump(2);
}

std::vector<StudyRecord> load_studies(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open study file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return parse_studies_csv(text);
    return parse_studies_json(text);
}

std::vector<StudyRecord> parse_studies_csv(const std::string& text) {
    std::istringstream in(text);
    std::vector<StudyRecord> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first) {
            first = false;
            if (!cells.empty() && cells[0] == "id") continue;  // header
        }
        if (cells.size() < 6)
            throw std::invalid_argument("study CSV: expected id,modality,n,estimate,ci_lower,ci_upper");
        StudyRecord r;
        r.id = cells[0];
        r.modality = modality_from_string(cells[1]);
        if (r.modality == Modality::Penetrance)
            throw std::invalid_argument("study CSV: penetrance studies require the JSON format");
        r.sample_size = std::stoi(cells[2]);
        r.estimates = {std::stod(cells[3])};
        r.ci_lower = {std::stod(cells[4])};
        r.ci_upper = {std::stod(cells[5])};
        r.validate();
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace penmeta
