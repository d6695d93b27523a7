#include "penmeta/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace penmeta {

BaselinePenetrance BaselinePenetrance::from_weibull(double shape, double scale) {
    PenetranceModel check{shape, scale};  // validates
    BaselinePenetrance b;
    b.kind_ = Kind::Weibull;
    b.shape_ = shape;
    b.scale_ = scale;
    return b;
}

BaselinePenetrance BaselinePenetrance::from_truncated_weibull(double shape, double scale,
                                                              double truncation) {
    TruncatedWeibull check{shape, scale, truncation};  // validates
    BaselinePenetrance b;
    b.kind_ = Kind::Truncated;
    b.shape_ = shape;
    b.scale_ = scale;
    b.truncation_ = truncation;
    return b;
}

BaselinePenetrance BaselinePenetrance::from_table(std::vector<double> ages,
                                                  std::vector<double> risks) {
    if (ages.size() != risks.size() || ages.size() < 2)
        throw std::invalid_argument("baseline table: need >= 2 (age, risk) pairs");
    for (size_t i = 0; i < ages.size(); ++i) {
        if (i > 0 && !(ages[i] > ages[i - 1]))
            throw std::invalid_argument("baseline table: ages must be strictly increasing");
        if (!(risks[i] >= 0.0) || !(risks[i] < 1.0) || (i > 0 && risks[i] < risks[i - 1]))
            throw std::invalid_argument("baseline table: risks must be nondecreasing in [0, 1)");
    }

    BaselinePenetrance b;
    b.kind_ = Kind::Table;
    const size_t n = ages.size();
    // Fritsch-Carlson monotone cubic slopes.
    std::vector<double> h(n - 1), delta(n - 1), m(n);
    for (size_t i = 0; i + 1 < n; ++i) {
        h[i] = ages[i + 1] - ages[i];
        delta[i] = (risks[i + 1] - risks[i]) / h[i];
    }
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for (size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0.0)
            m[i] = 0.0;
        else {
            const double w1 = 2.0 * h[i] + h[i - 1];
            const double w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    for (size_t i = 0; i + 1 < n; ++i) {
        if (delta[i] == 0.0) {
            m[i] = m[i + 1] = 0.0;
            continue;
        }
        const double a = m[i] / delta[i];
        const double bb = m[i + 1] / delta[i];
        const double s = a * a + bb * bb;
        if (s > 9.0) {
            const double tau = 3.0 / std::sqrt(s);
            m[i] = tau * a * delta[i];
            m[i + 1] = tau * bb * delta[i];
        }
    }
    b.ages_ = std::move(ages);
    b.risks_ = std::move(risks);
    b.slopes_ = std::move(m);
    return b;
}

BaselinePenetrance BaselinePenetrance::from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open baseline file: " + path);
    std::vector<double> ages, risks;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double a, r;
        if (!(ss >> a >> r)) continue;  // skips a header row
        ages.push_back(a);
        risks.push_back(r);
    }
    return from_table(std::move(ages), std::move(risks));
}

double BaselinePenetrance::table_cdf(double a) const {
    if (a <= ages_.front()) {
        // Linear continuation through the origin below the table.
        return a <= 0.0 ? 0.0 : risks_.front() * a / ages_.front();
    }
    if (a >= ages_.back()) return risks_.back();
    const auto it = std::upper_bound(ages_.begin(), ages_.end(), a);
    const size_t i = static_cast<size_t>(it - ages_.begin()) - 1;
    const double h = ages_[i + 1] - ages_[i];
    const double t = (a - ages_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * risks_[i] + h10 * h * slopes_[i] + h01 * risks_[i + 1] + h11 * h * slopes_[i + 1];
}

double BaselinePenetrance::table_pdf(double a) const {
    const double h = 1e-5 * std::max(1.0, std::abs(a));
    return std::max(0.0, (table_cdf(a + h) - table_cdf(a - h)) / (2.0 * h));
}

double BaselinePenetrance::cdf(double a) const {
    switch (kind_) {
        case Kind::Weibull: return PenetranceModel{shape_, scale_}.cdf(a);
        case Kind::Truncated: return TruncatedWeibull{shape_, scale_, truncation_}.cdf(a);
        case Kind::Table: return table_cdf(a);
    }
    return 0.0;
}

double BaselinePenetrance::pdf(double a) const {
    switch (kind_) {
        case Kind::Weibull: return PenetranceModel{shape_, scale_}.pdf(a);
        case Kind::Truncated: return TruncatedWeibull{shape_, scale_, truncation_}.pdf(a);
        case Kind::Table: return table_pdf(a);
    }
    return 0.0;
}

}  // namespace penmeta
