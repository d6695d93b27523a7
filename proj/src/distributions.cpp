#include "penmeta/distributions.hpp"

#include <limits>

namespace penmeta {

namespace {
void check_age(double t) {
    if (!std::isfinite(t) || t < 0.0)
        throw std::invalid_argument("age must be finite and nonnegative");
}
}  // namespace

double PenetranceModel::cdf(double t) const {
    check_age(t);
    if (t == 0.0) return 0.0;
    return -std::expm1(-std::pow(t / scale, shape));
}

double PenetranceModel::pdf(double t) const {
    check_age(t);
    if (t == 0.0) return shape == 1.0 ? 1.0 / scale : (shape > 1.0 ? 0.0 : std::numeric_limits<double>::infinity());
    const double z = t / scale;
    return (shape / scale) * std::pow(z, shape - 1.0) * std::exp(-std::pow(z, shape));
}

double PenetranceModel::quantile(double p) const {
    if (!(p >= 0.0) || !(p < 1.0))
        throw std::invalid_argument("quantile: p must be in [0, 1)");
    return scale * std::pow(-std::log1p(-p), 1.0 / shape);
}

double AgeDistribution::pdf(double a) const {
    const double z = (a - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
}

double TruncatedWeibull::cdf(double t) const {
    check_age(t);
    if (t >= truncation) return 1.0;
    const PenetranceModel w{shape, scale};
    return w.cdf(t) / w.cdf(truncation);
}

double TruncatedWeibull::pdf(double t) const {
    check_age(t);
    if (t > truncation) return 0.0;
    const PenetranceModel w{shape, scale};
    return w.pdf(t) / w.cdf(truncation);
}

double TruncatedWeibull::quantile(double p) const {
    if (!(p >= 0.0) || !(p < 1.0))
        throw std::invalid_argument("quantile: p must be in [0, 1)");
    const PenetranceModel w{shape, scale};
    return w.quantile(p * w.cdf(truncation));
}

double logit(double p) {
    if (!(p > 0.0) || !(p < 1.0))
        throw std::domain_error(
            "logit: p must lie strictly inside (0, 1); clamp estimates at ingestion");
    return std::log(p / (1.0 - p));
}

double inv_logit(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double normal_log_pdf(double x, double mean, double var) {
    if (!(var > 0.0)) throw std::invalid_argument("normal_log_pdf: variance must be positive");
    const double r = x - mean;
    return -0.5 * (std::log(2.0 * M_PI * var) + r * r / var);
}

double gamma_log_pdf(double x, double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
        throw std::invalid_argument("gamma_log_pdf: shape and scale must be positive");
    if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
    return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

}  // namespace penmeta
