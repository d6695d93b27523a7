#pragma once

#include <cmath>
#include <random>
#include <stdexcept>

namespace penmeta {

/// Weibull penetrance curve: cumulative risk of disease by age t for one
/// study (or for the consensus / non-carrier baseline).
struct PenetranceModel {
    double shape = 1.0;  // kappa, dimensionless
    double scale = 1.0;  // lambda, years

    PenetranceModel() = default;
    PenetranceModel(double shape_, double scale_) : shape(shape_), scale(scale_) {
        if (!(shape > 0.0) || !(scale > 0.0))
            throw std::invalid_argument("PenetranceModel: shape and scale must be positive");
    }

    double cdf(double t) const;
    double pdf(double t) const;
    double quantile(double p) const;
};

/// Normal summary of a study's age distribution (age of onset for
/// carriers/non-carriers, or age at inclusion for controls).
struct AgeDistribution {
    double mean = 0.0;  // years
    double sd = 1.0;    // years

    AgeDistribution() = default;
    AgeDistribution(double mean_, double sd_) : mean(mean_), sd(sd_) {
        if (!(sd > 0.0))
            throw std::invalid_argument("AgeDistribution: sd must be positive");
    }

    double pdf(double a) const;
};

/// Weibull renormalized on (0, truncation]; used as the non-carrier
/// event-time model in simulations.
struct TruncatedWeibull {
    double shape;
    double scale;
    double truncation;  // years

    TruncatedWeibull(double shape_, double scale_, double truncation_)
        : shape(shape_), scale(scale_), truncation(truncation_) {
        if (!(shape > 0.0) || !(scale > 0.0) || !(truncation > 0.0))
            throw std::invalid_argument("TruncatedWeibull: parameters must be positive");
    }

    double cdf(double t) const;
    double pdf(double t) const;

    // Inverse-cdf sampling on the renormalized distribution.
    template <class Rng>
    double sample(Rng& rng) const {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        return quantile(u01(rng));
    }

    double quantile(double p) const;
};

double logit(double p);
double inv_logit(double x);

double normal_log_pdf(double x, double mean, double var);
double gamma_log_pdf(double x, double shape, double scale);

}  // namespace penmeta
