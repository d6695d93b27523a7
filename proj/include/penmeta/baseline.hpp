#pragma once

#include <optional>
#include <string>
#include <vector>

#include "penmeta/distributions.hpp"

namespace penmeta {

/// Non-carrier penetrance F_0 / f_0. Either a (possibly truncated) Weibull
/// pair or a tabulated registry cdf with monotone-cubic interpolation.
class BaselinePenetrance {
  public:
    static BaselinePenetrance from_weibull(double shape, double scale);
    static BaselinePenetrance from_truncated_weibull(double shape, double scale, double truncation);
    /// Table of (age, cumulative_risk) pairs, ages strictly increasing,
    /// risks nondecreasing in [0, 1).
    static BaselinePenetrance from_table(std::vector<double> ages, std::vector<double> risks);
    /// Two-column CSV (age, cumulative_risk), header optional.
    static BaselinePenetrance from_csv(const std::string& path);

    double cdf(double a) const;
    double pdf(double a) const;

  private:
    BaselinePenetrance() = default;

    enum class Kind { Weibull, Truncated, Table };
    Kind kind_ = Kind::Weibull;
    double shape_ = 1.0, scale_ = 1.0, truncation_ = 0.0;

    // PCHIP coefficients per interval for the tabulated case.
    std::vector<double> ages_, risks_, slopes_;
    double table_cdf(double a) const;
    double table_pdf(double a) const;
};

}  // namespace penmeta
