#pragma once

#include <array>
#include <functional>

#include "penmeta/distributions.hpp"

namespace penmeta {

/// Nodes and weights of the 64-point Gauss-Legendre rule on [-1, 1].
const std::array<double, 64>& gauss_legendre_nodes();
const std::array<double, 64>& gauss_legendre_weights();

/// 64-point Gauss-Legendre integral of f over [lo, hi].
double integrate(const std::function<double(double)>& f, double lo, double hi);

/// E_q[f] = int f(a) q(a) da over [max(0, mean - 8 sd), mean + 8 sd].
/// The mass clipped below age 0 is ignored, not renormalized.
double expect_under_age_dist(const std::function<double(double)>& f, const AgeDistribution& q);

}  // namespace penmeta
