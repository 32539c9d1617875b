#pragma once

#include <limits>
#include <vector>

#include "sipi/core.hpp"

namespace sipi {

struct Interval {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double x, double tol = 0.0) const { return x >= lo - tol && x <= hi + tol; }
};

using IntervalSet = std::vector<Interval>;

/// Sorted, pairwise-disjoint union; pieces closer than `merge_tol` are joined.
IntervalSet normalize_intervals(IntervalSet set, double merge_tol = 1e-12);
IntervalSet intersect_intervals(const IntervalSet& a, const IntervalSet& b, double merge_tol = 1e-12);
bool interval_set_contains(const IntervalSet& set, double x, double tol = 0.0);

/// Selection-compatible values of x = c * T_F, with T_F ~ F(d1, d2) under the null.
struct TruncationSet {
  IntervalSet intervals;
  double c = 1.0;
  int d1 = 1;
  int d2 = 1;
  double x_obs = 0.0;
};

/// Normal law N(mean, sd^2) truncated to [lower, upper] and evaluated at `observed`.
struct TruncNormalResult {
  double statistic = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double mean = 0.0;
  double sd = 1.0;
  double p_value = 1.0;
};

/// Two-sided p-value for eta^T y given the event and the part of y orthogonal
/// to eta (known variance sigma2).
TruncNormalResult truncnorm_pvalue(const Vector& eta, const Vector& y, const Polyhedron& event, double sigma2,
                                   double null_value);

double f_cdf(double x, int d1, int d2);
/// 1 - f_cdf, computed without cancellation.
double f_sf(double x, int d1, int d2);

/// {x in [0, x_max] : q sqrt(x) + r sqrt(1 + x) + s <= 0}. With x_max = +inf
/// the tail is settled analytically.
IntervalSet gfun_zero_set(double q, double r, double s,
                          double x_max = std::numeric_limits<double>::infinity());

/// Truncation set of the F statistic for testing X_E given Z at beta = 0.
TruncationSet ftrunc_set(const Polyhedron& event, const Vector& y, const Matrix& x_selected,
                         const ResidualOperator& op);

/// P(T >= t_obs | c T in S) for T ~ F(d1, d2).
double ftrunc_pvalue(const TruncationSet& tset, double t_obs);

/// P(X >= observed | X >= threshold) for X ~ Binomial(n_flips, 1/2), exact.
double selective_binomial_demo(int n_flips, int threshold, int observed);
/// P(X >= observed), exact.
double binomial_upper_tail(int n_flips, int observed);

}  // namespace sipi
