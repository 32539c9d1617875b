#pragma once

// Standard normal functions that stay accurate far into the tails, and the
// truncated normal built on top of them.

namespace sipi::normal {

double pdf(double x);
double cdf(double x);
double sf(double x);
/// log P(X > x), finite for every finite x.
double log_sf(double x);
double log_cdf(double x);

/// Quantile: cdf(quantile(p)) = p.
double quantile(double p);
/// Inverse of log_sf.
double inv_log_sf(double log_q);

/// Probabilities P(X <= x) and P(X > x) for X ~ N(0,1) truncated to [lo, hi].
struct TailPair {
  double lower;
  double upper;
};
TailPair truncated_tails(double x, double lo, double hi);

/// Inverse-CDF draw from N(0,1) truncated to [lo, hi] given u in (0, 1).
double truncated_inverse(double lo, double hi, double u);

}  // namespace sipi::normal
