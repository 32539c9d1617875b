#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these call into the code paths they check.

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "sipi/core.hpp"
#include "sipi/dists.hpp"
#include "sipi/rng.hpp"
#include "sipi/samplers.hpp"
#include "sipi/selectors.hpp"

namespace oracle {

using sipi::IndexSet;
using sipi::Matrix;
using sipi::Rng;
using sipi::Vector;

inline Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> nd;
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
  return m;
}

inline Vector gaussian_vector(Rng& rng, Eigen::Index n) { return gaussian_matrix(rng, n, 1).col(0); }

/// Classical OLS via the normal equations: coefficient of the first column of
/// [v D], its t statistic and the residual df.
struct OlsT {
  double coef;
  double t;
  int df;
};

inline OlsT ols_first_coef(const Vector& y, const Vector& v, const Matrix& d) {
  Matrix design(y.size(), 1 + d.cols());
  design.col(0) = v;
  design.rightCols(d.cols()) = d;
  const Matrix gram = design.transpose() * design;
  const Matrix gram_inv = gram.inverse();
  const Vector beta = gram_inv * design.transpose() * y;
  const Vector resid = y - design * beta;
  const int df = static_cast<int>(y.size() - design.cols());
  const double s2 = resid.squaredNorm() / df;
  return {beta(0), beta(0) / std::sqrt(s2 * gram_inv(0, 0)), df};
}

inline double rss(const Vector& y, const Matrix& d) {
  if (d.cols() == 0) return y.squaredNorm();
  const Vector beta = (d.transpose() * d).ldlt().solve(d.transpose() * y);
  return (y - d * beta).squaredNorm();
}

inline Matrix with_ones(const Matrix& z) {
  Matrix out(z.rows(), z.cols() + 1);
  out.leftCols(z.cols()) = z;
  out.col(z.cols()).setOnes();
  return out;
}

/// Two-sided Student t tail through the distribution object.
inline double t_two_sided(double t, int df) {
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

inline double f_upper(double f, int d1, int d2) {
  boost::math::fisher_f dist(d1, d2);
  return boost::math::cdf(boost::math::complement(dist, f));
}

/// sup |F_a - F_b| by brute force over the pooled sample.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  auto ecdf = [](const std::vector<double>& s, double x) {
    return static_cast<double>(std::upper_bound(s.begin(), s.end(), x) - s.begin()) / static_cast<double>(s.size());
  };
  for (double x : a) d = std::max(d, std::abs(ecdf(a, x) - ecdf(b, x)));
  for (double x : b) d = std::max(d, std::abs(ecdf(a, x) - ecdf(b, x)));
  return d;
}

/// Two-sample KS critical value (asymptotic) at level alpha.
inline double ks_two_sample_critical(std::size_t na, std::size_t nb, double alpha) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(static_cast<double>(na + nb) / static_cast<double>(na * nb));
}

/// Result of comparing a polyhedron against refitting at random probe points.
struct ProbeReport {
  int agree = 0;
  int disagree = 0;
  int boundary = 0;
  int inside = 0;
};

/// Perturbs y at several scales and compares event membership with
/// `same_model(y')`. Probes within `band` of a facet are not scored.
template <class SameModel>
ProbeReport probe_event(const sipi::Polyhedron& event, const Vector& y, Rng& rng, int probes, SameModel&& same_model,
                        double band = 1e-7) {
  ProbeReport rep;
  const double base = std::max(y.norm() / std::sqrt(static_cast<double>(y.size())), 1e-3);
  std::uniform_real_distribution<double> log_scale(std::log(1e-3), std::log(3.0));
  for (int k = 0; k < probes; ++k) {
    const double scale = base * std::exp(log_scale(rng));
    const Vector probe = y + scale * gaussian_vector(rng, y.size());
    const Vector slack = event.b - event.a * probe;
    const double row_scale = std::max(1.0, event.a.rowwise().norm().maxCoeff() * probe.norm());
    if (slack.cwiseAbs().minCoeff() < band * row_scale) {
      ++rep.boundary;
      continue;
    }
    const bool member = slack.minCoeff() > 0.0;
    rep.inside += member ? 1 : 0;
    (member == same_model(probe) ? rep.agree : rep.disagree)++;
  }
  return rep;
}

/// Lasso refit check: same active set and signs.
inline bool lasso_same(const Matrix& x, const Vector& y, double lambda, const sipi::SelectionModel& model) {
  const sipi::LassoFit fit = sipi::fit_lasso(x, y, lambda);
  if (fit.active != model.selected) return false;
  for (std::size_t a = 0; a < fit.active.size(); ++a) {
    if ((fit.eta(fit.active[a]) > 0 ? 1 : -1) != model.signs[a]) return false;
  }
  return true;
}

/// Screening refit check straight from the scores: same top-k set and the
/// same sign on every score.
inline bool screen_same(const Matrix& x, const Vector& y, int k, const Vector& score_obs, const IndexSet& selected) {
  const Vector score = x.transpose() * y;
  std::vector<int> order(static_cast<std::size_t>(x.cols()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(score(a)) > std::abs(score(b)); });
  IndexSet top(order.begin(), order.begin() + k);
  std::sort(top.begin(), top.end());
  if (top != selected) return false;
  for (Eigen::Index i = 0; i < score.size(); ++i) {
    if ((score(i) > 0) != (score_obs(i) > 0)) return false;
  }
  return true;
}

/// Signs of g(x) = q sqrt(x) + r sqrt(1+x) + s on a grid, evaluated directly.
inline double g_direct(double q, double r, double s, double x) { return q * std::sqrt(x) + r * std::sqrt(1.0 + x) + s; }


/// Grid points for a scan of [0, inf): linear up to `span` plus log-spaced
/// points out to 1e12, `count` in total.
inline std::vector<double> scan_grid(double span, int count) {
  std::vector<double> xs;
  const int half = count / 2;
  for (int i = 0; i < half; ++i) xs.push_back(span * i / (half - 1));
  for (int i = 0; i < count - half; ++i) xs.push_back(std::pow(10.0, -12.0 + 24.0 * i / (count - half - 1)));
  std::sort(xs.begin(), xs.end());
  return xs;
}

inline double distance_to_endpoint(const sipi::IntervalSet& set, double x) {
  double d = INFINITY;
  for (const auto& iv : set) {
    d = std::min(d, std::abs(x - iv.lo));
    if (std::isfinite(iv.hi)) d = std::min(d, std::abs(x - iv.hi));
  }
  return d;
}

struct ScanReport {
  int checked = 0;
  int disagreements = 0;
};

/// Compares {x : g(x) <= 0} against direct long-double evaluation on a grid.
/// Points within `band` (relative) of an endpoint, or where |g| is below
/// rounding level, are not scored.
inline ScanReport scan_gfun(double q, double r, double s, const sipi::IntervalSet& set, int count = 100000,
                            double band = 1e-9) {
  double span = 10.0;
  for (const auto& iv : set) span = std::max(span, 2.0 * (std::isfinite(iv.hi) ? iv.hi : iv.lo));
  if ((q > 0) != (r > 0) && std::abs(r) > std::abs(q)) span = std::max(span, 4.0 * q * q / (r * r - q * q));
  ScanReport rep;
  for (double x : scan_grid(span, count)) {
    const long double lx = x;
    const long double g = q * std::sqrt(lx) + r * std::sqrt(1.0L + lx) + s;
    const long double mag = std::abs(q) * std::sqrt(lx) + std::abs(r) * std::sqrt(1.0L + lx) + std::abs(s);
    if (std::abs(g) <= 1e-13L * mag) continue;
    if (distance_to_endpoint(set, x) <= band * std::max(1.0, x)) continue;
    ++rep.checked;
    if ((g <= 0) != sipi::interval_set_contains(set, x)) ++rep.disagreements;
  }
  return rep;
}

/// Response on the ray of the F statistic: y(x) has the observed projections
/// onto Z, the observed directions of N = (P_M - P_Z) y and D = (I - P_M) y,
/// the observed |R_1| and |N|^2 / |D|^2 = x.
struct FRay {
  Vector delta;
  Vector v_num;
  Vector v_den;
  double l = 0.0;

  Vector at(double x) const { return delta + l * (std::sqrt(x / (1.0 + x)) * v_num + std::sqrt(1.0 / (1.0 + x)) * v_den); }
};

inline FRay f_ray(const Vector& y, const Matrix& x_sel, const Matrix& z_aug) {
  const auto n = y.size();
  auto proj = [&](const Matrix& m) {
    if (m.cols() == 0) return Matrix(Matrix::Zero(n, n));
    return Matrix(m * (m.transpose() * m).inverse() * m.transpose());
  };
  Matrix full(n, x_sel.cols() + z_aug.cols());
  full << x_sel, z_aug;
  const Matrix pz = proj(z_aug);
  const Matrix pm = proj(full);
  const Vector num = (pm - pz) * y;
  const Vector den = y - pm * y;
  return {pz * y, num / num.norm(), den / den.norm(), (y - pz * y).norm()};
}

/// Event membership along the ray compared with the computed truncation set.
inline ScanReport scan_ftrunc(const sipi::Polyhedron& event, const FRay& ray, const sipi::IntervalSet& set,
                              int count = 20000, double band = 1e-6) {
  double span = 10.0;
  for (const auto& iv : set) span = std::max(span, 2.0 * (std::isfinite(iv.hi) ? iv.hi : iv.lo));
  ScanReport rep;
  for (double x : scan_grid(span, count)) {
    if (distance_to_endpoint(set, x) <= band * std::max(1.0, x)) continue;
    const Vector slack = event.b - event.a * ray.at(x);
    if (slack.cwiseAbs().minCoeff() < 1e-10 * std::max(1.0, event.b.cwiseAbs().maxCoeff())) continue;
    ++rep.checked;
    if ((slack.minCoeff() >= 0.0) != sipi::interval_set_contains(set, x)) ++rep.disagreements;
  }
  return rep;
}

/// Normal two-sided truncated p-value by numerical integration of the density
/// over [lo, hi] (tanh-sinh quadrature).
inline double truncnorm_two_sided_quadrature(double obs, double mean, double sd, double lo, double hi) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  auto dens = [&](double t) {
    const double z = (t - mean) / sd;
    return std::exp(-0.5 * z * z);
  };
  // work in z units around the mean; the density is negligible beyond 40 sd
  auto clip = [&](double v) { return std::clamp(v, mean - 40 * sd, mean + 40 * sd); };
  const double a = clip(lo);
  const double b = clip(hi);
  const double o = std::clamp(obs, a, b);
  const double total = integrator.integrate(dens, a, b);
  const double upper = o < b ? integrator.integrate(dens, o, b) : 0.0;
  const double frac = upper / total;
  return std::clamp(2.0 * std::min(frac, 1.0 - frac), 0.0, 1.0);
}

/// Accept-reject Monte Carlo two-sided (twice the smaller tail) conditional
/// p-value of eta^T y under the polyhedron, sampling y' = y_perp + eta (eta^T y') with eta^T y' ~ N(mean, sigma2 |eta|^2).
struct McP {
  double p;
  double se;
  int accepted;
};

inline McP truncnorm_mc(const Vector& eta, const Vector& y, const sipi::Polyhedron& event, double sigma2, double mean,
                        Rng& rng, int target_accepts, long long max_proposals = 50'000'000) {
  const double ee = eta.squaredNorm();
  const Vector y_perp = y - eta * (eta.dot(y) / ee);
  const double obs = eta.dot(y);
  const double sd = std::sqrt(sigma2 * ee);
  const Vector a_eta = event.a * eta / ee;
  const Vector base = event.b - event.a * y_perp;
  std::normal_distribution<double> nd;
  int accepted = 0;
  int extreme = 0;
  long long proposals = 0;
  while (accepted < target_accepts && proposals < max_proposals) {
    ++proposals;
    const double t = mean + sd * nd(rng);
    if (((a_eta * t - base).array() > 0.0).any()) continue;
    ++accepted;
    if (t >= obs) ++extreme;
  }
  const double upper = (extreme + 0.0) / std::max(accepted, 1);
  const double p = 2.0 * std::min(upper, 1.0 - upper);
  return {p, 2.0 * std::sqrt(std::max(upper * (1 - upper), 1.0 / accepted) / accepted), accepted};
}

}  // namespace oracle
