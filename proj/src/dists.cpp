#include "sipi/dists.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <string>

#include "sipi/normal.hpp"

namespace sipi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRootTol = 1e-12;

// q sqrt(x) + r sqrt(1+x) + s, arranged to avoid cancellation when q ~ -r.
double gfun(double q, double r, double s, double x) {
  const double sx = std::sqrt(x);
  const double s1 = std::sqrt(1.0 + x);
  return (q + r) * sx + r / (s1 + sx) + s;
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// Sign of g as x -> infinity.
int tail_sign(double q, double r, double s) {
  if (q + r != 0.0) return sign_of(q + r);
  if (s != 0.0) return sign_of(s);
  return sign_of(r);
}

// Root of a monotone g on [a, b] given g(a), g(b) of opposite sign.
double bisect(double q, double r, double s, double a, double b, double ga) {
  for (int it = 0; it < 2200; ++it) {
    const double mid = 0.5 * (a + b);
    if (b - a <= kRootTol * a || mid <= a || mid >= b) break;
    const double gm = gfun(q, r, s, mid);
    if ((gm > 0.0) == (ga > 0.0)) {
      a = mid;
      ga = gm;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

// Roots of g on a monotone piece [a, b] (b may be infinite).
void piece_roots(double q, double r, double s, double a, double b, std::vector<double>& roots) {
  const double ga = gfun(q, r, s, a);
  if (std::isinf(b)) {
    const int ts = tail_sign(q, r, s);
    if (ts == 0 || (ga > 0.0) == (ts > 0)) return;
    // the tail sign differs from g(a), so a root exists; it can sit far out
    // when q + r is tiny relative to s
    double hi = std::max(1.0, 2.0 * a);
    while (std::isfinite(hi) && (gfun(q, r, s, hi) > 0.0) == (ga > 0.0)) hi *= 2.0;
    if (!std::isfinite(hi)) hi = std::numeric_limits<double>::max();
    if ((gfun(q, r, s, hi) > 0.0) == (ga > 0.0)) return;
    roots.push_back(bisect(q, r, s, a, hi, ga));
    return;
  }
  const double gb = gfun(q, r, s, b);
  if ((ga > 0.0) != (gb > 0.0)) roots.push_back(bisect(q, r, s, a, b, ga));
}

double interval_mass(double lo, double hi, int d1, int d2) {
  if (hi <= lo) return 0.0;
  const double sf_lo = f_sf(lo, d1, d2);
  if (sf_lo < 0.5) return sf_lo - (std::isinf(hi) ? 0.0 : f_sf(hi, d1, d2));
  return (std::isinf(hi) ? 1.0 : f_cdf(hi, d1, d2)) - f_cdf(lo, d1, d2);
}

}  // namespace

IntervalSet normalize_intervals(IntervalSet set, double merge_tol) {
  std::sort(set.begin(), set.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  IntervalSet out;
  for (const Interval& iv : set) {
    if (iv.hi < iv.lo) continue;
    if (!out.empty() && iv.lo <= out.back().hi + merge_tol * std::max(1.0, std::abs(out.back().hi))) {
      out.back().hi = std::max(out.back().hi, iv.hi);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

IntervalSet intersect_intervals(const IntervalSet& a, const IntervalSet& b, double merge_tol) {
  IntervalSet out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    const double lo = std::max(a[i].lo, b[j].lo);
    const double hi = std::min(a[i].hi, b[j].hi);
    if (lo <= hi) out.push_back({lo, hi});
    if (a[i].hi < b[j].hi) {
      ++i;
    } else {
      ++j;
    }
  }
  return normalize_intervals(std::move(out), merge_tol);
}

bool interval_set_contains(const IntervalSet& set, double x, double tol) {
  return std::any_of(set.begin(), set.end(), [&](const Interval& iv) { return iv.contains(x, tol); });
}

TruncNormalResult truncnorm_pvalue(const Vector& eta, const Vector& y, const Polyhedron& event, double sigma2,
                                   double null_value) {
  if (eta.size() != y.size() || event.dim() != y.size()) {
    throw Error(ErrorCode::DimensionMismatch, "truncnorm_pvalue dimensions");
  }
  if (!(sigma2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma2 must be positive");
  const double stat = eta.dot(y);
  if (!std::isfinite(stat)) throw Error(ErrorCode::NonFinite, "eta^T y is not finite");
  if (!event.contains(y)) throw Error(ErrorCode::NonMember, "y is outside the selection event");

  const double eta2 = eta.squaredNorm();
  const Vector dir = eta / eta2;
  const Vector rest = y - dir * stat;
  TruncNormalResult res;
  res.statistic = stat;
  res.lower = -kInf;
  res.upper = kInf;
  if (event.rows() > 0) {
    const Vector a_dir = event.a * dir;
    const Vector rhs = event.b - event.a * rest;
    const double dir_norm = dir.norm();
    for (Eigen::Index i = 0; i < a_dir.size(); ++i) {
      const double scale = event.a.row(i).norm() * dir_norm;
      if (a_dir(i) > 1e-14 * scale) {
        res.upper = std::min(res.upper, rhs(i) / a_dir(i));
      } else if (a_dir(i) < -1e-14 * scale) {
        res.lower = std::max(res.lower, rhs(i) / a_dir(i));
      } else if (rhs(i) < -kMembershipTol) {
        throw Error(ErrorCode::NonMember, "constraint independent of eta^T y is violated");
      }
    }
  }
  if (res.lower > res.upper + kMembershipTol * std::max(1.0, std::abs(res.upper))) {
    throw Error(ErrorCode::EmptyTruncation, "V- > V+");
  }
  res.mean = null_value;
  res.sd = std::sqrt(sigma2 * eta2);
  const auto z = [&](double v) { return (v - res.mean) / res.sd; };
  const normal::TailPair tails = normal::truncated_tails(z(stat), z(res.lower), z(res.upper));
  res.p_value = std::min(1.0, 2.0 * std::min(tails.lower, tails.upper));
  return res;
}

double f_cdf(double x, int d1, int d2) {
  if (d1 < 1 || d2 < 1) throw Error(ErrorCode::InvalidArgument, "F degrees of freedom must be >= 1");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double a = 0.5 * d1;
  const double b = 0.5 * d2;
  const double u = d1 * x / (d1 * x + d2);
  if (u > 0.5) return boost::math::ibetac(b, a, d2 / (d1 * x + d2));
  return boost::math::ibeta(a, b, u);
}

double f_sf(double x, int d1, int d2) {
  if (d1 < 1 || d2 < 1) throw Error(ErrorCode::InvalidArgument, "F degrees of freedom must be >= 1");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  const double a = 0.5 * d1;
  const double b = 0.5 * d2;
  const double u = d1 * x / (d1 * x + d2);
  if (u > 0.5) return boost::math::ibeta(b, a, d2 / (d1 * x + d2));
  return boost::math::ibetac(a, b, u);
}

IntervalSet gfun_zero_set(double q, double r, double s, double x_max) {
  if (q == 0.0 && r == 0.0 && s == 0.0) return {{0.0, x_max}};
  std::vector<double> breaks{0.0};
  // single interior extremum at q^2/(r^2-q^2) when the signs differ and |r| > |q|
  if (q != 0.0 && r != 0.0 && sign_of(q) != sign_of(r) && std::abs(r) > std::abs(q)) {
    breaks.push_back(q * q / (r * r - q * q));
  }
  breaks.push_back(kInf);

  std::vector<double> roots;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) piece_roots(q, r, s, breaks[k], breaks[k + 1], roots);
  std::sort(roots.begin(), roots.end());

  std::vector<double> points{0.0};
  for (double x : roots) {
    if (x > points.back()) points.push_back(x);
  }
  points.push_back(kInf);

  IntervalSet out;
  for (std::size_t k = 0; k + 1 < points.size(); ++k) {
    const double a = points[k];
    const double b = points[k + 1];
    bool nonpositive;
    if (std::isinf(b)) {
      const int ts = tail_sign(q, r, s);
      nonpositive = ts <= 0;
    } else {
      nonpositive = gfun(q, r, s, 0.5 * (a + b)) <= 0.0;
    }
    if (nonpositive) out.push_back({a, b});
  }
  out = normalize_intervals(std::move(out));
  if (!std::isinf(x_max)) {
    out = intersect_intervals(out, {{0.0, x_max}});
  }
  return out;
}

TruncationSet ftrunc_set(const Polyhedron& event, const Vector& y, const Matrix& x_selected,
                         const ResidualOperator& op) {
  const auto n = y.size();
  if (event.dim() != n || x_selected.rows() != n || op.n() != n) {
    throw Error(ErrorCode::DimensionMismatch, "ftrunc_set dimensions");
  }
  const Matrix u = column_basis(op.residualize(x_selected));
  if (u.cols() < x_selected.cols()) throw Error(ErrorCode::RankDeficient, "[X_E Z] is rank deficient");
  const Matrix p_mz = u * u.transpose();  // P_M - P_Z

  const double tr_num = p_mz.trace();
  const double tr_den = static_cast<double>(n) - op.pz.trace() - tr_num;
  const double d1r = std::round(tr_num);
  const double d2r = std::round(tr_den);
  if (std::abs(tr_num - d1r) > 1e-6 || std::abs(tr_den - d2r) > 1e-6 || d1r < 1 || d2r < 1) {
    throw Error(ErrorCode::NonIntegerTrace, "projector traces are not positive integers");
  }

  const Vector r1 = op.residualize(y);
  const Vector num = p_mz * y;
  const Vector den = r1 - num;
  const double l = r1.norm();
  const double num_norm = num.norm();
  const double den_norm = den.norm();
  if (!(den_norm > 0.0)) throw Error(ErrorCode::EmptySet, "(I - P_M) y vanishes");
  const Vector v_num = num_norm > 0.0 ? Vector(num / num_norm) : Vector::Zero(n);
  const Vector v_den = den / den_norm;
  const Vector delta = op.pz * y;

  TruncationSet ts;
  ts.d1 = static_cast<int>(d1r);
  ts.d2 = static_cast<int>(d2r);
  ts.c = static_cast<double>(ts.d1) / ts.d2;
  ts.x_obs = (num_norm * num_norm) / (den_norm * den_norm);
  ts.intervals = {{0.0, kInf}};
  if (event.rows() > 0) {
    const Vector q = l * (event.a * v_num);
    const Vector s = l * (event.a * v_den);
    const Vector r = event.a * delta - event.b;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      ts.intervals = intersect_intervals(ts.intervals, gfun_zero_set(q(i), r(i), s(i)));
      if (ts.intervals.empty()) break;
    }
  }
  if (ts.intervals.empty()) throw Error(ErrorCode::EmptySet, "truncation set is empty");
  if (!interval_set_contains(ts.intervals, ts.x_obs, 1e-8 * std::max(1.0, ts.x_obs))) {
    throw Error(ErrorCode::EmptySet, "observed statistic lies outside its truncation set");
  }
  return ts;
}

double ftrunc_pvalue(const TruncationSet& tset, double t_obs) {
  double num = 0.0;
  double den = 0.0;
  for (const Interval& iv : tset.intervals) {
    const double lo = iv.lo / tset.c;
    const double hi = iv.hi / tset.c;
    den += interval_mass(lo, hi, tset.d1, tset.d2);
    num += interval_mass(std::max(lo, t_obs), hi, tset.d1, tset.d2);
  }
  if (den < 1e-300) throw Error(ErrorCode::ZeroMass, "truncation set has no F mass");
  return std::clamp(num / den, 0.0, 1.0);
}

double binomial_upper_tail(int n_flips, int observed) {
  using boost::multiprecision::cpp_int;
  using boost::multiprecision::cpp_rational;
  if (n_flips < 0 || observed < 0 || observed > n_flips) throw Error(ErrorCode::InvalidArgument, "binomial tail");
  cpp_int tail = 0;
  cpp_int coeff = 1;
  for (int k = 0; k <= n_flips; ++k) {
    if (k >= observed) tail += coeff;
    coeff = coeff * (n_flips - k) / (k + 1);
  }
  const cpp_int total = cpp_int(1) << n_flips;
  return static_cast<double>(cpp_rational(tail, total));
}

double selective_binomial_demo(int n_flips, int threshold, int observed) {
  using boost::multiprecision::cpp_int;
  using boost::multiprecision::cpp_rational;
  if (!(0 <= threshold && threshold <= observed && observed <= n_flips)) {
    throw Error(ErrorCode::InvalidArgument, "need threshold <= observed <= n_flips");
  }
  cpp_int num = 0;
  cpp_int den = 0;
  cpp_int coeff = 1;
  for (int k = 0; k <= n_flips; ++k) {
    if (k >= observed) num += coeff;
    if (k >= threshold) den += coeff;
    coeff = coeff * (n_flips - k) / (k + 1);
  }
  return static_cast<double>(cpp_rational(num, den));
}

}  // namespace sipi
