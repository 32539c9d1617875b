#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sipi/dists.hpp"
#include "sipi/normal.hpp"
#include "sipi/selectors.hpp"

using namespace sipi;

TEST_CASE("interval normalization and intersection") {
  const IntervalSet s = normalize_intervals({{3.0, 4.0}, {0.0, 1.0}, {0.5, 2.0}, {5.0, 4.0}, {4.0, 6.0}});
  REQUIRE(s.size() == 2);
  CHECK(s[0].lo == 0.0);
  CHECK(s[0].hi == 2.0);
  CHECK(s[1].lo == 3.0);
  CHECK(s[1].hi == 6.0);

  const IntervalSet i = intersect_intervals({{0.0, 2.0}, {3.0, INFINITY}}, {{1.0, 3.5}, {10.0, 11.0}});
  REQUIRE(i.size() == 3);
  CHECK(i[0].lo == 1.0);
  CHECK(i[0].hi == 2.0);
  CHECK(i[1].lo == 3.0);
  CHECK(i[1].hi == 3.5);
  CHECK(i[2].lo == 10.0);
  CHECK(intersect_intervals({{0.0, 1.0}}, {{2.0, 3.0}}).empty());
  CHECK(interval_set_contains(i, 10.5));
  CHECK_FALSE(interval_set_contains(i, 5.0));
}

TEST_CASE("truncated normal p-value without truncation is the two-sided normal p-value") {
  Rng rng(40);
  const Vector y = oracle::gaussian_vector(rng, 6);
  const Vector eta = oracle::gaussian_vector(rng, 6);
  const double sigma2 = 2.0;
  const TruncNormalResult r = truncnorm_pvalue(eta, y, Polyhedron::whole_space(6), sigma2, 0.0);
  const double z = eta.dot(y) / std::sqrt(sigma2 * eta.squaredNorm());
  CHECK(r.p_value == doctest::Approx(2.0 * normal::sf(std::abs(z))).epsilon(1e-12));
  CHECK(std::isinf(r.lower));
  CHECK(std::isinf(r.upper));
}

TEST_CASE("truncated normal p-value matches quadrature on random polyhedra") {
  Rng rng(41);
  int checked = 0;
  for (int rep = 0; rep < 40; ++rep) {
    const Vector y = oracle::gaussian_vector(rng, 5);
    const Vector eta = oracle::gaussian_vector(rng, 5);
    Polyhedron ev{oracle::gaussian_matrix(rng, 4, 5), Vector()};
    ev.b = ev.a * y + (oracle::gaussian_vector(rng, 4).cwiseAbs() * 0.7);
    const double sigma2 = 0.5 + rep % 3;
    const double mean = 0.3 * (rep % 5 - 2);
    const TruncNormalResult r = truncnorm_pvalue(eta, y, ev, sigma2, mean);
    CHECK(r.lower <= r.statistic);
    CHECK(r.statistic <= r.upper);
    const double want = oracle::truncnorm_two_sided_quadrature(r.statistic, mean, std::sqrt(sigma2 * eta.squaredNorm()),
                                                               r.lower, r.upper);
    CHECK(r.p_value == doctest::Approx(want).epsilon(1e-7));
    ++checked;
  }
  CHECK(checked == 40);
}

TEST_CASE("truncated normal p-value agrees with accept-reject sampling") {
  Rng rng(42);
  const Vector y = oracle::gaussian_vector(rng, 4);
  const Vector eta = oracle::gaussian_vector(rng, 4);
  Polyhedron ev{oracle::gaussian_matrix(rng, 3, 4), Vector()};
  ev.b = ev.a * y + Vector::Constant(3, 0.4);
  const TruncNormalResult r = truncnorm_pvalue(eta, y, ev, 1.0, 0.0);
  const oracle::McP mc = oracle::truncnorm_mc(eta, y, ev, 1.0, 0.0, rng, 40000);
  CHECK(std::abs(r.p_value - mc.p) < 4.0 * mc.se + 1e-3);
}

TEST_CASE("truncated normal error paths") {
  const Vector y = Vector::Ones(3);
  const Vector eta = Vector::Unit(3, 0);
  Polyhedron ev{Matrix::Identity(3, 3), Vector::Zero(3)};
  try {
    truncnorm_pvalue(eta, y, ev, 1.0, 0.0);
    FAIL("expected NonMember");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonMember);
  }
  CHECK_THROWS_AS(truncnorm_pvalue(eta, y, Polyhedron::whole_space(3), 0.0, 0.0), Error);
  CHECK_THROWS_AS(truncnorm_pvalue(Vector::Ones(2), y, Polyhedron::whole_space(3), 1.0, 0.0), Error);
}

TEST_CASE("F cdf and survival function") {
  boost::math::quadrature::tanh_sinh<double> integrator;
  for (int d1 : {1, 3, 10}) {
    for (int d2 : {2, 7, 40}) {
      boost::math::fisher_f_distribution<double> f(d1, d2);
      for (double x : {0.01, 0.5, 1.0, 2.5, 9.0, 60.0}) {
        CHECK(f_cdf(x, d1, d2) == doctest::Approx(boost::math::cdf(f, x)).epsilon(1e-12));
        CHECK(f_sf(x, d1, d2) == doctest::Approx(boost::math::cdf(boost::math::complement(f, x))).epsilon(1e-12));
        CHECK(f_cdf(x, d1, d2) + f_sf(x, d1, d2) == doctest::Approx(1.0).epsilon(1e-14));
      }
      // independent check by integrating the density
      const double q = integrator.integrate([&](double t) { return boost::math::pdf(f, t); }, 0.0, 1.7);
      CHECK(f_cdf(1.7, d1, d2) == doctest::Approx(q).epsilon(1e-8));
    }
  }
  CHECK(f_cdf(0.0, 2, 3) == 0.0);
  CHECK(f_sf(0.0, 2, 3) == 1.0);
  // deep upper tail stays positive
  CHECK(f_sf(1e6, 5, 50) > 0.0);
}

TEST_CASE("g zero set matches a grid scan on random coefficients") {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 60; ++rep) {
    const double q = nd(rng) * std::pow(10.0, rep % 3 - 1);
    const double r = nd(rng);
    const double s = nd(rng) * 2.0;
    const IntervalSet set = gfun_zero_set(q, r, s);
    for (std::size_t k = 1; k < set.size(); ++k) CHECK(set[k].lo > set[k - 1].hi);
    const oracle::ScanReport rep_scan = oracle::scan_gfun(q, r, s, set, 20000);
    CHECK(rep_scan.disagreements == 0);
    CHECK(rep_scan.checked > 15000);
  }
}

TEST_CASE("g zero set near tangency") {
  // interior extremum x* = q^2 / (r^2 - q^2) with s tuned so g(x*) ~ 0
  for (double q : {1.0, -1.0, 0.3, -5.0}) {
    for (double ratio : {1.5, 1.01, 1.0000001}) {
      const double r = -ratio * q;
      const double xs = q * q / (r * r - q * q);
      const double g_star = q * std::sqrt(xs) + r * std::sqrt(1.0 + xs);
      for (double eps : {1e-3, 1e-8, 0.0, -1e-8, -1e-3}) {
        const double s = -g_star + eps;
        const IntervalSet set = gfun_zero_set(q, r, s);
        const oracle::ScanReport scan = oracle::scan_gfun(q, r, s, set, 20000);
        CHECK_MESSAGE(scan.disagreements == 0, "q=" << q << " ratio=" << ratio << " eps=" << eps);
      }
    }
  }
}

TEST_CASE("g zero set with a root near zero and one far out") {
  // q + r ~ -1.6e-6 q: g stays positive until x ~ 1e14
  const double q = 16.0;
  const double r = -q * 1.0000001;
  const double s = q * 1.0000001 - 1e-9;
  const IntervalSet set = gfun_zero_set(q, r, s);
  REQUIRE(set.size() == 2);
  CHECK(set[0].hi < 1e-20);
  CHECK(set[1].lo == doctest::Approx(1e14).epsilon(1e-6));
  CHECK(oracle::scan_gfun(q, r, s, set, 20000).disagreements == 0);
}

TEST_CASE("g zero set degenerate coefficients") {
  CHECK(gfun_zero_set(0.0, 0.0, 0.0).size() == 1);
  CHECK(gfun_zero_set(0.0, 0.0, 1.0).empty());
  const IntervalSet all = gfun_zero_set(0.0, 0.0, -1.0);
  REQUIRE(all.size() == 1);
  CHECK(all[0].lo == 0.0);
  CHECK(std::isinf(all[0].hi));
  // sqrt(x) <= 2 exactly
  const IntervalSet b = gfun_zero_set(1.0, 0.0, -2.0);
  REQUIRE(b.size() == 1);
  CHECK(b[0].hi == doctest::Approx(4.0).epsilon(1e-12));
  const IntervalSet capped = gfun_zero_set(0.0, 0.0, -1.0, 3.0);
  REQUIRE(capped.size() == 1);
  CHECK(capped[0].hi == 3.0);
}

namespace {

struct FInstance {
  Dataset data;
  SelectionModel model;
  ResidualOperator op;
  Matrix x_sel;
};

FInstance lasso_instance(Rng& rng, int n, int p) {
  for (;;) {
    Dataset d = make_dataset(oracle::gaussian_vector(rng, n), oracle::gaussian_matrix(rng, n, p),
                             oracle::gaussian_matrix(rng, n, 1));
    const double lambda = 0.5 * (d.x.transpose() * d.y).cwiseAbs().maxCoeff();
    const LassoFit fit = fit_lasso(d.x, d.y, lambda);
    if (fit.active.empty()) continue;
    SelectionModel m = lasso_selection_model(d.x, d.y, fit);
    ResidualOperator op = projector(d.z, true);
    Matrix xs = select_columns(d.x, m.selected);
    return {std::move(d), std::move(m), std::move(op), std::move(xs)};
  }
}

}  // namespace

TEST_CASE("F truncation set agrees with event membership along the ray") {
  Rng rng(44);
  for (int rep = 0; rep < 15; ++rep) {
    const FInstance inst = lasso_instance(rng, 10 + rep % 4, 5 + rep % 3);
    const TruncationSet ts = ftrunc_set(inst.model.event, inst.data.y, inst.x_sel, inst.op);
    const oracle::FRay ray = oracle::f_ray(inst.data.y, inst.x_sel, oracle::with_ones(inst.data.z));
    // the ray passes through y at x_obs
    CHECK((ray.at(ts.x_obs) - inst.data.y).norm() < 1e-9);
    const oracle::ScanReport scan = oracle::scan_ftrunc(inst.model.event, ray, ts.intervals);
    CHECK(scan.disagreements == 0);
    CHECK(scan.checked > 1000);
    // endpoints: just inside is a member, just outside is not
    for (const Interval& iv : ts.intervals) {
      for (double e : {iv.lo, iv.hi}) {
        if (!std::isfinite(e) || e == 0.0) continue;
        const double h = 1e-6 * std::max(1.0, e);
        const bool in_lo = inst.model.event.contains(ray.at(e - h), 0.0);
        const bool in_hi = inst.model.event.contains(ray.at(e + h), 0.0);
        CHECK(in_lo != in_hi);
      }
    }
    const double p = ftrunc_pvalue(ts, ts.x_obs / ts.c);
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
  }
}

TEST_CASE("F truncation over the whole space is the classical F test") {
  Rng rng(45);
  const Dataset d = make_dataset(oracle::gaussian_vector(rng, 15), oracle::gaussian_matrix(rng, 15, 3),
                                 oracle::gaussian_matrix(rng, 15, 2));
  const ResidualOperator op = projector(d.z, true);
  const TruncationSet ts = ftrunc_set(Polyhedron::whole_space(15), d.y, d.x, op);
  CHECK(ts.d1 == 3);
  CHECK(ts.d2 == 15 - 3 - 3);
  const Matrix za = oracle::with_ones(d.z);
  Matrix full(15, 6);
  full << d.x, za;
  const double rss0 = oracle::rss(d.y, za);
  const double rss1 = oracle::rss(d.y, full);
  const double f = ((rss0 - rss1) / 3.0) / (rss1 / 9.0);
  CHECK(ts.x_obs / ts.c == doctest::Approx(f).epsilon(1e-10));
  CHECK(ftrunc_pvalue(ts, f) == doctest::Approx(oracle::f_upper(f, 3, 9)).epsilon(1e-10));
}

TEST_CASE("truncated F p-value on a single interval") {
  TruncationSet ts;
  ts.d1 = 2;
  ts.d2 = 8;
  ts.c = 0.25;
  ts.intervals = {{0.5, 1.5}};
  // T in [2, 6]
  const double t = 3.0;
  const double want = (f_cdf(6.0, 2, 8) - f_cdf(t, 2, 8)) / (f_cdf(6.0, 2, 8) - f_cdf(2.0, 2, 8));
  CHECK(ftrunc_pvalue(ts, t) == doctest::Approx(want).epsilon(1e-12));
  CHECK(ftrunc_pvalue(ts, 2.0) == doctest::Approx(1.0));
}

TEST_CASE("coin example") {
  CHECK(binomial_upper_tail(9, 8) == doctest::Approx(10.0 / 512.0).epsilon(1e-15));
  CHECK(selective_binomial_demo(9, 5, 8) == doctest::Approx(10.0 / 256.0).epsilon(1e-15));
  CHECK(selective_binomial_demo(9, 0, 8) == doctest::Approx(binomial_upper_tail(9, 8)).epsilon(1e-15));
  CHECK_THROWS_AS(selective_binomial_demo(9, 6, 5), Error);
}
