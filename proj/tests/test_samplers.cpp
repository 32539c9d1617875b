#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sipi/normal.hpp"
#include "sipi/samplers.hpp"
#include "sipi/sim.hpp"

using namespace sipi;

namespace {

ChainConfig chain(std::uint64_t seed, int n = 2000, SamplerMethod m = SamplerMethod::HitAndRun) {
  ChainConfig c;
  c.n_samples = n;
  c.burn_in = 500;
  c.thin = 5;
  c.seed = seed;
  c.method = m;
  return c;
}

std::vector<double> projection(const Matrix& draws, const Vector& dir) {
  std::vector<double> v(static_cast<std::size_t>(draws.cols()));
  for (Eigen::Index k = 0; k < draws.cols(); ++k) v[static_cast<std::size_t>(k)] = draws.col(k).dot(dir);
  return v;
}

}  // namespace

TEST_CASE("chain config validation") {
  ChainConfig c;
  CHECK_NOTHROW(c.validate());
  c.n_samples = 50;
  CHECK_THROWS_AS(c.validate(), Error);
  c = ChainConfig{};
  c.thin = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = ChainConfig{};
  c.burn_in = -1;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("Gaussian hit-and-run on a half-line matches the truncated normal law") {
  // w in R^2, constraint w_0 >= 1  <=>  -w_0 <= -1
  ConstrainedGaussian t;
  t.constraints = (Matrix(1, 2) << -1.0, 0.0).finished();
  t.offsets = Vector::Constant(1, -1.0);
  t.sigma2 = 1.0;
  t.w_obs = (Vector(2) << 1.5, 0.0).finished();
  const SampleSet s = hit_and_run_gaussian(t, chain(1, 3000));
  std::vector<double> u;
  for (Eigen::Index k = 0; k < s.draws.cols(); ++k) {
    CHECK(s.draws(0, k) >= 1.0 - 1e-12);
    u.push_back(normal::truncated_tails(s.draws(0, k), 1.0, INFINITY).lower);
  }
  // thinned chain is close to independent here; 0.01-level critical value
  CHECK(ks_uniform(u) < ks_critical(static_cast<int>(u.size()), 0.01));
}

TEST_CASE("accept-reject and hit-and-run agree on a polytope") {
  Rng rng(2);
  const int d = 3;
  ConstrainedGaussian t;
  t.constraints = oracle::gaussian_matrix(rng, 5, d);
  t.offsets = Vector::Constant(5, 0.6);
  t.sigma2 = 1.5;
  t.w_obs = Vector::Zero(d);
  const SampleSet ar = accept_reject_gaussian(t, chain(3, 2000, SamplerMethod::AcceptReject));
  const SampleSet hr = hit_and_run_gaussian(t, chain(4, 2000));
  CHECK(ar.acceptance_rate < 1.0);
  CHECK(ar.acceptance_rate > 0.0);
  const double crit = oracle::ks_two_sample_critical(2000, 2000, 0.01);
  for (int r = 0; r < d; ++r) {
    const Vector e = Vector::Unit(d, r);
    CHECK(oracle::ks_two_sample(projection(ar.draws, e), projection(hr.draws, e)) < crit);
  }
  for (Eigen::Index k = 0; k < hr.draws.cols(); ++k) {
    CHECK(((t.constraints * hr.draws.col(k) - t.offsets).array() <= 1e-9).all());
  }
}

TEST_CASE("sphere chain matches rejection on the sphere") {
  Rng rng(5);
  const int d = 4;
  const double radius = 2.0;
  ConstrainedSphere t;
  t.constraints = oracle::gaussian_matrix(rng, 3, d);
  t.offsets = Vector::Constant(3, 0.5);
  t.radius = radius;
  // start: rejection-sample one feasible point
  std::normal_distribution<double> nd;
  std::vector<Vector> reference;
  Vector w(d);
  while (reference.size() < 2000) {
    for (int i = 0; i < d; ++i) w(i) = nd(rng);
    w *= radius / w.norm();
    if (((t.constraints * w - t.offsets).array() <= 0.0).all()) reference.push_back(w);
  }
  t.w_obs = reference.front();
  const SampleSet s = hit_and_run_sphere(t, chain(6, 2000));
  const double crit = oracle::ks_two_sample_critical(2000, 2000, 0.01);
  for (int r = 0; r < d; ++r) {
    std::vector<double> a;
    for (const Vector& v : reference) a.push_back(v(r));
    CHECK(oracle::ks_two_sample(a, projection(s.draws, Vector::Unit(d, r))) < crit);
  }
  for (Eigen::Index k = 0; k < s.draws.cols(); ++k) CHECK(s.draws.col(k).norm() == doctest::Approx(radius).epsilon(1e-12));
}

TEST_CASE("unconstrained sphere chain is uniform") {
  ConstrainedSphere t;
  t.constraints = Matrix(0, 5);
  t.offsets = Vector(0);
  t.radius = 3.0;
  t.w_obs = Vector::Unit(5, 0) * 3.0;
  const SampleSet s = hit_and_run_sphere(t, chain(7, 4000));
  // E[w_i^2] = r^2 / d
  for (int i = 0; i < 5; ++i) CHECK(s.draws.row(i).squaredNorm() / 4000.0 == doctest::Approx(9.0 / 5.0).epsilon(0.1));
}

TEST_CASE("chains are reproducible under a fixed seed") {
  Rng rng(8);
  ConstrainedGaussian t;
  t.constraints = oracle::gaussian_matrix(rng, 4, 3);
  t.offsets = Vector::Constant(4, 1.0);
  t.w_obs = Vector::Zero(3);
  const SampleSet a = hit_and_run_gaussian(t, chain(9, 200));
  const SampleSet b = hit_and_run_gaussian(t, chain(9, 200));
  CHECK(a.draws == b.draws);
  const SampleSet c = hit_and_run_gaussian(t, chain(10, 200));
  CHECK(a.draws != c.draws);
}

TEST_CASE("sampler error paths") {
  ConstrainedGaussian t;
  t.constraints = (Matrix(1, 2) << 1.0, 0.0).finished();
  t.offsets = Vector::Constant(1, -6.0);
  t.w_obs = Vector::Zero(2);
  try {
    hit_and_run_gaussian(t, chain(1, 100));
    FAIL("expected InfeasibleStart");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InfeasibleStart);
  }
  // w_0 <= -6 has probability ~1e-9: rejection gives up
  t.w_obs = (Vector(2) << -7.0, 0.0).finished();
  try {
    accept_reject_gaussian(t, chain(1, 100, SamplerMethod::AcceptReject));
    FAIL("expected AcceptanceTooLow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AcceptanceTooLow);
  }
  // the Markov chain copes with the same region
  const SampleSet s = hit_and_run_gaussian(t, chain(1, 100));
  CHECK((s.draws.row(0).array() <= -6.0).all());

  ConstrainedSphere sph;
  sph.constraints = Matrix(0, 3);
  sph.offsets = Vector(0);
  sph.radius = 1.0;
  sph.w_obs = Vector::Constant(3, 1.0);
  CHECK_THROWS_AS(hit_and_run_sphere(sph, chain(1, 100)), Error);
}

TEST_CASE("pull_back_event maps the event into chain coordinates") {
  Rng rng(11);
  Polyhedron ev{oracle::gaussian_matrix(rng, 4, 6), oracle::gaussian_vector(rng, 4)};
  const Matrix map = oracle::gaussian_matrix(rng, 6, 3);
  const Vector off = oracle::gaussian_vector(rng, 6);
  Matrix c;
  Vector d;
  pull_back_event(ev, map, off, c, d);
  const Vector w = oracle::gaussian_vector(rng, 3);
  CHECK(((c * w - d) - (ev.a * (off + map * w) - ev.b)).norm() < 1e-12);
}
