#include "sipi/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sipi/kernels.hpp"
#include "sipi/normal.hpp"
#include "sipi/rng.hpp"

namespace sipi {

namespace {

constexpr int kRefreshEvery = 256;
constexpr int kMaxDegenerateRun = 1000;
constexpr double kDegenerateWidth = 1e-12;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

void gemv(const Matrix& c, const Vector& x, Vector& y) {
  kernels::active().gemv(c.data(), static_cast<std::size_t>(c.rows()), static_cast<std::size_t>(c.cols()),
                         static_cast<std::size_t>(c.rows()), x.data(), y.data());
}

void check_start(const Matrix& c, const Vector& d, const Vector& w) {
  if (w.size() != c.cols()) throw Error(ErrorCode::DimensionMismatch, "start point dimension");
  if (c.rows() == 0) return;
  const double worst = (c * w - d).maxCoeff();
  if (worst > kFeasibilityTol) {
    throw Error(ErrorCode::InfeasibleStart, "start violates a constraint by " + std::to_string(worst));
  }
}

void random_unit(Rng& rng, std::normal_distribution<double>& nd, Vector& u) {
  double norm2 = 0.0;
  do {
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = nd(rng);
    norm2 = u.squaredNorm();
  } while (norm2 == 0.0);
  u /= std::sqrt(norm2);
}

int total_steps(const ChainConfig& cfg) { return cfg.burn_in + cfg.n_samples * cfg.thin; }

bool keep_step(const ChainConfig& cfg, int step) {
  return step >= cfg.burn_in && (step - cfg.burn_in + 1) % cfg.thin == 0;
}

struct Arc {
  double start;
  double end;
};

// Feasible part of [0, 2pi) for t -> cos(t) alpha + sin(t) beta <= d, all rows.
// Returns the total feasible length; `feasible` holds the disjoint pieces.
double feasible_arcs(const Vector& alpha, const Vector& beta, const Vector& d, std::vector<Arc>& blocked,
                     std::vector<Arc>& feasible) {
  blocked.clear();
  feasible.clear();
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    const double rho2 = alpha(i) * alpha(i) + beta(i) * beta(i);
    if (d(i) >= 0.0 && rho2 <= d(i) * d(i)) continue;
    const double rho = std::sqrt(rho2);
    if (d(i) <= -rho) {
      blocked.push_back({0.0, kTwoPi});
      continue;
    }
    const double half = std::acos(std::clamp(d(i) / rho, -1.0, 1.0));
    const double center = std::atan2(beta(i), alpha(i));
    double start = std::fmod(center - half, kTwoPi);
    if (start < 0.0) start += kTwoPi;
    const double end = start + 2.0 * half;
    if (end > kTwoPi) {
      blocked.push_back({start, kTwoPi});
      blocked.push_back({0.0, end - kTwoPi});
    } else {
      blocked.push_back({start, end});
    }
  }
  std::sort(blocked.begin(), blocked.end(), [](const Arc& a, const Arc& b) { return a.start < b.start; });
  double cursor = 0.0;
  double total = 0.0;
  for (const Arc& a : blocked) {
    if (a.start > cursor) {
      feasible.push_back({cursor, a.start});
      total += a.start - cursor;
    }
    cursor = std::max(cursor, a.end);
  }
  if (cursor < kTwoPi) {
    feasible.push_back({cursor, kTwoPi});
    total += kTwoPi - cursor;
  }
  return total;
}

}  // namespace

void ChainConfig::validate() const {
  if (n_samples < 100) throw Error(ErrorCode::InvalidArgument, "n_samples must be >= 100");
  if (burn_in < 0) throw Error(ErrorCode::InvalidArgument, "burn_in must be >= 0");
  if (thin < 1) throw Error(ErrorCode::InvalidArgument, "thin must be >= 1");
}

void pull_back_event(const Polyhedron& event, const Matrix& map, const Vector& offset, Matrix& constraints,
                     Vector& offsets) {
  if (event.dim() != map.rows() || offset.size() != map.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "event and reconstruction map disagree on n");
  }
  constraints = event.a * map;
  offsets = event.b - event.a * offset;
}

ConstrainedGaussian make_gaussian_target(const Polyhedron& event, const Matrix& map, const Vector& offset,
                                         double sigma2, Vector w_obs) {
  if (!(sigma2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma2 must be positive");
  ConstrainedGaussian t;
  pull_back_event(event, map, offset, t.constraints, t.offsets);
  t.sigma2 = sigma2;
  t.w_obs = std::move(w_obs);
  return t;
}

ConstrainedSphere make_sphere_target(const Polyhedron& event, const Matrix& map, const Vector& offset,
                                     Vector w_obs) {
  ConstrainedSphere t;
  pull_back_event(event, map, offset, t.constraints, t.offsets);
  t.radius = w_obs.norm();
  t.w_obs = std::move(w_obs);
  return t;
}

SampleSet accept_reject_gaussian(const ConstrainedGaussian& target, const ChainConfig& cfg) {
  cfg.validate();
  const auto dim = target.dim();
  const auto m = target.constraints.rows();
  const double sigma = std::sqrt(target.sigma2);
  Rng rng(cfg.seed);
  std::normal_distribution<double> nd;

  SampleSet out;
  out.draws.resize(dim, cfg.n_samples);
  Vector w(dim);
  Vector cw(m);
  int accepted = 0;
  long long proposals = 0;
  while (accepted < cfg.n_samples) {
    if (proposals >= kMaxProposals) {
      throw Error(ErrorCode::AcceptanceTooLow, std::to_string(accepted) + " acceptances in " +
                                                   std::to_string(proposals) + " proposals");
    }
    ++proposals;
    for (Eigen::Index i = 0; i < dim; ++i) w(i) = sigma * nd(rng);
    if (m > 0) {
      gemv(target.constraints, w, cw);
      if (((cw - target.offsets).array() > 0.0).any()) continue;
    }
    out.draws.col(accepted++) = w;
  }
  out.proposals = proposals;
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(proposals);
  return out;
}

SampleSet hit_and_run_gaussian(const ConstrainedGaussian& target, const ChainConfig& cfg) {
  cfg.validate();
  const Matrix& c = target.constraints;
  const Vector& d = target.offsets;
  check_start(c, d, target.w_obs);
  const auto dim = target.dim();
  const auto m = c.rows();
  const double sigma = std::sqrt(target.sigma2);

  Rng rng(cfg.seed);
  std::normal_distribution<double> nd;
  Vector w = target.w_obs;
  Vector u(dim);
  Vector cw = c * w;
  Vector cu(m);
  Vector slack(m);

  SampleSet out;
  out.draws.resize(dim, cfg.n_samples);
  int kept = 0;
  int degenerate_run = 0;
  const int steps = total_steps(cfg);
  for (int step = 0; step < steps; ++step) {
    random_unit(rng, nd, u);
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    if (m > 0) {
      gemv(c, u, cu);
      slack = (d - cw).cwiseMax(0.0);
      const kernels::Chord chord = kernels::chord_bounds({slack.data(), static_cast<std::size_t>(m)},
                                                         {cu.data(), static_cast<std::size_t>(m)});
      lo = std::min(chord.lo, 0.0);
      hi = std::max(chord.hi, 0.0);
    }
    const double uniform = uniform_open(rng);
    if (hi - lo < kDegenerateWidth) {
      ++out.degenerate_chords;
      if (++degenerate_run > kMaxDegenerateRun) {
        throw Error(ErrorCode::DegenerateChord, "chord width below 1e-12 for " +
                                                    std::to_string(kMaxDegenerateRun) + " consecutive steps");
      }
    } else {
      degenerate_run = 0;
      // along the line the density is N(-w.u, sigma^2) in t
      const double mu = -kernels::dot({w.data(), static_cast<std::size_t>(dim)},
                                      {u.data(), static_cast<std::size_t>(dim)});
      const double t = mu + sigma * normal::truncated_inverse((lo - mu) / sigma, (hi - mu) / sigma, uniform);
      const double step_len = std::clamp(t, lo, hi);
      kernels::axpy(step_len, {u.data(), static_cast<std::size_t>(dim)}, {w.data(), static_cast<std::size_t>(dim)});
      if (m > 0) {
        kernels::axpy(step_len, {cu.data(), static_cast<std::size_t>(m)}, {cw.data(), static_cast<std::size_t>(m)});
      }
    }
    if (m > 0 && (step + 1) % kRefreshEvery == 0) gemv(c, w, cw);
    if (keep_step(cfg, step)) out.draws.col(kept++) = w;
  }
  out.proposals = steps;
  return out;
}

SampleSet hit_and_run_sphere(const ConstrainedSphere& target, const ChainConfig& cfg) {
  cfg.validate();
  const Matrix& c = target.constraints;
  const Vector& d = target.offsets;
  check_start(c, d, target.w_obs);
  const auto dim = target.dim();
  const auto m = c.rows();
  const double radius = target.radius;
  if (!(radius > 0.0) || std::abs(target.w_obs.norm() - radius) > 1e-8 * std::max(1.0, radius)) {
    throw Error(ErrorCode::InfeasibleStart, "start point is not on the sphere");
  }
  if (dim < 2) throw Error(ErrorCode::InvalidArgument, "sphere chain needs dimension >= 2");

  Rng rng(cfg.seed);
  std::normal_distribution<double> nd;
  Vector w = target.w_obs;
  Vector v(dim);
  Vector cw = c * w;
  Vector cv(m);
  Vector beta(m);
  std::vector<Arc> blocked;
  std::vector<Arc> feasible;

  SampleSet out;
  out.draws.resize(dim, cfg.n_samples);
  int kept = 0;
  const int steps = total_steps(cfg);
  for (int step = 0; step < steps; ++step) {
    // unit tangent direction at w
    double norm2 = 0.0;
    do {
      for (Eigen::Index i = 0; i < dim; ++i) v(i) = nd(rng);
      v -= (v.dot(w) / (radius * radius)) * w;
      norm2 = v.squaredNorm();
    } while (norm2 < 1e-24);
    v /= std::sqrt(norm2);

    double t;
    if (m > 0) {
      gemv(c, v, cv);
      beta = radius * cv;
      const double total = feasible_arcs(cw, beta, d, blocked, feasible);
      if (feasible.empty() || total <= 0.0) {
        throw Error(ErrorCode::EmptyArc, "no feasible arc through the current point");
      }
      double pos = uniform_open(rng) * total;
      t = feasible.back().end;
      for (const Arc& a : feasible) {
        const double len = a.end - a.start;
        if (pos <= len) {
          t = a.start + pos;
          break;
        }
        pos -= len;
      }
    } else {
      t = uniform_open(rng) * kTwoPi;
    }
    const double ct = std::cos(t);
    const double st = std::sin(t);
    w = ct * w + (st * radius) * v;
    w *= radius / w.norm();
    if (m > 0) {
      if ((step + 1) % kRefreshEvery == 0) {
        gemv(c, w, cw);
      } else {
        cw = ct * cw + st * beta;
      }
    }
    if (keep_step(cfg, step)) out.draws.col(kept++) = w;
  }
  out.proposals = steps;
  return out;
}

SampleSet sample(const ConstrainedGaussian& target, const ChainConfig& cfg) {
  return cfg.method == SamplerMethod::AcceptReject ? accept_reject_gaussian(target, cfg)
                                                   : hit_and_run_gaussian(target, cfg);
}

SampleSet sample(const ConstrainedSphere& target, const ChainConfig& cfg) { return hit_and_run_sphere(target, cfg); }

}  // namespace sipi
