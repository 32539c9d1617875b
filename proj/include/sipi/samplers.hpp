#pragma once

#include <cstdint>

#include "sipi/core.hpp"

namespace sipi {

/// N(0, sigma2 I_d) on {w : C w <= d}. Ambient points are offset + map * w.
struct ConstrainedGaussian {
  Matrix constraints;  // C, m x d
  Vector offsets;      // d, length m
  double sigma2 = 1.0;
  Vector w_obs;

  Eigen::Index dim() const { return constraints.cols(); }
};

/// Uniform on {w : ||w|| = radius, C w <= d}.
struct ConstrainedSphere {
  Matrix constraints;
  Vector offsets;
  double radius = 1.0;
  Vector w_obs;

  Eigen::Index dim() const { return constraints.cols(); }
};

enum class SamplerMethod { AcceptReject, HitAndRun };

struct ChainConfig {
  int n_samples = 5000;
  int burn_in = 1000;
  int thin = 5;
  std::uint64_t seed = 0;
  SamplerMethod method = SamplerMethod::HitAndRun;

  void validate() const;
};

struct SampleSet {
  Matrix draws;  // d x n_samples, one draw per column
  double acceptance_rate = 1.0;
  long long proposals = 0;
  long long degenerate_chords = 0;
};

inline constexpr long long kMaxProposals = 10'000'000;
inline constexpr double kFeasibilityTol = 1e-8;

/// Pulls a polyhedral event on y back to coordinates w with y = offset + map * w.
void pull_back_event(const Polyhedron& event, const Matrix& map, const Vector& offset, Matrix& constraints,
                     Vector& offsets);

ConstrainedGaussian make_gaussian_target(const Polyhedron& event, const Matrix& map, const Vector& offset,
                                         double sigma2, Vector w_obs);
ConstrainedSphere make_sphere_target(const Polyhedron& event, const Matrix& map, const Vector& offset,
                                     Vector w_obs);

SampleSet accept_reject_gaussian(const ConstrainedGaussian& target, const ChainConfig& cfg);
SampleSet hit_and_run_gaussian(const ConstrainedGaussian& target, const ChainConfig& cfg);
SampleSet hit_and_run_sphere(const ConstrainedSphere& target, const ChainConfig& cfg);

/// Dispatches on cfg.method (sphere targets always use hit-and-run).
SampleSet sample(const ConstrainedGaussian& target, const ChainConfig& cfg);
SampleSet sample(const ConstrainedSphere& target, const ChainConfig& cfg);

}  // namespace sipi
