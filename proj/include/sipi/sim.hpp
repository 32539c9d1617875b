#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sipi/core.hpp"
#include "sipi/inference.hpp"
#include "sipi/samplers.hpp"

namespace sipi {

struct LambdaPolicy {
  enum class Kind { Fixed, AutoSparsity };
  Kind kind = Kind::AutoSparsity;
  double value = 0.0;  // Fixed
  int low = 8;         // AutoSparsity
  int high = 12;

  static LambdaPolicy fixed(double lambda) { return {Kind::Fixed, lambda, 0, 0}; }
  static LambdaPolicy auto_sparsity(int low, int high) { return {Kind::AutoSparsity, 0.0, low, high}; }
};

struct SimConfig {
  int n = 50;
  int p_x = 100;
  int p_z = 5;
  int p_real = 10;
  double b_x = 0.0;
  double b_z = 1.0;
  int n_reps = 500;
  double alpha = 0.05;
  LambdaPolicy lambda_policy;
  std::vector<TestId> methods;
  std::uint64_t seed = 1;
  ChainConfig chain;
  VarianceMode variance = VarianceMode::unknown();
  int folds = 10;
  double split_frac = 0.5;
  bool intercept = true;
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const;
  int n1() const;
};

struct SimData {
  Dataset data;
  Vector beta;
  IndexSet support;
};

/// X, Z standard normal then standardized; beta_j = b_x / sqrt(p_real) on the
/// first p_real coordinates; y = X beta + (b_z / sqrt(p_z)) Z 1 + eps.
SimData generate(const SimConfig& cfg, std::uint64_t rep_seed);

/// Tuned lambda per selection arm. Each arm sees a different training size.
struct LambdaArms {
  double full = 0.0;
  double half = 0.0;
  double prevalidation = 0.0;
};

LambdaArms resolve_lambdas(const SimConfig& cfg);

struct MethodSummary {
  TestId method = TestId::SelectiveT;
  std::vector<double> p_values;  // valid replicates, in replicate order
  std::vector<int> replicates;   // replicate index of each p-value
  std::vector<int> true_positives;
  int rejections = 0;
  double rejection_rate = 0.0;
  double mean_true_positives = 0.0;
  double ks_statistic = 0.0;
  int failures = 0;
  std::map<std::string, int> failure_codes;
  double seconds = 0.0;
};

struct SimSummary {
  SimConfig config;
  LambdaArms lambdas;
  std::vector<MethodSummary> methods;
  double seconds = 0.0;

  const MethodSummary& method(TestId id) const;
};

/// Runs every replicate and method. Throws TooManyFailures when any method
/// fails on 1% of replicates or more.
SimSummary run_experiment(const SimConfig& cfg);

struct SizeRow {
  int size = 0;
  std::vector<double> p_values;  // sorted; the ECDF steps by 1/n at each
  double ks_statistic = 0.0;
};

/// Selective t null study with one chain per replicate of max(sizes) draws;
/// each size reuses the first `size` draws.
std::vector<SizeRow> sampler_size_study(const SimConfig& cfg, const std::vector<int>& sizes);

/// sup |F_n - U(0,1)|
double ks_uniform(std::vector<double> values);
/// sup |F_a - F_b|
double ks_two_sample(std::vector<double> a, std::vector<double> b);
/// Asymptotic critical value of the one-sample KS statistic at level alpha.
double ks_critical(int n, double alpha);
/// P(Binomial(n, p) >= k)
double binomial_sf(int n, double p, int k);

}  // namespace sipi
