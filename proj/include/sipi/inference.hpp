#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sipi/core.hpp"
#include "sipi/dists.hpp"
#include "sipi/samplers.hpp"
#include "sipi/selectors.hpp"

namespace sipi {

enum class TestId {
  SelectiveT,
  SelectiveTGeneral,
  SelectiveFSampling,
  SelectiveFExact,
  NaiveT,
  NaiveF,
  SplitT,
  SplitF,
  Prevalidate,
  CarveT,
  CarveF,
  CarveFExact,
  ScreenTruncNormal,
};

std::string_view test_name(TestId id);
std::optional<TestId> parse_test_id(std::string_view name);
const std::vector<TestId>& all_test_ids();

enum class ReferenceKind { MonteCarlo, TruncNormal, TruncF, ClassicalT, ClassicalF, Degenerate };

std::string_view reference_name(ReferenceKind kind);

struct Reference {
  ReferenceKind kind = ReferenceKind::Degenerate;
  // MonteCarlo
  int n_samples = 0;
  double acceptance_rate = 1.0;
  double mc_standard_error = 0.0;
  // TruncNormal
  double lower = 0.0;
  double upper = 0.0;
  // TruncF
  IntervalSet intervals;
  double scale = 1.0;
  // ClassicalT / ClassicalF / TruncF
  int df1 = 0;
  int df2 = 0;
};

struct TestResult {
  TestId test_id = TestId::NaiveT;
  double statistic = 0.0;
  double p_value = 1.0;
  Reference reference;
  double theta0 = 0.0;
  Vector beta0;
  IndexSet selected;
  double lambda = 0.0;
  std::map<std::string, double> diagnostics;
  std::vector<std::string> flags;
};

struct VarianceMode {
  bool known = false;
  double sigma2 = 1.0;

  static VarianceMode known_value(double sigma2) { return {true, sigma2}; }
  static VarianceMode unknown() { return {false, 1.0}; }
};

/// Data, the selected model and the null being tested. The response in `data`
/// must lie in `model.event`.
struct HypothesisContext {
  Dataset data;
  SelectionModel model;
  VarianceMode variance = VarianceMode::unknown();
  double theta0 = 0.0;
  Vector beta0;  // empty means zero
  bool intercept = true;
};

/// Observed statistic and its draws under the conditional null.
struct McStatistic {
  double observed = 0.0;
  std::vector<double> draws;
  bool two_sided = true;
  double acceptance_rate = 1.0;
  bool degenerate = false;
};

/// (1 + #{draws at least as extreme}) / (N + 1) over the first `use_first` draws.
double mc_pvalue(const McStatistic& stat, std::size_t use_first = 0);
/// Batch-means standard error of the exceedance fraction.
double mc_standard_error(const McStatistic& stat, std::size_t use_first = 0);

McStatistic selective_t_statistics(const HypothesisContext& ctx, const ChainConfig& cfg);
TestResult selective_t_affine(const HypothesisContext& ctx, const ChainConfig& cfg);
TestResult selective_t_general(const HypothesisContext& ctx, const Fitter& fitter, const ChainConfig& cfg);
McStatistic selective_f_statistics(const HypothesisContext& ctx, const ChainConfig& cfg);
TestResult selective_f_sampling(const HypothesisContext& ctx, const ChainConfig& cfg);
TestResult selective_f_exact(const HypothesisContext& ctx);

/// Truncated-normal test of a yhat that is constant on the event (L = 0).
TestResult screen_truncnorm_test(const HypothesisContext& ctx);

TestResult naive_t(const Dataset& data, const Vector& yhat, bool intercept = true);
TestResult naive_f(const Dataset& data, const IndexSet& selected, bool intercept = true);

TestResult sample_split_t(const Dataset& data, const Fitter& fitter, int n1, std::uint64_t seed,
                          bool intercept = true);
TestResult sample_split_f(const Dataset& data, const Selector& selector, int n1, std::uint64_t seed,
                          bool intercept = true);
TestResult prevalidate(const Dataset& data, const Fitter& fitter, int folds, std::uint64_t seed,
                       bool intercept = true);

struct CarveOptions {
  int n1 = 0;  // n1 == n disables the split
  std::uint64_t seed = 0;
  VarianceMode variance = VarianceMode::unknown();
  double theta0 = 0.0;
  bool intercept = true;
  bool exact = false;  // F family only
};

TestResult carve_t(const Dataset& data, const Selector& selector, const CarveOptions& opts, const ChainConfig& cfg);
TestResult carve_f(const Dataset& data, const Selector& selector, const CarveOptions& opts, const ChainConfig& cfg);

/// P(|T_df| >= |t|)
double student_t_two_sided(double t, int df);

}  // namespace sipi
