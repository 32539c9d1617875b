// Command-line front end: test, simulate, calibrate, demo-coin.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sipi/dists.hpp"
#include "sipi/inference.hpp"
#include "sipi/io.hpp"
#include "sipi/rng.hpp"
#include "sipi/selectors.hpp"
#include "sipi/sim.hpp"

namespace {

using namespace sipi;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr int kExitInternal = 1;
constexpr int kExitData = 2;
constexpr int kExitConfig = 3;

constexpr std::uint64_t kSaltTestSplit = 2;
constexpr std::uint64_t kSaltTestFolds = 3;
constexpr std::uint64_t kSaltTestChain = 16;

// Flags shared by several subcommands. Unset optionals defer to --config.
struct CommonFlags {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::vector<std::string> methods;
  std::optional<double> lambda;
  std::vector<int> auto_lambda;
  std::optional<int> samples;
  std::optional<int> burn_in;
  std::optional<int> thin;
  std::optional<double> split_frac;
  std::optional<int> folds;
  bool no_intercept = false;
  std::optional<double> sigma2;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config_path, "JSON configuration file");
  app->add_option("--out", f.out, "output path (JSON); stdout when omitted");
  app->add_option("--seed", f.seed, "64-bit seed");
  app->add_option("--alpha", f.alpha, "test level");
  app->add_option("--method", f.methods, "test id (repeatable)");
  auto* lam = app->add_option("--lambda", f.lambda, "fixed lasso penalty");
  auto* autol = app->add_option("--auto-lambda", f.auto_lambda, "tune lambda for LOW..HIGH active variables")
                    ->expected(2);
  lam->excludes(autol);
  app->add_option("--samples", f.samples, "retained chain draws");
  app->add_option("--burn-in", f.burn_in, "discarded leading chain steps");
  app->add_option("--thin", f.thin, "keep every k-th step");
  app->add_option("--split-frac", f.split_frac, "part-1 fraction for splitting and carving");
  app->add_option("--folds", f.folds, "pre-validation folds");
  app->add_flag("--no-intercept", f.no_intercept, "do not append an all-ones column to Z");
  app->add_option("--sigma2", f.sigma2, "known noise variance (default: unknown)");
}

std::vector<TestId> parse_methods(const std::vector<std::string>& names) {
  std::vector<TestId> ids;
  for (const auto& name : names) {
    const auto id = parse_test_id(name);
    if (!id) throw Error(ErrorCode::ConfigError, "unknown method '" + name + "'");
    ids.push_back(*id);
  }
  return ids;
}

void apply_common(const CommonFlags& f, SimConfig& c) {
  if (f.seed) c.seed = *f.seed;
  if (f.alpha) c.alpha = *f.alpha;
  if (!f.methods.empty()) c.methods = parse_methods(f.methods);
  if (f.lambda) c.lambda_policy = LambdaPolicy::fixed(*f.lambda);
  if (!f.auto_lambda.empty()) c.lambda_policy = LambdaPolicy::auto_sparsity(f.auto_lambda[0], f.auto_lambda[1]);
  if (f.samples) c.chain.n_samples = *f.samples;
  if (f.burn_in) c.chain.burn_in = *f.burn_in;
  if (f.thin) c.chain.thin = *f.thin;
  if (f.split_frac) c.split_frac = *f.split_frac;
  if (f.folds) c.folds = *f.folds;
  if (f.no_intercept) c.intercept = false;
  if (f.sigma2) c.variance = VarianceMode::known_value(*f.sigma2);
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path);
  out << text;
}

ordered_json envelope(const char* command) {
  ordered_json j;
  j["schema_version"] = io::kSchemaVersion;
  j["library_version"] = SIPI_VERSION;
  j["command"] = command;
  return j;
}

// ---- test -------------------------------------------------------------------

struct TestFlags {
  std::string x;
  std::string z;
  std::string y;
  std::string selector = "lasso";
  int screen_k = 1;
  std::string combiner = "top";
  double theta0 = 0.0;
};

Combiner parse_combiner(const std::string& s) {
  if (s == "top") return Combiner::TopColumn;
  if (s == "average") return Combiner::Average;
  if (s == "pc") return Combiner::FirstPC;
  throw Error(ErrorCode::ConfigError, "combiner must be top, average or pc");
}

// Config file keys for `test` are the simulate keys that make sense on real
// data plus the selector block.
void load_test_config(const json& j, SimConfig& c, TestFlags& t) {
  json sim = j;
  for (const char* key : {"selector", "screen_k", "combiner", "theta0"}) sim.erase(key);
  io::from_json(sim, c);
  try {
    if (j.contains("selector")) t.selector = j.at("selector").get<std::string>();
    if (j.contains("screen_k")) t.screen_k = j.at("screen_k").get<int>();
    if (j.contains("combiner")) t.combiner = j.at("combiner").get<std::string>();
    if (j.contains("theta0")) t.theta0 = j.at("theta0").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
}

double arm_lambda(const LambdaPolicy& pol, const Matrix& x, const Vector& y) {
  if (pol.kind == LambdaPolicy::Kind::Fixed) return pol.value;
  return tune_lambda(x, y, pol.low, std::min<int>(pol.high, static_cast<int>(x.cols())));
}

int run_test(const CommonFlags& common, TestFlags flags) {
  SimConfig c;
  c.lambda_policy = LambdaPolicy::auto_sparsity(1, 12);
  c.methods = {TestId::SelectiveT};
  if (!common.config_path.empty()) load_test_config(io::read_json_file(common.config_path), c, flags);
  apply_common(common, c);
  if (c.methods.empty()) throw Error(ErrorCode::ConfigError, "no methods requested");
  c.chain.validate();
  if (flags.selector != "lasso" && flags.selector != "screen") {
    throw Error(ErrorCode::ConfigError, "selector must be lasso or screen");
  }
  const Combiner combiner = parse_combiner(flags.combiner);

  const Matrix x = io::read_csv_file(flags.x);
  const Vector y = io::read_csv_column(flags.y);
  const Matrix z = flags.z.empty() ? Matrix(x.rows(), 0) : io::read_csv_file(flags.z);
  const Dataset data = make_dataset(y, x, z);
  const int n = static_cast<int>(data.n());
  const int n1 = static_cast<int>(std::lround(c.split_frac * n));
  const std::uint64_t split_seed = derive_seed(c.seed, 0, kSaltTestSplit);

  // One lambda for selection on all rows, another for selection on part 1.
  std::optional<double> lam_full;
  std::optional<double> lam_half;
  auto full_lambda = [&] {
    if (!lam_full) lam_full = arm_lambda(c.lambda_policy, data.x, data.y);
    return *lam_full;
  };
  auto half_lambda = [&] {
    if (!lam_half) {
      const CarveSplit split = carve_split(data, n1, split_seed);
      lam_half = arm_lambda(c.lambda_policy, split.part1.x, split.part1.y);
    }
    return *lam_half;
  };
  auto selector_for = [&](double lambda) -> Selector {
    if (flags.selector == "screen") return screening_selector(flags.screen_k, combiner);
    return lasso_selector(lambda);
  };
  auto uses_lambda = [&] { return flags.selector == "lasso"; };

  std::optional<SelectionModel> full_model;
  auto model = [&]() -> const SelectionModel& {
    if (!full_model) full_model = selector_for(uses_lambda() ? full_lambda() : 0.0)(data.x, data.y);
    return *full_model;
  };

  ordered_json results = ordered_json::array();
  for (std::size_t k = 0; k < c.methods.size(); ++k) {
    const TestId id = c.methods[k];
    ChainConfig chain = c.chain;
    chain.seed = derive_seed(c.seed, 0, kSaltTestChain + k);
    auto ctx = [&](double theta0) {
      return HypothesisContext{data, model(), c.variance, theta0, Vector(), c.intercept};
    };
    CarveOptions carve;
    carve.n1 = n1;
    carve.seed = split_seed;
    carve.variance = c.variance;
    carve.theta0 = flags.theta0;
    carve.intercept = c.intercept;

    TestResult r;
    switch (id) {
      case TestId::SelectiveT: r = selective_t_affine(ctx(flags.theta0), chain); break;
      case TestId::SelectiveTGeneral:
        r = selective_t_general(ctx(0.0), fitter_from_selector(selector_for(uses_lambda() ? full_lambda() : 0.0)), chain);
        break;
      case TestId::SelectiveFSampling: r = selective_f_sampling(ctx(0.0), chain); break;
      case TestId::SelectiveFExact: r = selective_f_exact(ctx(0.0)); break;
      case TestId::ScreenTruncNormal: r = screen_truncnorm_test(ctx(flags.theta0)); break;
      case TestId::NaiveT:
        r = naive_t(data, model().fitted(data.y), c.intercept);
        r.selected = model().selected;
        r.lambda = model().lambda;
        break;
      case TestId::NaiveF: r = naive_f(data, model().selected, c.intercept); break;
      case TestId::SplitT:
        r = sample_split_t(data, fitter_from_selector(selector_for(uses_lambda() ? half_lambda() : 0.0)), n1,
                           split_seed, c.intercept);
        if (uses_lambda()) r.lambda = half_lambda();
        break;
      case TestId::SplitF:
        r = sample_split_f(data, selector_for(uses_lambda() ? half_lambda() : 0.0), n1, split_seed, c.intercept);
        break;
      case TestId::Prevalidate: {
        const Fitter fitter = fitter_from_selector(selector_for(uses_lambda() ? full_lambda() : 0.0));
        r = prevalidate(data, fitter, c.folds, derive_seed(c.seed, 0, kSaltTestFolds), c.intercept);
        if (uses_lambda()) r.lambda = full_lambda();
        break;
      }
      case TestId::CarveT: r = carve_t(data, selector_for(uses_lambda() ? half_lambda() : 0.0), carve, chain); break;
      case TestId::CarveF:
      case TestId::CarveFExact:
        carve.exact = id == TestId::CarveFExact;
        r = carve_f(data, selector_for(uses_lambda() ? half_lambda() : 0.0), carve, chain);
        break;
    }
    ordered_json rj = io::to_json(r);
    if (r.reference.kind == ReferenceKind::MonteCarlo) rj["chain_seed"] = chain.seed;
    rj["rejected"] = r.p_value <= c.alpha;
    results.push_back(rj);
  }

  ordered_json out = envelope("test");
  ordered_json cfg;
  cfg["inputs"] = {{"x", flags.x}, {"z", flags.z}, {"y", flags.y}};
  cfg["n"] = n;
  cfg["p_x"] = data.p_x();
  cfg["p_z"] = data.p_z();
  cfg["selector"] = flags.selector;
  if (flags.selector == "screen") {
    cfg["screen_k"] = flags.screen_k;
    cfg["combiner"] = flags.combiner;
  }
  cfg["theta0"] = flags.theta0;
  cfg["seed"] = c.seed;
  cfg["alpha"] = c.alpha;
  if (c.lambda_policy.kind == LambdaPolicy::Kind::Fixed) {
    cfg["lambda"] = c.lambda_policy.value;
  } else {
    cfg["auto_lambda"] = {c.lambda_policy.low, c.lambda_policy.high};
  }
  cfg["chain"] = io::to_json(c.chain);
  cfg["variance"] = c.variance.known ? "known" : "unknown";
  if (c.variance.known) cfg["sigma2"] = c.variance.sigma2;
  cfg["split_frac"] = c.split_frac;
  cfg["folds"] = c.folds;
  cfg["intercept"] = c.intercept;
  out["config"] = cfg;
  out["results"] = results;
  emit(common.out, out.dump(2) + "\n");
  return 0;
}

// ---- simulate / calibrate -----------------------------------------------------

SimConfig load_sim_config(const CommonFlags& common, std::optional<int> reps) {
  SimConfig c;
  c.methods = {TestId::SelectiveT, TestId::CarveT, TestId::SplitT, TestId::NaiveT};
  if (!common.config_path.empty()) io::from_json(io::read_json_file(common.config_path), c);
  apply_common(common, c);
  if (reps) c.n_reps = *reps;
  c.validate();
  return c;
}

int run_simulate(const CommonFlags& common, std::optional<int> reps, std::string csv_path) {
  const SimConfig c = load_sim_config(common, reps);
  const SimSummary s = run_experiment(c);
  ordered_json out = envelope("simulate");
  out["config"] = io::to_json(c);
  out["summary"] = io::to_json(s);
  emit(common.out, out.dump(2) + "\n");
  if (csv_path.empty() && !common.out.empty()) {
    csv_path = common.out;
    const auto dot = csv_path.rfind('.');
    const auto slash = csv_path.rfind('/');
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) csv_path.resize(dot);
    csv_path += ".csv";
  }
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw Error(ErrorCode::ConfigError, "cannot write " + csv_path);
    io::write_pvalue_table(csv, s);
  }
  std::cerr << "simulate: " << c.n_reps << " replicates in " << s.seconds << " s\n";
  return 0;
}

int run_calibrate(const CommonFlags& common, std::optional<int> reps, std::vector<int> sizes) {
  CommonFlags f = common;
  f.methods.clear();
  SimConfig c = load_sim_config(f, reps);
  if (sizes.empty()) sizes = {100, 1000, 10000};
  const auto rows = sampler_size_study(c, sizes);
  ordered_json out = envelope("calibrate");
  c.methods = {TestId::SelectiveT};
  c.chain.n_samples = std::max(sizes.back(), 100);
  out["config"] = io::to_json(c);
  out["sizes"] = io::to_json(rows);
  emit(common.out, out.dump(2) + "\n");
  return 0;
}

int run_demo_coin() {
  constexpr int kFlips = 9;
  constexpr int kHeads = 8;
  constexpr int kMajority = 5;
  std::printf("P(at least %d heads in %d fair flips)            = %.4f\n", kHeads, kFlips,
              binomial_upper_tail(kFlips, kHeads));
  std::printf("same tail given heads was the majority (>= %d) = %.4f\n", kMajority,
              selective_binomial_demo(kFlips, kMajority, kHeads));
  std::printf("The direction of the test was chosen after seeing the data, so the second value is the valid one.\n");
  return 0;
}

void report_error(const char* name, const char* category, const std::string& message) {
  ordered_json j;
  j["error"] = name;
  j["category"] = category;
  j["message"] = message;
  std::cerr << j.dump() << "\n";
}

int exit_code(ErrorCategory cat) {
  switch (cat) {
    case ErrorCategory::Data: return kExitData;
    case ErrorCategory::Config: return kExitConfig;
    case ErrorCategory::Internal: return kExitInternal;
  }
  return kExitInternal;
}

const char* category_name(ErrorCategory cat) {
  switch (cat) {
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Internal: return "internal";
  }
  return "internal";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective inference for internal predictors"};
  app.set_version_flag("--version", SIPI_VERSION);
  app.require_subcommand(1);

  CommonFlags test_common;
  TestFlags test_flags;
  auto* test = app.add_subcommand("test", "run selective and baseline tests on CSV data");
  add_common(test, test_common);
  test->add_option("--x", test_flags.x, "n x p design CSV")->required();
  test->add_option("--z", test_flags.z, "n x p_z external covariates CSV");
  test->add_option("--y", test_flags.y, "n x 1 response CSV")->required();
  test->add_option("--selector", test_flags.selector, "lasso or screen");
  test->add_option("--screen-k", test_flags.screen_k, "columns kept by marginal screening");
  test->add_option("--combiner", test_flags.combiner, "screening predictor: top, average or pc");
  test->add_option("--theta0", test_flags.theta0, "null value of the predictor coefficient");

  CommonFlags sim_common;
  std::optional<int> sim_reps;
  std::string sim_csv;
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo calibration and power study");
  add_common(simulate, sim_common);
  simulate->add_option("--reps", sim_reps, "replicates");
  simulate->add_option("--csv", sim_csv, "p-value table (default: --out with .csv)");

  CommonFlags cal_common;
  std::optional<int> cal_reps;
  std::vector<int> sizes;
  auto* calibrate = app.add_subcommand("calibrate", "p-value accuracy against chain length");
  add_common(calibrate, cal_common);
  calibrate->add_option("--reps", cal_reps, "replicates");
  calibrate->add_option("--sizes", sizes, "ascending chain sizes");

  app.add_subcommand("demo-coin", "selective versus naive binomial tail");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("ConfigError", "config", e.what());
    return kExitConfig;
  }

  try {
    if (*test) return run_test(test_common, test_flags);
    if (*simulate) return run_simulate(sim_common, sim_reps, sim_csv);
    if (*calibrate) return run_calibrate(cal_common, cal_reps, sizes);
    return run_demo_coin();
  } catch (const Error& e) {
    report_error(std::string(error_name(e.code())).c_str(), category_name(e.category()), e.what());
    return exit_code(e.category());
  } catch (const std::exception& e) {
    report_error("Internal", "internal", e.what());
    return kExitInternal;
  }
}
