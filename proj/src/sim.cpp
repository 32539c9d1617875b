#include "sipi/sim.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>

#include "sipi/rng.hpp"
#include "sipi/selectors.hpp"

namespace sipi {

namespace {

// Stream salts for derive_seed(seed, replicate, salt).
constexpr std::uint64_t kSaltData = 1;
constexpr std::uint64_t kSaltSplit = 2;
constexpr std::uint64_t kSaltFolds = 3;
constexpr std::uint64_t kSaltChain = 16;  // + method position
constexpr std::uint64_t kSaltPilot = 4;
constexpr int kPilotAttempts = 10;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool uses_half_arm(TestId id) {
  switch (id) {
    case TestId::SplitT:
    case TestId::SplitF:
    case TestId::CarveT:
    case TestId::CarveF:
    case TestId::CarveFExact: return true;
    default: return false;
  }
}

int count_true(const IndexSet& selected, const IndexSet& support) {
  int tp = 0;
  for (int j : selected) tp += std::binary_search(support.begin(), support.end(), j) ? 1 : 0;
  return tp;
}

// Calls body(i) for i in [0, count) on a pool of workers.
template <class Body>
void parallel_for(int count, unsigned threads, Body&& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max(count, 1)));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) body(i);
  };
  if (threads <= 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
}

struct Cell {
  std::optional<double> p_value;
  int true_positives = 0;
  std::string failure;
  double seconds = 0.0;
};

class Replicate {
 public:
  Replicate(const SimConfig& cfg, const LambdaArms& lambdas, int index)
      : cfg_(cfg), lambdas_(lambdas), index_(index), sim_(generate(cfg, derive_seed(cfg.seed, index, kSaltData))) {}

  Cell run(TestId id, std::size_t position) {
    Cell cell;
    const auto start = Clock::now();
    try {
      const TestResult res = dispatch(id, position);
      cell.p_value = res.p_value;
      cell.true_positives = true_positives(id);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::EmptyActiveSet) {
        // nothing selected on the full data: nothing to reject
        cell.p_value = 1.0;
        cell.true_positives = 0;
      } else {
        cell.failure = std::string(error_name(e.code()));
      }
    }
    cell.seconds = seconds_since(start);
    return cell;
  }

 private:
  const Dataset& data() const { return sim_.data; }
  std::uint64_t split_seed() const { return derive_seed(cfg_.seed, index_, kSaltSplit); }

  const SelectionModel& full_model() {
    if (!full_model_) full_model_ = lasso_selector(lambdas_.full)(data().x, data().y);
    return *full_model_;
  }

  ChainConfig chain(std::size_t position) const {
    ChainConfig c = cfg_.chain;
    c.seed = derive_seed(cfg_.seed, index_, kSaltChain + position);
    return c;
  }

  HypothesisContext context() {
    return HypothesisContext{data(), full_model(), cfg_.variance, 0.0, Vector(), cfg_.intercept};
  }

  CarveOptions carve_options(bool exact) const {
    CarveOptions o;
    o.n1 = cfg_.n1();
    o.seed = split_seed();
    o.variance = cfg_.variance;
    o.intercept = cfg_.intercept;
    o.exact = exact;
    return o;
  }

  TestResult dispatch(TestId id, std::size_t position) {
    switch (id) {
      case TestId::SelectiveT: return selective_t_affine(context(), chain(position));
      case TestId::SelectiveTGeneral:
        return selective_t_general(context(), lasso_fitter(lambdas_.full), chain(position));
      case TestId::SelectiveFSampling: return selective_f_sampling(context(), chain(position));
      case TestId::SelectiveFExact: return selective_f_exact(context());
      case TestId::NaiveT: return naive_t(data(), full_model().fitted(data().y), cfg_.intercept);
      case TestId::NaiveF: return naive_f(data(), full_model().selected, cfg_.intercept);
      case TestId::SplitT:
        return sample_split_t(data(), lasso_fitter(lambdas_.half), cfg_.n1(), split_seed(), cfg_.intercept);
      case TestId::SplitF:
        return sample_split_f(data(), lasso_selector(lambdas_.half), cfg_.n1(), split_seed(), cfg_.intercept);
      case TestId::Prevalidate:
        return prevalidate(data(), lasso_fitter(lambdas_.prevalidation), cfg_.folds,
                           derive_seed(cfg_.seed, index_, kSaltFolds), cfg_.intercept);
      case TestId::CarveT: return carve_t(data(), lasso_selector(lambdas_.half), carve_options(false), chain(position));
      case TestId::CarveF: return carve_f(data(), lasso_selector(lambdas_.half), carve_options(false), chain(position));
      case TestId::CarveFExact:
        return carve_f(data(), lasso_selector(lambdas_.half), carve_options(true), chain(position));
      case TestId::ScreenTruncNormal: break;
    }
    throw Error(ErrorCode::ConfigError, "method not supported by the simulator");
  }

  int true_positives(TestId id) {
    if (id == TestId::Prevalidate) {
      return count_true(fit_lasso(data(), lambdas_.prevalidation).active, sim_.support);
    }
    if (uses_half_arm(id)) {
      if (!half_tp_) {
        const CarveSplit split = carve_split(data(), cfg_.n1(), split_seed());
        half_tp_ = count_true(fit_lasso(split.part1, lambdas_.half).active, sim_.support);
      }
      return *half_tp_;
    }
    return count_true(full_model().selected, sim_.support);
  }

  const SimConfig& cfg_;
  const LambdaArms& lambdas_;
  int index_;
  SimData sim_;
  std::optional<SelectionModel> full_model_;
  std::optional<int> half_tp_;
};

void finalize(MethodSummary& m, double alpha, int n_reps) {
  m.rejections = static_cast<int>(std::count_if(m.p_values.begin(), m.p_values.end(), [&](double p) { return p <= alpha; }));
  const auto valid = static_cast<double>(m.p_values.size());
  m.rejection_rate = valid > 0 ? m.rejections / valid : 0.0;
  double tp = 0.0;
  for (int t : m.true_positives) tp += t;
  m.mean_true_positives = valid > 0 ? tp / valid : 0.0;
  m.ks_statistic = m.p_values.empty() ? 1.0 : ks_uniform(m.p_values);
  if (m.failures * 100 >= n_reps && m.failures > 0) {
    throw Error(ErrorCode::TooManyFailures, std::string(test_name(m.method)) + " failed on " +
                                                std::to_string(m.failures) + " of " + std::to_string(n_reps) +
                                                " replicates");
  }
}

}  // namespace

void SimConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
  if (n < 4) fail("n must be >= 4");
  if (p_x < 1) fail("p_x must be >= 1");
  if (p_z < 0) fail("p_z must be >= 0");
  if (p_real < 0 || p_real > p_x) fail("need 0 <= p_real <= p_x");
  if (n_reps < 1) fail("n_reps must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) fail("alpha must lie in (0, 1)");
  if (!(split_frac > 0.0 && split_frac < 1.0)) fail("split_frac must lie in (0, 1)");
  if (folds < 2 || folds > n) fail("folds must lie in [2, n]");
  if (methods.empty()) fail("no methods requested");
  for (TestId id : methods) {
    if (id == TestId::ScreenTruncNormal) fail("screen_truncnorm is not a simulator method");
  }
  if (lambda_policy.kind == LambdaPolicy::Kind::Fixed && !(lambda_policy.value > 0.0)) fail("lambda must be > 0");
  if (lambda_policy.kind == LambdaPolicy::Kind::AutoSparsity &&
      (lambda_policy.low < 1 || lambda_policy.low > lambda_policy.high)) {
    fail("auto lambda range must satisfy 1 <= low <= high");
  }
  if (variance.known && !(variance.sigma2 > 0.0)) fail("sigma2 must be > 0");
  try {
    chain.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
}

int SimConfig::n1() const { return static_cast<int>(std::lround(split_frac * n)); }

SimData generate(const SimConfig& cfg, std::uint64_t rep_seed) {
  Rng rng(rep_seed);
  std::normal_distribution<double> nd;
  Matrix x(cfg.n, cfg.p_x);
  Matrix z(cfg.n, cfg.p_z);
  // column-major fill keeps the stream layout independent of Eigen internals
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = nd(rng);
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, j) = nd(rng);
  Vector eps(cfg.n);
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = nd(rng);

  x = standardize(x);
  if (cfg.p_z > 0) z = standardize(z);

  SimData out;
  out.beta = Vector::Zero(cfg.p_x);
  for (int j = 0; j < cfg.p_real; ++j) {
    out.beta(j) = cfg.b_x / std::sqrt(static_cast<double>(cfg.p_real));
    out.support.push_back(j);
  }
  Vector y = x * out.beta + eps;
  if (cfg.p_z > 0) y += (cfg.b_z / std::sqrt(static_cast<double>(cfg.p_z))) * z.rowwise().sum();
  out.data = make_dataset(std::move(y), std::move(x), std::move(z));
  out.data.x_standardized = true;
  out.data.z_standardized = cfg.p_z > 0;
  return out;
}

LambdaArms resolve_lambdas(const SimConfig& cfg) {
  const LambdaPolicy& pol = cfg.lambda_policy;
  if (pol.kind == LambdaPolicy::Kind::Fixed) return {pol.value, pol.value, pol.value};

  const int n_prev = cfg.n - cfg.n / cfg.folds;
  for (int attempt = 0; attempt < kPilotAttempts; ++attempt) {
    const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(attempt), kSaltPilot);
    const SimData pilot = generate(cfg, seed);
    try {
      LambdaArms arms;
      arms.full = tune_lambda(pilot.data, pol.low, pol.high);
      const CarveSplit split = carve_split(pilot.data, cfg.n1(), derive_seed(seed, 0, kSaltSplit));
      arms.half = tune_lambda(split.part1, pol.low, pol.high);
      std::vector<int> rows(static_cast<std::size_t>(n_prev));
      for (int i = 0; i < n_prev; ++i) rows[static_cast<std::size_t>(i)] = split.permutation[static_cast<std::size_t>(i)];
      arms.prevalidation = tune_lambda(subset_rows(pilot.data, rows), pol.low, pol.high);
      return arms;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoLambdaInRange) throw;
    }
  }
  throw Error(ErrorCode::NoLambdaInRange, "no pilot replicate admits the requested sparsity range");
}

const MethodSummary& SimSummary::method(TestId id) const {
  for (const auto& m : methods) {
    if (m.method == id) return m;
  }
  throw Error(ErrorCode::InvalidArgument, "method not in summary: " + std::string(test_name(id)));
}

SimSummary run_experiment(const SimConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  SimSummary summary;
  summary.config = cfg;
  summary.lambdas = resolve_lambdas(cfg);

  const std::size_t n_methods = cfg.methods.size();
  std::vector<std::vector<Cell>> cells(static_cast<std::size_t>(cfg.n_reps));
  parallel_for(cfg.n_reps, cfg.threads, [&](int rep) {
    Replicate r(cfg, summary.lambdas, rep);
    auto& row = cells[static_cast<std::size_t>(rep)];
    row.reserve(n_methods);
    for (std::size_t k = 0; k < n_methods; ++k) row.push_back(r.run(cfg.methods[k], k));
  });

  for (std::size_t k = 0; k < n_methods; ++k) {
    MethodSummary m;
    m.method = cfg.methods[k];
    for (int rep = 0; rep < cfg.n_reps; ++rep) {
      const Cell& c = cells[static_cast<std::size_t>(rep)][k];
      m.seconds += c.seconds;
      if (c.p_value) {
        m.p_values.push_back(*c.p_value);
        m.replicates.push_back(rep);
        m.true_positives.push_back(c.true_positives);
      } else {
        ++m.failures;
        ++m.failure_codes[c.failure];
      }
    }
    finalize(m, cfg.alpha, cfg.n_reps);
    summary.methods.push_back(std::move(m));
  }
  summary.seconds = seconds_since(start);
  return summary;
}

std::vector<SizeRow> sampler_size_study(const SimConfig& cfg, const std::vector<int>& sizes) {
  if (sizes.empty() || !std::is_sorted(sizes.begin(), sizes.end()) || sizes.front() < 1) {
    throw Error(ErrorCode::ConfigError, "sizes must be positive and ascending");
  }
  SimConfig study = cfg;
  study.methods = {TestId::SelectiveT};
  study.chain.n_samples = std::max(sizes.back(), 100);
  study.validate();
  const LambdaArms lambdas = resolve_lambdas(study);

  std::vector<std::optional<McStatistic>> stats(static_cast<std::size_t>(study.n_reps));
  std::vector<char> failed(static_cast<std::size_t>(study.n_reps), 0);
  parallel_for(study.n_reps, study.threads, [&](int rep) {
    const SimData sim = generate(study, derive_seed(study.seed, rep, kSaltData));
    ChainConfig chain = study.chain;
    chain.seed = derive_seed(study.seed, rep, kSaltChain);
    try {
      SelectionModel model = lasso_selector(lambdas.full)(sim.data.x, sim.data.y);
      const HypothesisContext ctx{sim.data, std::move(model), study.variance, 0.0, Vector(), study.intercept};
      McStatistic st = selective_t_statistics(ctx, chain);
      if (!st.degenerate) stats[static_cast<std::size_t>(rep)] = std::move(st);
    } catch (const Error& e) {
      // an empty selection has no statistic; it is dropped without counting as a failure
      if (e.code() != ErrorCode::EmptyActiveSet) failed[static_cast<std::size_t>(rep)] = 1;
    }
  });

  const auto failures = std::count(failed.begin(), failed.end(), 1);
  if (failures * 100 >= study.n_reps && failures > 0) {
    throw Error(ErrorCode::TooManyFailures, std::to_string(failures) + " failed replicates in the size study");
  }
  std::vector<SizeRow> rows;
  for (int size : sizes) {
    SizeRow row;
    row.size = size;
    for (const auto& s : stats) {
      if (s) row.p_values.push_back(mc_pvalue(*s, static_cast<std::size_t>(size)));
    }
    std::sort(row.p_values.begin(), row.p_values.end());
    row.ks_statistic = ks_uniform(row.p_values);
    rows.push_back(std::move(row));
  }
  return rows;
}

double ks_uniform(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "KS statistic of an empty sample");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double u = std::clamp(values[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - u, u - static_cast<double>(i) / n});
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::InvalidArgument, "KS statistic of an empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical(int n, double alpha) {
  if (n < 1 || !(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "ks_critical arguments");
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

double binomial_sf(int n, double p, int k) {
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  return boost::math::ibeta(static_cast<double>(k), static_cast<double>(n - k + 1), p);
}

}  // namespace sipi
