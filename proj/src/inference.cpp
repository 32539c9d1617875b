#include "sipi/inference.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>

#include "sipi/kernels.hpp"
#include "sipi/rng.hpp"

namespace sipi {

namespace {

constexpr int kBatches = 25;

struct TestName {
  TestId id;
  std::string_view name;
};

constexpr TestName kNames[] = {
    {TestId::SelectiveT, "selective_t"},
    {TestId::SelectiveTGeneral, "selective_t_general"},
    {TestId::SelectiveFSampling, "selective_f_sampling"},
    {TestId::SelectiveFExact, "selective_f_exact"},
    {TestId::NaiveT, "naive_t"},
    {TestId::NaiveF, "naive_f"},
    {TestId::SplitT, "split_t"},
    {TestId::SplitF, "split_f"},
    {TestId::Prevalidate, "prevalidate"},
    {TestId::CarveT, "carve_t"},
    {TestId::CarveF, "carve_f"},
    {TestId::CarveFExact, "carve_f_exact"},
    {TestId::ScreenTruncNormal, "screen_truncnorm"},
};

Vector beta0_or_zero(const HypothesisContext& ctx) {
  const auto k = static_cast<Eigen::Index>(ctx.model.selected.size());
  if (ctx.beta0.size() == 0) return Vector::Zero(k);
  if (ctx.beta0.size() != k) throw Error(ErrorCode::DimensionMismatch, "beta0 length != |E|");
  return ctx.beta0;
}

void require_member(const HypothesisContext& ctx) {
  const double scale = std::max(1.0, ctx.data.y.lpNorm<Eigen::Infinity>());
  if (ctx.model.event.dim() != ctx.data.n()) {
    throw Error(ErrorCode::DimensionMismatch, "event dimension != n");
  }
  if (!ctx.model.event.contains(ctx.data.y, kMembershipTol * scale)) {
    throw Error(ErrorCode::NonMember, "observed y is outside the selection event");
  }
}

// y = A x via the active kernel table.
void apply(const Matrix& a, const double* x, Vector& y) {
  kernels::active().gemv(a.data(), static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols()),
                         static_cast<std::size_t>(a.rows()), x, y.data());
}

SampleSet draw_residuals(const HypothesisContext& ctx, const Matrix& map, const Vector& offset, const Vector& w_obs,
                         const ChainConfig& cfg) {
  if (ctx.variance.known) {
    return sample(make_gaussian_target(ctx.model.event, map, offset, ctx.variance.sigma2, w_obs), cfg);
  }
  return sample(make_sphere_target(ctx.model.event, map, offset, w_obs), cfg);
}

// Score statistic w^T g / ||g|| with g = Q^T yhat in residual coordinates.
double t_score(const double* w, const Vector& g, Eigen::Index dim) {
  const double gg = g.squaredNorm();
  if (!(gg > 0.0)) return 0.0;
  return kernels::active().dot(w, g.data(), static_cast<std::size_t>(dim)) / std::sqrt(gg);
}

TestResult mc_result(TestId id, const McStatistic& st) {
  TestResult res;
  res.test_id = id;
  res.statistic = st.observed;
  res.reference.kind = ReferenceKind::MonteCarlo;
  res.reference.n_samples = static_cast<int>(st.draws.size());
  res.reference.acceptance_rate = st.acceptance_rate;
  if (st.degenerate) {
    res.p_value = 1.0;
    res.reference.kind = ReferenceKind::Degenerate;
    res.flags.push_back("degenerate_yhat");
    return res;
  }
  res.p_value = mc_pvalue(st);
  res.reference.mc_standard_error = mc_standard_error(st);
  return res;
}

// Basis of (I - P_Z) X_E, checked for full column rank.
Matrix selected_residual_basis(const Dataset& data, const IndexSet& selected, const ResidualOperator& op) {
  const Matrix xe = select_columns(data.x, selected);
  const Matrix u = column_basis(op.residualize(xe));
  if (u.cols() < xe.cols()) throw Error(ErrorCode::RankDeficient, "[X_E Z] is rank deficient");
  return u;
}

TestResult degenerate_result(TestId id, const char* flag) {
  TestResult res;
  res.test_id = id;
  res.p_value = 1.0;
  res.reference.kind = ReferenceKind::Degenerate;
  res.flags.emplace_back(flag);
  return res;
}

bool is_degenerate_yhat(const Vector& yhat_resid, const Vector& yhat) {
  const double scale = std::max(1.0, yhat.norm());
  return !(yhat_resid.norm() > 1e-10 * scale);
}

}  // namespace

std::string_view test_name(TestId id) {
  for (const auto& n : kNames) {
    if (n.id == id) return n.name;
  }
  return "unknown";
}

std::optional<TestId> parse_test_id(std::string_view name) {
  for (const auto& n : kNames) {
    if (n.name == name) return n.id;
  }
  return std::nullopt;
}

const std::vector<TestId>& all_test_ids() {
  static const std::vector<TestId> ids = [] {
    std::vector<TestId> out;
    for (const auto& n : kNames) out.push_back(n.id);
    return out;
  }();
  return ids;
}

std::string_view reference_name(ReferenceKind kind) {
  switch (kind) {
    case ReferenceKind::MonteCarlo: return "monte_carlo";
    case ReferenceKind::TruncNormal: return "truncated_normal";
    case ReferenceKind::TruncF: return "truncated_f";
    case ReferenceKind::ClassicalT: return "classical_t";
    case ReferenceKind::ClassicalF: return "classical_f";
    case ReferenceKind::Degenerate: return "degenerate";
  }
  return "unknown";
}

double student_t_two_sided(double t, int df) {
  if (df < 1) throw Error(ErrorCode::InvalidArgument, "t test needs df >= 1");
  const double t2 = t * t;
  if (t2 == 0.0) return 1.0;
  const double x = df / (df + t2);
  if (x < 0.5) return boost::math::ibeta(0.5 * df, 0.5, x);
  return boost::math::ibetac(0.5, 0.5 * df, t2 / (df + t2));
}

double mc_pvalue(const McStatistic& stat, std::size_t use_first) {
  const std::size_t n = use_first == 0 ? stat.draws.size() : std::min(use_first, stat.draws.size());
  const double obs = stat.two_sided ? std::abs(stat.observed) : stat.observed;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = stat.two_sided ? std::abs(stat.draws[i]) : stat.draws[i];
    if (v >= obs) ++count;
  }
  return (1.0 + static_cast<double>(count)) / (static_cast<double>(n) + 1.0);
}

double mc_standard_error(const McStatistic& stat, std::size_t use_first) {
  const std::size_t n = use_first == 0 ? stat.draws.size() : std::min(use_first, stat.draws.size());
  if (n == 0) return 0.0;
  const double obs = stat.two_sided ? std::abs(stat.observed) : stat.observed;
  auto hit = [&](std::size_t i) {
    const double v = stat.two_sided ? std::abs(stat.draws[i]) : stat.draws[i];
    return v >= obs ? 1.0 : 0.0;
  };
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += hit(i);
  const double p = total / static_cast<double>(n);
  const double iid = std::sqrt(std::max(p * (1.0 - p), 1.0 / static_cast<double>(n)) / static_cast<double>(n));
  const std::size_t batch = n / kBatches;
  if (batch < 2) return iid;
  double ss = 0.0;
  for (int b = 0; b < kBatches; ++b) {
    double s = 0.0;
    for (std::size_t i = static_cast<std::size_t>(b) * batch; i < static_cast<std::size_t>(b + 1) * batch; ++i) s += hit(i);
    const double diff = s / static_cast<double>(batch) - p;
    ss += diff * diff;
  }
  const double batch_se = std::sqrt(ss / (kBatches - 1) / kBatches);
  return std::max(batch_se, iid);
}

McStatistic selective_t_statistics(const HypothesisContext& ctx, const ChainConfig& cfg) {
  require_member(ctx);
  const Dataset& data = ctx.data;
  const SelectionModel& model = ctx.model;
  const auto n = data.n();
  if (model.l_map.rows() != n || model.l_map.cols() != n || model.zeta.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "affine map does not match n");
  }
  const ResidualOperator op = projector(data.z, ctx.intercept);

  // reconstruction (I - theta0 L)^{-1}
  Matrix recon = Matrix::Identity(n, n);
  if (ctx.theta0 != 0.0) {
    const Matrix m = Matrix::Identity(n, n) - ctx.theta0 * model.l_map;
    Eigen::FullPivLU<Matrix> lu(m);
    if (!lu.isInvertible() || lu.rcond() < 1e-12) {
      throw Error(ErrorCode::SingularReconstruction, "I - theta0 L_M is near-singular");
    }
    recon = lu.inverse();
  }
  const Vector& y = data.y;
  const Vector yhat = model.fitted(y);
  const Vector r1 = residual_r1(y, ctx.theta0 * yhat, op);
  const Vector delta = y - recon * r1;
  const Matrix map = recon * op.basis;  // n x d
  const Vector w_obs = op.basis.transpose() * r1;
  const auto dim = op.dim();

  // yhat' = h0 + H w and g = Q^T yhat' = g0 + G w
  const Vector g0 = op.basis.transpose() * (model.l_map * delta + model.zeta);
  const Matrix gmat = op.basis.transpose() * (model.l_map * map);
  const bool constant_yhat = model.l_map.isZero(0.0);

  McStatistic st;
  Vector g_obs = g0 + gmat * w_obs;
  if (is_degenerate_yhat(g_obs, yhat)) {
    st.degenerate = true;
    return st;
  }
  st.observed = t_score(w_obs.data(), g_obs, dim);

  const SampleSet draws = draw_residuals(ctx, map, delta, w_obs, cfg);
  st.acceptance_rate = draws.acceptance_rate;
  st.draws.resize(static_cast<std::size_t>(draws.draws.cols()));
  Vector g(dim);
  for (Eigen::Index k = 0; k < draws.draws.cols(); ++k) {
    const double* w = draws.draws.col(k).data();
    if (constant_yhat) {
      g = g0;
    } else {
      apply(gmat, w, g);
      g += g0;
    }
    st.draws[static_cast<std::size_t>(k)] = t_score(w, g, dim);
  }
  return st;
}

TestResult selective_t_affine(const HypothesisContext& ctx, const ChainConfig& cfg) {
  const McStatistic st = selective_t_statistics(ctx, cfg);
  TestResult res = mc_result(TestId::SelectiveT, st);
  res.theta0 = ctx.theta0;
  res.selected = ctx.model.selected;
  res.lambda = ctx.model.lambda;
  return res;
}

TestResult selective_t_general(const HypothesisContext& ctx, const Fitter& fitter, const ChainConfig& cfg) {
  if (ctx.theta0 != 0.0) throw Error(ErrorCode::InvalidArgument, "general fitter test requires theta0 = 0");
  require_member(ctx);
  const Dataset& data = ctx.data;
  const ResidualOperator op = projector(data.z, ctx.intercept);
  const Vector& y = data.y;
  const Vector r1 = op.residualize(y);
  const Vector delta = y - r1;
  const Vector w_obs = op.basis.transpose() * r1;
  const auto dim = op.dim();

  auto score = [&](const Vector& w, const Vector& y_draw, std::size_t index) {
    Vector yhat;
    try {
      yhat = fitter(data.x, y_draw, data.x);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::FitterFailure, "draw " + std::to_string(index) + ": " + e.what());
    }
    const Vector g = op.basis.transpose() * yhat;
    return std::pair{t_score(w.data(), g, dim), is_degenerate_yhat(g, yhat)};
  };

  McStatistic st;
  const auto [obs, degenerate] = score(w_obs, y, 0);
  if (degenerate) {
    st.degenerate = true;
  } else {
    st.observed = obs;
    const SampleSet draws = draw_residuals(ctx, op.basis, delta, w_obs, cfg);
    st.acceptance_rate = draws.acceptance_rate;
    st.draws.resize(static_cast<std::size_t>(draws.draws.cols()));
    for (Eigen::Index k = 0; k < draws.draws.cols(); ++k) {
      const Vector w = draws.draws.col(k);
      st.draws[static_cast<std::size_t>(k)] = score(w, Vector(delta + op.basis * w), static_cast<std::size_t>(k) + 1).first;
    }
  }
  TestResult res = mc_result(TestId::SelectiveTGeneral, st);
  res.selected = ctx.model.selected;
  res.lambda = ctx.model.lambda;
  return res;
}

McStatistic selective_f_statistics(const HypothesisContext& ctx, const ChainConfig& cfg) {
  require_member(ctx);
  const Dataset& data = ctx.data;
  const ResidualOperator op = projector(data.z, ctx.intercept);
  const Matrix u = selected_residual_basis(data, ctx.model.selected, op);
  const Vector beta0 = beta0_or_zero(ctx);
  const Matrix xe = select_columns(data.x, ctx.model.selected);

  const Vector r1 = residual_r1(data.y, xe * beta0, op);
  const Vector delta = data.y - r1;
  const Vector w_obs = op.basis.transpose() * r1;
  const Matrix k_map = u.transpose() * op.basis;  // d1 x d
  const auto d1 = static_cast<double>(u.cols());
  const auto d2 = static_cast<double>(op.dim() - u.cols());
  if (d2 < 1) throw Error(ErrorCode::RankDeficient, "no residual degrees of freedom");

  Vector kw(k_map.rows());
  auto f_stat = [&](const double* w) {
    apply(k_map, w, kw);
    const double num = kw.squaredNorm();
    const double total = kernels::active().dot(w, w, static_cast<std::size_t>(op.dim()));
    const double den = std::max(total - num, 0.0);
    return (num / d1) / (den / d2);
  };

  McStatistic st;
  st.two_sided = false;
  st.observed = f_stat(w_obs.data());
  const SampleSet draws = draw_residuals(ctx, op.basis, delta, w_obs, cfg);
  st.acceptance_rate = draws.acceptance_rate;
  st.draws.resize(static_cast<std::size_t>(draws.draws.cols()));
  for (Eigen::Index k = 0; k < draws.draws.cols(); ++k) {
    st.draws[static_cast<std::size_t>(k)] = f_stat(draws.draws.col(k).data());
  }
  return st;
}

TestResult selective_f_sampling(const HypothesisContext& ctx, const ChainConfig& cfg) {
  if (ctx.model.selected.empty()) return degenerate_result(TestId::SelectiveFSampling, "empty_selection");
  const McStatistic st = selective_f_statistics(ctx, cfg);
  TestResult res = mc_result(TestId::SelectiveFSampling, st);
  res.beta0 = beta0_or_zero(ctx);
  res.selected = ctx.model.selected;
  res.lambda = ctx.model.lambda;
  const auto k = static_cast<int>(ctx.model.selected.size());
  res.reference.df1 = k;
  res.reference.df2 = static_cast<int>(ctx.data.n()) - static_cast<int>(ctx.data.p_z() + (ctx.intercept ? 1 : 0)) - k;
  return res;
}

TestResult selective_f_exact(const HypothesisContext& ctx) {
  if (ctx.model.selected.empty()) return degenerate_result(TestId::SelectiveFExact, "empty_selection");
  if (ctx.beta0.size() != 0 && !ctx.beta0.isZero(0.0)) {
    throw Error(ErrorCode::InvalidArgument, "the closed-form F test requires beta0 = 0");
  }
  require_member(ctx);
  const ResidualOperator op = projector(ctx.data.z, ctx.intercept);
  const TruncationSet ts = ftrunc_set(ctx.model.event, ctx.data.y, select_columns(ctx.data.x, ctx.model.selected), op);
  const double t_obs = ts.x_obs / ts.c;

  TestResult res;
  res.test_id = TestId::SelectiveFExact;
  res.statistic = t_obs;
  res.p_value = ftrunc_pvalue(ts, t_obs);
  res.reference.kind = ReferenceKind::TruncF;
  res.reference.intervals = ts.intervals;
  res.reference.scale = ts.c;
  res.reference.df1 = ts.d1;
  res.reference.df2 = ts.d2;
  res.beta0 = Vector::Zero(static_cast<Eigen::Index>(ctx.model.selected.size()));
  res.selected = ctx.model.selected;
  res.lambda = ctx.model.lambda;
  return res;
}

TestResult screen_truncnorm_test(const HypothesisContext& ctx) {
  if (!ctx.model.l_map.isZero(0.0)) {
    throw Error(ErrorCode::InvalidArgument, "truncated-normal test needs a yhat constant on the event");
  }
  const Dataset& data = ctx.data;
  const ResidualOperator op = projector(data.z, ctx.intercept);
  const Vector& yhat = ctx.model.zeta;
  const Vector yhat_resid = op.residualize(yhat);
  if (is_degenerate_yhat(yhat_resid, yhat)) return degenerate_result(TestId::ScreenTruncNormal, "degenerate_yhat");
  const Vector eta = yhat_resid / yhat_resid.squaredNorm();

  double sigma2 = ctx.variance.sigma2;
  TestResult res;
  if (!ctx.variance.known) {
    const Vector y_resid = op.residualize(data.y);
    const double coef = eta.dot(data.y);
    const double rss = (y_resid - coef * yhat_resid).squaredNorm();
    const auto df = static_cast<double>(op.dim() - 1);
    if (df < 1) throw Error(ErrorCode::RankDeficient, "no degrees of freedom for the variance estimate");
    sigma2 = rss / df;
    res.flags.push_back("plug_in_sigma2");
  }
  const TruncNormalResult tn = truncnorm_pvalue(eta, data.y, ctx.model.event, sigma2, ctx.theta0);
  res.test_id = TestId::ScreenTruncNormal;
  res.statistic = tn.statistic;
  res.p_value = std::max(tn.p_value, std::numeric_limits<double>::min());
  res.reference.kind = ReferenceKind::TruncNormal;
  res.reference.lower = tn.lower;
  res.reference.upper = tn.upper;
  res.theta0 = ctx.theta0;
  res.selected = ctx.model.selected;
  res.diagnostics["sigma2"] = sigma2;
  return res;
}

TestResult naive_t(const Dataset& data, const Vector& yhat, bool intercept) {
  if (yhat.size() != data.n()) throw Error(ErrorCode::DimensionMismatch, "yhat length != n");
  const ResidualOperator op = projector(data.z, intercept);
  const Vector yhat_resid = op.residualize(yhat);
  if (is_degenerate_yhat(yhat_resid, yhat)) throw Error(ErrorCode::RankDeficient, "[yhat Z] is rank deficient");
  const Vector y_resid = op.residualize(data.y);
  const double ss = yhat_resid.squaredNorm();
  const double coef = yhat_resid.dot(y_resid) / ss;
  const double rss = std::max((y_resid - coef * yhat_resid).squaredNorm(), 0.0);
  const int df = static_cast<int>(op.dim()) - 1;
  if (df < 1) throw Error(ErrorCode::RankDeficient, "no residual degrees of freedom");

  TestResult res;
  res.test_id = TestId::NaiveT;
  const double se = std::sqrt(rss / df / ss);
  res.statistic = se > 0.0 ? coef / se : (coef == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), coef));
  res.p_value = std::max(student_t_two_sided(res.statistic, df), std::numeric_limits<double>::min());
  res.reference.kind = ReferenceKind::ClassicalT;
  res.reference.df1 = df;
  res.diagnostics["coefficient"] = coef;
  return res;
}

TestResult naive_f(const Dataset& data, const IndexSet& selected, bool intercept) {
  if (selected.empty()) return degenerate_result(TestId::NaiveF, "empty_selection");
  const ResidualOperator op = projector(data.z, intercept);
  const Matrix u = selected_residual_basis(data, selected, op);
  const Vector y_resid = op.residualize(data.y);
  const double explained = (u.transpose() * y_resid).squaredNorm();
  const double rss = std::max(y_resid.squaredNorm() - explained, 0.0);
  const int d1 = static_cast<int>(u.cols());
  const int d2 = static_cast<int>(op.dim()) - d1;
  if (d2 < 1) throw Error(ErrorCode::RankDeficient, "no residual degrees of freedom");

  TestResult res;
  res.test_id = TestId::NaiveF;
  res.statistic = (explained / d1) / (rss / d2);
  res.p_value = std::max(f_sf(res.statistic, d1, d2), std::numeric_limits<double>::min());
  res.reference.kind = ReferenceKind::ClassicalF;
  res.reference.df1 = d1;
  res.reference.df2 = d2;
  res.selected = selected;
  return res;
}

TestResult sample_split_t(const Dataset& data, const Fitter& fitter, int n1, std::uint64_t seed, bool intercept) {
  const CarveSplit split = carve_split(data, n1, seed);
  const Vector yhat2 = fitter(split.part1.x, split.part1.y, split.part2.x);
  const ResidualOperator op = projector(split.part2.z, intercept);
  if (is_degenerate_yhat(op.residualize(yhat2), yhat2)) return degenerate_result(TestId::SplitT, "degenerate_yhat");
  TestResult res = naive_t(split.part2, yhat2, intercept);
  res.test_id = TestId::SplitT;
  return res;
}

TestResult sample_split_f(const Dataset& data, const Selector& selector, int n1, std::uint64_t seed, bool intercept) {
  const CarveSplit split = carve_split(data, n1, seed);
  SelectionModel model;
  try {
    model = selector(split.part1.x, split.part1.y);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EmptyActiveSet) return degenerate_result(TestId::SplitF, "empty_selection");
    throw;
  }
  TestResult res = naive_f(split.part2, model.selected, intercept);
  res.test_id = TestId::SplitF;
  res.lambda = model.lambda;
  return res;
}

TestResult prevalidate(const Dataset& data, const Fitter& fitter, int folds, std::uint64_t seed, bool intercept) {
  const auto n = static_cast<int>(data.n());
  if (folds < 2 || folds > n) throw Error(ErrorCode::FoldTooSmall, "need 2 <= K <= n folds");
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[static_cast<std::size_t>(uniform_index(rng, static_cast<std::uint64_t>(i) + 1))]);
  }
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] = k % folds;

  Vector yhat(n);
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train;
    std::vector<int> test;
    for (int i = 0; i < n; ++i) (fold_of[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
    if (test.empty() || train.empty()) throw Error(ErrorCode::FoldTooSmall, "empty fold");
    const Dataset tr = subset_rows(data, train);
    const Dataset te = subset_rows(data, test);
    const Vector pred = fitter(tr.x, tr.y, te.x);
    for (std::size_t k = 0; k < test.size(); ++k) yhat(test[k]) = pred(static_cast<Eigen::Index>(k));
  }
  const ResidualOperator op = projector(data.z, intercept);
  if (is_degenerate_yhat(op.residualize(yhat), yhat)) return degenerate_result(TestId::Prevalidate, "degenerate_yhat");
  TestResult res = naive_t(data, yhat, intercept);
  res.test_id = TestId::Prevalidate;
  res.diagnostics["folds"] = folds;
  return res;
}

namespace {

struct CarvedModel {
  SelectionModel model;  // event and affine map over all n rows
};

// nullopt when the part-1 selector picks nothing
std::optional<CarvedModel> carve_model(const Dataset& data, const Selector& selector, const CarveOptions& opts) {
  const auto n = static_cast<int>(data.n());
  std::vector<int> perm;
  Dataset part1;
  if (opts.n1 == n) {
    perm.resize(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    part1 = data;
  } else {
    CarveSplit split = carve_split(data, opts.n1, opts.seed);
    perm = std::move(split.permutation);
    part1 = std::move(split.part1);
  }
  SelectionModel m1;
  try {
    m1 = selector(part1.x, part1.y);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EmptyActiveSet) return std::nullopt;
    throw;
  }
  const AffineMap full = carve_affine_map(m1, data.x, perm);
  CarvedModel out{m1};
  out.model.event = carve_polyhedron(m1, n - opts.n1, perm);
  out.model.l_map = full.l_map;
  out.model.zeta = full.zeta;
  return out;
}

}  // namespace

TestResult carve_t(const Dataset& data, const Selector& selector, const CarveOptions& opts, const ChainConfig& cfg) {
  const std::optional<CarvedModel> carved_or = carve_model(data, selector, opts);
  if (!carved_or) return degenerate_result(TestId::CarveT, "empty_selection");
  const CarvedModel& carved = *carved_or;
  HypothesisContext ctx{data, carved.model, opts.variance, opts.theta0, Vector(), opts.intercept};
  TestResult res = selective_t_affine(ctx, cfg);
  res.test_id = TestId::CarveT;
  res.diagnostics["n1"] = opts.n1;
  return res;
}

TestResult carve_f(const Dataset& data, const Selector& selector, const CarveOptions& opts, const ChainConfig& cfg) {
  const std::optional<CarvedModel> carved_or = carve_model(data, selector, opts);
  if (!carved_or) return degenerate_result(opts.exact ? TestId::CarveFExact : TestId::CarveF, "empty_selection");
  const CarvedModel& carved = *carved_or;
  HypothesisContext ctx{data, carved.model, opts.variance, 0.0, Vector(), opts.intercept};
  TestResult res = opts.exact ? selective_f_exact(ctx) : selective_f_sampling(ctx, cfg);
  res.test_id = opts.exact ? TestId::CarveFExact : TestId::CarveF;
  res.diagnostics["n1"] = opts.n1;
  return res;
}

}  // namespace sipi
