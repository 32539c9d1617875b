#include "sipi/selectors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sipi/rng.hpp"

namespace sipi {

namespace {

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

double lasso_objective(const Matrix& x, const Vector& y, const Vector& eta, double lambda) {
  return 0.5 * (y - x * eta).squaredNorm() + lambda * eta.lpNorm<1>();
}

// One pass over `coords`; returns the largest coefficient change.
double cd_pass(const Matrix& x, const Vector& col_sq, double lambda, const std::vector<int>& coords,
               Vector& eta, Vector& resid) {
  double max_change = 0.0;
  for (int j : coords) {
    if (col_sq(j) <= 0.0) continue;
    const double old = eta(j);
    const double rho = x.col(j).dot(resid) + col_sq(j) * old;
    const double updated = soft_threshold(rho, lambda) / col_sq(j);
    if (updated != old) {
      resid.noalias() -= (updated - old) * x.col(j);
      eta(j) = updated;
      max_change = std::max(max_change, std::abs(updated - old));
    }
  }
  return max_change;
}

std::vector<int> nonzero_indices(const Vector& eta) {
  std::vector<int> out;
  for (Eigen::Index j = 0; j < eta.size(); ++j) {
    if (eta(j) != 0.0) out.push_back(static_cast<int>(j));
  }
  return out;
}

// Exact solution restricted to (E, z_E); returns false if it disagrees in sign.
bool polish_on_support(const Matrix& x, const Vector& y, double lambda, Vector& eta) {
  const IndexSet active = nonzero_indices(eta);
  if (active.empty()) return true;
  const Matrix xe = select_columns(x, active);
  Vector z(static_cast<Eigen::Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k) z(static_cast<Eigen::Index>(k)) = eta(active[k]) > 0 ? 1.0 : -1.0;
  Eigen::LDLT<Matrix> ldlt(xe.transpose() * xe);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-12) return false;
  const Vector exact = ldlt.solve(Vector(xe.transpose() * y - lambda * z));
  for (Eigen::Index k = 0; k < exact.size(); ++k) {
    if (exact(k) * z(k) <= 0.0) return false;
  }
  for (std::size_t k = 0; k < active.size(); ++k) eta(active[k]) = exact(static_cast<Eigen::Index>(k));
  return true;
}

}  // namespace

LassoFit fit_lasso(const Matrix& x, const Vector& y, double lambda, const Vector* warm_start) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "lasso needs lambda > 0");
  if (x.rows() != y.size()) throw Error(ErrorCode::DimensionMismatch, "lasso: X rows != length of y");
  const auto p = x.cols();
  const Vector col_sq = x.colwise().squaredNorm().transpose();

  Vector eta = Vector::Zero(p);
  if (warm_start != nullptr && warm_start->size() == p) eta = *warm_start;
  Vector resid = y - x * eta;

  std::vector<int> all(static_cast<std::size_t>(p));
  std::iota(all.begin(), all.end(), 0);

  LassoFit fit;
  fit.lambda = lambda;
  int sweeps = 0;
  bool converged = false;
  while (sweeps < kLassoMaxSweeps) {
    ++sweeps;
    const double full_change = cd_pass(x, col_sq, lambda, all, eta, resid);
    if (full_change < kLassoTol) {
      converged = true;
      break;
    }
    const std::vector<int> active = nonzero_indices(eta);
    while (sweeps < kLassoMaxSweeps) {
      ++sweeps;
      if (cd_pass(x, col_sq, lambda, active, eta, resid) < kLassoTol) break;
    }
  }
  if (!converged) {
    throw Error(ErrorCode::NoConvergence, "lasso did not converge in " + std::to_string(kLassoMaxSweeps) + " sweeps");
  }
  Vector polished = eta;
  if (polish_on_support(x, y, lambda, polished)) eta = polished;

  fit.eta = std::move(eta);
  fit.active = nonzero_indices(fit.eta);
  fit.objective = lasso_objective(x, y, fit.eta, lambda);
  fit.sweeps = sweeps;
  return fit;
}

LassoFit fit_lasso(const Dataset& data, double lambda) { return fit_lasso(data.x, data.y, lambda); }

KktReport lasso_kkt(const Matrix& x, const Vector& y, const LassoFit& fit) {
  const Vector grad = x.transpose() * (y - x * fit.eta);
  KktReport rep{-fit.lambda, 0.0};
  for (Eigen::Index j = 0; j < grad.size(); ++j) {
    if (fit.eta(j) == 0.0) {
      rep.inactive_excess = std::max(rep.inactive_excess, std::abs(grad(j)) - fit.lambda);
    } else {
      const double target = fit.eta(j) > 0 ? fit.lambda : -fit.lambda;
      rep.active_violation = std::max(rep.active_violation, std::abs(grad(j) - target));
    }
  }
  return rep;
}

SelectionModel lasso_selection_model(const Matrix& x, const Vector& /*y*/, const LassoFit& fit) {
  if (fit.active.empty()) throw Error(ErrorCode::EmptyActiveSet, "lasso selected no variables");
  const auto n = x.rows();
  const auto p = x.cols();
  const double lambda = fit.lambda;
  const IndexSet& e = fit.active;
  const auto k = static_cast<Eigen::Index>(e.size());

  const Matrix xe = select_columns(x, e);
  Vector z(k);
  std::vector<int> signs(e.size());
  for (Eigen::Index a = 0; a < k; ++a) {
    signs[static_cast<std::size_t>(a)] = fit.eta(e[static_cast<std::size_t>(a)]) > 0 ? 1 : -1;
    z(a) = signs[static_cast<std::size_t>(a)];
  }

  const Matrix gram = xe.transpose() * xe;
  Eigen::FullPivLU<Matrix> lu(gram);
  if (!lu.isInvertible() || lu.rcond() < 1e-12) throw Error(ErrorCode::SingularGram, "X_E^T X_E is singular");
  const Matrix gram_inv = lu.inverse();
  const Matrix coef_map = gram_inv * xe.transpose();  // k x n
  const Matrix xe_pinv_t = xe * gram_inv;              // (X_E^T)^+, n x k
  const Vector pinv_z = xe_pinv_t * z;
  const Matrix resid_proj = Matrix::Identity(n, n) - xe * coef_map;

  const Eigen::Index m = k + 2 * (p - k);
  Polyhedron event{Matrix::Zero(m, n), Vector::Zero(m)};
  const Vector gram_inv_z = gram_inv * z;
  for (Eigen::Index a = 0; a < k; ++a) {
    // z_a * eta_a > 0 with eta_E = (X_E^T X_E)^-1 (X_E^T y - lambda z)
    event.a.row(a) = -z(a) * coef_map.row(a);
    event.b(a) = -lambda * z(a) * gram_inv_z(a);
  }
  Eigen::Index row = k;
  std::vector<bool> in_e(static_cast<std::size_t>(p), false);
  for (int j : e) in_e[static_cast<std::size_t>(j)] = true;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (in_e[static_cast<std::size_t>(j)]) continue;
    // |x_j^T (I - P_E) y / lambda + x_j^T (X_E^T)^+ z| <= 1
    const Vector u = resid_proj * x.col(j);
    const double shift = x.col(j).dot(pinv_z);
    event.a.row(row) = u.transpose();
    event.b(row) = lambda * (1.0 - shift);
    event.a.row(row + 1) = -u.transpose();
    event.b(row + 1) = lambda * (1.0 + shift);
    row += 2;
  }

  SelectionModel model;
  model.selected = e;
  model.signs = std::move(signs);
  model.l_map = xe * coef_map;
  model.zeta = -lambda * pinv_z;
  model.event = std::move(event);
  model.tag = FitterTag::LassoFixedLambda;
  model.lambda = lambda;
  model.coef_map = coef_map;
  model.coef_offset = -lambda * gram_inv_z;
  model.intercept = 0.0;
  return model;
}

SelectionModel lasso_selection_model(const Dataset& data, const LassoFit& fit) {
  return lasso_selection_model(data.x, data.y, fit);
}

SelectionModel marginal_screen(const Matrix& x, const Vector& y, int k, Combiner combiner) {
  const auto n = x.rows();
  const auto p = x.cols();
  if (k < 1 || k >= p) throw Error(ErrorCode::InvalidArgument, "screening needs 1 <= k < p_x");
  if (combiner == Combiner::TopColumn && k != 1) {
    throw Error(ErrorCode::InvalidArgument, "TopColumn combiner requires k = 1");
  }
  const Vector score = x.transpose() * y;
  std::vector<int> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return std::abs(score(a)) > std::abs(score(b)); });
  const double kth = std::abs(score(order[static_cast<std::size_t>(k - 1)]));
  const double next = std::abs(score(order[static_cast<std::size_t>(k)]));
  if (kth - next <= 1e-12 * std::max(1.0, kth)) {
    throw Error(ErrorCode::TieDetected, "|x_i^T y| ties at rank " + std::to_string(k));
  }
  for (Eigen::Index i = 0; i < p; ++i) {
    if (score(i) == 0.0) throw Error(ErrorCode::TieDetected, "x_i^T y = 0 has no sign");
  }

  IndexSet selected(order.begin(), order.begin() + k);
  std::sort(selected.begin(), selected.end());
  std::vector<bool> in_e(static_cast<std::size_t>(p), false);
  for (int j : selected) in_e[static_cast<std::size_t>(j)] = true;

  auto sgn = [&](Eigen::Index i) { return score(i) > 0 ? 1.0 : -1.0; };
  const Eigen::Index m = static_cast<Eigen::Index>(k) * (p - k) + p;
  Polyhedron event{Matrix::Zero(m, n), Vector::Zero(m)};
  Eigen::Index row = 0;
  for (int j : selected) {
    for (Eigen::Index i = 0; i < p; ++i) {
      if (in_e[static_cast<std::size_t>(i)]) continue;
      // |x_i^T y| <= |x_j^T y| with both signs fixed
      event.a.row(row++) = (sgn(i) * x.col(i) - sgn(j) * x.col(j)).transpose();
    }
  }
  for (Eigen::Index i = 0; i < p; ++i) event.a.row(row++) = -sgn(i) * x.col(i).transpose();

  const Matrix xe = select_columns(x, selected);
  Vector weights(k);
  double intercept = 0.0;
  switch (combiner) {
    case Combiner::TopColumn:
    case Combiner::Average:
      weights.setConstant(1.0 / k);
      break;
    case Combiner::FirstPC: {
      const Vector means = xe.colwise().mean().transpose();
      const Matrix centered = xe.rowwise() - means.transpose();
      Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinV);
      weights = svd.matrixV().col(0);
      if (weights(0) < 0) weights = -weights;
      intercept = -means.dot(weights);
      break;
    }
  }

  SelectionModel model;
  model.selected = selected;
  for (int j : selected) model.signs.push_back(score(j) > 0 ? 1 : -1);
  model.l_map = Matrix::Zero(n, n);
  model.zeta = xe * weights + Vector::Constant(n, intercept);
  model.event = std::move(event);
  model.tag = k == 1 ? FitterTag::MarginalTop1 : FitterTag::MarginalTopK;
  model.coef_map = Matrix::Zero(k, n);
  model.coef_offset = weights;
  model.intercept = intercept;
  return model;
}

SelectionModel marginal_screen(const Dataset& data, int k, Combiner combiner) {
  return marginal_screen(data.x, data.y, k, combiner);
}

std::vector<double> lambda_grid(Eigen::Index p) {
  const double base = 2.0 * std::sqrt(2.0 * std::log(static_cast<double>(p)));
  std::vector<double> grid;
  for (int e = 16; e >= -16; --e) grid.push_back(base * std::exp2(e / 4.0));
  return grid;
}

double tune_lambda(const Matrix& x, const Vector& y, int low, int high) {
  if (low > high) throw Error(ErrorCode::InvalidArgument, "tune_lambda: low > high");
  Vector warm = Vector::Zero(x.cols());
  for (double lambda : lambda_grid(x.cols())) {
    const LassoFit fit = fit_lasso(x, y, lambda, &warm);
    warm = fit.eta;
    const auto size = static_cast<int>(fit.active.size());
    if (size >= low && size <= high) return lambda;
  }
  throw Error(ErrorCode::NoLambdaInRange,
              "no grid lambda gives " + std::to_string(low) + ".." + std::to_string(high) + " active variables");
}

double tune_lambda(const Dataset& data, int low, int high) { return tune_lambda(data.x, data.y, low, high); }

CarveSplit carve_split(const Dataset& data, int n1, std::uint64_t seed) {
  const auto n = static_cast<int>(data.n());
  const auto pz = static_cast<int>(data.p_z());
  if (n1 < pz + 2 || n1 > n - pz - 2) {
    throw Error(ErrorCode::SplitTooSmall, "n1=" + std::to_string(n1) + " outside [p_z+2, n-p_z-2]");
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  std::span<const int> all(perm);
  CarveSplit split;
  split.part1 = subset_rows(data, all.first(static_cast<std::size_t>(n1)));
  split.part2 = subset_rows(data, all.subspan(static_cast<std::size_t>(n1)));
  split.part1.x_standardized = split.part2.x_standardized = false;
  split.permutation = std::move(perm);
  return split;
}

Polyhedron carve_polyhedron(const SelectionModel& model_on_part1, int n2, const std::vector<int>& permutation) {
  const Polyhedron& ev = model_on_part1.event;
  const auto n1 = static_cast<int>(ev.dim());
  const int n = n1 + n2;
  if (n2 < 0 || static_cast<int>(permutation.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "carve_polyhedron: permutation length != n1 + n2");
  }
  Polyhedron out{Matrix::Zero(ev.rows(), n), ev.b};
  for (int k = 0; k < n1; ++k) out.a.col(permutation[static_cast<std::size_t>(k)]) = ev.a.col(k);
  return out;
}

AffineMap carve_affine_map(const SelectionModel& model_on_part1, const Matrix& x_full,
                           const std::vector<int>& permutation) {
  const auto n = x_full.rows();
  const auto n1 = model_on_part1.coef_map.cols();
  if (static_cast<Eigen::Index>(permutation.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "carve_affine_map: permutation length != n");
  }
  const Matrix xe = select_columns(x_full, model_on_part1.selected);
  const Matrix part_map = xe * model_on_part1.coef_map;  // n x n1
  AffineMap out{Matrix::Zero(n, n), xe * model_on_part1.coef_offset};
  out.zeta.array() += model_on_part1.intercept;
  for (Eigen::Index k = 0; k < n1; ++k) out.l_map.col(permutation[static_cast<std::size_t>(k)]) = part_map.col(k);
  return out;
}

Vector model_coefficients(const SelectionModel& model, const Vector& y_train) {
  return model.coef_map * y_train + model.coef_offset;
}

Vector model_predict(const SelectionModel& model, const Vector& y_train, const Matrix& x_rows) {
  Vector out = select_columns(x_rows, model.selected) * model_coefficients(model, y_train);
  out.array() += model.intercept;
  return out;
}

Fitter lasso_fitter(double lambda) {
  return [lambda](const Matrix& x_train, const Vector& y_train, const Matrix& x_pred) -> Vector {
    const LassoFit fit = fit_lasso(x_train, y_train, lambda);
    return x_pred * fit.eta;
  };
}

Selector lasso_selector(double lambda) {
  return [lambda](const Matrix& x_train, const Vector& y_train) {
    return lasso_selection_model(x_train, y_train, fit_lasso(x_train, y_train, lambda));
  };
}

Selector screening_selector(int k, Combiner combiner) {
  return [k, combiner](const Matrix& x_train, const Vector& y_train) {
    return marginal_screen(x_train, y_train, k, combiner);
  };
}

Fitter fitter_from_selector(Selector selector) {
  return [selector = std::move(selector)](const Matrix& x_train, const Vector& y_train, const Matrix& x_pred) -> Vector {
    try {
      return model_predict(selector(x_train, y_train), y_train, x_pred);
    } catch (const Error& e) {
      // same convention as lasso_fitter: an empty model predicts zero
      if (e.code() == ErrorCode::EmptyActiveSet) return Vector::Zero(x_pred.rows());
      throw;
    }
  };
}

}  // namespace sipi
