#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sipi/core.hpp"

namespace sipi {

enum class FitterTag { LassoFixedLambda, MarginalTop1, MarginalTopK, ConstantCombiner };

enum class Combiner { TopColumn, Average, FirstPC };

/// Outcome of a first-stage fit on the event that it selects (E, z_E).
///
/// On the training rows the fit is yhat = L y + zeta. Predictions for any rows
/// X' use the coefficient map: yhat' = X'_E (coef_map y_train + coef_offset) + intercept.
struct SelectionModel {
  IndexSet selected;
  std::vector<int> signs;
  Matrix l_map;
  Vector zeta;
  Polyhedron event;
  FitterTag tag = FitterTag::LassoFixedLambda;
  double lambda = 0.0;

  Matrix coef_map;  // |E| x n_train
  Vector coef_offset;
  double intercept = 0.0;

  Vector fitted(const Vector& y) const { return l_map * y + zeta; }
};

struct LassoFit {
  double lambda = 0.0;
  Vector eta;
  IndexSet active;
  double objective = 0.0;
  int sweeps = 0;
};

inline constexpr int kLassoMaxSweeps = 100000;
inline constexpr double kLassoTol = 1e-10;

/// Cyclic coordinate descent for 0.5 ||y - X eta||^2 + lambda ||eta||_1.
LassoFit fit_lasso(const Matrix& x, const Vector& y, double lambda, const Vector* warm_start = nullptr);
LassoFit fit_lasso(const Dataset& data, double lambda);

/// Max_j |x_j^T (y - X eta)| - lambda over inactive j and the worst active
/// stationarity violation; both <= 0 (up to tolerance) at a solution.
struct KktReport {
  double inactive_excess;
  double active_violation;
};
KktReport lasso_kkt(const Matrix& x, const Vector& y, const LassoFit& fit);

SelectionModel lasso_selection_model(const Dataset& data, const LassoFit& fit);
SelectionModel lasso_selection_model(const Matrix& x, const Vector& y, const LassoFit& fit);

SelectionModel marginal_screen(const Dataset& data, int k, Combiner combiner);
SelectionModel marginal_screen(const Matrix& x, const Vector& y, int k, Combiner combiner);

/// lambda = m * 2 sqrt(2 log p) for m = 2^(-4), 2^(-15/4), ..., 2^4, largest first.
std::vector<double> lambda_grid(Eigen::Index p);

/// Largest grid lambda whose lasso active-set size lies in [low, high].
double tune_lambda(const Dataset& data, int low, int high);
double tune_lambda(const Matrix& x, const Vector& y, int low, int high);

struct CarveSplit {
  Dataset part1;
  Dataset part2;
  /// permutation[k] = original row of the k-th row of (part1, part2) stacked.
  std::vector<int> permutation;
};

CarveSplit carve_split(const Dataset& data, int n1, std::uint64_t seed);

/// Widens a part-1 event to all n1 + n2 rows with zero columns at part-2 rows.
Polyhedron carve_polyhedron(const SelectionModel& model_on_part1, int n2, const std::vector<int>& permutation);

/// Full-data affine map of a part-1 fit: yhat = L y + zeta over all rows,
/// where L only reads the part-1 rows.
struct AffineMap {
  Matrix l_map;
  Vector zeta;
};
AffineMap carve_affine_map(const SelectionModel& model_on_part1, const Matrix& x_full,
                           const std::vector<int>& permutation);

/// Coefficients on X_E implied by the model for a given training response.
Vector model_coefficients(const SelectionModel& model, const Vector& y_train);
/// Prediction for arbitrary rows.
Vector model_predict(const SelectionModel& model, const Vector& y_train, const Matrix& x_rows);

/// f(X_pred; X_train, y_train)
using Fitter = std::function<Vector(const Matrix& x_train, const Vector& y_train, const Matrix& x_pred)>;
/// Builds a SelectionModel from training data.
using Selector = std::function<SelectionModel(const Matrix& x_train, const Vector& y_train)>;

Fitter lasso_fitter(double lambda);
Selector lasso_selector(double lambda);
Selector screening_selector(int k, Combiner combiner);
/// Fitter that predicts through whatever model `selector` builds.
Fitter fitter_from_selector(Selector selector);

}  // namespace sipi
