#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "sipi/error.hpp"

namespace sipi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexSet = std::vector<int>;

inline constexpr double kMembershipTol = 1e-9;

/// Response y, high-dimensional design X and external covariates Z sharing n rows.
struct Dataset {
  Vector y;
  Matrix x;
  Matrix z;
  bool x_standardized = false;
  bool z_standardized = false;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p_x() const { return x.cols(); }
  Eigen::Index p_z() const { return z.cols(); }
};

/// Builds a dataset and checks row agreement, finiteness and n >= p_z + 2.
Dataset make_dataset(Vector y, Matrix x, Matrix z);

/// Rows of `data` in the order given by `rows`.
Dataset subset_rows(const Dataset& data, std::span<const int> rows);

/// The set {v : A v <= b}.
struct Polyhedron {
  Matrix a;
  Vector b;

  Eigen::Index rows() const { return a.rows(); }
  Eigen::Index dim() const { return a.cols(); }

  bool contains(const Vector& v, double tol = kMembershipTol) const;
  /// min_i (b - A v)_i; +inf for an empty constraint set.
  double min_slack(const Vector& v) const;

  static Polyhedron whole_space(Eigen::Index dim);
};

/// Projection onto col(Z) and an orthonormal basis of its complement.
struct ResidualOperator {
  Matrix pz;     // n x n projector Z Z^+
  Matrix basis;  // n x (n - rank Z), orthonormal columns
  Eigen::Index z_cols = 0;

  Eigen::Index n() const { return pz.rows(); }
  Eigen::Index dim() const { return basis.cols(); }

  /// (I - P_Z) v
  Vector residualize(const Vector& v) const;
  Matrix residualize(const Matrix& m) const;
};

/// Centers columns and scales them to unit sample variance (divisor n - 1).
Matrix standardize(const Matrix& m);

/// Z with a trailing all-ones column when `add_intercept` is set.
Matrix augment_intercept(const Matrix& z, bool add_intercept);

/// Projector for Z (optionally intercept-augmented). Throws RankDeficient when
/// the augmented Z loses column rank at relative tolerance 1e-10.
ResidualOperator projector(const Matrix& z, bool add_intercept = false);

/// (I - P_Z)(y - offset)
Vector residual_r1(const Vector& y, const Vector& offset, const ResidualOperator& op);

/// Orthonormal basis for the column space of `m` (rank-revealing QR, tol 1e-10).
Matrix column_basis(const Matrix& m);

Matrix select_columns(const Matrix& m, std::span<const int> cols);

}  // namespace sipi
