#include "sipi/core.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace sipi {

namespace {

constexpr double kRankTol = 1e-10;

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorCode::NonFinite, std::string(what) + " contains NaN or Inf");
}

}  // namespace

Dataset make_dataset(Vector y, Matrix x, Matrix z) {
  const auto n = y.size();
  if (x.rows() != n || z.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch,
                "row counts differ: y=" + std::to_string(n) + " X=" + std::to_string(x.rows()) +
                    " Z=" + std::to_string(z.rows()));
  }
  if (n < z.cols() + 2) {
    throw Error(ErrorCode::DimensionMismatch, "need n >= p_z + 2");
  }
  require_finite(y, "y");
  require_finite(x, "X");
  require_finite(z, "Z");
  return Dataset{std::move(y), std::move(x), std::move(z)};
}

Dataset subset_rows(const Dataset& data, std::span<const int> rows) {
  const auto m = static_cast<Eigen::Index>(rows.size());
  Dataset out;
  out.y.resize(m);
  out.x.resize(m, data.x.cols());
  out.z.resize(m, data.z.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    const int r = rows[static_cast<std::size_t>(i)];
    out.y(i) = data.y(r);
    out.x.row(i) = data.x.row(r);
    out.z.row(i) = data.z.row(r);
  }
  return out;
}

bool Polyhedron::contains(const Vector& v, double tol) const {
  if (v.size() != a.cols()) throw Error(ErrorCode::DimensionMismatch, "polyhedron membership");
  if (a.rows() == 0) return true;
  return ((a * v - b).array() <= tol).all();
}

double Polyhedron::min_slack(const Vector& v) const {
  if (a.rows() == 0) return std::numeric_limits<double>::infinity();
  return (b - a * v).minCoeff();
}

Polyhedron Polyhedron::whole_space(Eigen::Index dim) {
  return Polyhedron{Matrix(0, dim), Vector(0)};
}

Vector ResidualOperator::residualize(const Vector& v) const { return v - pz * v; }

Matrix ResidualOperator::residualize(const Matrix& m) const { return m - pz * m; }

Matrix standardize(const Matrix& m) {
  if (m.rows() < 2) throw Error(ErrorCode::InvalidArgument, "standardize needs at least 2 rows");
  require_finite(m, "matrix");
  Matrix out(m.rows(), m.cols());
  const double denom = static_cast<double>(m.rows() - 1);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double mean = m.col(j).mean();
    Vector centered = m.col(j).array() - mean;
    const double sd = std::sqrt(centered.squaredNorm() / denom);
    if (!(sd > 0.0) || sd <= 1e-14 * (std::abs(mean) + 1.0)) {
      throw Error(ErrorCode::ConstantColumn, "column " + std::to_string(j) + " is constant");
    }
    out.col(j) = centered / sd;
  }
  return out;
}

Matrix augment_intercept(const Matrix& z, bool add_intercept) {
  if (!add_intercept) return z;
  Matrix out(z.rows(), z.cols() + 1);
  out.leftCols(z.cols()) = z;
  out.col(z.cols()).setOnes();
  return out;
}

ResidualOperator projector(const Matrix& z_in, bool add_intercept) {
  const Matrix z = augment_intercept(z_in, add_intercept);
  require_finite(z, "Z");
  const auto n = z.rows();
  ResidualOperator op;
  op.z_cols = z.cols();
  if (z.cols() == 0) {
    op.pz = Matrix::Zero(n, n);
    op.basis = Matrix::Identity(n, n);
    return op;
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
  cod.setThreshold(kRankTol);
  cod.compute(z);
  if (cod.rank() < z.cols()) {
    throw Error(ErrorCode::RankDeficient, "Z has rank " + std::to_string(cod.rank()) + " < " +
                                              std::to_string(z.cols()) + " columns");
  }
  op.pz = z * cod.pseudoInverse();
  op.pz = 0.5 * (op.pz + op.pz.transpose()).eval();

  Eigen::HouseholderQR<Matrix> qr(z);
  const Matrix q_full = qr.householderQ() * Matrix::Identity(n, n);
  op.basis = q_full.rightCols(n - z.cols());
  return op;
}

Vector residual_r1(const Vector& y, const Vector& offset, const ResidualOperator& op) {
  if (y.size() != op.n() || offset.size() != op.n()) {
    throw Error(ErrorCode::DimensionMismatch, "residual_r1 length mismatch");
  }
  return op.residualize(Vector(y - offset));
}

Matrix column_basis(const Matrix& m) {
  if (m.cols() == 0) return Matrix(m.rows(), 0);
  Eigen::ColPivHouseholderQR<Matrix> qr;
  qr.setThreshold(kRankTol);
  qr.compute(m);
  const auto rank = qr.rank();
  const Matrix q_full = qr.householderQ() * Matrix::Identity(m.rows(), m.rows());
  return q_full.leftCols(rank);
}

Matrix select_columns(const Matrix& m, std::span<const int> cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(cols[k]);
  return out;
}

}  // namespace sipi
