#include "ltvchase/types.hpp"

#include <fmt/format.h>

namespace ltvchase {

ParamPoint::ParamPoint(const Matrix& A, const Matrix& B) {
  if (A.rows() != A.cols() || B.rows() != A.rows()) {
    throw BadDims(fmt::format("ParamPoint: A is {}x{}, B is {}x{}", A.rows(),
                              A.cols(), B.rows(), B.cols()));
  }
  theta_.resize(A.rows(), A.cols() + B.cols());
  theta_ << A, B;
}

ParamPoint::ParamPoint(Matrix theta) : theta_(std::move(theta)) {
  if (theta_.cols() < theta_.rows()) {
    throw BadDims("ParamPoint: theta must be n x (n+m)");
  }
}

ParamPoint ParamPoint::from_flat(const Vector& flat, int n, int m) {
  if (flat.size() != ltvchase::flat_dim(n, m)) {
    throw BadDims(fmt::format("ParamPoint::from_flat: got {} entries, want {}",
                              flat.size(), ltvchase::flat_dim(n, m)));
  }
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>;
  return ParamPoint(Matrix(Eigen::Map<const RowMajor>(flat.data(), n, n + m)));
}

Vector ParamPoint::flat() const {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>;
  RowMajor rm = theta_;
  return Eigen::Map<const Vector>(rm.data(), rm.size());
}

}  // namespace ltvchase
