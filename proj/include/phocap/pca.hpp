#pragma once

#include "phocap/error.hpp"

#include <Eigen/Dense>

#include <sstream>

namespace phocap {

template <typename Scalar>
struct PcaResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> scores;    // n x k
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> loadings;  // p x k, orthonormal columns
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> explained_variance;     // eigenvalues of the covariance
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> explained_ratio;        // share of total variance
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mean;
};

/// PCA of the column-centered matrix via thin SVD. Components come in
/// descending variance order; each loading's largest entry is made positive.
template <typename Derived>
PcaResult<typename Derived::Scalar> pca(const Eigen::MatrixBase<Derived>& x, Eigen::Index k) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = x.rows();
  const Eigen::Index cap = std::min(n - 1, x.cols());
  if (k < 1 || k > cap) {
    std::ostringstream os;
    os << "PCA component count " << k << " outside [1, " << cap << "]";
    throw Error(ErrorKind::Parameter, os.str());
  }

  PcaResult<Scalar> out;
  out.mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - out.mean;
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  Matrix u = svd.matrixU().leftCols(k);
  Matrix v = svd.matrixV().leftCols(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index imax = 0;
    v.col(c).cwiseAbs().maxCoeff(&imax);
    if (v(imax, c) < 0) {
      v.col(c) = -v.col(c);
      u.col(c) = -u.col(c);
    }
  }
  out.loadings = v;
  out.scores = u * s.head(k).asDiagonal();
  const Scalar denom = static_cast<Scalar>(n - 1);
  out.explained_variance = s.head(k).array().square() / denom;
  const Scalar total = s.squaredNorm();
  out.explained_ratio = total > 0 ? Eigen::Matrix<Scalar, Eigen::Dynamic, 1>(s.head(k).array().square() / total)
                                  : Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(k);
  return out;
}

}  // namespace phocap
