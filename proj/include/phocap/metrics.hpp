#pragma once

#include "phocap/error.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace phocap {

namespace detail {
template <typename A, typename B>
void check_pair(const Eigen::MatrixBase<A>& y, const Eigen::MatrixBase<B>& yhat) {
  if (y.size() == 0 || y.size() != yhat.size())
    throw Error(ErrorKind::Parameter, "metric inputs must have equal, nonzero length");
}
}  // namespace detail

/// Coefficient of determination, 1 - SSres / SStot.
template <typename A, typename B>
typename A::Scalar r2(const Eigen::MatrixBase<A>& y, const Eigen::MatrixBase<B>& yhat) {
  detail::check_pair(y, yhat);
  using Scalar = typename A::Scalar;
  const Scalar mean = y.mean();
  const Scalar ss_tot = (y.array() - mean).square().sum();
  if (!(ss_tot > 0)) throw Error(ErrorKind::Data, "R^2 undefined: observed values have zero variance");
  const Scalar ss_res = (y - yhat).squaredNorm();
  return Scalar(1) - ss_res / ss_tot;
}

template <typename A, typename B>
typename A::Scalar rmse(const Eigen::MatrixBase<A>& y, const Eigen::MatrixBase<B>& yhat) {
  detail::check_pair(y, yhat);
  using Scalar = typename A::Scalar;
  return std::sqrt((y - yhat).squaredNorm() / static_cast<Scalar>(y.size()));
}

/// Pearson correlation of each column with y; zero-variance columns get 0.
template <typename DX, typename DY>
Eigen::Matrix<typename DX::Scalar, Eigen::Dynamic, 1> band_correlation(
    const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DY>& y) {
  using Scalar = typename DX::Scalar;
  if (x.rows() != y.size()) throw Error(ErrorKind::Schema, "band_correlation: row count mismatch");
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> yc = y.array() - y.mean();
  const Scalar y_norm = yc.norm();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> xc = x.col(j).array() - x.col(j).mean();
    const Scalar denom = xc.norm() * y_norm;
    out(j) = denom > 0 ? xc.dot(yc) / denom : Scalar(0);
  }
  return out;
}

}  // namespace phocap
