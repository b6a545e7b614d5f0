#pragma once

// Single-response PLS regression (NIPALS, X-only deflation) and VIP scores.
// Templated on the scalar type; callers normally use PlsModel<double>.

#include "phocap/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace phocap {

enum class Scaling { Autoscale, CenterOnly };

struct PlsOptions {
  Scaling scaling = Scaling::Autoscale;
};

template <typename Scalar>
struct PlsModel {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  Eigen::Index n_components = 0;
  RowVector x_mean;
  RowVector x_scale;
  std::vector<bool> active;  // false for zero-variance training columns
  Scalar y_mean = 0;
  Scalar y_scale = 1;

  Matrix weights;     // p x k, unit-norm columns
  Matrix x_loadings;  // p x k
  Vector y_loadings;  // k
  Matrix x_scores;    // n x k, training scores
  Vector score_ss;    // t_a' t_a

  // Column a-1 holds original-unit coefficients of the a-component model.
  Matrix coefficients_by_k;
  Vector intercepts_by_k;
  // Coefficients of the autoscaled predictors (unit-free), full model.
  Vector scaled_coefficients;

  std::vector<std::string> labels;  // optional, used by DataMatrix overloads

  Eigen::Index n_predictors() const { return x_mean.size(); }
  auto coefficients() const { return coefficients_by_k.col(n_components - 1); }
  Scalar intercept() const { return intercepts_by_k(n_components - 1); }
};

namespace detail {

template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> standardize(
    const PlsModel<Scalar>& m, const Eigen::MatrixBase<Derived>& x) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> xs =
      (x.rowwise() - m.x_mean).array().rowwise() / m.x_scale.array();
  for (Eigen::Index j = 0; j < xs.cols(); ++j)
    if (!m.active[static_cast<std::size_t>(j)]) xs.col(j).setZero();
  return xs;
}

inline void check_components(Eigen::Index k, Eigen::Index rows, Eigen::Index cols) {
  const Eigen::Index cap = std::min(rows - 1, cols);
  if (k < 1 || k > cap) {
    std::ostringstream os;
    os << "number of PLS components " << k << " outside [1, " << cap << "] for a " << rows << "x"
       << cols << " matrix";
    throw Error(ErrorKind::Parameter, os.str());
  }
}

}  // namespace detail

/// Fits k latent components. Columns are centered and (by default) scaled to
/// unit variance; zero-variance columns get scale 1 and a zero coefficient.
/// Extraction stops early if the remaining X carries no covariance with y.
template <typename DerivedX, typename DerivedY>
PlsModel<typename DerivedX::Scalar> fit_plsr(const Eigen::MatrixBase<DerivedX>& x,
                                             const Eigen::MatrixBase<DerivedY>& y, Eigen::Index k,
                                             const PlsOptions& opts = {}) {
  using Scalar = typename DerivedX::Scalar;
  using Model = PlsModel<Scalar>;
  using Matrix = typename Model::Matrix;
  using Vector = typename Model::Vector;

  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (y.size() != n) throw Error(ErrorKind::Schema, "PLS: X rows and y length differ");
  detail::check_components(k, n, p);

  Model m;
  m.x_mean = x.colwise().mean();
  Matrix xs = x.rowwise() - m.x_mean;
  m.x_scale.resize(p);
  Vector sds = Vector::Zero(p);
  m.active.assign(static_cast<std::size_t>(p), true);
  for (Eigen::Index j = 0; j < p; ++j) {
    const Scalar ss = xs.col(j).squaredNorm();
    const Scalar sd = std::sqrt(ss / static_cast<Scalar>(n - 1));
    const Scalar tiny = Scalar(1e-12) * std::max(Scalar(1), std::abs(m.x_mean(j)));
    if (!(sd > tiny)) {
      m.active[static_cast<std::size_t>(j)] = false;
      m.x_scale(j) = 1;
      xs.col(j).setZero();
    } else {
      sds(j) = sd;
      m.x_scale(j) = opts.scaling == Scaling::Autoscale ? sd : Scalar(1);
      xs.col(j) /= m.x_scale(j);
    }
  }

  m.y_mean = y.mean();
  Vector ys = y.array() - m.y_mean;
  const Scalar y_sd = std::sqrt(ys.squaredNorm() / static_cast<Scalar>(n - 1));
  m.y_scale = (opts.scaling == Scaling::Autoscale && y_sd > 0) ? y_sd : Scalar(1);
  ys /= m.y_scale;

  m.weights.resize(p, k);
  m.x_loadings.resize(p, k);
  m.y_loadings.resize(k);
  m.x_scores.resize(n, k);
  m.score_ss.resize(k);

  Scalar first_norm = 0;
  Eigen::Index a = 0;
  for (; a < k; ++a) {
    Vector w = xs.transpose() * ys;
    const Scalar wn = w.norm();
    if (a == 0) first_norm = wn;
    if (!(wn > Scalar(1e-10) * std::max(first_norm, Scalar(1e-300)) && wn > Scalar(1e-300))) break;
    w /= wn;
    const Vector t = xs * w;
    const Scalar tt = t.squaredNorm();
    if (!(tt > 0)) break;
    const Vector pl = xs.transpose() * t / tt;
    m.weights.col(a) = w;
    m.x_loadings.col(a) = pl;
    m.y_loadings(a) = ys.dot(t) / tt;
    m.x_scores.col(a) = t;
    m.score_ss(a) = tt;
    xs.noalias() -= t * pl.transpose();
  }
  if (a == 0) throw Error(ErrorKind::Data, "PLS: predictors carry no covariance with the response");
  if (a < k) {
    m.weights.conservativeResize(Eigen::NoChange, a);
    m.x_loadings.conservativeResize(Eigen::NoChange, a);
    m.y_loadings.conservativeResize(a);
    m.x_scores.conservativeResize(Eigen::NoChange, a);
    m.score_ss.conservativeResize(a);
  }
  m.n_components = a;

  // P'W is upper triangular for NIPALS; coefficients for every prefix of components.
  const Matrix pw = m.x_loadings.transpose() * m.weights;
  m.coefficients_by_k.resize(p, a);
  m.intercepts_by_k.resize(a);
  Vector scaled;
  for (Eigen::Index c = 1; c <= a; ++c) {
    const Vector r = pw.topLeftCorner(c, c).template triangularView<Eigen::Upper>().solve(
        m.y_loadings.head(c));
    scaled = m.weights.leftCols(c) * r;
    Vector b = (scaled.array() * m.y_scale / m.x_scale.transpose().array()).matrix();
    m.coefficients_by_k.col(c - 1) = b;
    m.intercepts_by_k(c - 1) = m.y_mean - m.x_mean.dot(b);
  }
  // Coefficients on unit-variance predictors regardless of the scaling mode.
  m.scaled_coefficients = m.coefficients_by_k.col(a - 1).cwiseProduct(sds);
  return m;
}

/// Coefficient-path prediction with the first `ncomp` components (0 = all).
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> predict(const PlsModel<Scalar>& m,
                                                 const Eigen::MatrixBase<Derived>& x,
                                                 Eigen::Index ncomp = 0) {
  if (x.cols() != m.n_predictors()) {
    std::ostringstream os;
    os << "PLS predict: model has " << m.n_predictors() << " predictors, input has " << x.cols();
    throw Error(ErrorKind::Schema, os.str());
  }
  const Eigen::Index c = ncomp <= 0 ? m.n_components : std::min(ncomp, m.n_components);
  return (x * m.coefficients_by_k.col(c - 1)).array() + m.intercepts_by_k(c - 1);
}

/// Prediction through the latent scores (projection and deflation of new X).
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> predict_latent(const PlsModel<Scalar>& m,
                                                        const Eigen::MatrixBase<Derived>& x) {
  if (x.cols() != m.n_predictors()) throw Error(ErrorKind::Schema, "PLS predict: width mismatch");
  auto xs = detail::standardize(m, x);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> yhat = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(x.rows());
  for (Eigen::Index a = 0; a < m.n_components; ++a) {
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> t = xs * m.weights.col(a);
    xs.noalias() -= t * m.x_loadings.col(a).transpose();
    yhat += m.y_loadings(a) * t;
  }
  return (yhat.array() * m.y_scale + m.y_mean).matrix();
}

/// Variable importance in projection; the mean of squared scores is 1.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> vip(const PlsModel<Scalar>& m) {
  const Eigen::Index p = m.n_predictors();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> ssy =
      m.y_loadings.array().square() * m.score_ss.array();
  const Scalar total = ssy.sum();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    Scalar acc = 0;
    for (Eigen::Index a = 0; a < m.n_components; ++a) {
      const Scalar w = m.weights(j, a) / m.weights.col(a).norm();
      acc += ssy(a) * w * w;
    }
    out(j) = std::sqrt(static_cast<Scalar>(p) * acc / total);
  }
  return out;
}

}  // namespace phocap
