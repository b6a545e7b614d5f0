#pragma once

#include "phocap/pls.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phocap {

using Index = Eigen::Index;
using IndexList = std::vector<Index>;

/// Samples x predictors with one unique label per column (e.g. "R:550").
class DataMatrix {
 public:
  DataMatrix() = default;
  DataMatrix(Eigen::MatrixXd values, std::vector<std::string> labels);

  const Eigen::MatrixXd& values() const noexcept { return values_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  Index rows() const noexcept { return values_.rows(); }
  Index cols() const noexcept { return values_.cols(); }

  DataMatrix rows_subset(std::span<const Index> rows) const;
  DataMatrix cols_subset(std::span<const Index> cols) const;

  /// Throws a data error unless there are at least two rows.
  void require_rows(Index min_rows = 2) const;

 private:
  Eigen::MatrixXd values_;
  std::vector<std::string> labels_;
};

std::string band_label(std::string_view source, double nm);
/// Wavelength part of a "source:nm" label; nullopt if it has none.
std::optional<double> label_wavelength(std::string_view label);

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, std::span<const Index> rows);
Eigen::VectorXd take(const Eigen::VectorXd& v, std::span<const Index> idx);
Eigen::MatrixXd take_cols(const Eigen::MatrixXd& x, std::span<const Index> cols);

struct DatasetSplit {
  IndexList train;
  IndexList test;
  std::uint64_t seed = 0;
};

/// Seeded random partition; round(frac * n) samples go to training. Both index
/// lists are returned in ascending order.
DatasetSplit split(Index n, double frac, std::uint64_t seed);

/// Fold id per sample: seeded shuffle cut into contiguous blocks, the first
/// n % folds blocks one sample larger.
std::vector<int> assign_folds(Index n, int folds, std::uint64_t seed);

/// Cross-validated predictions for every component count 1..k_max (n x k_max).
/// k_max is capped to what the smallest training fold supports; the returned
/// matrix has one column per usable count.
Eigen::MatrixXd cv_predictions(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Index k_max,
                               std::span<const int> fold_ids, int folds,
                               const PlsOptions& opts = {});

struct CvReport {
  std::vector<double> rmsecv;  // index k-1
  int folds = 0;
  std::uint64_t seed = 0;
  Index k_best = 0;

  friend bool operator==(const CvReport&, const CvReport&) = default;
};

inline constexpr double kParsimonyTolerance = 0.02;
inline constexpr Index kDefaultComponentCap = 20;

/// Smallest k whose RMSECV is within 2 % of the minimum.
Index parsimonious_k(std::span<const double> rmsecv, double tolerance = kParsimonyTolerance);

CvReport select_components(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Index k_max,
                           int folds, std::uint64_t seed, const PlsOptions& opts = {});

/// min(k_cap, rows - 1, cols)
Index default_k_max(Index rows, Index cols, Index k_cap = kDefaultComponentCap);

PlsModel<double> fit_plsr(const DataMatrix& x, const Eigen::VectorXd& y, Index k,
                          const PlsOptions& opts = {});
/// Checks column labels against the training labels before predicting.
Eigen::VectorXd predict(const PlsModel<double>& model, const DataMatrix& x);

}  // namespace phocap
