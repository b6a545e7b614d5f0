#include "phocap/dataset.hpp"

#include "phocap/error.hpp"
#include "phocap/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace phocap {

DataMatrix::DataMatrix(Eigen::MatrixXd values, std::vector<std::string> labels)
    : values_(std::move(values)), labels_(std::move(labels)) {
  if (static_cast<Index>(labels_.size()) != values_.cols()) {
    std::ostringstream os;
    os << "data matrix has " << values_.cols() << " columns but " << labels_.size() << " labels";
    throw Error(ErrorKind::Schema, os.str());
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& l : labels_)
    if (!seen.insert(l).second) throw Error(ErrorKind::Schema, "duplicate column label '" + l + "'");
  if (!values_.allFinite()) {
    for (Index i = 0; i < values_.rows(); ++i)
      for (Index j = 0; j < values_.cols(); ++j)
        if (!std::isfinite(values_(i, j))) {
          std::ostringstream os;
          os << "non-finite value at row " << i << ", column '" << labels_[static_cast<std::size_t>(j)]
             << "'";
          throw Error(ErrorKind::Data, os.str());
        }
  }
}

DataMatrix DataMatrix::rows_subset(std::span<const Index> rows) const {
  return DataMatrix(take_rows(values_, rows), labels_);
}

DataMatrix DataMatrix::cols_subset(std::span<const Index> cols) const {
  std::vector<std::string> labels;
  labels.reserve(cols.size());
  for (Index c : cols) labels.push_back(labels_.at(static_cast<std::size_t>(c)));
  return DataMatrix(take_cols(values_, cols), std::move(labels));
}

void DataMatrix::require_rows(Index min_rows) const {
  if (rows() < min_rows) {
    std::ostringstream os;
    os << "data matrix has " << rows() << " rows, need at least " << min_rows;
    throw Error(ErrorKind::Data, os.str());
  }
}

std::string band_label(std::string_view source, double nm) {
  std::ostringstream os;
  os << source << ':' << nm;
  return os.str();
}

std::optional<double> label_wavelength(std::string_view label) {
  const auto colon = label.rfind(':');
  const std::string_view tail = colon == std::string_view::npos ? label : label.substr(colon + 1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), v);
  if (ec != std::errc() || ptr != tail.data() + tail.size()) return std::nullopt;
  return v;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, std::span<const Index> rows) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(rows[i]);
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& v, std::span<const Index> idx) {
  Eigen::VectorXd out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = v(idx[i]);
  return out;
}

Eigen::MatrixXd take_cols(const Eigen::MatrixXd& x, std::span<const Index> cols) {
  Eigen::MatrixXd out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = x.col(cols[j]);
  return out;
}

DatasetSplit split(Index n, double frac, std::uint64_t seed) {
  if (n < 3) throw Error(ErrorKind::Parameter, "split needs at least 3 samples");
  if (!(frac > 0.0 && frac < 1.0)) throw Error(ErrorKind::Parameter, "split fraction must be in (0, 1)");
  IndexList perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto n_train = static_cast<Index>(std::llround(frac * static_cast<double>(n)));
  n_train = std::clamp<Index>(n_train, 1, n - 1);
  DatasetSplit s;
  s.seed = seed;
  s.train.assign(perm.begin(), perm.begin() + n_train);
  s.test.assign(perm.begin() + n_train, perm.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<int> assign_folds(Index n, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorKind::Parameter, "cross-validation needs at least 2 folds");
  if (folds > n) {
    std::ostringstream os;
    os << folds << " folds requested for " << n << " samples";
    throw Error(ErrorKind::Parameter, os.str());
  }
  IndexList perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> fold(static_cast<std::size_t>(n));
  const Index base = n / folds;
  const Index extra = n % folds;
  Index pos = 0;
  for (int f = 0; f < folds; ++f) {
    const Index size = base + (f < extra ? 1 : 0);
    for (Index i = 0; i < size; ++i) fold[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos++)])] = f;
  }
  return fold;
}

Index default_k_max(Index rows, Index cols, Index k_cap) {
  return std::max<Index>(1, std::min({k_cap, rows - 1, cols}));
}

Eigen::MatrixXd cv_predictions(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Index k_max,
                               std::span<const int> fold_ids, int folds, const PlsOptions& opts) {
  const Index n = x.rows();
  std::vector<IndexList> members(static_cast<std::size_t>(folds));
  for (Index i = 0; i < n; ++i) members[static_cast<std::size_t>(fold_ids[static_cast<std::size_t>(i)])].push_back(i);
  Index min_train = n;
  for (const auto& m : members) min_train = std::min(min_train, n - static_cast<Index>(m.size()));
  const Index k = std::min({k_max, min_train - 1, x.cols()});
  if (k < 1) throw Error(ErrorKind::Parameter, "too few samples per fold for PLS");

  Eigen::MatrixXd out(n, k);
  IndexList train;
  train.reserve(static_cast<std::size_t>(n));
  for (int f = 0; f < folds; ++f) {
    const auto& test = members[static_cast<std::size_t>(f)];
    if (test.empty()) continue;
    train.clear();
    for (Index i = 0; i < n; ++i)
      if (fold_ids[static_cast<std::size_t>(i)] != f) train.push_back(i);
    const auto model = fit_plsr(take_rows(x, train), take(y, train), k, opts);
    const Eigen::MatrixXd xt = take_rows(x, test);
    for (Index c = 1; c <= k; ++c) {
      const Eigen::VectorXd pred = predict(model, xt, c);
      for (std::size_t i = 0; i < test.size(); ++i) out(test[i], c - 1) = pred(static_cast<Index>(i));
    }
  }
  return out;
}

Index parsimonious_k(std::span<const double> rmsecv, double tolerance) {
  if (rmsecv.empty()) throw Error(ErrorKind::Parameter, "empty RMSECV curve");
  const double best = *std::min_element(rmsecv.begin(), rmsecv.end());
  for (std::size_t k = 0; k < rmsecv.size(); ++k)
    if (rmsecv[k] <= best * (1.0 + tolerance)) return static_cast<Index>(k) + 1;
  return static_cast<Index>(rmsecv.size());
}

CvReport select_components(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Index k_max,
                           int folds, std::uint64_t seed, const PlsOptions& opts) {
  if (k_max < 1) throw Error(ErrorKind::Parameter, "k_max must be >= 1");
  if (x.rows() != y.size()) throw Error(ErrorKind::Schema, "X rows and y length differ");
  const auto fold_ids = assign_folds(x.rows(), folds, seed);
  const Eigen::MatrixXd pred = cv_predictions(x, y, k_max, fold_ids, folds, opts);
  CvReport rep;
  rep.folds = folds;
  rep.seed = seed;
  rep.rmsecv.resize(static_cast<std::size_t>(pred.cols()));
  for (Index c = 0; c < pred.cols(); ++c)
    rep.rmsecv[static_cast<std::size_t>(c)] =
        std::sqrt((pred.col(c) - y).squaredNorm() / static_cast<double>(y.size()));
  rep.k_best = parsimonious_k(rep.rmsecv);
  return rep;
}

PlsModel<double> fit_plsr(const DataMatrix& x, const Eigen::VectorXd& y, Index k,
                          const PlsOptions& opts) {
  auto model = fit_plsr(x.values(), y, k, opts);
  model.labels = x.labels();
  return model;
}

Eigen::VectorXd predict(const PlsModel<double>& model, const DataMatrix& x) {
  if (!model.labels.empty() && model.labels != x.labels()) {
    std::ostringstream os;
    os << "prediction columns do not match training columns";
    const auto n = std::min(model.labels.size(), x.labels().size());
    for (std::size_t i = 0; i < n; ++i)
      if (model.labels[i] != x.labels()[i]) {
        os << " (first difference at column " << i << ": '" << x.labels()[i] << "' vs '"
           << model.labels[i] << "')";
        break;
      }
    if (model.labels.size() != x.labels().size())
      os << " (" << x.labels().size() << " vs " << model.labels.size() << " columns)";
    throw Error(ErrorKind::Schema, os.str());
  }
  return predict(model, x.values());
}

}  // namespace phocap
