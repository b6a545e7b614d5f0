#include "phocap/fusion.hpp"

#include "phocap/error.hpp"
#include "phocap/metrics.hpp"
#include "phocap/random.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace phocap {

std::string_view to_string(SourceTag tag) noexcept {
  switch (tag) {
    case SourceTag::R: return "R";
    case SourceTag::UpSif: return "upSIF";
    case SourceTag::DownSif: return "downSIF";
  }
  return "?";
}

SourceTag parse_source(std::string_view s) {
  for (auto t : {SourceTag::R, SourceTag::UpSif, SourceTag::DownSif})
    if (s == to_string(t)) return t;
  throw Error(ErrorKind::Validation, "unknown source '" + std::string(s) + "' (expected R, upSIF or downSIF)");
}

std::string_view to_string(FusionLevel level) noexcept {
  switch (level) {
    case FusionLevel::Measurement: return "measurement";
    case FusionLevel::Feature: return "feature";
    case FusionLevel::Decision: return "decision";
  }
  return "?";
}

FusionLevel parse_level(std::string_view s) {
  for (auto l : {FusionLevel::Measurement, FusionLevel::Feature, FusionLevel::Decision})
    if (s == to_string(l)) return l;
  throw Error(ErrorKind::Validation,
              "unknown fusion level '" + std::string(s) + "' (expected measurement, feature or decision)");
}

std::string_view to_string(Normalization mode) noexcept {
  return mode == Normalization::MinMax ? "minmax" : "zscore";
}

Normalization parse_normalization(std::string_view s) {
  if (s == "minmax") return Normalization::MinMax;
  if (s == "zscore") return Normalization::ZScore;
  throw Error(ErrorKind::Validation, "unknown normalization '" + std::string(s) + "' (expected minmax or zscore)");
}

std::string_view to_string(DecisionBranch b) noexcept {
  switch (b) {
    case DecisionBranch::Mean: return "mean";
    case DecisionBranch::ClosePair: return "close_pair";
    case DecisionBranch::Median: return "median";
  }
  return "?";
}

std::string FusionSpec::name() const {
  std::string out(to_string(level));
  out += ':';
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (i) out += '-';
    out += to_string(sources[i]);
  }
  return out;
}

void FusionSpec::validate() const {
  if (sources.empty()) throw Error(ErrorKind::Validation, "fusion spec " + name() + " has no sources");
  std::set<SourceTag> seen(sources.begin(), sources.end());
  if (seen.size() != sources.size())
    throw Error(ErrorKind::Validation, "fusion spec " + name() + " repeats a source");
  if (level == FusionLevel::Decision && sources.size() != 3)
    throw Error(ErrorKind::Validation, "decision fusion spec " + name() + " needs exactly 3 sources, got " +
                                           std::to_string(sources.size()));
  if (theta && !(*theta > 0.0 && std::isfinite(*theta)))
    throw Error(ErrorKind::Validation, "fusion spec " + name() + ": theta must be positive");
}

BlockNormalizer BlockNormalizer::fit(const Eigen::MatrixXd& x, std::span<const Index> train_rows,
                                     Normalization mode) {
  if (train_rows.empty()) throw Error(ErrorKind::Data, "normalizer needs at least one training row");
  const Eigen::MatrixXd t = take_rows(x, train_rows);
  BlockNormalizer n;
  n.mode = mode;
  n.offset.resize(x.cols());
  n.scale.resize(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    if (mode == Normalization::MinMax) {
      n.offset(j) = t.col(j).minCoeff();
      n.scale(j) = t.col(j).maxCoeff() - n.offset(j);
    } else {
      n.offset(j) = t.col(j).mean();
      const double ss = (t.col(j).array() - n.offset(j)).square().sum();
      n.scale(j) = t.rows() > 1 ? std::sqrt(ss / static_cast<double>(t.rows() - 1)) : 0.0;
    }
  }
  return n;
}

Eigen::MatrixXd BlockNormalizer::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != offset.size()) throw Error(ErrorKind::Schema, "normalizer column count mismatch");
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    if (scale(j) > 0.0)
      out.col(j) = (x.col(j).array() - offset(j)) / scale(j);
    else
      out.col(j).setZero();
  }
  return out;
}

namespace {

std::string prefixed(SourceTag tag, const std::string& label) {
  const std::string p = std::string(to_string(tag)) + ":";
  return label.rfind(p, 0) == 0 ? label : p + label;
}

DataMatrix concat(std::span<const SourceBlock> blocks, std::span<const IndexList> cols,
                  const DatasetSplit& split, const FusionOptions& opts) {
  if (blocks.empty()) throw Error(ErrorKind::Parameter, "fusion needs at least one block");
  const Index n = blocks[0].data.rows();
  Index total = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].data.rows() != n)
      throw Error(ErrorKind::Schema, "block " + std::string(to_string(blocks[b].tag)) + " has " +
                                         std::to_string(blocks[b].data.rows()) + " rows, expected " +
                                         std::to_string(n));
    total += static_cast<Index>(cols[b].size());
  }
  Eigen::MatrixXd values(n, total);
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(total));
  Index at = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& blk = blocks[b];
    if (cols[b].empty()) continue;
    Eigen::MatrixXd part = take_cols(blk.data.values(), cols[b]);
    // A lone block passes through so single-source specs match the plain model.
    const bool normalize = blocks.size() > 1 && (blk.tag != SourceTag::R || opts.normalize_reflectance);
    if (normalize) part = BlockNormalizer::fit(part, split.train, opts.mode).apply(part);
    values.middleCols(at, part.cols()) = part;
    at += part.cols();
    for (Index j : cols[b]) labels.push_back(prefixed(blk.tag, blk.data.labels()[static_cast<std::size_t>(j)]));
  }
  return DataMatrix(std::move(values), std::move(labels));
}

IndexList all_columns(Index p) {
  IndexList v(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) v[static_cast<std::size_t>(j)] = j;
  return v;
}

}  // namespace

DataMatrix measurement_fuse(std::span<const SourceBlock> blocks, const DatasetSplit& split,
                            const FusionOptions& opts) {
  std::vector<IndexList> cols;
  for (const auto& b : blocks) cols.push_back(all_columns(b.data.cols()));
  return concat(blocks, cols, split, opts);
}

DataMatrix feature_fuse(std::span<const SourceBlock> blocks, std::span<const IndexList> selected,
                        const DatasetSplit& split, const FusionOptions& opts) {
  if (selected.size() != blocks.size())
    throw Error(ErrorKind::Parameter, "feature fusion needs one selection per block");
  bool any = false;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (Index j : selected[b])
      if (j < 0 || j >= blocks[b].data.cols())
        throw Error(ErrorKind::Parameter, "selected column out of range for block " +
                                              std::string(to_string(blocks[b].tag)));
    any = any || !selected[b].empty();
  }
  if (!any) throw Error(ErrorKind::Data, "feature fusion: no block has any selected features");
  return concat(blocks, selected, split, opts);
}

DecisionResult decision_fuse(std::array<double, 3> preds, double theta) {
  if (!(theta > 0.0)) throw Error(ErrorKind::Parameter, "decision threshold must be positive");
  for (double v : preds)
    if (!std::isfinite(v)) throw Error(ErrorKind::Data, "decision fusion got a non-finite prediction");
  std::sort(preds.begin(), preds.end());
  const auto [a, b, c] = preds;
  // Written as offsets from a so equal inputs return exactly that value.
  if (c - a <= theta) return {a + ((b - a) + (c - a)) / 3.0, DecisionBranch::Mean};
  const double lo = b - a;
  const double hi = c - b;
  if (std::min(lo, hi) <= theta) {
    if (lo <= hi) return {a + lo / 2.0, DecisionBranch::ClosePair};
    return {b + hi / 2.0, DecisionBranch::ClosePair};
  }
  return {b, DecisionBranch::Median};
}

double default_theta(const Eigen::VectorXd& train_labels) {
  if (train_labels.size() < 2) throw Error(ErrorKind::Data, "need at least 2 labels for a default threshold");
  std::vector<double> v(train_labels.data(), train_labels.data() + train_labels.size());
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double h = p * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(h));
    const double f = h - static_cast<double>(i);
    return i + 1 < v.size() ? v[i] + f * (v[i + 1] - v[i]) : v[i];
  };
  const double theta = 0.1 * (q(0.75) - q(0.25));
  if (!(theta > 0.0))
    throw Error(ErrorKind::Data, "training labels have zero interquartile range; set theta explicitly");
  return theta;
}

const SourceBlock& FusionDataset::block(SourceTag tag) const {
  for (const auto& b : blocks)
    if (b.tag == tag) return b;
  throw Error(ErrorKind::Validation, "dataset has no " + std::string(to_string(tag)) + " block");
}

void FusionDataset::validate() const {
  const auto n = static_cast<Index>(sample_ids.size());
  std::set<SourceTag> tags;
  for (const auto& b : blocks) {
    if (!tags.insert(b.tag).second)
      throw Error(ErrorKind::Validation, "duplicate source block " + std::string(to_string(b.tag)));
    if (b.data.rows() != n)
      throw Error(ErrorKind::Schema, "block " + std::string(to_string(b.tag)) + " has " +
                                         std::to_string(b.data.rows()) + " rows for " + std::to_string(n) +
                                         " samples");
  }
  for (const auto& t : targets) {
    if (t.values.size() != n)
      throw Error(ErrorKind::Schema, "target " + t.name + " has " + std::to_string(t.values.size()) +
                                         " values for " + std::to_string(n) + " samples");
    std::vector<std::string> missing;
    for (Index i = 0; i < n; ++i)
      if (!std::isfinite(t.values(i))) missing.push_back(sample_ids[static_cast<std::size_t>(i)]);
    if (!missing.empty()) {
      std::ostringstream os;
      os << "missing " << t.name << " labels for " << missing.size() << " sample(s):";
      for (std::size_t i = 0; i < missing.size() && i < 20; ++i) os << ' ' << missing[i];
      if (missing.size() > 20) os << " ...";
      throw Error(ErrorKind::Data, os.str());
    }
  }
}

const ModelResult& FusionReport::model(std::string_view spec, std::string_view target) const {
  for (const auto& m : models)
    if (m.spec == spec && m.target == target) return m;
  throw Error(ErrorKind::Parameter, "no model " + std::string(spec) + " for target " + std::string(target));
}

std::uint64_t cv_seed(std::uint64_t master, std::string_view target) {
  return derive_seed(derive_seed(master, "cv"), target);
}

std::uint64_t cars_seed(std::uint64_t master, SourceTag tag, std::string_view target) {
  return derive_seed(derive_seed(derive_seed(master, "cars"), to_string(tag)), target);
}

namespace {

struct Fitted {
  Index n_components = 0;
  std::vector<double> rmsecv;
  Eigen::VectorXd predicted;
};

Fitted fit_and_predict(const DataMatrix& x, const Eigen::VectorXd& y, const DatasetSplit& split,
                       const ExperimentOptions& opts, std::uint64_t fold_seed) {
  const DataMatrix train = x.rows_subset(split.train);
  const Eigen::VectorXd ytr = take(y, split.train);
  const Index k_max = default_k_max(train.rows(), train.cols(), opts.k_cap);
  if (k_max < 1) throw Error(ErrorKind::Data, "too few training rows or columns for PLSR");
  const auto cv = select_components(train.values(), ytr, k_max, opts.cv_folds, fold_seed);
  const auto model = fit_plsr(train, ytr, cv.k_best);
  return {model.n_components, cv.rmsecv, predict(model, x.rows_subset(split.test))};
}

}  // namespace

FusionReport run_fusion_experiment(const FusionDataset& data, std::span<const FusionSpec> specs,
                                   const ExperimentOptions& opts) {
  // All validation happens before any model is fitted.
  data.validate();
  opts.cars.validate();
  if (opts.cv_folds < 2) throw Error(ErrorKind::Validation, "cv_folds must be >= 2");
  if (opts.cars_loops < 2) throw Error(ErrorKind::Validation, "cars_loops must be >= 2");
  if (!(opts.train_fraction > 0.0 && opts.train_fraction < 1.0))
    throw Error(ErrorKind::Validation, "train_fraction must be in (0, 1)");
  for (const auto& s : specs) {
    s.validate();
    for (auto t : s.sources) (void)data.block(t);
  }

  const auto n = static_cast<Index>(data.sample_ids.size());
  FusionReport rep;
  rep.split = split(n, opts.train_fraction, derive_seed(opts.seed, "split"));
  const auto& sp = rep.split;

  auto consensus_for = [&](SourceTag tag, const Target& t) -> const CarsConsensus& {
    const ConsensusKey key{tag, t.name};
    auto it = rep.consensus.find(key);
    if (it == rep.consensus.end()) {
      const auto& blk = data.block(tag);
      const Eigen::MatrixXd x = take_rows(blk.data.values(), sp.train);
      const Eigen::VectorXd y = take(t.values, sp.train);
      it = rep.consensus.emplace(key, cars_consensus(x, y, opts.cars, opts.cars_loops, cars_seed(opts.seed, tag, t.name)))
               .first;
    }
    return it->second;
  };

  if (opts.cars_all_sources)
    for (const auto& t : data.targets)
      for (const auto& b : data.blocks) consensus_for(b.tag, t);

  // Single-source models are shared between single-source specs and decision fusion.
  std::map<ConsensusKey, Fitted> single;
  auto single_model = [&](SourceTag tag, const Target& t) -> const Fitted& {
    const ConsensusKey key{tag, t.name};
    auto it = single.find(key);
    if (it == single.end()) {
      const SourceBlock& blk = data.block(tag);
      const auto x = measurement_fuse(std::span<const SourceBlock>(&blk, 1), sp);
      it = single.emplace(key, fit_and_predict(x, t.values, sp, opts, cv_seed(opts.seed, t.name))).first;
    }
    return it->second;
  };

  for (const auto& spec : specs) {
    std::vector<SourceBlock> blocks;
    for (auto tag : spec.sources) blocks.push_back(data.block(tag));

    for (const auto& t : data.targets) {
      ModelResult m;
      m.spec = spec.name();
      m.level = spec.level;
      m.sources = spec.sources;
      m.target = t.name;
      m.test_rows = sp.test;
      m.observed = take(t.values, sp.test);

      if (spec.level == FusionLevel::Decision) {
        m.theta = spec.theta ? *spec.theta : default_theta(take(t.values, sp.train));
        std::array<const Fitted*, 3> parts{};
        for (std::size_t s = 0; s < 3; ++s) {
          parts[s] = &single_model(spec.sources[s], t);
          m.n_features += data.block(spec.sources[s]).data.cols();
        }
        m.predicted.resize(m.observed.size());
        m.components.resize(m.observed.size(), 3);
        for (std::size_t s = 0; s < 3; ++s) m.components.col(static_cast<Index>(s)) = parts[s]->predicted;
        for (Index i = 0; i < m.observed.size(); ++i) {
          const auto d = decision_fuse({parts[0]->predicted(i), parts[1]->predicted(i), parts[2]->predicted(i)}, m.theta);
          m.predicted(i) = d.value;
          m.branches.push_back(d.branch);
        }
      } else {
        const Fitted* fit = nullptr;
        Fitted local;
        if (spec.level == FusionLevel::Measurement && blocks.size() == 1) {
          fit = &single_model(blocks[0].tag, t);
          m.n_features = blocks[0].data.cols();
        } else {
          DataMatrix x;
          if (spec.level == FusionLevel::Measurement) {
            x = measurement_fuse(blocks, sp, spec.options);
          } else {
            std::vector<IndexList> sel;
            for (const auto& b : blocks) sel.push_back(consensus_for(b.tag, t).consensus);
            x = feature_fuse(blocks, sel, sp, spec.options);
          }
          m.n_features = x.cols();
          local = fit_and_predict(x, t.values, sp, opts, cv_seed(opts.seed, t.name));
          fit = &local;
        }
        m.n_components = fit->n_components;
        m.rmsecv = fit->rmsecv;
        m.predicted = fit->predicted;
      }
      m.r2 = r2(m.observed, m.predicted);
      m.rmse = rmse(m.observed, m.predicted);
      rep.models.push_back(std::move(m));
    }
  }
  return rep;
}

}  // namespace phocap
