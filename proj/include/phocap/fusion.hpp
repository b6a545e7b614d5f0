#pragma once

// Measurement-, feature- and decision-level fusion of the reflectance and SIF
// yield blocks, and the experiment runner that evaluates a list of fusion specs
// on one shared split.

#include "phocap/cars.hpp"
#include "phocap/dataset.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace phocap {

enum class SourceTag { R, UpSif, DownSif };

std::string_view to_string(SourceTag tag) noexcept;
/// Accepts "R", "upSIF", "downSIF".
SourceTag parse_source(std::string_view s);

struct SourceBlock {
  SourceTag tag = SourceTag::R;
  DataMatrix data;
};

enum class FusionLevel { Measurement, Feature, Decision };

std::string_view to_string(FusionLevel level) noexcept;
FusionLevel parse_level(std::string_view s);

enum class Normalization { MinMax, ZScore };

std::string_view to_string(Normalization mode) noexcept;
Normalization parse_normalization(std::string_view s);

struct FusionOptions {
  Normalization mode = Normalization::MinMax;
  // Reflectance is already in [0, 1] and passes through unless this is set.
  bool normalize_reflectance = false;
};

struct FusionSpec {
  FusionLevel level = FusionLevel::Measurement;
  std::vector<SourceTag> sources;
  FusionOptions options;
  // Decision threshold in target units; unset means 0.1 x training IQR.
  std::optional<double> theta;

  /// e.g. "measurement:R-upSIF"
  std::string name() const;
  /// Throws a validation error: empty or repeated sources, decision level
  /// without exactly three sources, non-positive theta.
  void validate() const;
};

/// Per-column affine map (x - offset) / scale learned on training rows.
/// Constant columns get scale 0 and map to 0.
struct BlockNormalizer {
  Normalization mode = Normalization::MinMax;
  Eigen::VectorXd offset;
  Eigen::VectorXd scale;

  static BlockNormalizer fit(const Eigen::MatrixXd& x, std::span<const Index> train_rows,
                             Normalization mode);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;

  friend bool operator==(const BlockNormalizer&, const BlockNormalizer&) = default;
};

/// Concatenates blocks in the given order. Every block except reflectance (unless
/// opts.normalize_reflectance) is normalized with parameters from split.train.
/// Labels are prefixed with the source tag. A single block passes through as is.
DataMatrix measurement_fuse(std::span<const SourceBlock> blocks, const DatasetSplit& split,
                            const FusionOptions& opts = {});

/// Like measurement_fuse but keeping only the selected columns of each block.
/// Throws a data error if every selection is empty.
DataMatrix feature_fuse(std::span<const SourceBlock> blocks, std::span<const IndexList> selected,
                        const DatasetSplit& split, const FusionOptions& opts = {});

enum class DecisionBranch { Mean, ClosePair, Median };

std::string_view to_string(DecisionBranch b) noexcept;

struct DecisionResult {
  double value = 0.0;
  DecisionBranch branch = DecisionBranch::Median;
};

/// Sorted a <= b <= c: mean of all three if c - a <= theta, else the mean of the
/// closer adjacent pair if that gap is <= theta (equal gaps pick (a, b)), else b.
DecisionResult decision_fuse(std::array<double, 3> preds, double theta);

/// 0.1 x interquartile range (linear-interpolated quartiles).
double default_theta(const Eigen::VectorXd& train_labels);

struct Target {
  std::string name;
  Eigen::VectorXd values;  // NaN marks a missing label
};

struct FusionDataset {
  std::vector<std::string> sample_ids;
  std::vector<SourceBlock> blocks;
  std::vector<Target> targets;

  const SourceBlock& block(SourceTag tag) const;
  /// Shape checks; missing labels raise a data error naming the samples.
  void validate() const;
};

struct ExperimentOptions {
  std::uint64_t seed = 0;
  double train_fraction = 2.0 / 3.0;
  Index k_cap = kDefaultComponentCap;
  int cv_folds = 10;
  CarsConfig cars;
  int cars_loops = kDefaultCarsLoops;
  // Run CARS for every block and target even when no feature spec needs it.
  bool cars_all_sources = false;
};

struct ModelResult {
  std::string spec;
  FusionLevel level = FusionLevel::Measurement;
  std::vector<SourceTag> sources;
  std::string target;
  Index n_features = 0;
  Index n_components = 0;  // 0 at decision level
  std::vector<double> rmsecv;
  double r2 = 0.0;
  double rmse = 0.0;
  double theta = 0.0;  // decision level only
  IndexList test_rows;
  Eigen::VectorXd observed;
  Eigen::VectorXd predicted;
  std::vector<DecisionBranch> branches;  // decision level only
  Eigen::MatrixXd components;            // decision level: test rows x source predictions
};

using ConsensusKey = std::pair<SourceTag, std::string>;

struct FusionReport {
  DatasetSplit split;
  std::vector<ModelResult> models;
  std::map<ConsensusKey, CarsConsensus> consensus;

  const ModelResult& model(std::string_view spec, std::string_view target) const;
};

/// Seeds used for one target's CV folds and one block's CARS consensus.
std::uint64_t cv_seed(std::uint64_t master, std::string_view target);
std::uint64_t cars_seed(std::uint64_t master, SourceTag tag, std::string_view target);

FusionReport run_fusion_experiment(const FusionDataset& data, std::span<const FusionSpec> specs,
                                   const ExperimentOptions& opts);

}  // namespace phocap
