#pragma once

// Competitive adaptive reweighted sampling (CARS) for wavelength selection and
// the multi-loop consensus built on top of it.

#include "phocap/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace phocap {

enum class CarsSampling {
  Reweighted,  // draw with replacement, probability proportional to |b|, then dedupe
  TopK,        // keep the EDF survivors deterministically
};

struct CarsConfig {
  int n_mc_runs = 50;
  double calib_ratio = 0.8;
  Index k_max = 10;
  int folds = 5;
  double start_keep_ratio = 0.9;
  Index end_keep_count = 2;
  CarsSampling sampling = CarsSampling::Reweighted;

  void validate() const;
};

/// Keep-count per sampling run from the exponentially decreasing function
/// keep_i = round(p * a * exp(-k i)), anchored at p * start_keep_ratio for the
/// first run and end_keep_count for the last.
std::vector<Index> edf_schedule(Index p, const CarsConfig& cfg);

struct CarsRunResult {
  // Entry 0 is the full variable set; entry i (1..n_mc_runs) is the set retained
  // after sampling run i.
  std::vector<IndexList> retained;
  std::vector<double> rmsecv;
  std::size_t best_iteration = 0;
  IndexList selected;  // retained[best_iteration]

  friend bool operator==(const CarsRunResult&, const CarsRunResult&) = default;
};

CarsRunResult cars_run(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const CarsConfig& cfg,
                       std::uint64_t seed);

struct CarsConsensus {
  Eigen::VectorXd frequency;  // fraction of loops selecting each column
  IndexList consensus;        // columns with frequency > 0.5
  int n_loops = 0;
  std::uint64_t master_seed = 0;
};

inline constexpr int kDefaultCarsLoops = 100;
inline constexpr double kConsensusThreshold = 0.5;

/// Per-loop seed used by cars_consensus.
std::uint64_t cars_loop_seed(std::uint64_t master_seed, int loop);

/// Aggregates per-loop selections into frequencies and the > 50 % set.
CarsConsensus tally_consensus(Index n_vars, const std::vector<IndexList>& selections,
                              std::uint64_t master_seed);

CarsConsensus cars_consensus(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const CarsConfig& cfg, int n_loops, std::uint64_t master_seed);

}  // namespace phocap
