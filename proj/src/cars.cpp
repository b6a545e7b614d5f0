#include "phocap/cars.hpp"

#include "phocap/error.hpp"
#include "phocap/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace phocap {

void CarsConfig::validate() const {
  if (n_mc_runs < 10) throw Error(ErrorKind::Parameter, "CARS needs at least 10 sampling runs");
  if (!(calib_ratio > 0.0 && calib_ratio < 1.0))
    throw Error(ErrorKind::Parameter, "CARS calibration ratio must be in (0, 1)");
  if (end_keep_count < 2) throw Error(ErrorKind::Parameter, "CARS must keep at least 2 variables");
  if (!(start_keep_ratio > 0.0 && start_keep_ratio <= 1.0))
    throw Error(ErrorKind::Parameter, "CARS start keep ratio must be in (0, 1]");
  if (k_max < 1) throw Error(ErrorKind::Parameter, "CARS k_max must be >= 1");
  if (folds < 2) throw Error(ErrorKind::Parameter, "CARS needs at least 2 CV folds");
}

std::vector<Index> edf_schedule(Index p, const CarsConfig& cfg) {
  const auto runs = static_cast<std::size_t>(cfg.n_mc_runs);
  if (p < cfg.end_keep_count) {
    std::ostringstream os;
    os << "CARS: " << p << " variables is fewer than the final keep count " << cfg.end_keep_count;
    throw Error(ErrorKind::Parameter, os.str());
  }
  if (p == cfg.end_keep_count) return std::vector<Index>(runs, p);

  const double first = static_cast<double>(p) * cfg.start_keep_ratio;
  const double last = static_cast<double>(cfg.end_keep_count);
  if (first < last) {
    std::ostringstream os;
    os << "CARS: start keep count " << first << " below end keep count " << last;
    throw Error(ErrorKind::Parameter, os.str());
  }
  // first = p*a*e^{-k}, last = p*a*e^{-k*runs}
  const double k = runs > 1 ? std::log(first / last) / static_cast<double>(runs - 1) : 0.0;
  std::vector<Index> keep(runs);
  for (std::size_t i = 0; i < runs; ++i) {
    const auto v = static_cast<Index>(std::llround(first * std::exp(-k * static_cast<double>(i))));
    keep[i] = std::clamp(v, cfg.end_keep_count, p);
  }
  keep.back() = cfg.end_keep_count;
  return keep;
}

namespace {

double min_rmsecv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Index k_max,
                  const std::vector<int>& fold_ids, int folds) {
  const Eigen::MatrixXd pred = cv_predictions(x, y, k_max, fold_ids, folds);
  double best = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < pred.cols(); ++c)
    best = std::min(best, std::sqrt((pred.col(c) - y).squaredNorm() / static_cast<double>(y.size())));
  return best;
}

}  // namespace

CarsRunResult cars_run(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const CarsConfig& cfg,
                       std::uint64_t seed) {
  cfg.validate();
  const Index n = x.rows();
  const Index p = x.cols();
  if (y.size() != n) throw Error(ErrorKind::Schema, "CARS: X rows and y length differ");
  const auto schedule = edf_schedule(p, cfg);
  const auto n_calib = std::clamp<Index>(
      static_cast<Index>(std::llround(cfg.calib_ratio * static_cast<double>(n))), 2, n);

  Rng rng(seed);
  // One fold layout per run keeps RMSECV comparable across iterations.
  const auto fold_ids = assign_folds(n, cfg.folds, rng());

  CarsRunResult res;
  IndexList current(static_cast<std::size_t>(p));
  std::iota(current.begin(), current.end(), Index{0});
  res.retained.push_back(current);
  res.rmsecv.push_back(min_rmsecv(x, y, cfg.k_max, fold_ids, cfg.folds));

  IndexList rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Index{0});
  std::vector<double> weight;
  IndexList order;

  for (std::size_t run = 0; run < schedule.size(); ++run) {
    std::shuffle(rows.begin(), rows.end(), rng);
    IndexList calib(rows.begin(), rows.begin() + n_calib);
    std::sort(calib.begin(), calib.end());

    const Eigen::MatrixXd xc = take_rows(take_cols(x, current), calib);
    const Eigen::VectorXd yc = take(y, calib);
    const Index k = std::min({cfg.k_max, n_calib - 1, static_cast<Index>(current.size())});
    const auto model = fit_plsr(xc, yc, k);

    const auto m = current.size();
    weight.assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) weight[j] = std::abs(model.scaled_coefficients(static_cast<Index>(j)));

    // Forced removal: keep the strongest keep_i, ties by column index.
    order.resize(m);
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      return weight[static_cast<std::size_t>(a)] > weight[static_cast<std::size_t>(b)];
    });
    const auto keep = static_cast<std::size_t>(std::min<Index>(schedule[run], static_cast<Index>(m)));
    order.resize(keep);

    IndexList next;
    const double total = std::accumulate(order.begin(), order.end(), 0.0, [&](double s, Index j) {
      return s + weight[static_cast<std::size_t>(j)];
    });
    if (cfg.sampling == CarsSampling::TopK || !(total > 0.0)) {
      next = order;
    } else {
      std::vector<double> probs(keep);
      for (std::size_t i = 0; i < keep; ++i) probs[i] = weight[static_cast<std::size_t>(order[i])];
      std::discrete_distribution<std::size_t> draw(probs.begin(), probs.end());
      std::vector<char> hit(keep, 0);
      for (std::size_t d = 0; d < keep; ++d) hit[draw(rng)] = 1;
      for (std::size_t i = 0; i < keep; ++i)
        if (hit[i]) next.push_back(order[i]);
      // Guard against collapse below two variables: top up with the strongest.
      for (std::size_t i = 0; next.size() < std::min<std::size_t>(2, keep) && i < keep; ++i)
        if (!hit[i]) {
          hit[i] = 1;
          next.push_back(order[i]);
        }
    }
    for (auto& j : next) j = current[static_cast<std::size_t>(j)];
    std::sort(next.begin(), next.end());
    current = std::move(next);

    res.rmsecv.push_back(min_rmsecv(take_cols(x, current), y, cfg.k_max, fold_ids, cfg.folds));
    res.retained.push_back(current);
  }

  res.best_iteration = static_cast<std::size_t>(
      std::min_element(res.rmsecv.begin(), res.rmsecv.end()) - res.rmsecv.begin());
  res.selected = res.retained[res.best_iteration];
  return res;
}

std::uint64_t cars_loop_seed(std::uint64_t master_seed, int loop) {
  return derive_seed(master_seed, "cars-loop", static_cast<std::uint64_t>(loop));
}

CarsConsensus tally_consensus(Index n_vars, const std::vector<IndexList>& selections,
                              std::uint64_t master_seed) {
  if (selections.size() < 2) throw Error(ErrorKind::Parameter, "consensus needs at least 2 loops");
  CarsConsensus out;
  out.n_loops = static_cast<int>(selections.size());
  out.master_seed = master_seed;
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_vars);
  for (const auto& sel : selections)
    for (Index j : sel) counts(j) += 1.0;
  out.frequency = counts / static_cast<double>(selections.size());
  for (Index j = 0; j < n_vars; ++j)
    if (out.frequency(j) > kConsensusThreshold) out.consensus.push_back(j);
  return out;
}

CarsConsensus cars_consensus(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const CarsConfig& cfg, int n_loops, std::uint64_t master_seed) {
  if (n_loops < 2) throw Error(ErrorKind::Parameter, "consensus needs at least 2 loops");
  std::vector<IndexList> selections(static_cast<std::size_t>(n_loops));
  for (int loop = 0; loop < n_loops; ++loop)
    selections[static_cast<std::size_t>(loop)] = cars_run(x, y, cfg, cars_loop_seed(master_seed, loop)).selected;
  return tally_consensus(x.cols(), selections, master_seed);
}

}  // namespace phocap
