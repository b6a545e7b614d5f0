#include <doctest.h>

#include "phocap/cars.hpp"
#include "phocap/error.hpp"
#include "phocap/random.hpp"

#include <algorithm>
#include <random>

using namespace phocap;

namespace {

struct Planted {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

// y = x_j + small noise, every other column independent noise.
Planted planted(std::uint64_t seed, Index n, Index p, Index informative) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  Planted d{Eigen::MatrixXd(n, p), Eigen::VectorXd(n)};
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < n; ++i) d.x(i, j) = nd(rng);
  for (Index i = 0; i < n; ++i) d.y(i) = d.x(i, informative) + 0.3 * nd(rng);
  return d;
}

bool contains(const IndexList& v, Index j) { return std::find(v.begin(), v.end(), j) != v.end(); }

}  // namespace

TEST_CASE("edf schedule") {
  const std::vector<Index> expected{90, 83, 77, 71, 66, 61, 56, 52, 48, 45, 41, 38, 35, 33, 30, 28, 26,
                                    24, 22, 21, 19, 18, 16, 15, 14, 13, 12, 11, 10, 9,  9,  8,  7,  7,
                                    6,  6,  5,  5,  5,  4,  4,  4,  3,  3,  3,  3,  3,  2,  2,  2};
  CHECK(edf_schedule(100, CarsConfig{}) == expected);

  CHECK(edf_schedule(2, CarsConfig{}) == std::vector<Index>(50, 2));
  CHECK_THROWS_AS(edf_schedule(1, CarsConfig{}), Error);

  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    CarsConfig cfg;
    cfg.n_mc_runs = std::uniform_int_distribution<int>(10, 120)(rng);
    const Index p = std::uniform_int_distribution<Index>(3, 3000)(rng);
    const auto s = edf_schedule(p, cfg);
    REQUIRE(s.size() == static_cast<std::size_t>(cfg.n_mc_runs));
    CHECK(s.back() == cfg.end_keep_count);
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] <= s[i - 1]);
    for (auto v : s) CHECK(v >= cfg.end_keep_count);
  }
}

TEST_CASE("cars config validation") {
  CarsConfig cfg;
  cfg.n_mc_runs = 5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = CarsConfig{};
  cfg.calib_ratio = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = CarsConfig{};
  cfg.end_keep_count = 1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("cars run is deterministic and shrinks monotonically") {
  const auto d = planted(3, 60, 40, 11);
  const auto a = cars_run(d.x, d.y, CarsConfig{}, 42);
  const auto b = cars_run(d.x, d.y, CarsConfig{}, 42);
  CHECK(a == b);
  CHECK(cars_run(d.x, d.y, CarsConfig{}, 43).retained != a.retained);

  REQUIRE(a.retained.size() == 51);
  CHECK(a.retained.front().size() == 40);
  for (std::size_t i = 1; i < a.retained.size(); ++i) {
    const auto& prev = a.retained[i - 1];
    const auto& cur = a.retained[i];
    CHECK(cur.size() >= 2);
    CHECK(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
  }
  CHECK(a.selected == a.retained[a.best_iteration]);
  CHECK(a.rmsecv[a.best_iteration] == *std::min_element(a.rmsecv.begin(), a.rmsecv.end()));
}

TEST_CASE("planted column survives to the last iteration") {
  int survived = 0;
  int survived_topk = 0;
  CarsConfig topk;
  topk.sampling = CarsSampling::TopK;
  for (int s = 0; s < 100; ++s) {
    const auto d = planted(derive_seed(900, "planted", static_cast<std::uint64_t>(s)), 60, 51, 17);
    survived += contains(cars_run(d.x, d.y, CarsConfig{}, static_cast<std::uint64_t>(s)).retained.back(), 17);
    survived_topk += contains(cars_run(d.x, d.y, topk, static_cast<std::uint64_t>(s)).retained.back(), 17);
  }
  CHECK(survived >= 95);
  CHECK(survived_topk >= 95);
}

TEST_CASE("duplicated informative columns") {
  Rng rng(8);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(50, 3);
  Eigen::VectorXd y(50);
  for (Index i = 0; i < 50; ++i) {
    const double s = nd(rng);
    x.row(i).setConstant(s);
    y(i) = 2.0 * s + 0.1 * nd(rng);
  }
  const auto r = cars_run(x, y, CarsConfig{}, 1);
  CHECK_FALSE(r.selected.empty());
  CHECK(r.rmsecv[r.best_iteration] <= r.rmsecv[0]);
}

TEST_CASE("consensus counting") {
  const auto c = tally_consensus(10, {{3, 7}, {3, 7}}, 0);
  CHECK(c.frequency(3) == 1.0);
  CHECK(c.frequency(7) == 1.0);
  CHECK(c.frequency.sum() == 2.0);
  CHECK(c.consensus == IndexList{3, 7});

  // Exactly half is not a majority.
  const auto half = tally_consensus(4, {{0, 1}, {1}}, 0);
  CHECK(half.consensus == IndexList{1});
  CHECK_THROWS_AS(tally_consensus(4, {{0}}, 0), Error);
}

TEST_CASE("consensus is independent of loop order") {
  const auto d = planted(21, 50, 30, 4);
  const CarsConfig cfg;
  const auto c = cars_consensus(d.x, d.y, cfg, 12, 77);

  std::vector<IndexList> sel;
  for (int loop = 11; loop >= 0; --loop) sel.push_back(cars_run(d.x, d.y, cfg, cars_loop_seed(77, loop)).selected);
  const auto reversed = tally_consensus(30, sel, 77);
  CHECK(reversed.frequency == c.frequency);
  CHECK(reversed.consensus == c.consensus);
  CHECK(c.frequency(4) >= 0.9);
  CHECK(c.frequency.minCoeff() >= 0.0);
  CHECK(c.frequency.maxCoeff() <= 1.0);
}
