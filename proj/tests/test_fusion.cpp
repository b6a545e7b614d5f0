#include <doctest.h>

#include "phocap/error.hpp"
#include "phocap/fusion.hpp"
#include "phocap/metrics.hpp"
#include "phocap/random.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace phocap;

namespace {

DataMatrix block(SourceTag tag, double lo, double hi, const Eigen::MatrixXd& values) {
  std::vector<std::string> labels;
  for (Index j = 0; j < values.cols(); ++j)
    labels.push_back(band_label(to_string(tag), lo + (hi - lo) * static_cast<double>(j) /
                                                         static_cast<double>(std::max<Index>(values.cols() - 1, 1))));
  return DataMatrix(values, labels);
}

DatasetSplit fixed_split(Index n) {
  DatasetSplit s;
  for (Index i = 0; i < n; ++i) (i % 3 == 2 ? s.test : s.train).push_back(i);
  return s;
}

// Three blocks, each a noisy view of the same trait plus its own nuisance.
FusionDataset toy(std::uint64_t seed, Index n = 60) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(40.0, 140.0);
  FusionDataset d;
  Eigen::VectorXd jmax(n), vcmax(n);
  for (Index i = 0; i < n; ++i) {
    d.sample_ids.push_back("s" + std::to_string(i));
    jmax(i) = ud(rng);
    vcmax(i) = 0.6 * jmax(i) + 5.0 * nd(rng);
  }
  const std::array<SourceTag, 3> tags{SourceTag::R, SourceTag::UpSif, SourceTag::DownSif};
  const std::array<Index, 3> widths{30, 12, 12};
  for (std::size_t b = 0; b < 3; ++b) {
    Eigen::MatrixXd x(n, widths[b]);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < widths[b]; ++j)
        x(i, j) = (j % 4 == 0 ? 0.002 * jmax(i) : 0.0) + 0.05 * nd(rng) + 0.3;
    if (b > 0) x *= 1e-3;
    d.blocks.push_back({tags[b], block(tags[b], b == 0 ? 400.0 : 665.0, b == 0 ? 2400.0 : 845.0, x)});
  }
  d.targets = {{"jmax25", jmax}, {"vcmax25", vcmax}};
  return d;
}

ExperimentOptions fast_options(std::uint64_t seed) {
  ExperimentOptions o;
  o.seed = seed;
  o.k_cap = 6;
  o.cars_loops = 10;
  o.cars.n_mc_runs = 15;
  return o;
}

}  // namespace

TEST_CASE("source and level names") {
  CHECK(parse_source("upSIF") == SourceTag::UpSif);
  CHECK(to_string(SourceTag::DownSif) == "downSIF");
  CHECK_THROWS_AS(parse_source("SIF"), Error);
  CHECK(parse_level("decision") == FusionLevel::Decision);
  CHECK(parse_normalization("zscore") == Normalization::ZScore);
  FusionSpec s{FusionLevel::Feature, {SourceTag::R, SourceTag::UpSif}, {}, std::nullopt};
  CHECK(s.name() == "feature:R-upSIF");
}

TEST_CASE("fusion spec validation") {
  FusionSpec s{FusionLevel::Decision, {SourceTag::R, SourceTag::UpSif}, {}, std::nullopt};
  try {
    s.validate();
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
  }
  s.sources.push_back(SourceTag::DownSif);
  CHECK_NOTHROW(s.validate());
  s.theta = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
  FusionSpec dup{FusionLevel::Measurement, {SourceTag::R, SourceTag::R}, {}, std::nullopt};
  CHECK_THROWS_AS(dup.validate(), Error);
}

TEST_CASE("measurement fusion shapes and normalization") {
  Rng rng(1);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const Index n = 12;
  Eigen::MatrixXd r(n, 2001), up(n, 181);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < r.cols(); ++j) r(i, j) = ud(rng);
    for (Index j = 0; j < up.cols(); ++j) up(i, j) = 1e-3 * ud(rng);
  }
  up.col(5).setConstant(2e-4);
  const std::vector<SourceBlock> blocks{{SourceTag::R, block(SourceTag::R, 400, 2400, r)},
                                        {SourceTag::UpSif, block(SourceTag::UpSif, 665, 845, up)}};
  const auto sp = fixed_split(n);
  const auto f = measurement_fuse(blocks, sp);
  REQUIRE(f.cols() == 2182);
  CHECK(f.rows() == n);
  CHECK(f.labels()[0] == "R:400");
  CHECK(f.labels()[2001] == "upSIF:665");
  CHECK(f.values().leftCols(2001) == r);

  const Eigen::MatrixXd train = take_rows(f.values(), sp.train);
  for (Index j = 2001; j < 2182; ++j) {
    if (j == 2001 + 5) {
      CHECK(f.values().col(j).isZero(0.0));
      continue;
    }
    CHECK(train.col(j).minCoeff() == 0.0);
    CHECK(train.col(j).maxCoeff() == 1.0);
  }

  FusionOptions all;
  all.normalize_reflectance = true;
  const auto g = measurement_fuse(blocks, sp, all);
  CHECK(take_rows(g.values(), sp.train).col(0).maxCoeff() == 1.0);

  // Already-prefixed labels are kept, bare ones get the source prefix.
  const std::vector<SourceBlock> bare{{SourceTag::R, DataMatrix(r.leftCols(2), {"a", "b"})},
                                      {SourceTag::DownSif, DataMatrix(up.leftCols(1), {"a"})}};
  CHECK(measurement_fuse(bare, sp).labels() == std::vector<std::string>{"R:a", "R:b", "downSIF:a"});
}

TEST_CASE("normalizer uses training rows only") {
  Eigen::MatrixXd x(4, 1);
  x << 2.0, 4.0, 5.0, 3.0;
  const IndexList train{0, 1, 3};
  const auto n = BlockNormalizer::fit(x, train, Normalization::MinMax);
  CHECK(n.offset(0) == 2.0);
  CHECK(n.scale(0) == 2.0);
  // Test value 5 maps to (5 - 2) / 2.
  CHECK(n.apply(x)(2, 0) == 1.5);

  Eigen::MatrixXd y = x;
  y(2, 0) = -100.0;
  CHECK(BlockNormalizer::fit(y, train, Normalization::MinMax) == n);

  const auto z = BlockNormalizer::fit(x, train, Normalization::ZScore);
  CHECK(z.offset(0) == doctest::Approx(3.0));
  CHECK(z.scale(0) == doctest::Approx(1.0));
  CHECK(BlockNormalizer::fit(y, train, Normalization::ZScore) == z);
}

TEST_CASE("feature fusion") {
  Rng rng(2);
  std::normal_distribution<double> nd;
  const Index n = 9;
  Eigen::MatrixXd r(n, 2001), up(n, 181);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < r.cols(); ++j) r(i, j) = 0.5 + 0.1 * nd(rng);
    for (Index j = 0; j < up.cols(); ++j) up(i, j) = 1e-3 + 1e-4 * nd(rng);
  }
  const std::vector<SourceBlock> blocks{{SourceTag::R, block(SourceTag::R, 400, 2400, r)},
                                        {SourceTag::UpSif, block(SourceTag::UpSif, 665, 845, up)}};
  const auto sp = fixed_split(n);

  const std::vector<IndexList> sel{{1450 - 400, 2130 - 400}, {710 - 665}};
  const auto f = feature_fuse(blocks, sel, sp);
  CHECK(f.cols() == 3);
  CHECK(f.labels() == std::vector<std::string>{"R:1450", "R:2130", "upSIF:710"});
  CHECK(f.values().col(0) == r.col(1050));

  std::vector<IndexList> full(2);
  for (Index j = 0; j < 2001; ++j) full[0].push_back(j);
  for (Index j = 0; j < 181; ++j) full[1].push_back(j);
  const auto m = measurement_fuse(blocks, sp);
  const auto ff = feature_fuse(blocks, full, sp);
  CHECK(ff.values() == m.values());
  CHECK(ff.labels() == m.labels());

  Rng pick(3);
  for (int t = 0; t < 20; ++t) {
    std::vector<IndexList> s(2);
    for (Index j = 0; j < 2001; ++j)
      if (pick() % 50 == 0) s[0].push_back(j);
    for (Index j = 0; j < 181; ++j)
      if (pick() % 9 == 0) s[1].push_back(j);
    if (s[0].empty() && s[1].empty()) continue;
    CHECK(feature_fuse(blocks, s, sp).cols() == static_cast<Index>(s[0].size() + s[1].size()));
  }

  const std::vector<IndexList> none(2);
  CHECK_THROWS_AS(feature_fuse(blocks, none, sp), Error);
}

TEST_CASE("decision rule truth table") {
  auto d = decision_fuse({10.0, 10.0, 10.0}, 1.0);
  CHECK(d.value == 10.0);
  CHECK(d.branch == DecisionBranch::Mean);

  d = decision_fuse({10.0, 10.2, 15.0}, 1.0);
  CHECK(d.value == doctest::Approx(10.1).epsilon(1e-15));
  CHECK(d.branch == DecisionBranch::ClosePair);

  d = decision_fuse({10.0, 13.0, 16.0}, 1.0);
  CHECK(d.value == 13.0);
  CHECK(d.branch == DecisionBranch::Median);

  // Boundaries are inclusive.
  CHECK(decision_fuse({0.0, 0.5, 1.0}, 1.0).branch == DecisionBranch::Mean);
  CHECK(decision_fuse({0.0, 1.0, 5.0}, 1.0).value == 0.5);
  // Equal gaps take the lower pair.
  d = decision_fuse({4.0, 0.0, 2.0}, 2.5);
  CHECK(d.branch == DecisionBranch::ClosePair);
  CHECK(d.value == 1.0);
  CHECK(decision_fuse({0.0, 4.5, 5.0}, 1.0).value == 4.75);

  CHECK_THROWS_AS(decision_fuse({1.0, 2.0, 3.0}, 0.0), Error);
  CHECK_THROWS_AS(decision_fuse({1.0, NAN, 3.0}, 1.0), Error);
}

TEST_CASE("decision rule properties over random triples") {
  Rng rng(4);
  // Values on a 1/64 grid keep the branch gates free of rounding.
  std::uniform_int_distribution<int> grid(-6400, 6400);
  std::uniform_int_distribution<int> spread(0, 3);
  std::uniform_real_distribution<double> th(0.05, 20.0);
  for (int t = 0; t < 1000; ++t) {
    const double scale = std::pow(10.0, -spread(rng));
    std::array<double, 3> p{grid(rng) / 64.0 * scale, grid(rng) / 64.0 * scale, grid(rng) / 64.0 * scale};
    const double theta = th(rng) * scale;
    const auto base = decision_fuse(p, theta);

    std::array<double, 3> perm = p;
    std::sort(perm.begin(), perm.end());
    do {
      const auto q = decision_fuse(perm, theta);
      CHECK(q.value == base.value);
      CHECK(q.branch == base.branch);
    } while (std::next_permutation(perm.begin(), perm.end()));

    CHECK(base.value >= *std::min_element(p.begin(), p.end()));
    CHECK(base.value <= *std::max_element(p.begin(), p.end()));

    const double c = grid(rng) / 8.0;
    const auto shifted = decision_fuse({p[0] + c, p[1] + c, p[2] + c}, theta);
    CHECK(shifted.branch == base.branch);
    CHECK(shifted.value == doctest::Approx(base.value + c).epsilon(1e-12).scale(100.0));
  }
}

TEST_CASE("default threshold") {
  Eigen::VectorXd y(5);
  y << 5, 1, 3, 2, 4;
  CHECK(default_theta(y) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK_THROWS_AS(default_theta(Eigen::VectorXd::Constant(6, 2.0)), Error);
}

TEST_CASE("dataset validation names missing samples") {
  auto d = toy(1, 20);
  d.targets[1].values(4) = NAN;
  d.targets[1].values(9) = NAN;
  try {
    d.validate();
    FAIL("expected data error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
    CHECK(std::string(e.what()).find("s4 s9") != std::string::npos);
  }
}

TEST_CASE("experiment validates before computing") {
  const auto d = toy(1, 30);
  const std::vector<FusionSpec> specs{
      {FusionLevel::Measurement, {SourceTag::R}, {}, std::nullopt},
      {FusionLevel::Decision, {SourceTag::R, SourceTag::UpSif}, {}, std::nullopt}};
  try {
    run_fusion_experiment(d, specs, fast_options(1));
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
  }
}

TEST_CASE("single-source spec equals the plain model") {
  const auto d = toy(7);
  const auto opts = fast_options(11);
  const std::vector<FusionSpec> specs{{FusionLevel::Measurement, {SourceTag::UpSif}, {}, std::nullopt}};
  const auto rep = run_fusion_experiment(d, specs, opts);
  REQUIRE(rep.models.size() == 2);
  CHECK(rep.split.train.size() == 40);

  for (const auto& t : d.targets) {
    const auto& blk = d.block(SourceTag::UpSif);
    const Eigen::MatrixXd xtr = take_rows(blk.data.values(), rep.split.train);
    const Eigen::VectorXd ytr = take(t.values, rep.split.train);
    const auto cv = select_components(xtr, ytr, default_k_max(xtr.rows(), xtr.cols(), opts.k_cap), 10,
                                      cv_seed(opts.seed, t.name));
    const auto model = fit_plsr(xtr, ytr, cv.k_best);
    const Eigen::VectorXd pred = predict(model, take_rows(blk.data.values(), rep.split.test));
    const auto& m = rep.model("measurement:upSIF", t.name);
    CHECK(m.predicted == pred);
    CHECK(m.r2 == r2(take(t.values, rep.split.test), pred));
    CHECK(m.n_components == cv.k_best);
    CHECK(m.n_features == 12);
  }
}

TEST_CASE("decision fusion of identical models equals the single model") {
  auto d = toy(8);
  d.blocks[1].data = d.blocks[0].data;
  d.blocks[2].data = d.blocks[0].data;
  const std::vector<FusionSpec> specs{
      {FusionLevel::Measurement, {SourceTag::R}, {}, std::nullopt},
      {FusionLevel::Decision, {SourceTag::R, SourceTag::UpSif, SourceTag::DownSif}, {}, std::nullopt}};
  const auto rep = run_fusion_experiment(d, specs, fast_options(3));
  for (const auto& t : d.targets) {
    const auto& single = rep.model("measurement:R", t.name);
    const auto& dec = rep.model("decision:R-upSIF-downSIF", t.name);
    CHECK(dec.predicted == single.predicted);
    CHECK(dec.r2 == single.r2);
    CHECK(dec.rmse == single.rmse);
    CHECK(dec.theta == default_theta(take(t.values, rep.split.train)));
    CHECK(dec.branches.size() == static_cast<std::size_t>(dec.predicted.size()));
    for (auto b : dec.branches) CHECK(b == DecisionBranch::Mean);
  }
}

TEST_CASE("feature fusion uses train-only consensus and is deterministic") {
  const auto d = toy(9);
  const auto opts = fast_options(5);
  const std::vector<FusionSpec> specs{
      {FusionLevel::Measurement, {SourceTag::R, SourceTag::UpSif, SourceTag::DownSif}, {}, std::nullopt},
      {FusionLevel::Feature, {SourceTag::R, SourceTag::UpSif, SourceTag::DownSif}, {}, std::nullopt}};
  const auto rep = run_fusion_experiment(d, specs, opts);
  REQUIRE(rep.consensus.size() == 6);

  const auto& t = d.targets[0];
  const auto& c = rep.consensus.at({SourceTag::UpSif, t.name});
  const auto direct = cars_consensus(take_rows(d.block(SourceTag::UpSif).data.values(), rep.split.train),
                                     take(t.values, rep.split.train), opts.cars, opts.cars_loops,
                                     cars_seed(opts.seed, SourceTag::UpSif, t.name));
  CHECK(c.frequency == direct.frequency);

  Index expected = 0;
  for (auto tag : {SourceTag::R, SourceTag::UpSif, SourceTag::DownSif})
    expected += static_cast<Index>(rep.consensus.at({tag, t.name}).consensus.size());
  CHECK(rep.model("feature:R-upSIF-downSIF", t.name).n_features == expected);
  CHECK(rep.model("measurement:R-upSIF-downSIF", t.name).n_features == 54);

  const auto again = run_fusion_experiment(d, specs, opts);
  for (std::size_t i = 0; i < rep.models.size(); ++i) CHECK(again.models[i].predicted == rep.models[i].predicted);
  const auto other = run_fusion_experiment(d, specs, fast_options(6));
  CHECK(other.split.test != rep.split.test);
}
