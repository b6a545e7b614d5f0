#include "phocap/report.hpp"

#include "phocap/csv_io.hpp"
#include "phocap/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>

namespace phocap {

#ifndef PHOCAP_GIT_DESCRIBE
#define PHOCAP_GIT_DESCRIBE "unknown"
#endif

const char* git_describe() noexcept { return PHOCAP_GIT_DESCRIBE; }

std::string hex_hash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

using nlohmann::json;

std::string num(double v) { return format_number(v, kReportDigits); }

std::string sample_id(const ExperimentResult& r, Index row) {
  const auto i = static_cast<std::size_t>(row);
  return i < r.sample_ids.size() ? r.sample_ids[i] : std::to_string(row);
}

std::string band(const ExperimentResult& r, SourceTag tag, Index col) {
  const auto it = r.band_labels.find(tag);
  const auto i = static_cast<std::size_t>(col);
  if (it != r.band_labels.end() && i < it->second.size()) return it->second[i];
  return std::string(to_string(tag)) + ":" + std::to_string(col);
}

json ids_json(const ExperimentResult& r, const IndexList& rows) {
  json a = json::array();
  for (Index i : rows) a.push_back(sample_id(r, i));
  return a;
}

json model_json(const ModelResult& m) {
  json sources = json::array();
  for (auto s : m.sources) sources.push_back(to_string(s));
  json j{{"spec", m.spec},
         {"level", to_string(m.level)},
         {"sources", sources},
         {"target", m.target},
         {"n_features", m.n_features},
         {"n_components", m.n_components},
         {"rmsecv", m.rmsecv},
         {"r2", m.r2},
         {"rmse", m.rmse},
         {"n_test", m.test_rows.size()}};
  if (m.level == FusionLevel::Decision) {
    j["theta"] = m.theta;
    int counts[3] = {0, 0, 0};
    for (auto b : m.branches) ++counts[static_cast<int>(b)];
    j["branch_counts"] = {{"mean", counts[0]}, {"close_pair", counts[1]}, {"median", counts[2]}};
  }
  return j;
}

using Writer = std::function<void(std::ostream&)>;

void write_file(const std::filesystem::path& path, const Writer& w, std::vector<std::filesystem::path>& written) {
  auto out = open_output(path);
  w(out);
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
  written.push_back(path);
}

}  // namespace

json report_json(const ExperimentResult& r) {
  json models = json::array();
  for (const auto& m : r.fusion.models) models.push_back(model_json(m));

  json cars = json::array();
  for (const auto& [key, c] : r.fusion.consensus) {
    json bands = json::array();
    for (Index col : c.consensus) bands.push_back(band(r, key.first, col));
    cars.push_back({{"source", to_string(key.first)},
                    {"target", key.second},
                    {"n_loops", c.n_loops},
                    {"master_seed", c.master_seed},
                    {"n_columns", c.frequency.size()},
                    {"n_consensus", c.consensus.size()},
                    {"consensus", bands}});
  }

  json sweep = json::array();
  for (const auto& s : r.theta_sweep)
    sweep.push_back({{"spec", s.spec},
                     {"target", s.target},
                     {"theta", s.theta},
                     {"r2", s.r2},
                     {"rmse", s.rmse},
                     {"n_mean", s.n_mean},
                     {"n_close_pair", s.n_close_pair},
                     {"n_median", s.n_median}});

  // Mean and sample standard deviation over repeated splits.
  json repeats = json::array();
  std::map<std::pair<std::string, std::string>, std::vector<const RepeatRow*>> groups;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& row : r.repeats) {
    const auto key = std::make_pair(row.spec, row.target);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&row);
  }
  for (const auto& key : order) {
    const auto& rows = groups[key];
    const auto stats = [&](double RepeatRow::*f) {
      double mean = 0.0, ss = 0.0;
      for (const auto* row : rows) mean += row->*f;
      mean /= static_cast<double>(rows.size());
      for (const auto* row : rows) ss += (row->*f - mean) * (row->*f - mean);
      return json{{"mean", mean}, {"sd", rows.size() > 1 ? std::sqrt(ss / static_cast<double>(rows.size() - 1)) : 0.0}};
    };
    repeats.push_back({{"spec", key.first},
                       {"target", key.second},
                       {"n_repeats", rows.size()},
                       {"r2", stats(&RepeatRow::r2)},
                       {"rmse", stats(&RepeatRow::rmse)}});
  }

  json fitted = json::array();
  for (const auto& f : r.fitted_labels)
    if (!f.warnings.empty()) fitted.push_back({{"sample_id", f.id}, {"warnings", f.warnings}});

  return json{{"config_hash", hex_hash(r.config_hash)},
              {"git_describe", git_describe()},
              {"seed", r.seed},
              {"label_source", r.label_source},
              {"n_samples", r.sample_ids.size()},
              {"split",
               {{"seed", r.fusion.split.seed},
                {"train", ids_json(r, r.fusion.split.train)},
                {"test", ids_json(r, r.fusion.split.test)}}},
              {"models", models},
              {"cars", cars},
              {"theta_sweep", sweep},
              {"repeated_splits", repeats},
              {"label_warnings", fitted}};
}

std::vector<std::filesystem::path> emit_report(const ExperimentResult& r, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw Error(ErrorKind::Io, "cannot create output directory " + out_dir.string());

  std::vector<std::filesystem::path> written;
  write_file(out_dir / "report.json", [&](std::ostream& o) { o << report_json(r).dump(2) << '\n'; }, written);

  write_file(out_dir / "predictions.csv", [&](std::ostream& o) {
    write_csv_row(o, {"spec", "target", "sample_id", "observed", "predicted"});
    for (const auto& m : r.fusion.models)
      for (Index i = 0; i < m.observed.size(); ++i)
        write_csv_row(o, {m.spec, m.target, sample_id(r, m.test_rows[static_cast<std::size_t>(i)]), num(m.observed(i)),
                          num(m.predicted(i))});
  }, written);

  write_file(out_dir / "decision_log.csv", [&](std::ostream& o) {
    write_csv_row(o, {"spec", "target", "sample_id", "source", "prediction"});
    for (const auto& m : r.fusion.models) {
      if (m.level != FusionLevel::Decision) continue;
      for (Index i = 0; i < m.components.rows(); ++i) {
        const auto id = sample_id(r, m.test_rows[static_cast<std::size_t>(i)]);
        for (Index s = 0; s < m.components.cols(); ++s)
          write_csv_row(o, {m.spec, m.target, id, std::string(to_string(m.sources[static_cast<std::size_t>(s)])),
                            num(m.components(i, s))});
        write_csv_row(o, {m.spec, m.target, id, std::string("fused:") + std::string(to_string(m.branches[static_cast<std::size_t>(i)])),
                          num(m.predicted(i))});
      }
    }
  }, written);

  const auto band_table = [&](const std::string& name, const std::vector<BandTable>& tables, const std::string& col) {
    write_file(out_dir / name, [&](std::ostream& o) {
      write_csv_row(o, {"source", "target", "band", col});
      for (const auto& t : tables)
        for (Index j = 0; j < t.values.size(); ++j)
          write_csv_row(o, {std::string(to_string(t.source)), t.target, t.labels[static_cast<std::size_t>(j)], num(t.values(j))});
    }, written);
  };
  band_table("vip.csv", r.vip, "vip");
  band_table("correlation.csv", r.correlation, "r");

  write_file(out_dir / "cars_frequency.csv", [&](std::ostream& o) {
    write_csv_row(o, {"source", "target", "band", "frequency", "selected"});
    for (const auto& [key, c] : r.fusion.consensus) {
      std::vector<char> sel(static_cast<std::size_t>(c.frequency.size()), 0);
      for (Index col : c.consensus) sel[static_cast<std::size_t>(col)] = 1;
      for (Index j = 0; j < c.frequency.size(); ++j)
        write_csv_row(o, {std::string(to_string(key.first)), key.second, band(r, key.first, j), num(c.frequency(j)),
                          sel[static_cast<std::size_t>(j)] ? "1" : "0"});
    }
  }, written);

  write_file(out_dir / "pca_scores.csv", [&](std::ostream& o) {
    write_csv_row(o, {"source", "sample_id", "component", "score"});
    for (const auto& p : r.pca)
      for (Index i = 0; i < p.result.scores.rows(); ++i)
        for (Index k = 0; k < p.result.scores.cols(); ++k)
          write_csv_row(o, {std::string(to_string(p.source)), sample_id(r, i), std::to_string(k + 1),
                            num(p.result.scores(i, k))});
  }, written);

  write_file(out_dir / "pca_variance.csv", [&](std::ostream& o) {
    write_csv_row(o, {"source", "component", "explained_variance", "explained_ratio"});
    for (const auto& p : r.pca)
      for (Index k = 0; k < p.result.explained_variance.size(); ++k)
        write_csv_row(o, {std::string(to_string(p.source)), std::to_string(k + 1), num(p.result.explained_variance(k)),
                          num(p.result.explained_ratio(k))});
  }, written);

  write_file(out_dir / "theta_sweep.csv", [&](std::ostream& o) {
    write_csv_row(o, {"spec", "target", "theta", "r2", "rmse", "n_mean", "n_close_pair", "n_median"});
    for (const auto& s : r.theta_sweep)
      write_csv_row(o, {s.spec, s.target, num(s.theta), num(s.r2), num(s.rmse), std::to_string(s.n_mean),
                        std::to_string(s.n_close_pair), std::to_string(s.n_median)});
  }, written);

  if (!r.repeats.empty()) {
    write_file(out_dir / "repeated_splits.csv", [&](std::ostream& o) {
      write_csv_row(o, {"repeat", "seed", "spec", "target", "r2", "rmse"});
      for (const auto& row : r.repeats)
        write_csv_row(o, {std::to_string(row.repeat), std::to_string(row.seed), row.spec, row.target, num(row.r2),
                          num(row.rmse)});
    }, written);
  }

  if (!r.fitted_labels.empty()) {
    write_file(out_dir / "fitted_labels.csv", [&](std::ostream& o) {
      write_csv_row(o, {"sample_id", "vcmax25", "jmax25", "rd25", "tpu", "fit_rmse", "converged", "iterations", "warnings"});
      for (const auto& f : r.fitted_labels) {
        std::string w;
        for (const auto& s : f.warnings) w += (w.empty() ? "" : "; ") + s;
        const auto& t = f.traits;
        write_csv_row(o, {f.id, num(t.vcmax25), num(t.jmax25), num(t.rd25), t.tpu ? num(*t.tpu) : "NA", num(t.fit_rmse),
                          t.converged ? "1" : "0", std::to_string(t.iterations), w});
      }
    }, written);
  }
  return written;
}

}  // namespace phocap
