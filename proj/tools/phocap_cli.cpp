#include "phocap/config.hpp"
#include "phocap/csv_io.hpp"
#include "phocap/error.hpp"
#include "phocap/metrics.hpp"
#include "phocap/pipeline.hpp"
#include "phocap/report.hpp"
#include "phocap/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

using namespace phocap;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

PipelineConfig load(const Common& c) {
  auto cfg = load_config(c.config);
  if (c.seed) {
    auto doc = cfg.document;
    doc["seed"] = *c.seed;
    auto out = cfg.output_dir;
    cfg = config_from_json(doc, c.config.empty() ? std::filesystem::path{} : std::filesystem::path(c.config).parent_path());
    cfg.source = c.config;
    cfg.output_dir = out;
  }
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

void print_models(const ExperimentResult& r) {
  std::printf("%-32s %-8s %9s %9s %6s %5s\n", "spec", "target", "r2", "rmse", "feat", "k");
  for (const auto& m : r.fusion.models)
    std::printf("%-32s %-8s %9.4f %9.4f %6lld %5lld\n", m.spec.c_str(), m.target.c_str(), m.r2, m.rmse,
                static_cast<long long>(m.n_features), static_cast<long long>(m.n_components));
}

int cmd_synth(const Common& c) {
  const auto cfg = load(c);
  const auto ds = synth_generate(cfg.synth);
  write_synth_dataset(cfg.synth_out, ds);
  std::printf("wrote %zu samples to %s\n", ds.meta.size(), cfg.synth_out.string().c_str());
  return 0;
}

int cmd_fit_aci(const Common& c) {
  const auto cfg = load(c);
  if (cfg.data.aci.empty() || !std::filesystem::exists(cfg.data.aci))
    throw Error(ErrorKind::Validation, "data.aci: file not found: " + cfg.data.aci.string());
  const auto fitted = fit_labels(load_aci_csv(cfg.data.aci), cfg.kinetics, cfg.aci_fit);
  LabelTable t;
  t.names = {"vcmax25", "jmax25", "rd25", "fit_rmse"};
  t.values.resize(static_cast<Index>(fitted.size()), 4);
  std::size_t warned = 0;
  for (std::size_t i = 0; i < fitted.size(); ++i) {
    const auto& f = fitted[i];
    t.ids.push_back(f.id);
    t.values.row(static_cast<Index>(i)) << f.traits.vcmax25, f.traits.jmax25, f.traits.rd25, f.traits.fit_rmse;
    for (const auto& w : f.warnings) std::fprintf(stderr, "warning: %s: %s\n", f.id.c_str(), w.c_str());
    warned += !f.warnings.empty();
  }
  const auto path = cfg.output_dir / "fitted_labels.csv";
  save_labels_csv(path, t, kReportDigits);
  std::printf("fitted %zu curves (%zu with warnings) -> %s\n", fitted.size(), warned, path.string().c_str());
  return 0;
}

int run_and_emit(PipelineConfig cfg) {
  const auto r = run_experiment(cfg);
  emit_report(r, cfg.output_dir);
  print_models(r);
  std::printf("report: %s\n", (cfg.output_dir / "report.json").string().c_str());
  return 0;
}

int cmd_train(const Common& c) {
  auto cfg = load(c);
  cfg.fusion.clear();
  cfg.theta_sweep.clear();
  cfg.cars_all_sources = false;
  return run_and_emit(cfg);
}

int cmd_cars(const Common& c) {
  auto cfg = load(c);
  cfg.fusion.clear();
  cfg.theta_sweep.clear();
  cfg.cars_all_sources = true;
  const auto r = run_experiment(cfg);
  emit_report(r, cfg.output_dir);
  for (const auto& [key, cons] : r.fusion.consensus)
    std::printf("%-8s %-8s %4zu of %4lld bands\n", std::string(to_string(key.first)).c_str(), key.second.c_str(),
                cons.consensus.size(), static_cast<long long>(cons.frequency.size()));
  return 0;
}

int cmd_fuse(const Common& c) { return run_and_emit(load(c)); }

// Recomputes R2 and RMSE from an emitted predictions table.
int cmd_evaluate(const Common& c) {
  const auto cfg = load(c);
  const auto path = cfg.output_dir / "predictions.csv";
  if (!std::filesystem::exists(path))
    throw Error(ErrorKind::Data, path.string() + " not found; run 'fuse' or 'report' first");
  std::ifstream in(path);
  const auto t = read_csv(in, path.string());
  const auto c_spec = t.column("spec"), c_target = t.column("target");
  const auto c_obs = t.column("observed"), c_pred = t.column("predicted");
  std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>> groups;
  std::vector<std::pair<std::string, std::string>> order;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const auto key = std::make_pair(row[c_spec], row[c_target]);
    if (!groups.count(key)) order.push_back(key);
    auto& g = groups[key];
    g.first.push_back(parse_number(row[c_obs], t, i, c_obs));
    g.second.push_back(parse_number(row[c_pred], t, i, c_pred));
  }
  std::printf("%-32s %-8s %5s %9s %9s\n", "spec", "target", "n", "r2", "rmse");
  for (const auto& key : order) {
    const auto& [o, p] = groups[key];
    const Eigen::Map<const Eigen::VectorXd> ov(o.data(), static_cast<Index>(o.size()));
    const Eigen::Map<const Eigen::VectorXd> pv(p.data(), static_cast<Index>(p.size()));
    std::printf("%-32s %-8s %5zu %9.4f %9.4f\n", key.first.c_str(), key.second.c_str(), o.size(), r2(ov, pv),
                rmse(ov, pv));
  }
  return 0;
}

int cmd_report(const Common& c) {
  auto cfg = load(c);
  const auto r = run_experiment(cfg);
  const auto files = emit_report(r, cfg.output_dir);
  for (const auto& f : files) std::printf("%s\n", f.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photosynthetic capacity estimation from reflectance and SIF yield spectra"};
  app.require_subcommand(1);
  Common common;

  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const Common&);
  };
  const Cmd cmds[] = {
      {"synth", "Generate a synthetic dataset", cmd_synth},
      {"fit-aci", "Fit FvCB traits to A/Ci curves", cmd_fit_aci},
      {"train", "Fit per-source PLSR baselines", cmd_train},
      {"cars", "Run CARS consensus per source and target", cmd_cars},
      {"fuse", "Run every configured fusion spec", cmd_fuse},
      {"evaluate", "Recompute metrics from emitted predictions", cmd_evaluate},
      {"report", "Run the full experiment and write all tables", cmd_report},
  };
  int (*chosen)(const Common&) = nullptr;
  for (const auto& cmd : cmds) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("-c,--config", common.config, "Config file (.toml or .json)")->required();
    sub->add_option("--seed", common.seed, "Override the master seed");
    sub->add_option("-o,--out", common.out, "Override the output directory");
    sub->callback([&chosen, fn = cmd.fn] { chosen = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    return chosen(common);
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
