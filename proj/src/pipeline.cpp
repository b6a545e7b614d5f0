#include "phocap/pipeline.hpp"

#include "phocap/error.hpp"
#include "phocap/metrics.hpp"
#include "phocap/pls.hpp"
#include "phocap/random.hpp"
#include "phocap/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace phocap {

namespace {

constexpr double kRawBandMargin = 10.0;

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("stage ") + name + ": " + e.what());
  }
}

// Reorders a table's samples to `ids`; data error naming missing samples.
SpectraTable align(const SpectraTable& t, const std::vector<std::string>& ids, const std::string& what) {
  std::map<std::string, Index> pos;
  for (std::size_t i = 0; i < t.ids.size(); ++i) pos[t.ids[i]] = static_cast<Index>(i);
  std::vector<std::string> missing;
  for (const auto& id : ids)
    if (!pos.count(id)) missing.push_back(id);
  if (!missing.empty()) {
    std::ostringstream os;
    os << what << " has no column for " << missing.size() << " sample(s):";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) os << ' ' << missing[i];
    throw Error(ErrorKind::Data, os.str());
  }
  if (t.ids == ids) return t;
  SpectraTable out{t.wavelengths, ids, Eigen::MatrixXd(static_cast<Index>(ids.size()), t.values.cols())};
  for (std::size_t i = 0; i < ids.size(); ++i) out.values.row(static_cast<Index>(i)) = t.values.row(pos[ids[i]]);
  return out;
}

SpectraTable on_grid(const SpectraTable& t, const WavelengthGrid& g, SpectrumKind kind, const std::string& what) {
  const WavelengthGrid own(t.wavelengths);
  if (!own.covers(g.front(), g.back())) {
    std::ostringstream os;
    os << what << " covers " << own.front() << "-" << own.back() << " nm, need " << g.front() << "-" << g.back();
    throw Error(ErrorKind::Data, os.str());
  }
  return t.resampled(g, kind);
}

SpectraTable yield_from_raw(const SpectraTable& irr, const SpectraTable& refl, const SpectraTable& trans,
                            const SpectraTable& fluo, bool fapar_normalized) {
  const auto i_s = irr.spectra(SpectrumKind::Irradiance);
  const auto r_s = refl.spectra(SpectrumKind::Reflectance);
  const auto t_s = trans.spectra(SpectrumKind::Transmittance);
  const auto f_s = fluo.spectra(SpectrumKind::Fluorescence);
  SpectraTable out{sif_grid().wavelengths(), fluo.ids,
                   Eigen::MatrixXd(static_cast<Index>(fluo.ids.size()), static_cast<Index>(sif_grid().size()))};
  for (std::size_t i = 0; i < f_s.size(); ++i) {
    try {
      // Clip with a margin so coarse fluorescence grids still bracket the output grid.
      SifYieldOptions opts;
      opts.band_lo = sif_grid().front() - kRawBandMargin;
      opts.band_hi = sif_grid().back() + kRawBandMargin;
      opts.fapar.normalized = fapar_normalized;
      const auto y = compute_sif_yield(i_s[i].second, r_s[i].second, t_s[i].second, f_s[i].second, opts);
      out.values.row(static_cast<Index>(i)) = resample(y, sif_grid()).values().transpose();
    } catch (const Error& e) {
      throw Error(e.kind(), "sample " + fluo.ids[i] + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

LoadedSpectra load_spectra(const PipelineConfig& cfg) {
  return stage("load", [&] {
    LoadedSpectra out;
    const auto& d = cfg.data;
    const auto refl_raw = load_spectra_table(d.reflectance);
    out.ids = refl_raw.ids;
    const auto refl = align(refl_raw, out.ids, d.reflectance.string());
    out.reflectance = on_grid(refl, reflectance_grid(), SpectrumKind::Reflectance, d.reflectance.string());
    auto up = align(load_spectra_table(d.up_sif), out.ids, d.up_sif.string());
    auto down = align(load_spectra_table(d.down_sif), out.ids, d.down_sif.string());
    if (d.sif_input == "raw") {
      const auto irr = align(load_spectra_table(d.irradiance), out.ids, d.irradiance.string());
      const auto trans = align(load_spectra_table(d.transmittance), out.ids, d.transmittance.string());
      out.up_sif = yield_from_raw(irr, refl, trans, up, d.fapar_normalized);
      out.down_sif = yield_from_raw(irr, refl, trans, down, d.fapar_normalized);
    } else {
      out.up_sif = on_grid(up, sif_grid(), SpectrumKind::SifYield, d.up_sif.string());
      out.down_sif = on_grid(down, sif_grid(), SpectrumKind::SifYield, d.down_sif.string());
    }
    // Validates value ranges (e.g. reflectance in [0, 1]).
    (void)out.reflectance.spectra(SpectrumKind::Reflectance);
    return out;
  });
}

std::vector<FittedLabel> fit_labels(const AciRecords& curves, const KineticConstants& kin, const FitOptions& opts) {
  std::vector<FittedLabel> out;
  for (const auto& [id, curve] : curves) {
    try {
      FittedLabel f{id, fit_aci(curve, kin, opts), {}};
      f.warnings = plausibility_warnings(f.traits);
      out.push_back(std::move(f));
    } catch (const Error& e) {
      throw Error(e.kind(), "sample " + id + ": " + e.what());
    }
  }
  return out;
}

std::vector<Target> load_targets(const PipelineConfig& cfg, const std::vector<std::string>& ids,
                                 std::vector<FittedLabel>* fitted) {
  return stage("labels", [&] {
    LabelTable table;
    if (cfg.label_source == LabelSource::Aci) {
      const auto labels = fit_labels(load_aci_csv(cfg.data.aci), cfg.kinetics, cfg.aci_fit);
      table.names = {"vcmax25", "jmax25", "rd25"};
      table.values.resize(static_cast<Index>(labels.size()), 3);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        table.ids.push_back(labels[i].id);
        const auto& t = labels[i].traits;
        table.values.row(static_cast<Index>(i)) << t.vcmax25, t.jmax25, t.rd25;
      }
      if (fitted) *fitted = labels;
    } else {
      table = load_labels_csv(cfg.data.labels);
    }
    std::map<std::string, Index> pos;
    for (std::size_t i = 0; i < table.ids.size(); ++i) pos[table.ids[i]] = static_cast<Index>(i);
    std::vector<Target> out;
    for (const auto& name : cfg.targets) {
      const Eigen::VectorXd col = table.column(name);
      Target t{name, Eigen::VectorXd::Constant(static_cast<Index>(ids.size()), std::numeric_limits<double>::quiet_NaN())};
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto it = pos.find(ids[i]);
        if (it != pos.end()) t.values(static_cast<Index>(i)) = col(it->second);
      }
      out.push_back(std::move(t));
    }
    return out;
  });
}

std::vector<FusionSpec> experiment_specs(const PipelineConfig& cfg) {
  std::vector<FusionSpec> specs;
  for (auto tag : {SourceTag::R, SourceTag::UpSif, SourceTag::DownSif})
    specs.push_back({FusionLevel::Measurement, {tag}, {}, std::nullopt});
  std::set<std::string> names;
  for (const auto& s : specs) names.insert(s.name());
  for (const auto& s : cfg.fusion)
    if (names.insert(s.name()).second) specs.push_back(s);
  return specs;
}

ExperimentResult run_experiment(const PipelineConfig& cfg, const FusionDataset& data) {
  const auto specs = experiment_specs(cfg);
  stage("validate", [&] {
    for (const auto& s : specs) s.validate();
    if (cfg.cv_folds < 2) throw Error(ErrorKind::Validation, "pls.cv_folds must be >= 2");
    cfg.cars.validate();
    data.validate();
    return 0;
  });

  ExperimentResult r;
  r.seed = cfg.seed;
  r.config_hash = cfg.hash();
  r.label_source = cfg.label_source == LabelSource::Aci ? "aci" : "file";
  r.sample_ids = data.sample_ids;
  for (const auto& blk : data.blocks) r.band_labels[blk.tag] = blk.data.labels();
  r.fusion = stage("fusion", [&] { return run_fusion_experiment(data, specs, cfg.experiment_options()); });

  if (cfg.split_repeats > 1) {
    stage("repeats", [&] {
      const auto add = [&](int rep, std::uint64_t seed, const FusionReport& f) {
        for (const auto& m : f.models) r.repeats.push_back({rep, seed, m.spec, m.target, m.r2, m.rmse});
      };
      add(0, cfg.seed, r.fusion);
      for (int rep = 1; rep < cfg.split_repeats; ++rep) {
        auto opts = cfg.experiment_options();
        opts.seed = derive_seed(cfg.seed, "repeat", static_cast<std::uint64_t>(rep));
        add(rep, opts.seed, run_fusion_experiment(data, specs, opts));
      }
      return 0;
    });
  }

  stage("diagnostics", [&] {
    const auto& sp = r.fusion.split;
    for (const auto& blk : data.blocks) {
      for (const auto& t : data.targets) {
        const auto& m = r.fusion.model(FusionSpec{FusionLevel::Measurement, {blk.tag}, {}, std::nullopt}.name(), t.name);
        const auto model = fit_plsr(blk.data.rows_subset(sp.train), take(t.values, sp.train), m.n_components);
        r.vip.push_back({blk.tag, t.name, blk.data.labels(), vip(model)});
        r.correlation.push_back({blk.tag, t.name, blk.data.labels(), band_correlation(blk.data.values(), t.values)});
      }
      const Index k = std::min({cfg.pca_components, blk.data.rows() - 1, blk.data.cols()});
      r.pca.push_back({blk.tag, pca(blk.data.values(), k)});
    }
    return 0;
  });

  stage("theta-sweep", [&] {
    for (const auto& m : r.fusion.models) {
      if (m.level != FusionLevel::Decision) continue;
      for (double theta : cfg.theta_sweep) {
        ThetaSweepRow row{m.spec, m.target, theta};
        Eigen::VectorXd fused(m.components.rows());
        for (Index i = 0; i < fused.size(); ++i) {
          const auto d = decision_fuse({m.components(i, 0), m.components(i, 1), m.components(i, 2)}, theta);
          fused(i) = d.value;
          row.n_mean += d.branch == DecisionBranch::Mean;
          row.n_close_pair += d.branch == DecisionBranch::ClosePair;
          row.n_median += d.branch == DecisionBranch::Median;
        }
        row.r2 = r2(m.observed, fused);
        row.rmse = rmse(m.observed, fused);
        r.theta_sweep.push_back(row);
      }
    }
    return 0;
  });
  return r;
}

ExperimentResult run_experiment(const PipelineConfig& cfg) {
  stage("validate", [&] {
    for (const auto& s : experiment_specs(cfg)) s.validate();
    cfg.require_inputs();
    return 0;
  });
  const auto spectra = load_spectra(cfg);
  std::vector<FittedLabel> fitted;
  FusionDataset data;
  data.sample_ids = spectra.ids;
  data.targets = load_targets(cfg, spectra.ids, &fitted);
  const std::array<std::pair<SourceTag, const SpectraTable*>, 3> blocks{
      {{SourceTag::R, &spectra.reflectance}, {SourceTag::UpSif, &spectra.up_sif}, {SourceTag::DownSif, &spectra.down_sif}}};
  for (const auto& [tag, table] : blocks) {
    std::vector<std::string> labels;
    for (double nm : table->wavelengths) labels.push_back(band_label(to_string(tag), nm));
    data.blocks.push_back({tag, DataMatrix(table->values, labels)});
  }
  auto r = run_experiment(cfg, data);
  r.fitted_labels = std::move(fitted);
  return r;
}

}  // namespace phocap
