#pragma once

// End-to-end experiment: load spectra and labels (or fit them from A/Ci
// curves), split once, fit the per-source baselines and every configured
// fusion spec, and collect VIP, band correlation and PCA diagnostics.

#include "phocap/aci.hpp"
#include "phocap/config.hpp"
#include "phocap/csv_io.hpp"
#include "phocap/fusion.hpp"
#include "phocap/pca.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace phocap {

inline const WavelengthGrid& reflectance_grid() {
  static const WavelengthGrid g = WavelengthGrid::uniform(400.0, 2400.0, 1.0);
  return g;
}

inline const WavelengthGrid& sif_grid() {
  static const WavelengthGrid g = WavelengthGrid::uniform(665.0, 845.0, 1.0);
  return g;
}

/// Spectra aligned to one sample order, on the default grids.
struct LoadedSpectra {
  std::vector<std::string> ids;
  SpectraTable reflectance;
  SpectraTable up_sif;
  SpectraTable down_sif;
};

LoadedSpectra load_spectra(const PipelineConfig& cfg);

struct FittedLabel {
  std::string id;
  PhotoTraits traits;
  std::vector<std::string> warnings;
};

/// fit_aci for every curve; a failing curve aborts with its sample id.
std::vector<FittedLabel> fit_labels(const AciRecords& curves, const KineticConstants& kin, const FitOptions& opts);

/// Targets aligned to `ids`, from the labels file or from A/Ci fits.
std::vector<Target> load_targets(const PipelineConfig& cfg, const std::vector<std::string>& ids,
                                 std::vector<FittedLabel>* fitted = nullptr);

struct BandTable {
  SourceTag source = SourceTag::R;
  std::string target;  // empty for target-free tables
  std::vector<std::string> labels;
  Eigen::VectorXd values;
};

struct PcaTable {
  SourceTag source = SourceTag::R;
  PcaResult<double> result;
};

struct ThetaSweepRow {
  std::string spec;
  std::string target;
  double theta = 0.0;
  double r2 = 0.0;
  double rmse = 0.0;
  int n_mean = 0;
  int n_close_pair = 0;
  int n_median = 0;
};

struct RepeatRow {
  int repeat = 0;
  std::uint64_t seed = 0;
  std::string spec;
  std::string target;
  double r2 = 0.0;
  double rmse = 0.0;
};

struct ExperimentResult {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::string label_source;
  std::vector<std::string> sample_ids;
  std::map<SourceTag, std::vector<std::string>> band_labels;
  FusionReport fusion;
  std::vector<BandTable> vip;          // per baseline model
  std::vector<BandTable> correlation;  // per source and target, all samples
  std::vector<PcaTable> pca;           // per source, all samples
  std::vector<ThetaSweepRow> theta_sweep;
  std::vector<RepeatRow> repeats;  // empty unless split.repeats > 1
  std::vector<FittedLabel> fitted_labels;
};

/// Baseline single-source specs followed by the configured ones (duplicates dropped).
std::vector<FusionSpec> experiment_specs(const PipelineConfig& cfg);

/// Runs on an already assembled dataset; run_experiment loads it from cfg.
ExperimentResult run_experiment(const PipelineConfig& cfg, const FusionDataset& data);
ExperimentResult run_experiment(const PipelineConfig& cfg);

}  // namespace phocap
