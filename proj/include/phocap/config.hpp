#pragma once

// Pipeline configuration. One document (TOML or JSON) with a section per stage:
//
//   seed = 7
//   output_dir = "out"
//   [data]    reflectance, up_sif, down_sif, aci, labels, metadata, sif_input,
//             irradiance, transmittance, fapar_normalized
//   [labels]  source = "file" | "aci", targets
//   [split]   train_fraction, repeats
//   [pls]     k_max, cv_folds, pca_components
//   [cars]    n_mc_runs, calib_ratio, k_max, folds, start_keep_ratio,
//             end_keep_count, sampling, loops, all_sources
//   [aci]     kinetic constants, n_starts, min_mode, fit_tpu, light_correction
//   [[fusion.specs]]  level, sources, normalization, normalize_reflectance, theta
//   [fusion]  theta_sweep
//   [synth]   out_dir and generator settings
//
// Unknown keys are rejected. Relative paths resolve against the config file.

#include "phocap/aci.hpp"
#include "phocap/cars.hpp"
#include "phocap/fusion.hpp"
#include "phocap/synth.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace phocap {

inline constexpr const char* kOutputDirEnv = "PHOCAP_OUTPUT_DIR";

/// Parses the TOML subset used for configs: tables, arrays of tables, dotted
/// keys, strings, numbers, booleans, arrays and inline tables. Parse errors
/// carry the line number.
nlohmann::json parse_toml(std::string_view text, std::string_view source = "<toml>");

enum class LabelSource { File, Aci };

struct DataPaths {
  std::string sif_input = "yield";  // or "raw"
  bool fapar_normalized = false;     // raw input only: fAPAR divided by the 300 nm band
  std::filesystem::path reflectance;
  std::filesystem::path up_sif;    // yield spectra, or upward radiance when raw
  std::filesystem::path down_sif;  // yield spectra, or downward radiance when raw
  std::filesystem::path irradiance;
  std::filesystem::path transmittance;
  std::filesystem::path aci;
  std::filesystem::path labels;
  std::filesystem::path metadata;
};

struct PipelineConfig {
  std::filesystem::path source;  // config file, empty for in-memory documents
  nlohmann::json document;       // as parsed, used for the config hash
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  DataPaths data;
  LabelSource label_source = LabelSource::File;
  std::vector<std::string> targets{"jmax25", "vcmax25"};
  double train_fraction = 2.0 / 3.0;
  int split_repeats = 1;  // extra resplits are summarized, the first split is the primary result
  Index k_cap = kDefaultComponentCap;
  int cv_folds = 10;
  Index pca_components = 5;
  CarsConfig cars;
  int cars_loops = kDefaultCarsLoops;
  bool cars_all_sources = true;
  std::vector<FusionSpec> fusion;
  std::vector<double> theta_sweep;
  KineticConstants kinetics;
  FitOptions aci_fit;
  SynthSpec synth;
  std::filesystem::path synth_out;

  ExperimentOptions experiment_options() const;
  /// Validation error naming the first missing input file.
  void require_inputs() const;
  /// FNV-1a of the canonical (sorted, compact) document.
  std::uint64_t hash() const;
};

/// Validates a document; errors name the offending key path, e.g.
/// "cars.calib_ratio: must be in (0, 1)".
PipelineConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

/// Reads .toml or .json and applies the output directory override from the
/// environment.
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace phocap
