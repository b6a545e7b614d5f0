#pragma once

// Synthetic leaf dataset with the study's shape: 149 leaves over two cultivars
// and three nitrogen levels, reflectance 400-2400 nm, upward and downward SIF
// yield 665-845 nm, A/Ci curves and ground-truth traits.
//
// Each block b carries both traits through Gaussian peaks at fixed wavelengths
// whose amplitude is (z_trait + e_b), z standardized and e_b a zero-mean
// Gaussian nuisance of variance nuisance_var, independent per block and trait.
// A single block therefore explains roughly 1 / (1 + nuisance_var) of the trait
// variance, and combining blocks averages the e_b away. Smooth
// trait-independent latent components and white band noise sit on top of a
// fixed base shape.

#include "phocap/aci.hpp"
#include "phocap/csv_io.hpp"
#include "phocap/fusion.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace phocap {

struct TraitRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct SynthSpec {
  std::uint64_t seed = 1;
  int n_samples = 149;
  TraitRange vcmax25{29.11, 101.93};
  TraitRange jmax25{57.86, 141.17};
  TraitRange rd25{0.4, 2.5};
  // Jmax/Vcmax kept inside this window so A/Ci curves stay identifiable.
  double min_jv_ratio = 1.3;
  double max_jv_ratio = 2.4;
  double nuisance_var = 0.95;
  // Project the six nuisance columns off [1, z_vcmax, z_jmax] and each other and
  // rescale them to exactly nuisance_var over the generated samples.
  bool balanced_nuisance = true;
  double band_noise_scale = 1.0;
  double latent_scale = 1.0;
  double aci_noise_sd = 0.3;
  TraitRange leaf_temp_c{27.0, 33.0};
  bool noise_free = false;  // zero nuisance, band noise and A/Ci noise

  void validate() const;
};

/// One additive spectral component of a block: base, latent, vcmax25 or jmax25.
struct SynthComponent {
  SourceTag source = SourceTag::R;
  std::string role;
  Eigen::VectorXd shape;
};

struct SynthDataset {
  SynthSpec spec;
  std::vector<SampleMeta> meta;
  std::vector<PhotoTraits> traits;
  SpectraTable reflectance;
  SpectraTable up_sif;
  SpectraTable down_sif;
  AciRecords aci;
  std::vector<SynthComponent> components;
  // Per-sample standardized block signals (samples x 2: vcmax25, jmax25).
  std::vector<Eigen::MatrixXd> block_signal;  // R, upSIF, downSIF

  LabelTable labels() const;
  FusionDataset fusion_dataset() const;
};

/// Cultivar/nitrogen cell sizes; 149 reproduces 9/17/17 (HHZ) and 13/42/51 (XS134).
std::vector<int> design_counts(int n_samples);

/// Standardized trait value used to drive the planted peaks.
double standardize(double value, const TraitRange& range);

SynthDataset synth_generate(const SynthSpec& spec);

/// Writes reflectance.csv, up_sif_yield.csv, down_sif_yield.csv, aci.csv,
/// labels.csv, metadata.csv and manifest.json into dir.
void write_synth_dataset(const std::filesystem::path& dir, const SynthDataset& ds);

}  // namespace phocap
