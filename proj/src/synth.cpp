#include "phocap/synth.hpp"

#include "phocap/error.hpp"
#include "phocap/random.hpp"
#include "phocap/spectral.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace phocap {

namespace {

struct Peak {
  SourceTag source;
  int trait;  // 0 vcmax25, 1 jmax25
  double center;
  double width;
  double amplitude;
};

constexpr std::array<Peak, 8> kPeaks{{
    {SourceTag::R, 0, 680.0, 14.0, 0.006},
    {SourceTag::R, 0, 1720.0, 25.0, 0.005},
    {SourceTag::R, 1, 530.0, 12.0, 0.006},
    {SourceTag::R, 1, 2180.0, 30.0, 0.005},
    {SourceTag::UpSif, 0, 700.0, 7.0, 6e-5},
    {SourceTag::UpSif, 1, 765.0, 10.0, 6e-5},
    {SourceTag::DownSif, 0, 710.0, 8.0, 6e-5},
    {SourceTag::DownSif, 1, 780.0, 12.0, 6e-5},
}};

constexpr std::array<const char*, 2> kTraitNames{"vcmax25", "jmax25"};
constexpr std::array<SourceTag, 3> kSources{SourceTag::R, SourceTag::UpSif, SourceTag::DownSif};

struct Cell {
  const char* cultivar;
  const char* nitrogen;
  int count;
};

constexpr std::array<Cell, 6> kDesign{{
    {"HHZ", "N1", 9},
    {"HHZ", "N2", 17},
    {"HHZ", "N3", 17},
    {"XS134", "N1", 13},
    {"XS134", "N2", 42},
    {"XS134", "N3", 51},
}};

double band_noise_sd(SourceTag s) { return s == SourceTag::R ? 1.5e-3 : 4e-6; }

Eigen::VectorXd gauss(const Eigen::VectorXd& nm, double c, double w) {
  return (-0.5 * ((nm.array() - c) / w).square()).exp().matrix();
}

Eigen::VectorXd grid_vector(const WavelengthGrid& g) {
  return Eigen::Map<const Eigen::VectorXd>(g.wavelengths().data(), static_cast<Index>(g.size()));
}

Eigen::VectorXd base_shape(SourceTag s, const Eigen::VectorXd& nm) {
  if (s == SourceTag::R) {
    const Eigen::VectorXd edge = (0.44 / (1.0 + (-(nm.array() - 715.0) / 11.0).exp())).matrix();
    const Eigen::VectorXd tail = (nm.array() - 1300.0).max(0.0).matrix() * 8e-5;
    return Eigen::VectorXd::Constant(nm.size(), 0.045) + 0.06 * gauss(nm, 550, 30) + edge -
           0.18 * gauss(nm, 1450, 55) - 0.25 * gauss(nm, 1940, 70) - 0.05 * gauss(nm, 1200, 40) - tail;
  }
  const double red = s == SourceTag::UpSif ? 1.0e-3 : 1.3e-3;
  const double far = s == SourceTag::UpSif ? 1.3e-3 : 0.9e-3;
  return Eigen::VectorXd::Constant(nm.size(), 1e-4) + red * gauss(nm, 686, 9) + far * gauss(nm, 740, 22);
}

std::vector<Eigen::VectorXd> latent_shapes(SourceTag s, const Eigen::VectorXd& nm, const Eigen::VectorXd& base) {
  if (s == SourceTag::R) {
    return {0.05 * base,
            -0.04 * gauss(nm, 1450, 55) - 0.05 * gauss(nm, 1940, 70) - 0.02 * gauss(nm, 1200, 40),
            0.012 * gauss(nm, 550, 30) + 0.02 * gauss(nm, 705, 15),
            ((nm.array() - 1400.0) / 1000.0 * 0.006).matrix()};
  }
  return {0.08 * base, 1e-4 * (gauss(nm, 686, 9) - gauss(nm, 740, 22)),
          ((nm.array() - 755.0) / 90.0 * 2e-5).matrix()};
}

Eigen::VectorXd trait_shape(SourceTag s, int trait, const Eigen::VectorXd& nm) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(nm.size());
  for (const auto& p : kPeaks)
    if (p.source == s && p.trait == trait) out += p.amplitude * gauss(nm, p.center, p.width);
  return out;
}

std::string sample_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "L%03d", i + 1);
  return buf;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_samples < 6) throw Error(ErrorKind::Validation, "synth: n_samples must be >= 6");
  for (const auto* r : {&vcmax25, &jmax25, &rd25, &leaf_temp_c})
    if (!(r->lo <= r->hi)) throw Error(ErrorKind::Validation, "synth: range with lo > hi");
  for (const auto* r : {&vcmax25, &jmax25, &rd25})
    if (!(r->lo > 0.0)) throw Error(ErrorKind::Validation, "synth: trait ranges must be positive");
  if (!(min_jv_ratio > 0.0 && min_jv_ratio <= max_jv_ratio))
    throw Error(ErrorKind::Validation, "synth: invalid Jmax/Vcmax ratio window");
  if (jmax25.lo > max_jv_ratio * vcmax25.hi || jmax25.hi < min_jv_ratio * vcmax25.lo)
    throw Error(ErrorKind::Validation, "synth: trait ranges and ratio window do not intersect");
  if (!(nuisance_var >= 0.0) || !(band_noise_scale >= 0.0) || !(latent_scale >= 0.0) || !(aci_noise_sd >= 0.0))
    throw Error(ErrorKind::Validation, "synth: noise levels must be >= 0");
  if (!(leaf_temp_c.lo > -10.0 && leaf_temp_c.hi < 60.0))
    throw Error(ErrorKind::Validation, "synth: leaf temperature outside (-10, 60) C");
}

std::vector<int> design_counts(int n_samples) {
  std::vector<int> counts(kDesign.size());
  const int total = std::accumulate(kDesign.begin(), kDesign.end(), 0, [](int s, const Cell& c) { return s + c.count; });
  std::vector<std::pair<double, std::size_t>> rem;
  int used = 0;
  for (std::size_t i = 0; i < kDesign.size(); ++i) {
    const double exact = static_cast<double>(n_samples) * kDesign[i].count / total;
    counts[i] = static_cast<int>(std::floor(exact));
    used += counts[i];
    rem.emplace_back(exact - counts[i], i);
  }
  // Largest remainder, earlier cells first on ties.
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; used < n_samples; ++k, ++used) ++counts[rem[k].second];
  return counts;
}

double standardize(double value, const TraitRange& range) {
  const double sd = (range.hi - range.lo) / std::sqrt(12.0);
  return sd > 0.0 ? (value - 0.5 * (range.lo + range.hi)) / sd : 0.0;
}

LabelTable SynthDataset::labels() const {
  LabelTable t;
  t.names = {"vcmax25", "jmax25", "rd25"};
  t.values.resize(static_cast<Index>(traits.size()), 3);
  for (std::size_t i = 0; i < traits.size(); ++i) {
    t.ids.push_back(meta[i].id);
    t.values.row(static_cast<Index>(i)) << traits[i].vcmax25, traits[i].jmax25, traits[i].rd25;
  }
  return t;
}

FusionDataset SynthDataset::fusion_dataset() const {
  FusionDataset d;
  for (const auto& m : meta) d.sample_ids.push_back(m.id);
  const std::array<const SpectraTable*, 3> tables{&reflectance, &up_sif, &down_sif};
  for (std::size_t b = 0; b < 3; ++b) {
    std::vector<std::string> labels;
    for (double nm : tables[b]->wavelengths) labels.push_back(band_label(to_string(kSources[b]), nm));
    d.blocks.push_back({kSources[b], DataMatrix(tables[b]->values, labels)});
  }
  const auto l = this->labels();
  d.targets = {{"jmax25", l.column("jmax25")}, {"vcmax25", l.column("vcmax25")}};
  return d;
}

SynthDataset synth_generate(const SynthSpec& spec) {
  spec.validate();
  const std::uint64_t root = derive_seed(spec.seed, "synth");
  const int n = spec.n_samples;
  SynthDataset ds;
  ds.spec = spec;

  const auto counts = design_counts(n);
  for (std::size_t c = 0; c < kDesign.size(); ++c)
    for (int k = 0; k < counts[c]; ++k)
      ds.meta.push_back({sample_id(static_cast<int>(ds.meta.size())), kDesign[c].cultivar, kDesign[c].nitrogen});

  Rng trng(derive_seed(root, "traits"));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](const TraitRange& r) { return r.lo + (r.hi - r.lo) * u01(trng); };
  std::vector<double> temps;
  for (int i = 0; i < n; ++i) {
    PhotoTraits t;
    for (;;) {
      t.vcmax25 = uniform(spec.vcmax25);
      const double lo = std::max(spec.jmax25.lo, spec.min_jv_ratio * t.vcmax25);
      const double hi = std::min(spec.jmax25.hi, spec.max_jv_ratio * t.vcmax25);
      if (lo > hi) continue;
      t.jmax25 = lo + (hi - lo) * u01(trng);
      break;
    }
    t.rd25 = uniform(spec.rd25);
    ds.traits.push_back(t);
    temps.push_back(uniform(spec.leaf_temp_c));
  }

  // Columns: (R, upSIF, downSIF) x (vcmax25, jmax25).
  Eigen::MatrixXd nuisance = Eigen::MatrixXd::Zero(n, 6);
  if (!spec.noise_free && spec.nuisance_var > 0.0) {
    Rng erng(derive_seed(root, "nuisance"));
    std::normal_distribution<double> nd;
    for (Index c = 0; c < 6; ++c)
      for (Index i = 0; i < n; ++i) nuisance(i, c) = nd(erng);
    if (spec.balanced_nuisance) {
      Eigen::MatrixXd basis(n, 9);
      basis.col(0).setOnes();
      for (Index i = 0; i < n; ++i) {
        basis(i, 1) = standardize(ds.traits[static_cast<std::size_t>(i)].vcmax25, spec.vcmax25);
        basis(i, 2) = standardize(ds.traits[static_cast<std::size_t>(i)].jmax25, spec.jmax25);
      }
      basis.rightCols(6) = nuisance;
      const Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
      const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, 9);
      // Keep the sign of each original draw so the projection stays close to it.
      for (Index c = 0; c < 6; ++c) {
        Eigen::VectorXd v = q.col(3 + c);
        if (v.dot(nuisance.col(c)) < 0.0) v = -v;
        nuisance.col(c) = v * std::sqrt(spec.nuisance_var * static_cast<double>(n - 1));
      }
    } else {
      nuisance *= std::sqrt(spec.nuisance_var);
    }
  }
  const double noise_scale = spec.noise_free ? 0.0 : spec.band_noise_scale;
  const std::array<SpectraTable*, 3> tables{&ds.reflectance, &ds.up_sif, &ds.down_sif};
  const std::array<WavelengthGrid, 3> grids{WavelengthGrid::uniform(400, 2400, 1), WavelengthGrid::uniform(665, 845, 1),
                                            WavelengthGrid::uniform(665, 845, 1)};

  for (std::size_t b = 0; b < 3; ++b) {
    const SourceTag src = kSources[b];
    const std::string tag(to_string(src));
    const Eigen::VectorXd nm = grid_vector(grids[b]);
    const Eigen::VectorXd base = base_shape(src, nm);
    const auto latents = latent_shapes(src, nm, base);
    const std::array<Eigen::VectorXd, 2> peaks{trait_shape(src, 0, nm), trait_shape(src, 1, nm)};

    ds.components.push_back({src, "base", base});
    for (const auto& l : latents) ds.components.push_back({src, "latent", l});
    for (int t = 0; t < 2; ++t) ds.components.push_back({src, kTraitNames[t], peaks[t]});

    Rng lrng(derive_seed(root, "latent/" + tag));
    Rng nrng(derive_seed(root, "noise/" + tag));
    std::normal_distribution<double> nd;

    SpectraTable& table = *tables[b];
    table.wavelengths = grids[b].wavelengths();
    table.values.resize(n, nm.size());
    Eigen::MatrixXd signal(n, 2);
    const double sd = band_noise_sd(src) * noise_scale;
    for (int i = 0; i < n; ++i) {
      table.ids.push_back(ds.meta[static_cast<std::size_t>(i)].id);
      Eigen::VectorXd row = base;
      for (const auto& l : latents) row += spec.latent_scale * nd(lrng) * l;
      const auto& tr = ds.traits[static_cast<std::size_t>(i)];
      signal(i, 0) = standardize(tr.vcmax25, spec.vcmax25) + nuisance(i, static_cast<Index>(2 * b));
      signal(i, 1) = standardize(tr.jmax25, spec.jmax25) + nuisance(i, static_cast<Index>(2 * b + 1));
      row += signal(i, 0) * peaks[0] + signal(i, 1) * peaks[1];
      if (sd > 0.0)
        for (Index j = 0; j < row.size(); ++j) row(j) += sd * nd(nrng);
      if (src == SourceTag::R) row = row.cwiseMax(0.0).cwiseMin(1.0);
      table.values.row(i) = row.transpose();
    }
    ds.block_signal.push_back(signal);
  }

  const double aci_sd = spec.noise_free ? 0.0 : spec.aci_noise_sd;
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    ds.aci.emplace_back(ds.meta[idx].id,
                        generate_aci(ds.traits[idx], kStandardCiSequence, temps[idx], aci_sd,
                                     derive_seed(root, "aci", static_cast<std::uint64_t>(i))));
  }
  return ds;
}

void write_synth_dataset(const std::filesystem::path& dir, const SynthDataset& ds) {
  save_spectra_csv(dir / "reflectance.csv", ds.reflectance);
  save_spectra_csv(dir / "up_sif_yield.csv", ds.up_sif);
  save_spectra_csv(dir / "down_sif_yield.csv", ds.down_sif);
  save_aci_csv(dir / "aci.csv", ds.aci);
  save_labels_csv(dir / "labels.csv", ds.labels(), 17);
  save_metadata_csv(dir / "metadata.csv", ds.meta);

  using nlohmann::json;
  const auto& s = ds.spec;
  auto range = [](const TraitRange& r) { return json::array({r.lo, r.hi}); };
  json m;
  m["seed"] = s.seed;
  m["n_samples"] = s.n_samples;
  m["noise_free"] = s.noise_free;
  m["nuisance_var"] = s.nuisance_var;
  m["band_noise_scale"] = s.band_noise_scale;
  m["latent_scale"] = s.latent_scale;
  m["aci_noise_sd"] = s.aci_noise_sd;
  m["ranges"] = {{"vcmax25", range(s.vcmax25)}, {"jmax25", range(s.jmax25)}, {"rd25", range(s.rd25)},
                 {"leaf_temp_c", range(s.leaf_temp_c)}, {"jv_ratio", json::array({s.min_jv_ratio, s.max_jv_ratio})}};
  const auto counts = design_counts(s.n_samples);
  json design = json::array();
  for (std::size_t c = 0; c < kDesign.size(); ++c)
    design.push_back({{"cultivar", kDesign[c].cultivar}, {"nitrogen", kDesign[c].nitrogen}, {"count", counts[c]}});
  m["design"] = design;
  json peaks = json::array();
  for (const auto& p : kPeaks)
    peaks.push_back({{"source", to_string(p.source)}, {"trait", kTraitNames[static_cast<std::size_t>(p.trait)]},
                     {"center_nm", p.center}, {"width_nm", p.width}, {"amplitude_per_sd", p.amplitude}});
  m["peaks"] = peaks;
  m["files"] = {{"reflectance", "reflectance.csv"}, {"up_sif_yield", "up_sif_yield.csv"},
                {"down_sif_yield", "down_sif_yield.csv"}, {"aci", "aci.csv"}, {"labels", "labels.csv"},
                {"metadata", "metadata.csv"}};
  auto out = open_output(dir / "manifest.json");
  out << m.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing " + (dir / "manifest.json").string());
}

}  // namespace phocap
