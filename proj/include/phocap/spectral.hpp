#pragma once

#include <Eigen/Dense>

#include <string_view>
#include <vector>

namespace phocap {

/// Strictly increasing, finite, positive wavelengths in nm (at least two).
class WavelengthGrid {
 public:
  explicit WavelengthGrid(std::vector<double> wavelengths);

  /// Uniform grid lo, lo+step, ..., hi (hi must be reachable within 1e-9).
  static WavelengthGrid uniform(double lo, double hi, double step);

  const std::vector<double>& wavelengths() const noexcept { return nm_; }
  std::size_t size() const noexcept { return nm_.size(); }
  double front() const noexcept { return nm_.front(); }
  double back() const noexcept { return nm_.back(); }
  double operator[](std::size_t i) const noexcept { return nm_[i]; }

  bool covers(double lo, double hi) const noexcept;

  friend bool operator==(const WavelengthGrid&, const WavelengthGrid&) = default;

 private:
  std::vector<double> nm_;
};

enum class SpectrumKind { Reflectance, Transmittance, Irradiance, Fluorescence, SifYield };

std::string_view to_string(SpectrumKind kind) noexcept;

class Spectrum {
 public:
  Spectrum(WavelengthGrid grid, Eigen::VectorXd values, SpectrumKind kind);

  static Spectrum constant(WavelengthGrid grid, double value, SpectrumKind kind);

  const WavelengthGrid& grid() const noexcept { return grid_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  SpectrumKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return grid_.size(); }

  /// Linear interpolation at a single wavelength inside the grid range.
  double at(double nm) const;

 private:
  WavelengthGrid grid_;
  Eigen::VectorXd values_;
  SpectrumKind kind_;
};

/// Piecewise-linear resampling; the target range must lie inside the source range.
Spectrum resample(const Spectrum& spec, const WavelengthGrid& target);

/// Restricts a spectrum to grid points inside [lo, hi].
Spectrum clip(const Spectrum& spec, double lo, double hi);

/// Points of `a` that fall inside the wavelength range shared with `b`.
WavelengthGrid intersection_grid(const WavelengthGrid& a, const WavelengthGrid& b);

/// Trapezoidal integral over [lo, hi]; band edges that are not grid points are
/// obtained by linear interpolation.
double integrate_band(const Spectrum& spec, double lo, double hi);

inline constexpr double kParLo = 400.0;
inline constexpr double kParHi = 700.0;
inline constexpr double kAbsorbanceTolerance = 1e-6;

struct FaparOptions {
  // Divide by the 300 nm band width to get a unitless fraction. The default
  // integral carries nm units.
  bool normalized = false;
};

/// Integral of 1 - R - T over 400-700 nm. Absorbance below -1e-6 anywhere
/// in the band is a physical-consistency error; smaller negatives clamp to 0.
double fapar(const Spectrum& reflectance, const Spectrum& transmittance,
             FaparOptions opts = {});

double par(const Spectrum& irradiance);

/// fapar(R, T) * par(I). Mismatched grids are aligned on their intersection.
double apar(const Spectrum& irradiance, const Spectrum& reflectance,
            const Spectrum& transmittance, FaparOptions opts = {});

/// Elementwise F / APAR.
Spectrum sif_yield(const Spectrum& fluorescence, double apar_value);

struct SifYieldOptions {
  double band_lo = 665.0;
  double band_hi = 845.0;
  FaparOptions fapar;
};

/// Full chain from raw (I, R, T, F): APAR, yield, then clipping to the retained
/// fluorescence band.
Spectrum compute_sif_yield(const Spectrum& irradiance, const Spectrum& reflectance,
                           const Spectrum& transmittance, const Spectrum& fluorescence,
                           const SifYieldOptions& opts = {});

// --- pigment chemistry ---------------------------------------------------

inline constexpr double kDefaultExtractVolumeMl = 2.0;
inline constexpr double kDefaultDiscDiameterMm = 8.5;

/// Leaf disc area in cm^2 from its diameter in mm.
double disc_area_cm2(double diameter_mm);

struct PigmentAbsorbances {
  double a470 = 0.0;
  double a649 = 0.0;
  double a665 = 0.0;
  double volume_ml = kDefaultExtractVolumeMl;
  double area_cm2 = disc_area_cm2(kDefaultDiscDiameterMm);
};

struct PigmentConcentrations {
  double chl_a;        // ug/mL
  double chl_b;        // ug/mL
  double carotenoids;  // ug/mL
};

struct PigmentResult {
  PigmentConcentrations conc;
  double chl_ab_content;       // ug/cm^2
  double carotenoid_content;   // ug/cm^2
};

PigmentConcentrations pigment_concentrations(const PigmentAbsorbances& abs);
PigmentResult pigment_contents(const PigmentAbsorbances& abs);

}  // namespace phocap
