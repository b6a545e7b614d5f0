#include "phocap/spectral.hpp"

#include "phocap/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace phocap {

namespace {

constexpr double kGridSlack = 1e-9;

[[noreturn]] void range_error(const std::string& msg) { throw Error(ErrorKind::Range, msg); }

// Linear interpolation on a sorted grid; x must be inside [nm.front(), nm.back()].
double interp(const std::vector<double>& nm, const Eigen::VectorXd& v, double x) {
  if (x <= nm.front()) return v(0);
  if (x >= nm.back()) return v(static_cast<Eigen::Index>(nm.size()) - 1);
  const auto hi = std::upper_bound(nm.begin(), nm.end(), x);
  const auto i = static_cast<Eigen::Index>(hi - nm.begin());
  const double x0 = nm[i - 1], x1 = nm[i];
  const double t = (x - x0) / (x1 - x0);
  return v(i - 1) + t * (v(i) - v(i - 1));
}

double trapezoid(const std::vector<double>& nm, const Eigen::VectorXd& v, double lo, double hi) {
  double sum = 0.0;
  double x_prev = lo;
  double y_prev = interp(nm, v, lo);
  auto it = std::upper_bound(nm.begin(), nm.end(), lo);
  for (; it != nm.end() && *it < hi; ++it) {
    const double y = v(static_cast<Eigen::Index>(it - nm.begin()));
    sum += 0.5 * (y + y_prev) * (*it - x_prev);
    x_prev = *it;
    y_prev = y;
  }
  sum += 0.5 * (interp(nm, v, hi) + y_prev) * (hi - x_prev);
  return sum;
}

void check_band(const WavelengthGrid& grid, double lo, double hi) {
  if (!(lo < hi)) {
    std::ostringstream os;
    os << "band [" << lo << ", " << hi << "] is empty";
    throw Error(ErrorKind::Parameter, os.str());
  }
  if (!grid.covers(lo, hi)) {
    std::ostringstream os;
    os << "band [" << lo << ", " << hi << "] nm outside grid [" << grid.front() << ", "
       << grid.back() << "]";
    range_error(os.str());
  }
}

}  // namespace

WavelengthGrid::WavelengthGrid(std::vector<double> wavelengths) : nm_(std::move(wavelengths)) {
  if (nm_.size() < 2) throw Error(ErrorKind::Schema, "wavelength grid needs at least 2 points");
  for (std::size_t i = 0; i < nm_.size(); ++i) {
    if (!std::isfinite(nm_[i]) || nm_[i] <= 0.0) {
      std::ostringstream os;
      os << "wavelength " << nm_[i] << " at index " << i << " is not finite and positive";
      throw Error(ErrorKind::Schema, os.str());
    }
    if (i > 0 && !(nm_[i] > nm_[i - 1])) {
      std::ostringstream os;
      os << "wavelengths not strictly increasing at index " << i << " (" << nm_[i - 1]
         << " then " << nm_[i] << ")";
      throw Error(ErrorKind::Schema, os.str());
    }
  }
}

WavelengthGrid WavelengthGrid::uniform(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi > lo)) throw Error(ErrorKind::Parameter, "invalid uniform grid");
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
  if (std::abs(lo + static_cast<double>(n - 1) * step - hi) > 1e-9 * std::max(1.0, hi))
    throw Error(ErrorKind::Parameter, "uniform grid step does not divide the range");
  std::vector<double> nm(n);
  for (std::size_t i = 0; i < n; ++i) nm[i] = lo + static_cast<double>(i) * step;
  nm.back() = hi;
  return WavelengthGrid(std::move(nm));
}

bool WavelengthGrid::covers(double lo, double hi) const noexcept {
  return lo >= front() - kGridSlack && hi <= back() + kGridSlack;
}

std::string_view to_string(SpectrumKind kind) noexcept {
  switch (kind) {
    case SpectrumKind::Reflectance: return "reflectance";
    case SpectrumKind::Transmittance: return "transmittance";
    case SpectrumKind::Irradiance: return "irradiance";
    case SpectrumKind::Fluorescence: return "fluorescence";
    case SpectrumKind::SifYield: return "sif_yield";
  }
  return "unknown";
}

Spectrum::Spectrum(WavelengthGrid grid, Eigen::VectorXd values, SpectrumKind kind)
    : grid_(std::move(grid)), values_(std::move(values)), kind_(kind) {
  if (static_cast<std::size_t>(values_.size()) != grid_.size()) {
    std::ostringstream os;
    os << "spectrum has " << values_.size() << " values for " << grid_.size() << " wavelengths";
    throw Error(ErrorKind::Schema, os.str());
  }
  const bool bounded = kind_ == SpectrumKind::Reflectance || kind_ == SpectrumKind::Transmittance;
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    const double v = values_(i);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << to_string(kind_) << " value at " << grid_[static_cast<std::size_t>(i)]
         << " nm is not finite";
      throw Error(ErrorKind::Data, os.str());
    }
    if (bounded && (v < 0.0 || v > 1.0)) {
      std::ostringstream os;
      os << to_string(kind_) << " value " << v << " at " << grid_[static_cast<std::size_t>(i)]
         << " nm outside [0, 1]";
      throw Error(ErrorKind::Data, os.str());
    }
  }
}

Spectrum Spectrum::constant(WavelengthGrid grid, double value, SpectrumKind kind) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  return Spectrum(std::move(grid), Eigen::VectorXd::Constant(n, value), kind);
}

double Spectrum::at(double nm) const {
  if (!grid_.covers(nm, nm)) {
    std::ostringstream os;
    os << nm << " nm outside grid [" << grid_.front() << ", " << grid_.back() << "]";
    range_error(os.str());
  }
  return interp(grid_.wavelengths(), values_, nm);
}

Spectrum resample(const Spectrum& spec, const WavelengthGrid& target) {
  if (!spec.grid().covers(target.front(), target.back())) {
    std::ostringstream os;
    os << "resampling to [" << target.front() << ", " << target.back()
       << "] nm requires extrapolation beyond [" << spec.grid().front() << ", "
       << spec.grid().back() << "]";
    range_error(os.str());
  }
  if (spec.grid() == target) return spec;
  Eigen::VectorXd out(static_cast<Eigen::Index>(target.size()));
  for (std::size_t i = 0; i < target.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = interp(spec.grid().wavelengths(), spec.values(), target[i]);
  return Spectrum(target, std::move(out), spec.kind());
}

Spectrum clip(const Spectrum& spec, double lo, double hi) {
  std::vector<double> nm;
  std::vector<double> vals;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double x = spec.grid()[i];
    if (x >= lo - kGridSlack && x <= hi + kGridSlack) {
      nm.push_back(x);
      vals.push_back(spec.values()(static_cast<Eigen::Index>(i)));
    }
  }
  if (nm.size() < 2) {
    std::ostringstream os;
    os << "clipping to [" << lo << ", " << hi << "] nm leaves fewer than 2 points";
    range_error(os.str());
  }
  return Spectrum(WavelengthGrid(std::move(nm)),
                  Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())),
                  spec.kind());
}

WavelengthGrid intersection_grid(const WavelengthGrid& a, const WavelengthGrid& b) {
  const double lo = std::max(a.front(), b.front());
  const double hi = std::min(a.back(), b.back());
  std::vector<double> nm;
  for (double x : a.wavelengths())
    if (x >= lo && x <= hi) nm.push_back(x);
  if (nm.size() < 2) range_error("grids do not overlap on at least 2 points");
  return WavelengthGrid(std::move(nm));
}

double integrate_band(const Spectrum& spec, double lo, double hi) {
  check_band(spec.grid(), lo, hi);
  return trapezoid(spec.grid().wavelengths(), spec.values(), lo, hi);
}

double fapar(const Spectrum& reflectance, const Spectrum& transmittance, FaparOptions opts) {
  if (!(reflectance.grid() == transmittance.grid()))
    throw Error(ErrorKind::Schema, "fapar: reflectance and transmittance grids differ");
  check_band(reflectance.grid(), kParLo, kParHi);

  const auto& nm = reflectance.grid().wavelengths();
  Eigen::VectorXd absorbance =
      Eigen::VectorXd::Ones(reflectance.values().size()) - reflectance.values() - transmittance.values();
  for (Eigen::Index i = 0; i < absorbance.size(); ++i) {
    const double x = nm[static_cast<std::size_t>(i)];
    if (x < kParLo || x > kParHi) continue;
    if (absorbance(i) < -kAbsorbanceTolerance) {
      std::ostringstream os;
      os << "R + T = " << 1.0 - absorbance(i) << " exceeds 1 at " << x << " nm";
      throw Error(ErrorKind::PhysicalConsistency, os.str());
    }
    absorbance(i) = std::max(absorbance(i), 0.0);
  }
  // Band-edge interpolation may touch a neighbor just outside the band.
  absorbance = absorbance.cwiseMax(0.0);
  const double integral = trapezoid(nm, absorbance, kParLo, kParHi);
  return opts.normalized ? integral / (kParHi - kParLo) : integral;
}

double par(const Spectrum& irradiance) { return integrate_band(irradiance, kParLo, kParHi); }

double apar(const Spectrum& irradiance, const Spectrum& reflectance,
            const Spectrum& transmittance, FaparOptions opts) {
  if (reflectance.grid() == transmittance.grid())
    return fapar(reflectance, transmittance, opts) * par(irradiance);
  const WavelengthGrid common = intersection_grid(reflectance.grid(), transmittance.grid());
  return fapar(resample(reflectance, common), resample(transmittance, common), opts) *
         par(irradiance);
}

Spectrum sif_yield(const Spectrum& fluorescence, double apar_value) {
  if (!(apar_value > 0.0) || !std::isfinite(apar_value)) {
    std::ostringstream os;
    os << "APAR must be positive to normalize fluorescence (got " << apar_value << ")";
    throw Error(ErrorKind::Parameter, os.str());
  }
  return Spectrum(fluorescence.grid(), fluorescence.values() / apar_value, SpectrumKind::SifYield);
}

Spectrum compute_sif_yield(const Spectrum& irradiance, const Spectrum& reflectance,
                           const Spectrum& transmittance, const Spectrum& fluorescence,
                           const SifYieldOptions& opts) {
  const double absorbed = apar(irradiance, reflectance, transmittance, opts.fapar);
  return clip(sif_yield(fluorescence, absorbed), opts.band_lo, opts.band_hi);
}

double disc_area_cm2(double diameter_mm) {
  const double radius_cm = diameter_mm / 20.0;
  return std::numbers::pi * radius_cm * radius_cm;
}

PigmentConcentrations pigment_concentrations(const PigmentAbsorbances& abs) {
  if (abs.a470 < 0.0 || abs.a649 < 0.0 || abs.a665 < 0.0)
    throw Error(ErrorKind::Parameter, "absorbances must be non-negative");
  PigmentConcentrations c{};
  c.chl_a = 13.95 * abs.a665 - 6.88 * abs.a649;
  c.chl_b = 24.96 * abs.a649 - 7.32 * abs.a665;
  c.carotenoids = (1000.0 * abs.a470 - 2.05 * c.chl_a - 114.8 * c.chl_b) / 245.0;
  return c;
}

PigmentResult pigment_contents(const PigmentAbsorbances& abs) {
  if (!(abs.area_cm2 > 0.0)) throw Error(ErrorKind::Parameter, "leaf disc area must be positive");
  if (!(abs.volume_ml > 0.0)) throw Error(ErrorKind::Parameter, "extract volume must be positive");
  PigmentResult r{};
  r.conc = pigment_concentrations(abs);
  r.chl_ab_content = (r.conc.chl_a + r.conc.chl_b) * abs.volume_ml / abs.area_cm2;
  r.carotenoid_content = r.conc.carotenoids * abs.volume_ml / abs.area_cm2;
  return r;
}

}  // namespace phocap
