#include <doctest.h>

#include "phocap/error.hpp"
#include "phocap/random.hpp"
#include "phocap/spectral.hpp"

#include <cmath>
#include <random>

using namespace phocap;

namespace {

WavelengthGrid grid(std::initializer_list<double> nm) { return WavelengthGrid(std::vector<double>(nm)); }

Spectrum spec(std::initializer_list<double> nm, std::initializer_list<double> v,
              SpectrumKind kind = SpectrumKind::Irradiance) {
  Eigen::VectorXd values(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) values(i++) = x;
  return Spectrum(grid(nm), values, kind);
}

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected phocap::Error");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("wavelength grid invariants") {
  CHECK_THROWS_AS(grid({400}), Error);
  CHECK_THROWS_AS(grid({400, 400}), Error);
  CHECK_THROWS_AS(grid({400, 399}), Error);
  CHECK_THROWS_AS(grid({0, 1}), Error);
  CHECK_THROWS_AS(grid({400, NAN}), Error);
  const auto g = WavelengthGrid::uniform(400, 2400, 1);
  CHECK(g.size() == 2001);
  CHECK(g.back() == 2400.0);
}

TEST_CASE("bounded kinds reject values outside [0, 1]") {
  CHECK_THROWS_AS(spec({400, 500}, {0.2, 1.2}, SpectrumKind::Reflectance), Error);
  CHECK_THROWS_AS(spec({400, 500}, {-0.1, 0.2}, SpectrumKind::Transmittance), Error);
  CHECK_NOTHROW(spec({400, 500}, {-0.1, 2.0}, SpectrumKind::Irradiance));
}

TEST_CASE("resample") {
  SUBCASE("constant interpolates to itself") {
    const auto s = Spectrum::constant(WavelengthGrid::uniform(400, 700, 10), 0.5, SpectrumKind::Reflectance);
    const auto r = resample(s, grid({401.3, 555.5, 699.9}));
    for (Eigen::Index i = 0; i < r.values().size(); ++i) CHECK(r.values()(i) == 0.5);
    CHECK(r.kind() == SpectrumKind::Reflectance);
  }
  SUBCASE("linear midpoint") {
    const auto r = resample(spec({400, 500}, {0, 1}), grid({450, 500}));
    CHECK(r.values()(0) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("hand interpolation") {
    const auto s = spec({400, 410, 420}, {0.1, 0.3, 0.2});
    CHECK(s.at(415) == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("extrapolation is a range error") {
    CHECK(kind_of([] { resample(spec({400, 500}, {0, 1}), grid({350, 450})); }) == ErrorKind::Range);
  }
  SUBCASE("idempotent on own grid") {
    Rng rng(7);
    std::uniform_real_distribution<double> u(0, 1);
    Eigen::VectorXd v(50);
    for (auto& x : v) x = u(rng);
    const Spectrum s(WavelengthGrid::uniform(400, 890, 10), v, SpectrumKind::Reflectance);
    const auto r = resample(s, s.grid());
    CHECK(r.values() == s.values());
  }
}

TEST_CASE("integrate_band") {
  const auto g = WavelengthGrid::uniform(350, 2500, 1);
  CHECK(integrate_band(Spectrum::constant(g, 1.0, SpectrumKind::Irradiance), 400, 700) ==
        doctest::Approx(300.0).epsilon(1e-12));
  CHECK(integrate_band(Spectrum::constant(g, 0.37, SpectrumKind::Irradiance), 665, 845) ==
        doctest::Approx(180.0 * 0.37).epsilon(1e-12));
  CHECK(integrate_band(spec({400, 700}, {0, 1}), 400, 700) == doctest::Approx(150.0).epsilon(1e-12));
  // Non-grid endpoints on a coarse grid: the integrand is linear so trapezoid is exact.
  CHECK(integrate_band(spec({400, 500, 600}, {0, 100, 200}), 425, 575) ==
        doctest::Approx((25.0 + 175.0) / 2.0 * 150.0).epsilon(1e-12));
  CHECK(kind_of([&] { integrate_band(spec({400, 700}, {0, 1}), 300, 700); }) == ErrorKind::Range);

  SUBCASE("linearity on random spectra") {
    Rng rng(11);
    std::normal_distribution<double> nd;
    const auto gg = WavelengthGrid::uniform(380, 720, 2.5);
    const auto n = static_cast<Eigen::Index>(gg.size());
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd f(n), h(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        f(i) = nd(rng);
        h(i) = nd(rng);
      }
      const double a = nd(rng), b = nd(rng);
      const double lhs = integrate_band(Spectrum(gg, a * f + b * h, SpectrumKind::Irradiance), 401.2, 698.7);
      const double rhs = a * integrate_band(Spectrum(gg, f, SpectrumKind::Irradiance), 401.2, 698.7) +
                         b * integrate_band(Spectrum(gg, h, SpectrumKind::Irradiance), 401.2, 698.7);
      CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max({1.0, std::abs(lhs), std::abs(rhs)}));
    }
  }
}

TEST_CASE("fapar / apar / sif yield") {
  const auto g = WavelengthGrid::uniform(350, 900, 1);
  const auto refl = [&](double v) { return Spectrum::constant(g, v, SpectrumKind::Reflectance); };
  const auto trans = [&](double v) { return Spectrum::constant(g, v, SpectrumKind::Transmittance); };
  const auto irr = [&](double v) { return Spectrum::constant(g, v, SpectrumKind::Irradiance); };

  CHECK(std::abs(fapar(refl(0.6), trans(0.4))) <= 1e-10);
  CHECK(rel_close(fapar(refl(0.0), trans(0.0)), 300.0, 1e-10));
  CHECK(rel_close(fapar(refl(0.1), trans(0.05)), 255.0, 1e-10));
  CHECK(rel_close(fapar(refl(0.1), trans(0.05), {.normalized = true}), 0.85, 1e-10));

  CHECK(apar(irr(0.0), refl(0.1), trans(0.05)) == 0.0);
  CHECK(std::abs(apar(irr(1.0), refl(0.6), trans(0.4))) <= 1e-10);
  CHECK(rel_close(apar(irr(1.0), refl(0.1), trans(0.05)), 76500.0, 1e-10));

  SUBCASE("R + T above 1 beyond tolerance is rejected, within tolerance clamped") {
    CHECK(kind_of([&] { fapar(refl(0.6), trans(0.41)); }) == ErrorKind::PhysicalConsistency);
    CHECK(fapar(refl(0.6), trans(0.4000005)) == 0.0);
  }
  SUBCASE("apar aligns mismatched grids") {
    const auto coarse = Spectrum::constant(WavelengthGrid::uniform(390, 710, 5), 0.05, SpectrumKind::Transmittance);
    CHECK(rel_close(apar(irr(1.0), refl(0.1), coarse), 76500.0, 1e-10));
  }
  SUBCASE("fapar of physical leaves is non-negative") {
    Rng rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    const auto gg = WavelengthGrid::uniform(400, 700, 5);
    for (int t = 0; t < 50; ++t) {
      Eigen::VectorXd r(static_cast<Eigen::Index>(gg.size())), tr(r.size());
      for (Eigen::Index i = 0; i < r.size(); ++i) {
        r(i) = u(rng);
        tr(i) = u(rng) * (1.0 - r(i));
      }
      CHECK(fapar(Spectrum(gg, r, SpectrumKind::Reflectance), Spectrum(gg, tr, SpectrumKind::Transmittance)) >= 0.0);
    }
  }

  const auto fg = WavelengthGrid::uniform(640, 860, 1);
  const auto y0 = sif_yield(Spectrum::constant(fg, 0.0, SpectrumKind::Fluorescence), 100.0);
  CHECK(y0.values().isZero());
  CHECK(y0.kind() == SpectrumKind::SifYield);
  const auto y1 = sif_yield(Spectrum::constant(fg, 0.01, SpectrumKind::Fluorescence), 100.0);
  for (double v : y1.values()) CHECK(rel_close(v, 1e-4, 1e-10));
  const auto y2 = sif_yield(spec({685, 740}, {0.02, 0.04}, SpectrumKind::Fluorescence), 200.0);
  CHECK(rel_close(y2.values()(0), 1e-4, 1e-10));
  CHECK(rel_close(y2.values()(1), 2e-4, 1e-10));
  CHECK(kind_of([&] { sif_yield(y2, 0.0); }) == ErrorKind::Parameter);
  CHECK(kind_of([&] { sif_yield(y2, -3.0); }) == ErrorKind::Parameter);

  SUBCASE("common scaling of F and APAR leaves the yield unchanged") {
    Rng rng(5);
    std::uniform_real_distribution<double> u(0.1, 10);
    Eigen::VectorXd f(static_cast<Eigen::Index>(fg.size()));
    for (auto& v : f) v = u(rng);
    const Spectrum fl(fg, f, SpectrumKind::Fluorescence);
    for (double k : {0.5, 3.0, 1e3}) {
      const auto a = sif_yield(fl, 42.0);
      const auto b = sif_yield(Spectrum(fg, k * f, SpectrumKind::Fluorescence), k * 42.0);
      CHECK((a.values() - b.values()).cwiseAbs().maxCoeff() <= 1e-12 * a.values().cwiseAbs().maxCoeff());
    }
  }

  SUBCASE("compute_sif_yield clips to the retained band") {
    const auto fl = Spectrum::constant(WavelengthGrid::uniform(600, 900, 1), 0.01, SpectrumKind::Fluorescence);
    const auto y = compute_sif_yield(irr(1.0), refl(0.1), trans(0.05), fl);
    CHECK(y.grid().front() == 665.0);
    CHECK(y.grid().back() == 845.0);
    CHECK(y.size() == 181);
    CHECK(rel_close(y.values()(0), 0.01 / 76500.0, 1e-10));
  }
}

TEST_CASE("pigments") {
  const auto zero = pigment_contents({});
  CHECK(zero.conc.chl_a == 0.0);
  CHECK(zero.conc.chl_b == 0.0);
  CHECK(zero.conc.carotenoids == 0.0);
  CHECK(zero.chl_ab_content == 0.0);
  CHECK(zero.carotenoid_content == 0.0);

  PigmentAbsorbances abs;
  abs.a665 = 0.5;
  abs.a649 = 0.3;
  abs.a470 = 0.8;
  const auto c = pigment_concentrations(abs);
  // Hand evaluation: 13.95*0.5 - 6.88*0.3, 24.96*0.3 - 7.32*0.5, (800 - 2.05 con_a - 114.8 con_b)/245.
  CHECK(rel_close(c.chl_a, 4.911, 1e-12));
  CHECK(rel_close(c.chl_b, 3.828, 1e-12));
  CHECK(rel_close(c.carotenoids, (800.0 - 2.05 * 4.911 - 114.8 * 3.828) / 245.0, 1e-12));
  CHECK(rel_close(c.carotenoids, 1.430522653061225, 1e-12));

  CHECK(rel_close(abs.area_cm2, 0.5674501730546563, 1e-12));
  const auto r = pigment_contents(abs);
  CHECK(rel_close(r.chl_ab_content, (4.911 + 3.828) * 2.0 / 0.5674501730546563, 1e-12));
  CHECK(rel_close(r.chl_ab_content, 30.80094223236149, 1e-10));
  CHECK(rel_close(r.carotenoid_content, 5.041932211811797, 1e-10));
  CHECK(r.chl_ab_content == doctest::Approx(30.80).epsilon(1e-3));

  abs.area_cm2 = 0.0;
  CHECK(kind_of([&] { pigment_contents(abs); }) == ErrorKind::Parameter);
  PigmentAbsorbances neg;
  neg.a470 = -0.1;
  CHECK(kind_of([&] { pigment_concentrations(neg); }) == ErrorKind::Parameter);
}
