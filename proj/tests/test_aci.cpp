#include <doctest.h>

#include "phocap/aci.hpp"
#include "phocap/error.hpp"
#include "phocap/random.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace phocap;

namespace {

const KineticConstants kBernacchi{};

// Independent FvCB evaluation straight from the rational forms.
double hand_fvcb(double ci, double vcmax, double j, double rd, double kc, double ko, double gamma,
                 double o2 = 210.0) {
  const double ac = vcmax * (ci - gamma) / (ci + kc * (1.0 + o2 / ko));
  const double aj = j * (ci - gamma) / (4.0 * ci + 8.0 * gamma);
  return std::min(ac, aj) - rd;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

PhotoTraits draw_traits(Rng& rng) {
  // Jmax/Vcmax kept inside [1.3, 2.4] so both limitation regimes appear on the
  // protocol Ci sequence at 30 C.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PhotoTraits t;
  t.vcmax25 = 29.11 + u(rng) * (101.93 - 29.11);
  const double lo = std::max(57.86, 1.3 * t.vcmax25);
  const double hi = std::min(141.17, 2.4 * t.vcmax25);
  t.jmax25 = lo + u(rng) * (hi - lo);
  t.rd25 = 0.2 + u(rng) * 2.8;
  return t;
}

}  // namespace

TEST_CASE("arrhenius scaling") {
  CHECK(arrhenius_scale(60.0, 25.0, 65330.0) == 60.0);
  CHECK(arrhenius_factor(25.0, 12345.0) == 1.0);
  // exp(65330/8.314 * (1/298.15 - 1/303.15))
  CHECK(arrhenius_scale(60.0, 30.0, 65330.0) == doctest::Approx(92.66910795126533).epsilon(1e-12));
  CHECK(arrhenius_factor(30.0, 65330.0) == doctest::Approx(1.5446).epsilon(1e-4));
  Rng rng(1);
  std::uniform_real_distribution<double> v(1, 200), t(-9, 59), ha(1e4, 1e5);
  for (int i = 0; i < 200; ++i) {
    const double x = v(rng), temp = t(rng), h = ha(rng);
    CHECK(to_25(arrhenius_scale(x, temp, h), temp, h) == doctest::Approx(x).epsilon(1e-13));
  }
  CHECK_THROWS_AS(arrhenius_factor(60.0, 1.0), Error);
  CHECK_THROWS_AS(arrhenius_factor(-10.0, 1.0), Error);
}

TEST_CASE("fvcb assimilation") {
  SUBCASE("compensation point gives -Rd") {
    for (double temp : {20.0, 25.0, 30.0}) {
      const auto k = kinetics_at(kBernacchi, temp);
      CHECK(fvcb_assimilation(k.gamma_star, 60, 100, 1.3, kBernacchi, temp) == doctest::Approx(-1.3).epsilon(1e-14));
    }
  }
  SUBCASE("hand evaluation at 25 C, Ci 300") {
    const double a = fvcb_assimilation(300.0, 60.0, 100.0, 1.0, kBernacchi, 25.0);
    CHECK(a == doctest::Approx(hand_fvcb(300, 60, 100, 1, 404.9, 278.4, 42.75)).epsilon(1e-14));
    CHECK(a == doctest::Approx(14.277333962472637).epsilon(1e-12));
  }
  SUBCASE("monotone approach to the high-Ci asymptotes") {
    double prev = -1e300;
    for (double ci = 100; ci <= 1e7; ci *= 1.5) {
      const double a = fvcb_assimilation(ci, 60, 100, 1, kBernacchi, 25.0);
      CHECK(a >= prev);
      CHECK(a <= std::min(60.0, 100.0 / 4.0) - 1.0);
      prev = a;
    }
    CHECK(prev == doctest::Approx(25.0 - 1.0).epsilon(1e-4));
    // Rubisco-limited asymptote when j is large.
    CHECK(fvcb_assimilation(1e9, 60, 1000, 1, kBernacchi, 25.0) == doctest::Approx(59.0).epsilon(1e-5));
  }
  SUBCASE("nondecreasing in Ci above the compensation point") {
    Rng rng(17);
    std::uniform_real_distribution<double> v(10, 200), j(20, 400), rd(0, 4), temp(15, 40), ci(0, 2000);
    int violations = 0;
    for (int s = 0; s < 1000; ++s) {
      const double vc = v(rng), jj = j(rng), r = rd(rng), t = temp(rng);
      const auto k = kinetics_at(kBernacchi, t);
      const double c = k.gamma_star + 1.0 + ci(rng);
      const double h = 1e-3;
      const LimitationModel smooth{MinMode::Smooth, 0.999, std::nullopt};
      if (fvcb_assimilation(c + h, vc, jj, r, kBernacchi, t) < fvcb_assimilation(c, vc, jj, r, kBernacchi, t)) ++violations;
      if (fvcb_assimilation(c + h, vc, jj, r, kBernacchi, t, 210, smooth) <
          fvcb_assimilation(c, vc, jj, r, kBernacchi, t, 210, smooth))
        ++violations;
    }
    CHECK(violations == 0);
  }
  SUBCASE("TPU caps gross assimilation") {
    LimitationModel m;
    m.tpu = 5.0;
    CHECK(fvcb_assimilation(1500, 100, 200, 1, kBernacchi, 25.0, 210, m) == doctest::Approx(14.0));
  }
}

TEST_CASE("generate_aci") {
  PhotoTraits t{80, 120, 1};
  const auto clean = generate_aci(t, kStandardCiSequence, 30.0, 0.0, 1);
  const auto k30 = kinetics_at(kBernacchi, 30.0);
  const double v30 = arrhenius_scale(80, 30, kBernacchi.ha_vcmax);
  const double j30 = arrhenius_scale(120, 30, kBernacchi.ha_jmax);
  const double rd30 = arrhenius_scale(1, 30, kBernacchi.ha_rd);
  for (const auto& p : clean.points)
    CHECK(p.a == doctest::Approx(fvcb_assimilation(p.ci, v30, j30, rd30, kBernacchi, 30.0)).epsilon(1e-15));

  // At Ci 1600 the curve sits on the RuBP-regeneration branch: A = J(Ci - G*)/(4Ci + 8G*) - Rd.
  const double ci = 1600.0;
  const double hand_aj = j30 * (ci - k30.gamma_star) / (4 * ci + 8 * k30.gamma_star) - rd30;
  CHECK(std::abs(clean.points.back().a - hand_aj) < 0.1);
  CHECK(clean.points.back().a == doctest::Approx(34.85283609583623).epsilon(1e-10));

  const auto n1 = generate_aci(t, kStandardCiSequence, 30.0, 0.3, 99);
  const auto n2 = generate_aci(t, kStandardCiSequence, 30.0, 0.3, 99);
  const auto n3 = generate_aci(t, kStandardCiSequence, 30.0, 0.3, 100);
  bool same = true, differ = false;
  for (std::size_t i = 0; i < n1.points.size(); ++i) {
    same = same && n1.points[i].a == n2.points[i].a;
    differ = differ || n1.points[i].a != n3.points[i].a;
  }
  CHECK(same);
  CHECK(differ);
}

TEST_CASE("curve validation") {
  PhotoTraits t{60, 100, 1};
  const std::vector<double> high{900, 1000, 1100, 1200, 1300, 1400, 1500};
  const auto c = generate_aci(t, high, 30.0, 0.0, 1);
  try {
    fit_aci(c);
    FAIL("expected data error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
  }
  const std::vector<double> few{100, 200, 600, 800, 1000};
  CHECK_THROWS_AS(fit_aci(generate_aci(t, few, 30.0, 0.0, 1)), Error);
}

TEST_CASE("fit_aci recovers generator parameters") {
  SUBCASE("reference point") {
    PhotoTraits truth{60, 100, 1};
    const auto curve = generate_aci(truth, kStandardCiSequence, 30.0, 0.0, 1);
    const auto fit = fit_aci(curve);
    CHECK(fit.converged);
    CHECK(rel_err(fit.vcmax25, 60) < 0.01);
    CHECK(rel_err(fit.jmax25, 100) < 0.01);
    CHECK(rel_err(fit.rd25, 1) < 0.01);
    CHECK(fit.fit_rmse < 1e-6);
    CHECK(plausibility_warnings(fit).empty());
  }
  SUBCASE("noiseless draws across the trait ranges") {
    Rng rng(2024);
    int bad = 0;
    for (int i = 0; i < 100; ++i) {
      const auto truth = draw_traits(rng);
      const auto fit = fit_aci(generate_aci(truth, kStandardCiSequence, 30.0, 0.0, 1), kBernacchi,
                               {.seed = static_cast<std::uint64_t>(i)});
      if (rel_err(fit.vcmax25, truth.vcmax25) > 0.01 || rel_err(fit.jmax25, truth.jmax25) > 0.01 ||
          rel_err(fit.rd25, truth.rd25) > 0.01)
        ++bad;
    }
    CHECK(bad == 0);
  }
  SUBCASE("noisy curves, median over 50 seeds") {
    PhotoTraits truth{60, 100, 1};
    std::vector<double> ev, ej;
    for (std::uint64_t s = 0; s < 50; ++s) {
      const auto fit = fit_aci(generate_aci(truth, kStandardCiSequence, 30.0, 0.3, s), kBernacchi, {.seed = s});
      ev.push_back(rel_err(fit.vcmax25, 60));
      ej.push_back(rel_err(fit.jmax25, 100));
    }
    std::nth_element(ev.begin(), ev.begin() + 25, ev.end());
    std::nth_element(ej.begin(), ej.begin() + 25, ej.end());
    CHECK(ev[25] < 0.05);
    CHECK(ej[25] < 0.05);
  }
  SUBCASE("smooth minimum option") {
    PhotoTraits truth{70, 130, 1.5};
    const auto fit = fit_aci(generate_aci(truth, kStandardCiSequence, 30.0, 0.0, 1), kBernacchi,
                             {.min_mode = MinMode::Smooth});
    // The hyperbolic minimum sits slightly below the hard minimum, so allow a looser match.
    CHECK(rel_err(fit.vcmax25, 70) < 0.05);
    CHECK(rel_err(fit.jmax25, 130) < 0.05);
  }
}

TEST_CASE("objective gradient vanishes at the optimum") {
  auto check_gradient = [](const AciCurve& curve) {
    const auto fit = fit_aci(curve);
    const double f0 = aci_sse(curve, fit);
    double params[3] = {fit.vcmax25, fit.jmax25, fit.rd25};
    double norm2 = 0.0;
    for (int d = 0; d < 3; ++d) {
      const double h = 1e-6 * std::max(1.0, std::abs(params[d]));
      double up[3] = {params[0], params[1], params[2]};
      double dn[3] = {params[0], params[1], params[2]};
      up[d] += h;
      dn[d] -= h;
      const double g = (aci_sse(curve, {up[0], up[1], up[2]}) - aci_sse(curve, {dn[0], dn[1], dn[2]})) / (2 * h);
      norm2 += g * g;
    }
    CHECK(std::sqrt(norm2) < 1e-6 * (1.0 + f0));
  };
  check_gradient(generate_aci({60, 100, 1}, kStandardCiSequence, 30.0, 0.0, 1));
  check_gradient(generate_aci({45, 90, 0.8}, kStandardCiSequence, 30.0, 0.3, 5));
  check_gradient(generate_aci({90, 140, 2.0}, kStandardCiSequence, 30.0, 0.3, 6));
}

TEST_CASE("light correction and TPU options") {
  const double jmax = 150.0, par = 1600.0;
  const LightResponse lr{};
  const double a = lr.alpha * par;
  const double j = ((a + jmax) - std::sqrt((a + jmax) * (a + jmax) - 4 * lr.theta * a * jmax)) / (2 * lr.theta);
  CHECK(jmax_from_j(j, par, lr) == doctest::Approx(jmax).epsilon(1e-12));

  PhotoTraits truth{60, 100, 1};
  const auto curve = generate_aci(truth, kStandardCiSequence, 30.0, 0.0, 1);
  const auto fit = fit_aci(curve, kBernacchi, {.light_correction = LightResponse{}});
  CHECK(fit.jmax25 > 100.0);

  const auto tpu_fit = fit_aci(curve, kBernacchi, {.fit_tpu = true});
  CHECK(tpu_fit.tpu.has_value());
  CHECK(rel_err(tpu_fit.vcmax25, 60) < 0.01);
  CHECK(rel_err(tpu_fit.jmax25, 100) < 0.01);
}

TEST_CASE("plausibility warnings") {
  CHECK(plausibility_warnings({10, 100, 1}).size() == 1);
  CHECK(plausibility_warnings({60, 170, 1}).size() == 1);
  CHECK(plausibility_warnings({60, 100, 1}).empty());
}
