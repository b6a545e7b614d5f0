#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace phocap {

inline constexpr double kGasConstant = 8.314;  // J mol^-1 K^-1
inline constexpr double kReferenceTempC = 25.0;

/// Rubisco kinetics at 25 C and Arrhenius activation energies (J/mol).
/// Defaults follow Bernacchi et al. (2001). Ci and Kc share units (ubar,
/// numerically equal to umol/mol at 1 bar); O2 and Ko are in mbar.
struct KineticConstants {
  double kc25 = 404.9;
  double ko25 = 278.4;
  double gamma_star25 = 42.75;
  double ha_kc = 79430.0;
  double ha_ko = 36380.0;
  double ha_gamma_star = 37830.0;
  double ha_vcmax = 65330.0;
  double ha_jmax = 43540.0;
  double ha_rd = 46390.0;

  void validate() const;
};

struct KineticsAt {
  double kc;
  double ko;
  double gamma_star;
};

KineticsAt kinetics_at(const KineticConstants& kin, double leaf_temp_c);

/// exp[(Ha/R)(1/298.15 - 1/T)] with T in kelvin; leaf_temp_c must lie in (-10, 60).
double arrhenius_factor(double leaf_temp_c, double ha);
double arrhenius_scale(double value25, double leaf_temp_c, double ha);
/// Inverse of arrhenius_scale.
double to_25(double value, double leaf_temp_c, double ha);

struct AciPoint {
  double ci;  // intercellular CO2
  double a;   // net assimilation, umol m^-2 s^-1
};

/// Reference-CO2 steps of the gas-exchange protocol, in measurement order.
inline constexpr std::array<double, 14> kStandardCiSequence{
    400, 300, 200, 100, 50, 0, 400, 400, 600, 800, 1000, 1200, 1400, 1600};

struct AciCurve {
  std::vector<AciPoint> points;
  double leaf_temp_c = 30.0;
  double par = 1600.0;
  double o2_mbar = 210.0;

  /// Throws a data error unless the curve has >= 6 points, >= 2 below
  /// Ci 250 and >= 2 above Ci 500, all Ci >= 0 and all A finite.
  void validate() const;
};

enum class MinMode { Hard, Smooth };

struct LimitationModel {
  MinMode min_mode = MinMode::Hard;
  double smooth_theta = 0.999;            // curvature of the hyperbolic minimum
  std::optional<double> tpu;              // triose-phosphate use; Ap = 3 * tpu
};

/// FvCB net assimilation min(Ac, Aj[, Ap]) - Rd. vcmax, j and rd are values at
/// the leaf temperature; kinetic constants are temperature-adjusted here.
double fvcb_assimilation(double ci, double vcmax, double j, double rd, const KineticConstants& kin,
                         double leaf_temp_c, double o2_mbar = 210.0,
                         const LimitationModel& model = {});

/// Non-rectangular hyperbola relating electron transport J to Jmax at a given PAR.
struct LightResponse {
  double alpha = 0.3;
  double theta = 0.7;
};

/// Jmax such that the light response at `par` yields `j`.
double jmax_from_j(double j, double par, const LightResponse& lr);

struct FitOptions {
  int n_starts = 8;
  int max_iterations = 200;
  double step_tolerance = 1e-8;
  std::uint64_t seed = 0;
  MinMode min_mode = MinMode::Hard;
  double smooth_theta = 0.999;
  bool fit_tpu = false;
  std::optional<LightResponse> light_correction;  // off: j is reported as Jmax
  bool throw_on_failure = true;
  // Log-uniform multi-start box, 25 C basis.
  std::array<double, 2> vcmax_start{20.0, 150.0};
  std::array<double, 2> j_start{40.0, 200.0};
  std::array<double, 2> rd_start{0.2, 3.0};
};

struct PhotoTraits {
  double vcmax25 = 0.0;
  double jmax25 = 0.0;
  double rd25 = 0.0;
  double fit_rmse = 0.0;
  bool converged = true;
  int iterations = 0;
  std::optional<double> tpu;
};

/// Least-squares FvCB fit with damped Gauss-Newton (Levenberg-Marquardt) from
/// several seeded starts. Parameters are reported at 25 C.
PhotoTraits fit_aci(const AciCurve& curve, const KineticConstants& kin = {},
                    const FitOptions& opts = {});

/// Sum of squared residuals of a curve for traits given at 25 C.
double aci_sse(const AciCurve& curve, const PhotoTraits& traits25, const KineticConstants& kin = {},
               const LimitationModel& model = {});

/// Forward FvCB evaluation at leaf temperature plus i.i.d. Gaussian noise.
AciCurve generate_aci(const PhotoTraits& traits25, std::span<const double> ci_values,
                      double leaf_temp_c, double noise_sd, std::uint64_t seed,
                      const KineticConstants& kin = {}, double o2_mbar = 210.0,
                      double par = 1600.0);

/// Messages for traits outside the plausible 20-160 umol m^-2 s^-1 window.
std::vector<std::string> plausibility_warnings(const PhotoTraits& traits);

}  // namespace phocap
