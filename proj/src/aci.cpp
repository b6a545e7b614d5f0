#include "phocap/aci.hpp"

#include "phocap/error.hpp"
#include "phocap/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace phocap {

namespace {

constexpr double kKelvin = 273.15;

struct Limits {
  double value;
  Eigen::Vector4d grad;  // d/d(vcmax, j, rd, tpu)
};

// Hyperbolic minimum of a and b with its partial derivatives.
void smooth_min(double a, double b, double theta, double& out, double& da, double& db) {
  const double s = a + b;
  const double disc = s * s - 4.0 * theta * a * b;
  if (disc <= 1e-300) {
    out = std::min(a, b);
    da = a <= b ? 1.0 : 0.0;
    db = 1.0 - da;
    return;
  }
  const double root = std::sqrt(disc);
  out = (s - root) / (2.0 * theta);
  da = (1.0 - (s - 2.0 * theta * b) / root) / (2.0 * theta);
  db = (1.0 - (s - 2.0 * theta * a) / root) / (2.0 * theta);
}

Limits evaluate(double ci, double vcmax, double j, double rd, const KineticsAt& k, double o2,
                const LimitationModel& model) {
  const double km = k.kc * (1.0 + o2 / k.ko);
  const double denom_c = ci + km;
  if (!(denom_c > 0.0)) throw Error(ErrorKind::Parameter, "FvCB singularity: Ci + Km <= 0");
  const double denom_j = 4.0 * ci + 8.0 * k.gamma_star;
  const double gc = (ci - k.gamma_star) / denom_c;  // dAc/dvcmax
  const double gj = (ci - k.gamma_star) / denom_j;  // dAj/dj
  const double ac = vcmax * gc;
  const double aj = j * gj;

  Limits out{};
  out.grad.setZero();
  double gross = 0.0;
  double d_ac = 0.0, d_aj = 0.0, d_ap = 0.0;
  if (model.min_mode == MinMode::Smooth) {
    smooth_min(ac, aj, model.smooth_theta, gross, d_ac, d_aj);
    if (model.tpu) {
      double outer = 0.0, d_inner = 0.0;
      smooth_min(gross, 3.0 * *model.tpu, model.smooth_theta, outer, d_inner, d_ap);
      gross = outer;
      d_ac *= d_inner;
      d_aj *= d_inner;
    }
  } else {
    if (ac <= aj) {
      gross = ac;
      d_ac = 1.0;
    } else {
      gross = aj;
      d_aj = 1.0;
    }
    if (model.tpu && 3.0 * *model.tpu < gross) {
      gross = 3.0 * *model.tpu;
      d_ac = d_aj = 0.0;
      d_ap = 1.0;
    }
  }
  out.value = gross - rd;
  out.grad << d_ac * gc, d_aj * gj, -1.0, 3.0 * d_ap;
  return out;
}

}  // namespace

void KineticConstants::validate() const {
  for (double v : {kc25, ko25, gamma_star25, ha_kc, ha_ko, ha_gamma_star, ha_vcmax, ha_jmax, ha_rd})
    if (!(v > 0.0) || !std::isfinite(v))
      throw Error(ErrorKind::Parameter, "kinetic constants must be positive and finite");
}

double arrhenius_factor(double leaf_temp_c, double ha) {
  if (!(leaf_temp_c > -10.0 && leaf_temp_c < 60.0)) {
    std::ostringstream os;
    os << "leaf temperature " << leaf_temp_c << " C outside (-10, 60)";
    throw Error(ErrorKind::Parameter, os.str());
  }
  const double t_ref = kReferenceTempC + kKelvin;
  return std::exp(ha / kGasConstant * (1.0 / t_ref - 1.0 / (leaf_temp_c + kKelvin)));
}

double arrhenius_scale(double value25, double leaf_temp_c, double ha) {
  return value25 * arrhenius_factor(leaf_temp_c, ha);
}

double to_25(double value, double leaf_temp_c, double ha) {
  return value / arrhenius_factor(leaf_temp_c, ha);
}

KineticsAt kinetics_at(const KineticConstants& kin, double leaf_temp_c) {
  return {arrhenius_scale(kin.kc25, leaf_temp_c, kin.ha_kc),
          arrhenius_scale(kin.ko25, leaf_temp_c, kin.ha_ko),
          arrhenius_scale(kin.gamma_star25, leaf_temp_c, kin.ha_gamma_star)};
}

void AciCurve::validate() const {
  if (points.size() < 6) {
    std::ostringstream os;
    os << "A/Ci curve has " << points.size() << " points, need at least 6";
    throw Error(ErrorKind::Data, os.str());
  }
  int low = 0, high = 0;
  for (const auto& p : points) {
    if (!(p.ci >= 0.0) || !std::isfinite(p.ci))
      throw Error(ErrorKind::Data, "A/Ci curve has negative or non-finite Ci");
    if (!std::isfinite(p.a)) throw Error(ErrorKind::Data, "A/Ci curve has non-finite A");
    low += p.ci < 250.0;
    high += p.ci > 500.0;
  }
  if (low < 2 || high < 2) {
    std::ostringstream os;
    os << "A/Ci curve needs >= 2 points below Ci 250 and >= 2 above Ci 500 (has " << low
       << " and " << high << ")";
    throw Error(ErrorKind::Data, os.str());
  }
}

double fvcb_assimilation(double ci, double vcmax, double j, double rd, const KineticConstants& kin,
                         double leaf_temp_c, double o2_mbar, const LimitationModel& model) {
  return evaluate(ci, vcmax, j, rd, kinetics_at(kin, leaf_temp_c), o2_mbar, model).value;
}

double jmax_from_j(double j, double par, const LightResponse& lr) {
  const double absorbed = lr.alpha * par;
  if (!(j < absorbed))
    throw Error(ErrorKind::Parameter, "electron transport exceeds the light-limited bound");
  return j * (absorbed - lr.theta * j) / (absorbed - j);
}

namespace {

struct StartResult {
  Eigen::VectorXd params;
  double sse = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

class AciProblem {
 public:
  AciProblem(const AciCurve& curve, const KineticConstants& kin, const FitOptions& opts)
      : curve_(curve), k_(kinetics_at(kin, curve.leaf_temp_c)), opts_(opts) {}

  Eigen::Index n_params() const { return opts_.fit_tpu ? 4 : 3; }

  LimitationModel model(const Eigen::VectorXd& x) const {
    LimitationModel m{opts_.min_mode, opts_.smooth_theta, std::nullopt};
    if (opts_.fit_tpu) m.tpu = x(3);
    return m;
  }

  double residuals(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const {
    const auto n = static_cast<Eigen::Index>(curve_.points.size());
    r.resize(n);
    if (jac) jac->resize(n, n_params());
    const LimitationModel m = model(x);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = curve_.points[static_cast<std::size_t>(i)];
      const Limits l = evaluate(p.ci, x(0), x(1), x(2), k_, curve_.o2_mbar, m);
      r(i) = p.a - l.value;
      if (jac) jac->row(i) = l.grad.head(n_params()).transpose();
    }
    return r.squaredNorm();
  }

  Eigen::VectorXd project(Eigen::VectorXd x) const {
    x(0) = std::max(x(0), 1e-6);
    x(1) = std::max(x(1), 1e-6);
    x(2) = std::max(x(2), 0.0);
    if (opts_.fit_tpu) x(3) = std::max(x(3), 1e-6);
    return x;
  }

  StartResult solve(Eigen::VectorXd x) const {
    StartResult res;
    Eigen::VectorXd r, r_trial;
    Eigen::MatrixXd jac;
    double sse = residuals(x, r, &jac);
    double lambda = 1e-3;
    int it = 0;
    for (; it < opts_.max_iterations; ++it) {
      if (sse <= 1e-28) {
        res.converged = true;
        break;
      }
      const Eigen::MatrixXd h = jac.transpose() * jac;
      const Eigen::VectorXd g = jac.transpose() * r;
      Eigen::VectorXd diag = h.diagonal().cwiseMax(1e-12 * std::max(1.0, h.diagonal().maxCoeff()));
      Eigen::MatrixXd damped = h;
      damped.diagonal() += lambda * diag;
      const Eigen::VectorXd step = damped.ldlt().solve(g);
      const Eigen::VectorXd trial = project(x + step);
      const double moved = (trial - x).norm();
      const double trial_sse = residuals(trial, r_trial, nullptr);
      if (trial_sse < sse) {
        x = trial;
        sse = residuals(x, r, &jac);
        lambda = std::max(lambda * 0.1, 1e-12);
      } else {
        lambda *= 10.0;
      }
      if (moved <= opts_.step_tolerance * (x.norm() + opts_.step_tolerance) || lambda > 1e16) {
        res.converged = true;
        ++it;
        break;
      }
    }
    res.params = x;
    res.sse = sse;
    res.iterations = it;
    return res;
  }

 private:
  const AciCurve& curve_;
  KineticsAt k_;
  const FitOptions& opts_;
};

}  // namespace

PhotoTraits fit_aci(const AciCurve& curve, const KineticConstants& kin, const FitOptions& opts) {
  curve.validate();
  kin.validate();
  if (opts.n_starts < 1) throw Error(ErrorKind::Parameter, "fit_aci needs at least one start");

  const double t = curve.leaf_temp_c;
  const double fv = arrhenius_factor(t, kin.ha_vcmax);
  const double fj = arrhenius_factor(t, kin.ha_jmax);
  const double fr = arrhenius_factor(t, kin.ha_rd);

  AciProblem problem(curve, kin, opts);
  Rng rng(derive_seed(opts.seed, "aci-start"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto log_uniform = [&](const std::array<double, 2>& box) {
    return std::exp(std::log(box[0]) + unit(rng) * (std::log(box[1]) - std::log(box[0])));
  };
  double a_max = 0.0;
  for (const auto& p : curve.points) a_max = std::max(a_max, p.a);

  StartResult best;
  for (int s = 0; s < opts.n_starts; ++s) {
    Eigen::VectorXd x0(problem.n_params());
    x0(0) = log_uniform(opts.vcmax_start) * fv;
    x0(1) = log_uniform(opts.j_start) * fj;
    x0(2) = log_uniform(opts.rd_start) * fr;
    if (opts.fit_tpu) x0(3) = (a_max + x0(2)) / 3.0 * (1.0 + unit(rng));
    StartResult r = problem.solve(x0);
    if (r.sse < best.sse || (r.sse == best.sse && r.converged && !best.converged))
      best = std::move(r);
  }

  if (!best.converged && opts.throw_on_failure) {
    std::ostringstream os;
    os << "A/Ci fit did not converge after " << opts.n_starts << " starts (best SSE " << best.sse
       << ", vcmax " << best.params(0) << ", j " << best.params(1) << ", rd " << best.params(2)
       << " at " << t << " C)";
    throw Error(ErrorKind::FitFailure, os.str());
  }

  PhotoTraits out;
  out.vcmax25 = best.params(0) / fv;
  double j = best.params(1);
  if (opts.light_correction) j = jmax_from_j(j, curve.par, *opts.light_correction);
  out.jmax25 = j / fj;
  out.rd25 = best.params(2) / fr;
  if (opts.fit_tpu) out.tpu = best.params(3);
  out.fit_rmse = std::sqrt(best.sse / static_cast<double>(curve.points.size()));
  out.converged = best.converged;
  out.iterations = best.iterations;
  return out;
}

double aci_sse(const AciCurve& curve, const PhotoTraits& traits25, const KineticConstants& kin,
               const LimitationModel& model) {
  const double t = curve.leaf_temp_c;
  const double vcmax = arrhenius_scale(traits25.vcmax25, t, kin.ha_vcmax);
  const double j = arrhenius_scale(traits25.jmax25, t, kin.ha_jmax);
  const double rd = arrhenius_scale(traits25.rd25, t, kin.ha_rd);
  double sse = 0.0;
  for (const auto& p : curve.points) {
    const double e = p.a - fvcb_assimilation(p.ci, vcmax, j, rd, kin, t, curve.o2_mbar, model);
    sse += e * e;
  }
  return sse;
}

AciCurve generate_aci(const PhotoTraits& traits25, std::span<const double> ci_values,
                      double leaf_temp_c, double noise_sd, std::uint64_t seed,
                      const KineticConstants& kin, double o2_mbar, double par) {
  if (ci_values.empty()) throw Error(ErrorKind::Parameter, "generate_aci needs Ci values");
  if (!(noise_sd >= 0.0)) throw Error(ErrorKind::Parameter, "noise_sd must be >= 0");
  const double vcmax = arrhenius_scale(traits25.vcmax25, leaf_temp_c, kin.ha_vcmax);
  const double j = arrhenius_scale(traits25.jmax25, leaf_temp_c, kin.ha_jmax);
  const double rd = arrhenius_scale(traits25.rd25, leaf_temp_c, kin.ha_rd);
  LimitationModel model;
  model.tpu = traits25.tpu;

  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  AciCurve curve;
  curve.leaf_temp_c = leaf_temp_c;
  curve.par = par;
  curve.o2_mbar = o2_mbar;
  curve.points.reserve(ci_values.size());
  for (double ci : ci_values) {
    double a = fvcb_assimilation(ci, vcmax, j, rd, kin, leaf_temp_c, o2_mbar, model);
    if (noise_sd > 0.0) a += noise_sd * noise(rng);
    curve.points.push_back({ci, a});
  }
  return curve;
}

std::vector<std::string> plausibility_warnings(const PhotoTraits& traits) {
  std::vector<std::string> out;
  auto check = [&](const char* name, double v) {
    if (v < 20.0 || v > 160.0) {
      std::ostringstream os;
      os << name << " = " << v << " umol m-2 s-1 outside the plausible range [20, 160]";
      out.push_back(os.str());
    }
  };
  check("vcmax25", traits.vcmax25);
  check("jmax25", traits.jmax25);
  return out;
}

}  // namespace phocap
