#include "smpbe/model.hpp"

#include <cmath>
#include <sstream>

#include "smpbe/error.hpp"

namespace smpbe {

DerivedConstants derive_constants(double temperature, double ionic_strength) {
  if (!std::isfinite(temperature) || temperature <= 0.0) {
    throw InputError("derive_constants: temperature must be finite and positive");
  }
  if (!std::isfinite(ionic_strength) || ionic_strength < 0.0) {
    throw InputError("derive_constants: ionic strength must be finite and non-negative");
  }
  using namespace codata;
  const double e2_over_eps0_kT =
      elementary_charge * elementary_charge / (vacuum_permittivity * boltzmann * temperature);
  DerivedConstants c;
  c.alpha = 1e10 * e2_over_eps0_kT;
  c.kappa2 = 2.0 * ionic_strength * 1e-17 * avogadro * e2_over_eps0_kT;
  c.M = 1e-27 * avogadro * ionic_strength;
  return c;
}

ModelParams ModelParams::make(double eps_p, double eps_s, double Lambda, double T, double I_s) {
  ModelParams p;
  p.eps_p = eps_p;
  p.eps_s = eps_s;
  p.Lambda = Lambda;
  p.T = T;
  p.I_s = I_s;
  const auto c = derive_constants(T, I_s);
  p.alpha = c.alpha;
  p.kappa2 = c.kappa2;
  p.M = c.M;
  p.validate();
  return p;
}

ModelParams ModelParams::standard() { return make(2.0, 80.0, 3.11, 298.15, 0.1); }

void ModelParams::validate() const {
  std::ostringstream why;
  if (!(eps_p > 0.0)) why << "eps_p must be positive; ";
  if (!(eps_s > 0.0)) why << "eps_s must be positive; ";
  if (!(Lambda >= 0.0)) why << "Lambda must be non-negative; ";
  if (!(T > 0.0) || !std::isfinite(T)) why << "T must be finite and positive; ";
  if (!(I_s >= 0.0)) why << "I_s must be non-negative; ";
  if (!(alpha > 0.0)) why << "alpha must be positive; ";
  if (!(kappa2 >= 0.0) || !(M >= 0.0)) why << "kappa2 and M must be non-negative; ";
  const auto msg = why.str();
  if (!msg.empty()) throw InputError("ModelParams: " + msg);
}

namespace {

// ln(1 + x cosh u) for x > 0 without overflow.
double log1p_x_cosh(double u, double x) {
  const double a = std::fabs(u);
  if (a < 30.0) return std::log1p(x * std::cosh(u));
  const double e = std::exp(-a);
  return a + std::log(e + 0.5 * x * (1.0 + e * e));
}

}  // namespace

double reaction_nl(double u, const ModelParams& p) {
  if (p.kappa2 == 0.0) return 0.0;
  const double x = p.packing();
  if (x == 0.0) return p.kappa2 * std::sinh(u);
  const double a = std::fabs(u);
  const double e = std::exp(-a);
  const double num = -std::expm1(-2.0 * a);
  const double val = p.kappa2 * num / (2.0 * e + x * (1.0 + e * e));
  return u < 0.0 ? -val : val;
}

double reaction_nl_prime(double u, const ModelParams& p) {
  if (p.kappa2 == 0.0) return 0.0;
  const double x = p.packing();
  if (x == 0.0) return p.kappa2 * std::cosh(u);
  const double e = std::exp(-std::fabs(u));
  const double den = 2.0 * e + x * (1.0 + e * e);
  return p.kappa2 * 2.0 * e * (1.0 + 2.0 * x * e + e * e) / (den * den);
}

ReactionCoeffs reaction_coeffs(double u, const ModelParams& p) {
  return {reaction_nl(u, p), reaction_nl_prime(u, p)};
}

double reaction_energy(double u, const ModelParams& p) {
  if (p.kappa2 == 0.0) return 0.0;
  const double x = p.packing();
  if (x == 0.0) return p.kappa2 * std::cosh(u);
  return p.kappa2 / x * log1p_x_cosh(u, x);
}

double reaction_energy_delta(double u, double d, const ModelParams& p) {
  if (p.kappa2 == 0.0 || d == 0.0) return 0.0;
  const double x = p.packing();
  const double diff_cosh = 2.0 * std::sinh(u + 0.5 * d) * std::sinh(0.5 * d);
  if (x == 0.0) return p.kappa2 * diff_cosh;
  if (std::fabs(u) < 30.0 && std::fabs(u + d) < 30.0) {
    return p.kappa2 / x * std::log1p(x * diff_cosh / (1.0 + x * std::cosh(u)));
  }
  return p.kappa2 / x * (log1p_x_cosh(u + d, x) - log1p_x_cosh(u, x));
}

ChargeSystem::ChargeSystem(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw InputError("ChargeSystem: no atoms");
  for (const auto& a : atoms_) {
    if (!std::isfinite(a.position.x) || !std::isfinite(a.position.y) ||
        !std::isfinite(a.position.z) || !std::isfinite(a.charge)) {
      throw InputError("ChargeSystem: non-finite atom position or charge");
    }
    if (!(a.radius >= 0.0)) throw InputError("ChargeSystem: negative atom radius");
    net_charge_ += a.charge;
  }
}

ChargeSystem ChargeSystem::scaled(double factor) const {
  auto atoms = atoms_;
  for (auto& a : atoms) a.charge *= factor;
  return ChargeSystem(std::move(atoms));
}

}  // namespace smpbe
