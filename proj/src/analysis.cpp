#include "smpbe/analysis.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "smpbe/error.hpp"

namespace smpbe {

Concentrations concentrations(double u, const ModelParams& params, IonModel model) {
  if (!std::isfinite(u)) throw InputError("concentrations: non-finite potential");
  Concentrations c;
  if (model == IonModel::PBE || params.Lambda == 0.0) {
    constexpr double big = std::numeric_limits<double>::max();
    const double lim = std::log(big);
    auto f = [&](double x) {
      if (x > lim) {
        c.saturated = true;
        return big;
      }
      return params.I_s * std::exp(x);
    };
    c.na = f(-u);
    c.cl = f(u);
    return c;
  }
  // I_s e^{-u}/(1 + x cosh u) written with E = e^{-|u|} so that nothing overflows.
  const double x = params.packing();
  const double E = std::exp(-std::abs(u));
  const double denom = 2.0 * E + x * (1.0 + E * E);
  const double big_side = params.I_s * 2.0 / denom;
  const double small_side = params.I_s * 2.0 * E * E / denom;
  c.na = u <= 0.0 ? big_side : small_side;
  c.cl = u <= 0.0 ? small_side : big_side;
  return c;
}

double saturation_concentration(double Lambda) {
  return 1e27 / (codata::avogadro * Lambda * Lambda * Lambda);
}

double kcal_per_mol_per_kT(double temperature) {
  return codata::avogadro * codata::boltzmann * temperature / codata::joule_per_kcal;
}

EnergyReport solvation_energy(const InterfaceMesh& mesh, const PointLocator& locator, std::span<const double> psi,
                              std::span<const double> phi, const ChargeSystem& charges, const ModelParams& params) {
  std::vector<Vec3> pos;
  for (const auto& a : charges.atoms()) pos.push_back(a.position);
  const auto P = eval_at_points(mesh, locator, psi, pos);
  const auto F = eval_at_points(mesh, locator, phi, pos);
  EnergyReport r;
  r.I_s = params.I_s;
  const double pref = 0.5 * kcal_per_mol_per_kT(params.T);
  const auto atoms = charges.atoms();
  r.per_atom.resize(atoms.size());
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    r.per_atom[j] = pref * atoms[j].charge * (P[j] + F[j]);
    r.dE += r.per_atom[j];
  }
  return r;
}

EnergyReport solvation_energy(const HybridProblem& problem, const CompositeField& psi, const CompositeField& phi) {
  return solvation_energy(problem.mesh(), problem.locator(), psi.mesh, phi.mesh, problem.coulomb().charges(),
                          problem.params());
}

SlopeFit binding_slope(std::span<const std::pair<double, double>> data, double temperature) {
  SlopeFit fit;
  if (data.size() < 2) throw InputError("binding_slope: at least two points required");
  double sx = 0, sy = 0;
  for (const auto& [is, eb] : data) {
    if (!(is > 0.0)) throw InputError("binding_slope: ionic strengths must be positive");
    fit.points.emplace_back(std::log(is), eb);
  }
  const double n = static_cast<double>(fit.points.size());
  for (const auto& [x, y] : fit.points) {
    sx += x;
    sy += y;
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (const auto& [x, y] : fit.points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx == 0.0) throw InputError("binding_slope: all xi values are equal");
  fit.m = sxy / sxx;
  fit.b = my - fit.m * mx;
  for (const auto& [x, y] : fit.points) fit.residual = std::max(fit.residual, std::abs(y - (fit.m * x + fit.b)));
  // E_b in kcal/mol -> J/mol, then divided by N_A kB T (J/mol).
  fit.m_s = -fit.m * codata::joule_per_kcal / (codata::avogadro * codata::boltzmann * temperature);
  return fit;
}

std::vector<double> xi_grid(double start, double step, double end) {
  if (!(step != 0.0) || !std::isfinite(start) || !std::isfinite(step) || !std::isfinite(end))
    throw InputError("xi grid: step must be nonzero and all values finite");
  if ((end - start) / step < -0.5) throw InputError("xi grid: step points away from the end value");
  std::vector<double> xs;
  const long n = std::lround(std::floor((end - start) / step + 0.5));
  for (long j = 0; j <= n; ++j) xs.push_back(start + step * static_cast<double>(j));
  return xs;
}

double born_analytic(const Vec3& r, const ChargeSystem& charges, const ModelParams& params) {
  if (charges.size() != 1) throw InputError("born_analytic: exactly one charge required");
  const auto& a = charges.atoms()[0];
  if (!(a.radius > 0.0)) throw InputError("born_analytic: ball radius must be positive");
  const double d = norm(r - a.position);
  const double k = params.alpha * a.charge / (4.0 * std::numbers::pi);
  if (d < a.radius) return k * (1.0 / params.eps_s - 1.0 / params.eps_p) / a.radius + k / (params.eps_p * d);
  return k / (params.eps_s * d);
}

double rel_l2_error(const HybridProblem& problem, const CompositeField& u_h, const ScalarFunction& u_ref) {
  const auto& lat = problem.partition().lattice();
  const auto& mesh = problem.mesh();
  const auto& coul = problem.coulomb();
  const double guard = 0.5 * lat.h();
  double num = 0.0, den = 0.0;
  auto add = [&](const Vec3& p, double uh) {
    if (coul.nearest_atom_distance(p) < guard) return;
    const double u = u_ref(p);
    num += (u - uh) * (u - uh);
    den += u * u;
  };
  for (std::size_t L = 0; L < lat.size(); ++L) add(lat.point(L), u_h.lattice[L]);
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v)
    if (mesh.lattice_link[v] < 0) add(mesh.vertices[v], u_h.mesh[v]);
  if (den == 0.0) throw InputError("rel_l2_error: reference solution vanishes");
  return std::sqrt(num / den);
}

}  // namespace smpbe
