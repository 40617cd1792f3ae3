#pragma once

#include <span>
#include <utility>
#include <vector>

#include "smpbe/hybrid.hpp"
#include "smpbe/model.hpp"

namespace smpbe {

enum class IonModel { SMPBE, PBE };

struct Concentrations {
  double na = 0.0;  // mol/L
  double cl = 0.0;  // mol/L
  bool saturated = false;  // PBE value overflowed and was clamped
};

/// Sodium and chloride concentrations at potential u (kB T/e_c).
Concentrations concentrations(double u, const ModelParams& params, IonModel model = IonModel::SMPBE);

/// Upper bound 1e27/(N_A Lambda^3) of the size-modified concentrations.
double saturation_concentration(double Lambda);

/// N_A kB T / 4184, the kcal/mol value of one kB T per molecule.
double kcal_per_mol_per_kT(double temperature);

struct EnergyReport {
  double dE = 0.0;                 // kcal/mol
  std::vector<double> per_atom;    // kcal/mol
  double I_s = 0.0;
};

/// (N_A kB T / 4184)/2 sum_j z_j (Psi(r_j) + Phi(r_j)) from nodal values on the central mesh.
EnergyReport solvation_energy(const HybridProblem& problem, const CompositeField& psi, const CompositeField& phi);
EnergyReport solvation_energy(const InterfaceMesh& mesh, const PointLocator& locator, std::span<const double> psi,
                              std::span<const double> phi, const ChargeSystem& charges, const ModelParams& params);

struct SlopeFit {
  std::vector<std::pair<double, double>> points;  // (xi = ln I_s, E_b)
  double m = 0.0;
  double b = 0.0;
  double m_s = 0.0;
  double residual = 0.0;
};

/// Least-squares line E_b = m xi + b over xi = ln I_s and the scaled slope -m/(N_A kB T), E_b in kcal/mol.
SlopeFit binding_slope(std::span<const std::pair<double, double>> is_and_energy, double temperature);

/// xi values start, start + step, ... up to end (inclusive within half a step).
std::vector<double> xi_grid(double start, double step, double end);

/// Piecewise potential of a single charge at the centre of a dielectric ball with radius given by
/// the atom radius.
double born_analytic(const Vec3& r, const ChargeSystem& charges, const ModelParams& params);

/// ||u - u_h|| / ||u|| over lattice points and mesh nodes not on the lattice, skipping points
/// within half a mesh step of an atom centre.
double rel_l2_error(const HybridProblem& problem, const CompositeField& u_h, const ScalarFunction& u_ref);

}  // namespace smpbe
