#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "smpbe/vec3.hpp"

namespace smpbe {

// CODATA 2018 exact / recommended values (SI).
namespace codata {
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double boltzmann = 1.380649e-23;  // J/K
inline constexpr double avogadro = 6.02214076e23;  // 1/mol
inline constexpr double joule_per_kcal = 4184.0;
}  // namespace codata

/// Dimensionless SMPBE coefficients for a given temperature and ionic strength.
struct DerivedConstants {
  double alpha = 0.0;   // charge scaling, dimensionless
  double kappa2 = 0.0;  // screening, 1/A^2
  double M = 0.0;       // size modification, 1/A^3
};

/// alpha = 1e10 e^2/(eps0 kB T), kappa^2 = 2 I_s 1e-17 N_A e^2/(eps0 kB T), M = 1e-27 N_A I_s.
DerivedConstants derive_constants(double temperature, double ionic_strength);

/// Physical model parameters. Potentials are in kB T/e_c, lengths in angstroms.
struct ModelParams {
  double eps_p = 2.0;
  double eps_s = 80.0;
  double Lambda = 3.11;
  double T = 298.15;
  double I_s = 0.1;
  double alpha = 0.0;
  double kappa2 = 0.0;
  double M = 0.0;

  /// Builds parameters with alpha, kappa2, M derived from (T, I_s).
  static ModelParams make(double eps_p, double eps_s, double Lambda, double T, double I_s);
  /// The defaults used throughout the numerical tests: eps_p=2, eps_s=80, Lambda=3.11, 298.15 K, 0.1 M.
  static ModelParams standard();

  /// 2 M Lambda^3, the dimensionless packing factor of the size-modified terms.
  double packing() const { return 2.0 * M * Lambda * Lambda * Lambda; }
  /// kB T in joules.
  double kT() const { return codata::boltzmann * T; }

  /// Throws InputError when an invariant is violated.
  void validate() const;
};

struct Atom {
  Vec3 position;
  double charge = 0.0;  // charge number in units of e_c
  double radius = 0.0;  // A
};

/// Atoms of a solute with charges and radii.
class ChargeSystem {
 public:
  ChargeSystem() = default;
  explicit ChargeSystem(std::vector<Atom> atoms);

  std::span<const Atom> atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  double net_charge() const { return net_charge_; }

  /// Copy with every charge multiplied by `factor`.
  ChargeSystem scaled(double factor) const;

 private:
  std::vector<Atom> atoms_;
  double net_charge_ = 0.0;
};

/// Reads ATOM/HETATM records of a PQR stream. The last five numeric fields of each record are
/// x, y, z, charge, radius; every other record is ignored.
ChargeSystem parse_pqr(std::istream& in);
ChargeSystem read_pqr_file(const std::string& path);
/// One ATOM record per atom with 17 significant digits, readable by parse_pqr.
void write_pqr(std::ostream& out, const ChargeSystem& charges);

/// Nonlinear solvent term nl(u) = kappa^2 sinh(u)/(1+2 M Lambda^3 cosh u) and its derivative.
struct ReactionCoeffs {
  double nl = 0.0;
  double nl_prime = 0.0;
};

ReactionCoeffs reaction_coeffs(double u, const ModelParams& params);
double reaction_nl(double u, const ModelParams& params);
double reaction_nl_prime(double u, const ModelParams& params);

/// Antiderivative B(u) of nl: kappa^2/(2 M Lambda^3) ln(1 + 2 M Lambda^3 cosh u), or kappa^2 cosh u
/// in the Lambda = 0 limit. Evaluated without overflow for |u| up to ~1e300 when Lambda > 0.
double reaction_energy(double u, const ModelParams& params);
/// B(u + d) - B(u) computed without cancellation.
double reaction_energy_delta(double u, double d, const ModelParams& params);

}  // namespace smpbe
