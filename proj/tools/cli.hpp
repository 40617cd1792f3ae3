#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smpbe/hybrid.hpp"
#include "smpbe/partition.hpp"

namespace smpbe::cli {

enum class Scenario { Born, Dipole, Manufactured, Molecule };
enum class Format { Csv, Vtk };
enum class Boundary { Default, Zero, Analytic };

struct ScanRange {
  double start = 0.0, step = 0.0, end = 0.0;
};

struct RunSpec {
  Scenario scenario = Scenario::Born;
  std::optional<int> n, m, mu;
  double eps_p = 2.0;
  double eps_s = 80.0;
  double lambda = 3.11;
  double I_s = 0.1;
  double temperature = 298.15;
  bool pbe = false;
  double omega_psi = 1.275;
  double omega_p = 1.225;
  double tol_dd = 1e-6;
  double tol_newton = 1e-7;
  double tol_linear = 1e-8;
  double margin = 3.0;
  Boundary boundary = Boundary::Default;
  Format format = Format::Csv;
  std::string pqr;
  std::string mesh;
  std::string receptor;
  std::string ligand;
  std::optional<ScanRange> is_scan;
  std::string out = "smpbe-out";

  void validate() const;
};

Scenario parse_scenario(const std::string& s);
Format parse_format(const std::string& s);
Boundary parse_boundary(const std::string& s);
ScanRange parse_scan(const std::string& s);
std::string to_string(Scenario s);

/// Command line (with an optional key = value config file) to a RunSpec. Returns nullopt and sets
/// `exit_code` when the parser already handled the invocation (help, parse errors).
std::optional<RunSpec> parse_command_line(int argc, const char* const* argv, int& exit_code);

/// Runs the scenario and writes every output file; 0 on success, 2 when a solve did not converge.
int run(const RunSpec& spec, std::ostream& log);

/// printf "%.17g".
std::string fmt(double v);

struct FieldRow {
  double x = 0.0, y = 0.0, z = 0.0, value = 0.0;
};

/// "x,y,z,value" rows for every lattice point, then for mesh nodes not on the lattice.
void write_field_csv(std::ostream& out, const HybridProblem& problem, const CompositeField& f);
std::vector<FieldRow> read_field_csv(std::istream& in);

/// Legacy VTK text: lattice values with -grad u as structured points, mesh values as an unstructured grid.
void write_lattice_vtk(std::ostream& out, const Lattice& lattice, std::span<const double> values);
void write_mesh_vtk(std::ostream& out, const InterfaceMesh& mesh, std::span<const double> values);

/// -grad u by central differences on the lattice (one-sided on the outer boundary).
std::vector<Vec3> negative_gradient(const Lattice& lattice, std::span<const double> values);
void write_gradient_csv(std::ostream& out, const Lattice& lattice, std::span<const Vec3> field);

}  // namespace smpbe::cli
