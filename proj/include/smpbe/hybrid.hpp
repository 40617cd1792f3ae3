#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smpbe/coulomb.hpp"
#include "smpbe/fem.hpp"
#include "smpbe/mesh.hpp"
#include "smpbe/model.hpp"
#include "smpbe/multigrid.hpp"
#include "smpbe/partition.hpp"

namespace smpbe {

using ScalarFunction = std::function<double(const Vec3&)>;

struct SolverConfig {
  double omega_psi = 1.275;
  double omega_p = 1.225;
  double tol_dd = 1e-6;
  int max_sweeps = 100;
  double tol_newton = 1e-7;
  int max_newton = 50;
  double tol_linear = 1e-8;
  int max_linear = 500;
  int max_halvings = 20;
  ScalarFunction boundary_u;      // u on the outer boundary; empty means zero
  ScalarFunction solvent_source;  // excess charge density in the solvent; empty means none
  bool first_direction_start = false;
  bool gradient_stop = false;     // stop on ||J'|| < tol_newton instead of the update size
  std::array<int, 6> box_order{0, 1, 2, 3, 4, 5};  // outer boxes per sweep; the central box always comes last

  void validate() const;
};

/// Scalar field stored on the global lattice and on the central-box mesh nodes. Mesh nodes that
/// coincide with lattice points carry the lattice value.
struct CompositeField {
  std::vector<double> lattice;
  std::vector<double> mesh;

  CompositeField() = default;
  CompositeField(std::size_t lattice_points, std::size_t mesh_nodes, double value = 0.0)
      : lattice(lattice_points, value), mesh(mesh_nodes, value) {}
};

/// Value transfer between the lattice, the FD boxes and the mesh.
class Coupling {
 public:
  Coupling(const BoxPartition& partition, const InterfaceMesh& mesh);

  const BoxPartition& partition() const { return *part_; }
  const InterfaceMesh& mesh() const { return *mesh_; }

  /// Box grid values of an FD box (box index 0..5) read from the lattice.
  std::vector<double> read_box(const CompositeField& f, int box) const;
  /// Overwrites the lattice at the interior points of an FD box.
  void write_box_interior(CompositeField& f, int box, std::span<const double> values) const;
  /// Mesh nodes coinciding with lattice points take the lattice value.
  void lattice_to_mesh(CompositeField& f) const;
  /// Lattice points of the central box take the mesh value (copy or P1 interpolation).
  void mesh_to_lattice(CompositeField& f) const;

  /// Lattice points inside the central box not represented by a mesh node.
  std::size_t interpolated_points() const { return interp_.size(); }
  bool lattice_point_is_dof(std::size_t idx) const { return lattice_dof_[idx] != 0; }

 private:
  struct Interp {
    std::size_t lattice;
    std::array<int, 4> nodes;
    std::array<double, 4> w;
  };

  const BoxPartition* part_;
  const InterfaceMesh* mesh_;
  std::vector<std::pair<int, std::size_t>> links_;  // mesh node, lattice index
  std::vector<Interp> interp_;
  std::vector<char> lattice_dof_;  // lattice point carries its own value (not inside the central box)
};

/// Discrete energy functional of the regular component over the whole domain: P1 elements on the
/// mesh plus Kuhn elements on the lattice cubes outside the central box, vertex-rule integration of
/// the solvent terms. `U` is G + Psi, `S` the optional solvent source.
class EnergyFunctional {
 public:
  EnergyFunctional(const Coupling& coupling, const FemSpace& space, const ModelParams& params,
                   const CompositeField& U, const CompositeField* S);

  double value(const CompositeField& v) const;
  /// J(v + d) - J(v) without cancellation.
  double delta(const CompositeField& v, const CompositeField& d) const;
  /// Residual functional J'(v) on the free degrees of freedom (zero elsewhere).
  CompositeField gradient(const CompositeField& v) const;
  /// J''(v) d on the free degrees of freedom.
  CompositeField hessian_apply(const CompositeField& v, const CompositeField& d) const;
  /// Euclidean inner product over the free degrees of freedom.
  double dot(const CompositeField& a, const CompositeField& b) const;
  double norm(const CompositeField& a) const { return std::sqrt(dot(a, a)); }

 private:
  double reaction_sum(const CompositeField& v, const CompositeField* d) const;
  void stiffness_apply(const CompositeField& v, CompositeField& out) const;
  void lumped_apply(const CompositeField& v, const CompositeField* d, CompositeField& out, bool second) const;

  const Coupling* c_;
  const FemSpace* space_;
  ModelParams params_;
  const CompositeField* U_;
  const CompositeField* S_;
  std::vector<double> lat_mass_;            // solvent mass of lattice points not carried by the mesh
  std::vector<std::array<double, 3>> lat_edge_;  // +x, +y, +z edge weights (eps_s included)
  std::vector<char> mesh_free_;
  std::vector<char> lat_free_;
};

struct NewtonStep {
  double lambda = 0.0;
  int halvings = 0;
  int sweeps = 0;
  double J = 0.0;
  double J_prime_norm = 0.0;
  double update_norm = 0.0;
  bool accepted_by_energy = false;
};

struct SolveReport {
  int psi_sweeps = 0;
  bool psi_converged = false;
  std::vector<int> mg_iterations;    // one entry per FD box solve
  std::vector<int> ilu_iterations;   // one entry per FEM box solve
  std::vector<int> sweep_counts;     // one entry per Schwarz iteration run (psi first)
  std::vector<NewtonStep> newton;
  bool converged = false;
  std::string message;
  double seconds_mesh = 0.0, seconds_psi = 0.0, seconds_newton = 0.0;
  std::size_t lattice_points = 0, mesh_nodes = 0, mesh_tets = 0;

  double mean_mg() const;
  double mean_ilu() const;
  double mean_sweeps() const;
};

/// Everything fixed for one solve: partition, mesh, Coulomb part and cached samples of G.
class HybridProblem {
 public:
  HybridProblem(BoxPartition partition, InterfaceMesh mesh, ChargeSystem charges, ModelParams params);
  HybridProblem(const HybridProblem&) = delete;
  HybridProblem& operator=(const HybridProblem&) = delete;

  const BoxPartition& partition() const { return partition_; }
  const InterfaceMesh& mesh() const { return *mesh_; }
  const ModelParams& params() const { return params_; }
  const CoulombField& coulomb() const { return coulomb_; }
  const Coupling& coupling() const { return *coupling_; }
  const FemSpace& space() const { return *space_; }
  const PointLocator& locator() const { return *locator_; }
  /// G sampled at lattice points and mesh nodes (NaN at atom centres).
  const CompositeField& G() const { return G_; }
  /// Samples a function at lattice points and mesh nodes.
  CompositeField sample(const ScalarFunction& f) const;
  CompositeField zeros() const { return CompositeField(partition_.lattice().size(), mesh_->vertex_count()); }

 private:
  BoxPartition partition_;
  std::unique_ptr<InterfaceMesh> mesh_;
  ModelParams params_;
  CoulombField coulomb_;
  std::unique_ptr<Coupling> coupling_;
  std::unique_ptr<FemSpace> space_;
  std::unique_ptr<PointLocator> locator_;
  CompositeField G_;
};

struct SchwarzResult {
  int sweeps = 0;
  bool converged = false;
  double last_change = 0.0;
};

/// Overlapped box iteration for Psi: Laplace on the six outer boxes, interface problem on the
/// central box, Psi = g - G on the outer boundary.
SchwarzResult solve_psi(const HybridProblem& problem, const SolverConfig& config, CompositeField& psi,
                        SolveReport* report = nullptr);

/// Overlapped box iteration for the Newton direction at phi; U = G + Psi.
SchwarzResult solve_direction(const HybridProblem& problem, const SolverConfig& config, const CompositeField& U,
                              const CompositeField& phi, const CompositeField* S, CompositeField& p,
                              SolveReport* report = nullptr);

struct SmpbeSolution {
  CompositeField psi;
  CompositeField phi;
  CompositeField u;  // G + Psi + Phi
  SolveReport report;
};

/// Psi solve, damped Newton loop for Phi and the composed potential.
SmpbeSolution solve_smpbe(const HybridProblem& problem, const SolverConfig& config);

/// Relative sup-norm change between two fields over lattice points and unlinked mesh nodes.
double relative_change(const Coupling& c, const CompositeField& before, const CompositeField& after);

}  // namespace smpbe
