#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "smpbe/coulomb.hpp"
#include "smpbe/mesh.hpp"
#include "smpbe/model.hpp"
#include "smpbe/multigrid.hpp"

namespace smpbe {

/// Compressed-row sparse matrix with sorted column indices.
struct CsrMatrix {
  int n = 0;
  std::vector<int> ptr{0};
  std::vector<int> col;
  std::vector<double> val;

  std::size_t nnz() const { return col.size(); }
  void multiply(std::span<const double> x, std::span<double> y) const;
  double at(int i, int j) const;
  /// Position of (i, j) in val, or -1 when outside the pattern.
  long find(int i, int j) const;
};

/// Builds an n-by-n matrix from (row, col, value) triplets, summing duplicates.
CsrMatrix csr_from_triplets(int n, std::vector<std::array<double, 3>> triplets);

/// Zero-fill incomplete LDL^T factorization; falls back to the diagonal when a pivot breaks down.
class IncompleteCholesky {
 public:
  explicit IncompleteCholesky(const CsrMatrix& A);
  bool diagonal_fallback() const { return fallback_; }
  void apply(std::span<const double> r, std::span<double> z) const;

 private:
  const CsrMatrix* A_;
  std::vector<double> lu_;  // strictly lower part holds L, diagonal holds D, upper part holds D L^T
  std::vector<int> diag_;
  std::vector<double> inv_diag_;
  bool fallback_ = false;
};

using Preconditioner = std::function<void(std::span<const double>, std::span<double>)>;

/// Preconditioned CG from the initial guess in x; stops at ||b - Ax|| <= tol ||b|| (1e-12 if b = 0).
LinearSolveStats pcg(const CsrMatrix& A, std::span<const double> b, std::span<double> x, double tol,
                     int max_iter, const Preconditioner& precond = {});

/// Per-element geometry of a mesh: volumes and gradients of the barycentric basis functions.
class FemSpace {
 public:
  explicit FemSpace(const InterfaceMesh& mesh);

  const InterfaceMesh& mesh() const { return *mesh_; }
  int nodes() const { return static_cast<int>(mesh_->vertices.size()); }
  double volume(std::size_t t) const { return vol_[t]; }
  const std::array<Vec3, 4>& gradients(std::size_t t) const { return grad_[t]; }

  /// Vertex-rule weights: sum of |K|/4 over solvent tets K containing the node.
  const std::vector<double>& solvent_mass() const { return mass_s_; }
  /// Nodes touching at least one solvent tet.
  bool in_solvent(int node) const { return mass_s_[node] > 0.0; }

  /// Stiffness matrix of (eps grad u, grad v) over all nodes, eps_p on solute and eps_s on solvent.
  CsrMatrix stiffness(double eps_p, double eps_s) const;
  /// a(u, v) applied to a nodal vector.
  void apply_stiffness(double eps_p, double eps_s, std::span<const double> u, std::span<double> out) const;
  /// ((eps_p - eps_s) grad G, grad v) over the solvent tets.
  std::vector<double> psi_rhs(const CoulombField& coulomb, double eps_p, double eps_s) const;

 private:
  const InterfaceMesh* mesh_;
  std::vector<double> vol_;
  std::vector<std::array<Vec3, 4>> grad_;
  std::vector<double> mass_s_;
  CsrMatrix pattern_;
};

/// Free-node system obtained by eliminating Dirichlet nodes; the Dirichlet part is kept so that
/// the right-hand side can be refreshed cheaply when only the boundary data changes.
struct SparseSystem {
  CsrMatrix matrix;                 // free x free
  CsrMatrix coupling;               // free x dirichlet (columns in dirichlet numbering)
  std::vector<double> load;         // free-node load before boundary elimination
  std::vector<int> free_nodes;      // free index -> node
  std::vector<int> dirichlet_nodes; // dirichlet index -> node
  std::vector<int> node_index;      // node -> free index, or -(dirichlet index) - 1

  /// load - coupling * g for Dirichlet values g given per node.
  std::vector<double> rhs(std::span<const double> nodal_values) const;
  int free_count() const { return matrix.n; }
};

/// Splits a full nodal system into free/Dirichlet blocks.
SparseSystem eliminate_dirichlet(const CsrMatrix& full, std::span<const double> load,
                                 std::span<const int> dirichlet_nodes);

/// a(., .) with the interface coefficients and load ((eps_p - eps_s) grad G, grad v)_solvent.
SparseSystem assemble_psi_system(const FemSpace& space, const CoulombField& coulomb, const ModelParams& params);

/// Newton direction system: a(p, v) + (nl'(w) p, v)_solvent with load
/// -a(phi, v) - (nl(w) - S, v)_solvent; all integrands of the solvent terms use the vertex rule.
SparseSystem assemble_direction_system(const FemSpace& space, std::span<const double> w,
                                       std::span<const double> phi, const ModelParams& params,
                                       std::span<const double> source = {});

struct FemSolveResult {
  std::vector<double> nodal;  // full nodal vector with Dirichlet values filled in
  LinearSolveStats stats;
};

/// Solves a SparseSystem by IC(0)-preconditioned CG with Dirichlet data taken from `nodal_guess`,
/// whose free entries also serve as the initial guess.
FemSolveResult pcg_ilu(const SparseSystem& system, std::span<const double> nodal_guess, double tol_rel = 1e-8,
                       int max_iter = 1000);

}  // namespace smpbe
