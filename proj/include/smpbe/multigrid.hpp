#pragma once

#include <span>
#include <vector>

#include "smpbe/fd.hpp"

namespace smpbe {

/// Banded Cholesky factorization of an SPD matrix with half-bandwidth `bw` (row-major band).
class BandedCholesky {
 public:
  BandedCholesky() = default;
  /// `band(i, d)` supplies A(i, i - d) for d = 0..bw.
  template <class F>
  BandedCholesky(std::size_t n, std::size_t bw, F&& band) : n_(n), bw_(bw), l_(n * (bw + 1), 0.0) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d <= bw && d <= i; ++d) at(i, d) = band(i, d);
    factor();
  }
  std::size_t size() const { return n_; }
  void solve(std::span<double> x) const;

 private:
  double& at(std::size_t i, std::size_t d) { return l_[i * (bw_ + 1) + d]; }
  double at(std::size_t i, std::size_t d) const { return l_[i * (bw_ + 1) + d]; }
  void factor();

  std::size_t n_ = 0;
  std::size_t bw_ = 0;
  std::vector<double> l_;
};

/// Geometric multigrid hierarchy h_k = 2^(k-1) h with rediscretized coarse operators,
/// full-weighting restriction, trilinear prolongation and a direct coarsest solve.
class MGHierarchy {
 public:
  MGHierarchy(const UniformGrid& grid, double diffusion, std::span<const double> reaction);

  int levels() const { return static_cast<int>(levels_.size()); }
  const UniformGrid& level_grid(int k) const { return levels_[k].grid; }
  std::size_t coarsest_unknowns() const;

  /// One V-cycle with zero initial guess: forward Gauss-Seidel pre-smoothing, backward
  /// Gauss-Seidel post-smoothing. `rhs` and `out` are full fine-grid arrays (boundary entries zero).
  void vcycle(std::span<const double> rhs, std::span<double> out) const;

  /// Fine-grid operator applied to v with homogeneous boundary.
  void apply(std::span<const double> v, std::span<double> out) const;

  // Transfer operators between level k (fine) and k+1 (coarse); exposed for testing.
  void restrict_to(int k, std::span<const double> fine, std::span<double> coarse) const;
  void prolong_add(int k, std::span<const double> coarse, std::span<double> fine) const;

 private:
  struct Level {
    UniformGrid grid;
    std::vector<double> reaction;  // empty means zero
    mutable std::vector<double> x, b, r;
  };

  void cycle(int k) const;
  void smooth(int k, bool forward) const;

  double diffusion_ = 1.0;
  std::vector<Level> levels_;
  BandedCholesky coarse_;
};

struct LinearSolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// PCG preconditioned by one V-cycle, owning its hierarchy so it can be reused for several
/// right-hand sides with the same operator.
class FdBoxSolver {
 public:
  FdBoxSolver(const UniformGrid& grid, double diffusion, std::vector<double> reaction);

  const MGHierarchy& hierarchy() const { return hier_; }
  const UniformGrid& grid() const { return grid_; }

  /// `solution` holds the Dirichlet data on its boundary and the initial guess inside; on return
  /// the interior holds the iterate meeting ||b - A x|| <= tol_rel ||b|| (or 1e-12 when b = 0).
  LinearSolveStats solve(std::span<const double> rhs, std::span<double> solution, double tol_rel,
                         int max_iter) const;

 private:
  UniformGrid grid_;
  double diffusion_;
  std::vector<double> reaction_;
  MGHierarchy hier_;
};

struct PcgResult {
  std::vector<double> solution;  // full grid including Dirichlet boundary
  LinearSolveStats stats;
};

/// Solves a BoxProblem by PCG-MG from the zero interior initial guess.
PcgResult pcg_mg(const BoxProblem& problem, double tol_rel = 1e-8, int max_iter = 200);

}  // namespace smpbe
