#pragma once

#include <span>
#include <vector>

#include "smpbe/partition.hpp"

namespace smpbe {

/// -diffusion * Laplace_h(u) + reaction * u = rhs on the interior of a uniform box grid with
/// Dirichlet data on its six faces. All per-point arrays cover the full grid (boundary included).
struct BoxProblem {
  UniformGrid grid;
  double diffusion = 1.0;
  std::vector<double> reaction;   // empty means zero everywhere
  std::vector<double> rhs;        // empty means zero; interior entries used
  std::vector<double> dirichlet;  // boundary entries used; empty means zero

  void validate() const;
};

/// (-diffusion Laplace_h v + c v) at interior points using v's own boundary values; boundary
/// entries of the result are zero.
void apply_stencil(const UniformGrid& grid, double diffusion, std::span<const double> reaction,
                   std::span<const double> v, std::span<double> out);

/// Matrix-free A v over interior unknowns: boundary entries of v are treated as zero.
std::vector<double> apply_operator(const BoxProblem& problem, std::span<const double> v);

/// Right-hand side with the Dirichlet data eliminated: rhs + diffusion/h^2 * (boundary neighbours).
std::vector<double> folded_rhs(const BoxProblem& problem);

/// 7-point Laplacian of a lattice field at the interior points of `box`, returned on the box grid.
std::vector<double> discrete_laplacian(const Lattice& lattice, std::span<const double> values,
                                       const IndexBox& box);

}  // namespace smpbe
