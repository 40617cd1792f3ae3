#include "smpbe/fd.hpp"

#include <algorithm>
#include <cmath>

#include "smpbe/error.hpp"

namespace smpbe {

void BoxProblem::validate() const {
  for (int ax = 0; ax < 3; ++ax) {
    if (grid.dims[ax] < 2) throw InputError("BoxProblem: at least two intervals per axis required");
  }
  const auto n = grid.size();
  if (!reaction.empty() && reaction.size() != n) throw InputError("BoxProblem: reaction size mismatch");
  if (!rhs.empty() && rhs.size() != n) throw InputError("BoxProblem: rhs size mismatch");
  if (!dirichlet.empty() && dirichlet.size() != n) throw InputError("BoxProblem: dirichlet size mismatch");
  for (double c : reaction) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw InputError("BoxProblem: reaction must be finite and >= 0");
  }
  for (double f : rhs) {
    if (!std::isfinite(f)) throw InputError("BoxProblem: non-finite rhs");
  }
}

void apply_stencil(const UniformGrid& g, double diffusion, std::span<const double> reaction,
                   std::span<const double> v, std::span<double> out) {
  const int nx = g.nx(), ny = g.ny(), nz = g.nz();
  const std::size_t sy = nx, sz = static_cast<std::size_t>(nx) * ny;
  const double w = diffusion / (g.h * g.h);
  std::fill(out.begin(), out.end(), 0.0);
  const bool has_c = !reaction.empty();
  for (int k = 1; k < nz - 1; ++k) {
    for (int j = 1; j < ny - 1; ++j) {
      std::size_t idx = g.index(1, j, k);
      for (int i = 1; i < nx - 1; ++i, ++idx) {
        double a = w * (6.0 * v[idx] - v[idx - 1] - v[idx + 1] - v[idx - sy] - v[idx + sy] -
                        v[idx - sz] - v[idx + sz]);
        if (has_c) a += reaction[idx] * v[idx];
        out[idx] = a;
      }
    }
  }
}

std::vector<double> apply_operator(const BoxProblem& problem, std::span<const double> v) {
  const auto& g = problem.grid;
  std::vector<double> tmp(v.begin(), v.end());
  for (int k = 0; k < g.nz(); ++k)
    for (int j = 0; j < g.ny(); ++j)
      for (int i = 0; i < g.nx(); ++i)
        if (i == 0 || j == 0 || k == 0 || i == g.nx() - 1 || j == g.ny() - 1 || k == g.nz() - 1)
          tmp[g.index(i, j, k)] = 0.0;
  std::vector<double> out(v.size());
  apply_stencil(g, problem.diffusion, problem.reaction, tmp, out);
  return out;
}

std::vector<double> folded_rhs(const BoxProblem& problem) {
  const auto& g = problem.grid;
  std::vector<double> b(g.size(), 0.0);
  const double w = problem.diffusion / (g.h * g.h);
  const int nx = g.nx(), ny = g.ny(), nz = g.nz();
  const bool has_d = !problem.dirichlet.empty();
  auto bnd = [&](int i, int j, int k) -> double {
    if (!has_d) return 0.0;
    if (i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1)
      return problem.dirichlet[g.index(i, j, k)];
    return 0.0;
  };
  for (int k = 1; k < nz - 1; ++k) {
    for (int j = 1; j < ny - 1; ++j) {
      for (int i = 1; i < nx - 1; ++i) {
        const auto idx = g.index(i, j, k);
        double f = problem.rhs.empty() ? 0.0 : problem.rhs[idx];
        if (has_d && (i == 1 || j == 1 || k == 1 || i == nx - 2 || j == ny - 2 || k == nz - 2)) {
          f += w * (bnd(i - 1, j, k) + bnd(i + 1, j, k) + bnd(i, j - 1, k) + bnd(i, j + 1, k) +
                    bnd(i, j, k - 1) + bnd(i, j, k + 1));
        }
        b[idx] = f;
      }
    }
  }
  return b;
}

std::vector<double> discrete_laplacian(const Lattice& lattice, std::span<const double> values,
                                       const IndexBox& box) {
  const auto g = lattice.grid(box);
  std::vector<double> out(g.size(), 0.0);
  const double inv_h2 = 1.0 / (lattice.h() * lattice.h());
  const std::size_t p = lattice.points_per_axis();
  const std::size_t sy = p, sz = p * p;
  for (int k = 1; k < g.nz() - 1; ++k) {
    for (int j = 1; j < g.ny() - 1; ++j) {
      for (int i = 1; i < g.nx() - 1; ++i) {
        const auto L = lattice.index(box.lo[0] + i, box.lo[1] + j, box.lo[2] + k);
        out[g.index(i, j, k)] = inv_h2 * (values[L - 1] + values[L + 1] + values[L - sy] +
                                          values[L + sy] + values[L - sz] + values[L + sz] -
                                          6.0 * values[L]);
      }
    }
  }
  return out;
}

}  // namespace smpbe
