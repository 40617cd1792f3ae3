#include "smpbe/multigrid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "smpbe/error.hpp"

namespace smpbe {

void BandedCholesky::factor() {
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t kmin = i > bw_ ? i - bw_ : 0;
    for (std::size_t j = kmin; j < i; ++j) {
      double s = at(i, i - j);
      const std::size_t k0 = std::max(kmin, j > bw_ ? j - bw_ : 0);
      for (std::size_t k = k0; k < j; ++k) s -= at(i, i - k) * at(j, j - k);
      at(i, i - j) = s / at(j, 0);
    }
    double d = at(i, 0);
    for (std::size_t k = kmin; k < i; ++k) d -= at(i, i - k) * at(i, i - k);
    if (!(d > 0.0)) throw SolverError("BandedCholesky: matrix is not positive definite");
    at(i, 0) = std::sqrt(d);
  }
}

void BandedCholesky::solve(std::span<double> x) const {
  for (std::size_t i = 0; i < n_; ++i) {
    double s = x[i];
    const std::size_t kmin = i > bw_ ? i - bw_ : 0;
    for (std::size_t k = kmin; k < i; ++k) s -= at(i, i - k) * x[k];
    x[i] = s / at(i, 0);
  }
  for (std::size_t ii = n_; ii-- > 0;) {
    double s = x[ii];
    const std::size_t kmax = std::min(n_ - 1, ii + bw_);
    for (std::size_t k = ii + 1; k <= kmax; ++k) s -= at(k, k - ii) * x[k];
    x[ii] = s / at(ii, 0);
  }
}

namespace {

bool can_coarsen(const UniformGrid& g) {
  for (int ax = 0; ax < 3; ++ax) {
    // Coarsest once some direction has only one or two interior points.
    if (g.dims[ax] - 1 <= 2) return false;
    if (g.dims[ax] % 2 != 0) return false;
  }
  return true;
}

}  // namespace

MGHierarchy::MGHierarchy(const UniformGrid& grid, double diffusion, std::span<const double> reaction)
    : diffusion_(diffusion) {
  for (int ax = 0; ax < 3; ++ax) {
    if (grid.dims[ax] < 2) throw InputError("MGHierarchy: grid needs at least one interior point per axis");
  }
  Level fine;
  fine.grid = grid;
  fine.reaction.assign(reaction.begin(), reaction.end());
  levels_.push_back(std::move(fine));
  while (can_coarsen(levels_.back().grid)) {
    const auto& f = levels_.back();
    Level c;
    c.grid.origin = f.grid.origin;
    c.grid.h = 2.0 * f.grid.h;
    c.grid.dims = {f.grid.dims[0] / 2, f.grid.dims[1] / 2, f.grid.dims[2] / 2};
    if (!f.reaction.empty()) {
      c.reaction.assign(c.grid.size(), 0.0);
      for (int k = 0; k < c.grid.nz(); ++k)
        for (int j = 0; j < c.grid.ny(); ++j)
          for (int i = 0; i < c.grid.nx(); ++i)
            c.reaction[c.grid.index(i, j, k)] = f.reaction[f.grid.index(2 * i, 2 * j, 2 * k)];
    }
    levels_.push_back(std::move(c));
  }
  for (auto& l : levels_) {
    l.x.assign(l.grid.size(), 0.0);
    l.b.assign(l.grid.size(), 0.0);
    l.r.assign(l.grid.size(), 0.0);
  }

  const auto& cg = levels_.back().grid;
  const std::size_t nix = cg.dims[0] - 1, niy = cg.dims[1] - 1, niz = cg.dims[2] - 1;
  const std::size_t n = nix * niy * niz;
  const double w = diffusion_ / (cg.h * cg.h);
  const auto& cr = levels_.back().reaction;
  coarse_ = BandedCholesky(n, nix * niy, [&](std::size_t row, std::size_t d) -> double {
    const std::size_t i = row % nix, j = (row / nix) % niy;
    if (d == 0) {
      const std::size_t k = row / (nix * niy);
      const double c = cr.empty() ? 0.0 : cr[cg.index(int(i + 1), int(j + 1), int(k + 1))];
      return 6.0 * w + c;
    }
    if (d == 1) return i > 0 ? -w : 0.0;
    if (d == nix) return j > 0 ? -w : 0.0;
    if (d == nix * niy) return -w;
    return 0.0;
  });
}

std::size_t MGHierarchy::coarsest_unknowns() const { return coarse_.size(); }

void MGHierarchy::apply(std::span<const double> v, std::span<double> out) const {
  apply_stencil(levels_[0].grid, diffusion_, levels_[0].reaction, v, out);
}

void MGHierarchy::smooth(int k, bool forward) const {
  const auto& L = levels_[k];
  const auto& g = L.grid;
  const int nx = g.nx(), ny = g.ny(), nz = g.nz();
  const std::size_t sy = nx, sz = static_cast<std::size_t>(nx) * ny;
  const double w = diffusion_ / (g.h * g.h);
  const double d0 = 6.0 * w;
  auto& x = L.x;
  const auto& b = L.b;
  const bool has_c = !L.reaction.empty();
  if (forward) {
    for (int kk = 1; kk < nz - 1; ++kk)
      for (int j = 1; j < ny - 1; ++j) {
        std::size_t idx = g.index(1, j, kk);
        for (int i = 1; i < nx - 1; ++i, ++idx) {
          const double nb = x[idx - 1] + x[idx + 1] + x[idx - sy] + x[idx + sy] + x[idx - sz] + x[idx + sz];
          x[idx] = (b[idx] + w * nb) / (d0 + (has_c ? L.reaction[idx] : 0.0));
        }
      }
  } else {
    for (int kk = nz - 2; kk >= 1; --kk)
      for (int j = ny - 2; j >= 1; --j) {
        std::size_t idx = g.index(nx - 2, j, kk);
        for (int i = nx - 2; i >= 1; --i, --idx) {
          const double nb = x[idx - 1] + x[idx + 1] + x[idx - sy] + x[idx + sy] + x[idx - sz] + x[idx + sz];
          x[idx] = (b[idx] + w * nb) / (d0 + (has_c ? L.reaction[idx] : 0.0));
        }
      }
  }
}

void MGHierarchy::restrict_to(int k, std::span<const double> fine, std::span<double> coarse) const {
  const auto& fg = levels_[k].grid;
  const auto& cg = levels_[k + 1].grid;
  std::fill(coarse.begin(), coarse.end(), 0.0);
  static constexpr double w1[3] = {0.25, 0.5, 0.25};
  for (int K = 1; K < cg.nz() - 1; ++K)
    for (int J = 1; J < cg.ny() - 1; ++J)
      for (int I = 1; I < cg.nx() - 1; ++I) {
        double s = 0.0;
        for (int dk = -1; dk <= 1; ++dk)
          for (int dj = -1; dj <= 1; ++dj) {
            const double wjk = w1[dj + 1] * w1[dk + 1];
            const std::size_t base = fg.index(2 * I, 2 * J + dj, 2 * K + dk);
            s += wjk * (0.25 * fine[base - 1] + 0.5 * fine[base] + 0.25 * fine[base + 1]);
          }
        coarse[cg.index(I, J, K)] = s;
      }
}

void MGHierarchy::prolong_add(int k, std::span<const double> coarse, std::span<double> fine) const {
  const auto& fg = levels_[k].grid;
  const auto& cg = levels_[k + 1].grid;
  for (int kk = 1; kk < fg.nz() - 1; ++kk) {
    const int K0 = kk / 2, K1 = (kk + 1) / 2;
    const double wk = (kk % 2 == 0) ? 1.0 : 0.5;
    for (int j = 1; j < fg.ny() - 1; ++j) {
      const int J0 = j / 2, J1 = (j + 1) / 2;
      const double wj = (j % 2 == 0) ? 1.0 : 0.5;
      std::size_t idx = fg.index(1, j, kk);
      for (int i = 1; i < fg.nx() - 1; ++i, ++idx) {
        const int I0 = i / 2, I1 = (i + 1) / 2;
        const double wi = (i % 2 == 0) ? 1.0 : 0.5;
        double s;
        if (i % 2 == 0 && j % 2 == 0 && kk % 2 == 0) {
          s = coarse[cg.index(I0, J0, K0)];
        } else {
          s = 0.0;
          const int Is[2] = {I0, I1}, Js[2] = {J0, J1}, Ks[2] = {K0, K1};
          const int ni = (i % 2 == 0) ? 1 : 2, nj = (j % 2 == 0) ? 1 : 2, nk = (kk % 2 == 0) ? 1 : 2;
          for (int c = 0; c < nk; ++c)
            for (int b = 0; b < nj; ++b)
              for (int a = 0; a < ni; ++a) s += coarse[cg.index(Is[a], Js[b], Ks[c])];
          s *= wi * wj * wk;
        }
        fine[idx] += s;
      }
    }
  }
}

void MGHierarchy::cycle(int k) const {
  const auto& L = levels_[k];
  if (k == levels() - 1) {
    const auto& g = L.grid;
    const int nix = g.dims[0] - 1, niy = g.dims[1] - 1, niz = g.dims[2] - 1;
    std::vector<double> tmp(coarse_.size());
    std::size_t row = 0;
    for (int kk = 1; kk <= niz; ++kk)
      for (int j = 1; j <= niy; ++j)
        for (int i = 1; i <= nix; ++i) tmp[row++] = L.b[g.index(i, j, kk)];
    coarse_.solve(tmp);
    std::fill(L.x.begin(), L.x.end(), 0.0);
    row = 0;
    for (int kk = 1; kk <= niz; ++kk)
      for (int j = 1; j <= niy; ++j)
        for (int i = 1; i <= nix; ++i) L.x[g.index(i, j, kk)] = tmp[row++];
    return;
  }
  std::fill(L.x.begin(), L.x.end(), 0.0);
  smooth(k, true);
  apply_stencil(L.grid, diffusion_, L.reaction, L.x, L.r);
  for (std::size_t i = 0; i < L.r.size(); ++i) L.r[i] = L.b[i] - L.r[i];
  // Boundary entries of r are meaningless after the subtraction; restriction only reads interior.
  const auto& C = levels_[k + 1];
  restrict_to(k, L.r, C.b);
  cycle(k + 1);
  prolong_add(k, C.x, L.x);
  smooth(k, false);
}

void MGHierarchy::vcycle(std::span<const double> rhs, std::span<double> out) const {
  auto& L = levels_[0];
  std::copy(rhs.begin(), rhs.end(), L.b.begin());
  cycle(0);
  std::copy(L.x.begin(), L.x.end(), out.begin());
}

FdBoxSolver::FdBoxSolver(const UniformGrid& grid, double diffusion, std::vector<double> reaction)
    : grid_(grid), diffusion_(diffusion), reaction_(std::move(reaction)), hier_(grid, diffusion, reaction_) {}

LinearSolveStats FdBoxSolver::solve(std::span<const double> rhs, std::span<double> solution,
                                    double tol_rel, int max_iter) const {
  const auto& g = grid_;
  const std::size_t n = g.size();
  BoxProblem prob;
  prob.grid = g;
  prob.diffusion = diffusion_;
  prob.rhs.assign(rhs.begin(), rhs.end());
  prob.dirichlet.assign(solution.begin(), solution.end());
  const auto b = folded_rhs(prob);

  std::vector<double> x(n, 0.0), r(n), z(n), p(n), Ap(n);
  for (int k = 1; k < g.nz() - 1; ++k)
    for (int j = 1; j < g.ny() - 1; ++j)
      for (int i = 1; i < g.nx() - 1; ++i) {
        const auto idx = g.index(i, j, k);
        x[idx] = solution[idx];
      }
  hier_.apply(x, Ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];

  auto dotv = [](const std::vector<double>& a, const std::vector<double>& c) {
    return std::inner_product(a.begin(), a.end(), c.begin(), 0.0);
  };
  const double bnorm = std::sqrt(dotv(b, b));
  const double target = bnorm > 0.0 ? tol_rel * bnorm : 1e-12;
  double rnorm = std::sqrt(dotv(r, r));
  LinearSolveStats stats;
  auto finish = [&]() {
    stats.relative_residual = bnorm > 0.0 ? rnorm / bnorm : rnorm;
    for (int k = 1; k < g.nz() - 1; ++k)
      for (int j = 1; j < g.ny() - 1; ++j)
        for (int i = 1; i < g.nx() - 1; ++i) {
          const auto idx = g.index(i, j, k);
          solution[idx] = x[idx];
        }
    return stats;
  };
  if (rnorm <= target) {
    stats.converged = true;
    return finish();
  }
  hier_.vcycle(r, z);
  p = z;
  double rz = dotv(r, z);
  for (int it = 1; it <= max_iter; ++it) {
    hier_.apply(p, Ap);
    const double pAp = dotv(p, Ap);
    if (!(pAp > 0.0)) throw SolverError("PCG-MG: operator not positive definite");
    const double a = rz / pAp;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += a * p[i];
      r[i] -= a * Ap[i];
    }
    rnorm = std::sqrt(dotv(r, r));
    stats.iterations = it;
    if (rnorm <= target) {
      stats.converged = true;
      return finish();
    }
    hier_.vcycle(r, z);
    const double rz_new = dotv(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return finish();
}

PcgResult pcg_mg(const BoxProblem& problem, double tol_rel, int max_iter) {
  problem.validate();
  FdBoxSolver solver(problem.grid, problem.diffusion, problem.reaction);
  PcgResult res;
  res.solution.assign(problem.grid.size(), 0.0);
  if (!problem.dirichlet.empty()) {
    const auto& g = problem.grid;
    for (int k = 0; k < g.nz(); ++k)
      for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i)
          if (i == 0 || j == 0 || k == 0 || i == g.nx() - 1 || j == g.ny() - 1 || k == g.nz() - 1)
            res.solution[g.index(i, j, k)] = problem.dirichlet[g.index(i, j, k)];
  }
  std::vector<double> rhs = problem.rhs.empty() ? std::vector<double>(problem.grid.size(), 0.0) : problem.rhs;
  res.stats = solver.solve(rhs, res.solution, tol_rel, max_iter);
  return res;
}

}  // namespace smpbe
