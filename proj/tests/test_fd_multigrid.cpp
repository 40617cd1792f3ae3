#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "smpbe/coulomb.hpp"
#include "smpbe/fd.hpp"
#include "smpbe/multigrid.hpp"
#include "smpbe/partition.hpp"

using namespace smpbe;

namespace {

UniformGrid cube_grid(int n, double L = 1.0, Vec3 origin = {}) { return UniformGrid{origin, L / n, {n, n, n}}; }

template <class F>
void for_each_interior(const UniformGrid& g, F&& f) {
  for (int k = 1; k < g.nz() - 1; ++k)
    for (int j = 1; j < g.ny() - 1; ++j)
      for (int i = 1; i < g.nx() - 1; ++i) f(i, j, k);
}

std::vector<double> random_interior(const UniformGrid& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1, 1);
  std::vector<double> v(g.size(), 0.0);
  for_each_interior(g, [&](int i, int j, int k) { v[g.index(i, j, k)] = d(rng); });
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double manufactured_error(int n) {
  const auto g = cube_grid(n);
  BoxProblem p{g, 1.0, {}, std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0)};
  const double pi = std::numbers::pi;
  auto u = [&](const Vec3& r) { return std::sin(pi * r.x) * std::sin(pi * r.y) * std::sin(pi * r.z); };
  for_each_interior(g, [&](int i, int j, int k) { p.rhs[g.index(i, j, k)] = 3 * pi * pi * u(g.point(i, j, k)); });
  const auto res = pcg_mg(p, 1e-12, 200);
  double num = 0, den = 0;
  for_each_interior(g, [&](int i, int j, int k) {
    const double e = res.solution[g.index(i, j, k)] - u(g.point(i, j, k));
    num += e * e;
    den += u(g.point(i, j, k)) * u(g.point(i, j, k));
  });
  return std::sqrt(num / den);
}

}  // namespace

TEST(Stencil, ConstantIsInKernelAwayFromBoundary) {
  const auto g = cube_grid(6);
  BoxProblem p{g, 80.0, {}, {}, {}};
  std::vector<double> v(g.size(), 0.0);
  for_each_interior(g, [&](int i, int j, int k) { v[g.index(i, j, k)] = 1.0; });
  const auto Av = apply_operator(p, v);
  const double h2 = g.h * g.h;
  for_each_interior(g, [&](int i, int j, int k) {
    int deficit = 0;
    for (int c : {i, j, k}) deficit += (c == 1) + (c == g.nx() - 2);
    EXPECT_NEAR(Av[g.index(i, j, k)], 80.0 * deficit / h2, 1e-9);
  });
}

TEST(Stencil, ExactOnLinearsAndQuadratics) {
  const auto g = cube_grid(8, 2.0, {-1, 0.5, 3});
  std::vector<double> lin(g.size()), quad(g.size()), out(g.size());
  for (int k = 0; k < g.nz(); ++k)
    for (int j = 0; j < g.ny(); ++j)
      for (int i = 0; i < g.nx(); ++i) {
        const Vec3 r = g.point(i, j, k);
        lin[g.index(i, j, k)] = 2 * r.x - r.y + 0.5 * r.z;
        quad[g.index(i, j, k)] = r.x * r.x;
      }
  apply_stencil(g, 80.0, {}, lin, out);
  for_each_interior(g, [&](int i, int j, int k) { EXPECT_NEAR(out[g.index(i, j, k)], 0.0, 1e-10); });
  apply_stencil(g, 80.0, {}, quad, out);
  for_each_interior(g, [&](int i, int j, int k) { EXPECT_NEAR(out[g.index(i, j, k)], -160.0, 1e-9); });

  // with folded Dirichlet data the linear function solves the homogeneous problem
  BoxProblem p{g, 80.0, {}, std::vector<double>(g.size(), 0.0), lin};
  const auto b = folded_rhs(p);
  const auto Av = apply_operator(p, lin);
  for_each_interior(g, [&](int i, int j, int k) {
    EXPECT_NEAR(b[g.index(i, j, k)] - Av[g.index(i, j, k)], 0.0, 1e-8);
  });
}

TEST(Stencil, OperatorIsSymmetric) {
  const auto g = UniformGrid{{0, 0, 0}, 0.3, {8, 6, 7}};
  std::vector<double> c(g.size());
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> d(0, 2);
  for (auto& x : c) x = d(rng);
  BoxProblem p{g, 80.0, c, {}, {}};
  const auto v = random_interior(g, 1), w = random_interior(g, 2);
  const double a = dot(apply_operator(p, v), w), b = dot(v, apply_operator(p, w));
  EXPECT_NEAR(a, b, 1e-12 * std::abs(a));
}

TEST(Stencil, DiscreteLaplacianOfPolynomials) {
  const Lattice lat({-1, -1, -1}, 0.25, 8);
  std::vector<double> one(lat.size(), 1.0), r2(lat.size());
  for (std::size_t L = 0; L < lat.size(); ++L) {
    const Vec3 r = lat.point(L);
    r2[L] = dot(r, r);
  }
  const IndexBox box{{1, 2, 0}, {7, 8, 5}};
  const auto g = lat.grid(box);
  const auto z = discrete_laplacian(lat, one, box);
  const auto s = discrete_laplacian(lat, r2, box);
  for_each_interior(g, [&](int i, int j, int k) {
    EXPECT_EQ(z[g.index(i, j, k)], 0.0);
    EXPECT_NEAR(s[g.index(i, j, k)], 6.0, 1e-11);
  });
}

TEST(Stencil, DiscreteLaplacianOfDistantCoulombPotential) {
  const CoulombField f(ChargeSystem({Atom{{-3, 0, 0}, 1.0, 1.0}}), ModelParams::standard());
  auto worst = [&](int n) {
    const Lattice lat({-1, -1, -1}, 2.0 / n, n);
    std::vector<double> G(lat.size());
    for (std::size_t L = 0; L < lat.size(); ++L) G[L] = f.G(lat.point(L));
    const IndexBox box{{0, 0, 0}, {n, n, n}};
    const auto g = lat.grid(box);
    const auto lap = discrete_laplacian(lat, G, box);
    double w = 0;
    for (const Vec3 q : {Vec3{0, 0, 0}, Vec3{0.5, 0.25, -0.25}, Vec3{-0.5, -0.5, 0.5}}) {
      const int i = static_cast<int>(std::lround((q.x + 1) * n / 2)), j = static_cast<int>(std::lround((q.y + 1) * n / 2)),
                k = static_cast<int>(std::lround((q.z + 1) * n / 2));
      w = std::max(w, std::abs(lap[g.index(i, j, k)]));
    }
    return w;
  };
  const double a = worst(16), b = worst(32);
  EXPECT_NEAR(a / b, 4.0, 0.3);
}

TEST(Multigrid, FourTwoFourPartitionLevelsAndCoarsestUnknowns) {
  const auto part = build_partition({{0, 0, 0}, 1}, 4, 2, 4);
  const int want_levels[6] = {5, 4, 4, 4, 4, 5};
  const std::size_t want_unknowns[6] = {16, 54, 12, 12, 54, 16};
  for (int b = 0; b < 6; ++b) {
    const MGHierarchy h(part.grid(b), 80.0, {});
    EXPECT_EQ(h.levels(), want_levels[b]) << "box " << b;
    EXPECT_EQ(h.coarsest_unknowns(), want_unknowns[b]) << "box " << b;
    for (int k = 1; k < h.levels(); ++k) EXPECT_DOUBLE_EQ(h.level_grid(k).h, 2 * h.level_grid(k - 1).h);
  }
}

TEST(Multigrid, CoarseningStopsAtOneOrTwoInteriorPoints) {
  for (auto dims : {std::array<int, 3>{16, 16, 16}, {16, 8, 32}, {12, 12, 12}, {6, 10, 14}}) {
    const MGHierarchy h(UniformGrid{{0, 0, 0}, 0.1, dims}, 1.0, {});
    const auto& c = h.level_grid(h.levels() - 1);
    bool small = false, odd = false;
    for (int a = 0; a < 3; ++a) {
      small = small || c.dims[a] - 1 <= 2;
      odd = odd || c.dims[a] % 2 != 0;
    }
    EXPECT_TRUE(small || odd);
    for (int k = 0; k + 1 < h.levels(); ++k)
      for (int a = 0; a < 3; ++a) EXPECT_GT(h.level_grid(k).dims[a] - 1, 2);
  }
}

TEST(Multigrid, ProlongationIsEightTimesRestrictionTranspose) {
  const MGHierarchy h(cube_grid(4), 1.0, {});
  ASSERT_GE(h.levels(), 2);
  const auto& fg = h.level_grid(0);
  const auto& cg = h.level_grid(1);
  std::vector<std::size_t> fi, ci;
  for_each_interior(fg, [&](int i, int j, int k) { fi.push_back(fg.index(i, j, k)); });
  for_each_interior(cg, [&](int i, int j, int k) { ci.push_back(cg.index(i, j, k)); });
  std::vector<std::vector<double>> R(ci.size(), std::vector<double>(fi.size())), P(fi.size(), std::vector<double>(ci.size()));
  for (std::size_t f = 0; f < fi.size(); ++f) {
    std::vector<double> e(fg.size(), 0.0), out(cg.size(), 0.0);
    e[fi[f]] = 1.0;
    h.restrict_to(0, e, out);
    for (std::size_t c = 0; c < ci.size(); ++c) R[c][f] = out[ci[c]];
  }
  for (std::size_t c = 0; c < ci.size(); ++c) {
    std::vector<double> e(cg.size(), 0.0), out(fg.size(), 0.0);
    e[ci[c]] = 1.0;
    h.prolong_add(0, e, out);
    for (std::size_t f = 0; f < fi.size(); ++f) P[f][c] = out[fi[f]];
  }
  double nonzero = 0;
  for (std::size_t f = 0; f < fi.size(); ++f)
    for (std::size_t c = 0; c < ci.size(); ++c) {
      EXPECT_EQ(P[f][c], 8.0 * R[c][f]);
      nonzero += std::abs(P[f][c]);
    }
  EXPECT_GT(nonzero, 0.0);
}

TEST(Multigrid, VcycleIsLinearSymmetricPositive) {
  const auto g = cube_grid(8);
  std::vector<double> c(g.size(), 0.0);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 + 0.25 * std::sin(double(i));
  const MGHierarchy h(g, 80.0, c);
  std::vector<double> zero(g.size(), 0.0), out(g.size(), 1.0);
  h.vcycle(zero, out);
  for (double x : out) EXPECT_EQ(x, 0.0);
  for (unsigned s = 0; s < 5; ++s) {
    const auto v = random_interior(g, 10 + s), w = random_interior(g, 20 + s);
    std::vector<double> Mv(g.size()), Mw(g.size());
    h.vcycle(v, Mv);
    h.vcycle(w, Mw);
    const double a = dot(Mv, w), b = dot(v, Mw);
    EXPECT_NEAR(a, b, 1e-10 * std::max(std::abs(a), 1e-300));
    EXPECT_GT(dot(Mv, v), 0.0);
  }
}

TEST(Multigrid, RichardsonContraction) {
  const auto g = cube_grid(32);
  const MGHierarchy h(g, 1.0, {});
  const auto exact = random_interior(g, 42);
  std::vector<double> b(g.size()), x(g.size(), 0.0), Ax(g.size()), r(g.size()), d(g.size()), e(g.size());
  h.apply(exact, b);
  auto error = [&] {
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = x[i] - exact[i];
    return std::sqrt(dot(e, e));
  };
  double prev = error(), worst = 0;
  for (int it = 0; it < 10; ++it) {
    h.apply(x, Ax);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - Ax[i];
    h.vcycle(r, d);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += d[i];
    const double now = error();
    worst = std::max(worst, now / prev);
    prev = now;
  }
  EXPECT_LT(worst, 0.2);
}

TEST(PcgMg, ConstantDirichletData) {
  const auto g = cube_grid(16);
  BoxProblem p{g, 80.0, {}, {}, std::vector<double>(g.size(), 1.0)};
  const auto res = pcg_mg(p, 1e-12, 100);
  EXPECT_TRUE(res.stats.converged);
  for (double v : res.solution) EXPECT_NEAR(v, 1.0, 1e-10);
}

TEST(PcgMg, ZeroProblemNeedsNoIterations) {
  const auto g = cube_grid(8);
  const auto res = pcg_mg(BoxProblem{g, 80.0, {}, {}, {}});
  EXPECT_TRUE(res.stats.converged);
  EXPECT_EQ(res.stats.iterations, 0);
}

TEST(PcgMg, ManufacturedSecondOrder) {
  const double e1 = manufactured_error(8), e2 = manufactured_error(16), e3 = manufactured_error(32);
  EXPECT_NEAR(std::log2(e1 / e2), 2.0, 0.15);
  EXPECT_NEAR(std::log2(e2 / e3), 2.0, 0.1);
}

TEST(PcgMg, IterationsAreMeshIndependent) {
  std::vector<int> its;
  for (int n : {16, 32, 64}) {
    const auto g = cube_grid(n, 4.0);
    BoxProblem p{g, 80.0, {}, std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0)};
    for (int k = 0; k < g.nz(); ++k)
      for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
          const Vec3 r = g.point(i, j, k);
          p.dirichlet[g.index(i, j, k)] = 1.0 / norm(r - Vec3{-1, 2, 2});
        }
    const auto res = pcg_mg(p, 1e-8, 100);
    EXPECT_TRUE(res.stats.converged);
    EXPECT_LE(res.stats.relative_residual, 1e-8);
    its.push_back(res.stats.iterations);
  }
  EXPECT_LE(std::abs(its[1] - its[0]), 2);
  EXPECT_LE(std::abs(its[2] - its[1]), 2);
  EXPECT_LE(its[2], 15);
}

TEST(PcgMg, ReactionProblemMatchesResidualTolerance) {
  const auto g = cube_grid(16, 2.0);
  std::vector<double> c(g.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.8 * (1 + std::cos(0.1 * double(i)));
  BoxProblem p{g, 80.0, c, random_interior(g, 5), std::vector<double>(g.size(), 0.3)};
  const auto res = pcg_mg(p, 1e-10, 100);
  ASSERT_TRUE(res.stats.converged);
  const auto b = folded_rhs(p);
  auto x = res.solution;
  std::vector<double> inner(g.size(), 0.0);
  for_each_interior(g, [&](int i, int j, int k) { inner[g.index(i, j, k)] = x[g.index(i, j, k)]; });
  const auto Ax = apply_operator(p, inner);
  double rn = 0, bn = 0;
  for_each_interior(g, [&](int i, int j, int k) {
    const auto I = g.index(i, j, k);
    rn += (b[I] - Ax[I]) * (b[I] - Ax[I]);
    bn += b[I] * b[I];
  });
  EXPECT_LE(std::sqrt(rn / bn), 1e-10 * 1.0001);
}
