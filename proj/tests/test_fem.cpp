#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "smpbe/analysis.hpp"
#include "smpbe/fem.hpp"
#include "smpbe/hybrid.hpp"
#include "smpbe/mesh.hpp"

using namespace smpbe;

namespace {

InterfaceMesh single_tet(const std::array<Vec3, 4>& v, Region region = Region::Solute) {
  InterfaceMesh m;
  m.vertices.assign(v.begin(), v.end());
  m.tets = {{0, 1, 2, 3}};
  m.regions = {region};
  m.lattice_link.assign(4, -1);
  return m;
}

double symmetry_defect(const CsrMatrix& A) {
  double worst = 0;
  for (int i = 0; i < A.n; ++i)
    for (int p = A.ptr[i]; p < A.ptr[i + 1]; ++p) {
      const int j = A.col[p];
      const double a = A.val[p], b = A.at(j, i);
      worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), 1e-300));
    }
  return worst;
}

class BornMesh : public ::testing::Test {
 protected:
  BornMesh()
      : part(build_partition({{-2, -2, -2}, 4}, 3, 1, 2)),
        mesh(build_central_mesh(part, LevelSetGeometry({Sphere{{0, 0, 0}, 1.0}}))),
        space(mesh) {}

  bool on_box_boundary(int node) const {
    const auto c = part.box_extent(BoxPartition::kCentral);
    const Vec3& p = mesh.vertices[node];
    for (int a = 0; a < 3; ++a)
      if (std::abs(p[a] - c.lo[a]) < 1e-9 || std::abs(p[a] - c.hi()[a]) < 1e-9) return true;
    return false;
  }

  BoxPartition part;
  InterfaceMesh mesh;
  FemSpace space;
};

}  // namespace

TEST(FemElement, ReferenceTetClosedForm) {
  const auto m = single_tet({Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}});
  const FemSpace s(m);
  EXPECT_NEAR(s.volume(0), 1.0 / 6.0, 1e-15);
  const auto K = s.stiffness(3.0, 80.0);
  // gradients (-1,-1,-1), e1, e2, e3 times |K| = 1/6 and eps = 3
  EXPECT_NEAR(K.at(0, 0), 3.0 * 3.0 / 6.0, 1e-14);
  for (int i = 1; i < 4; ++i) {
    EXPECT_NEAR(K.at(i, i), 3.0 / 6.0, 1e-14);
    EXPECT_NEAR(K.at(0, i), -3.0 / 6.0, 1e-14);
    for (int j = 1; j < 4; ++j)
      if (j != i) EXPECT_NEAR(K.at(i, j), 0.0, 1e-14);
  }
}

TEST(FemElement, EnergyOfLinearFunctionOnRandomTets) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::array<Vec3, 4> v;
    for (auto& p : v) p = {d(rng), d(rng), d(rng)};
    const Vec3 e = cross(v[1] - v[0], v[2] - v[0]);
    if (std::abs(dot(e, v[3] - v[0])) < 0.05) continue;
    if (dot(e, v[3] - v[0]) < 0) std::swap(v[1], v[2]);
    const auto m = single_tet(v, Region::Solvent);
    const FemSpace s(m);
    const auto K = s.stiffness(2.0, 5.0);
    const Vec3 a{d(rng), d(rng), d(rng)};
    std::vector<double> u(4), Ku(4);
    for (int i = 0; i < 4; ++i) u[i] = dot(a, v[i]) + 0.7;
    K.multiply(u, Ku);
    double energy = 0;
    for (int i = 0; i < 4; ++i) energy += u[i] * Ku[i];
    const double exact = 5.0 * dot(a, a) * std::abs(dot(e, v[3] - v[0])) / 6.0;
    EXPECT_NEAR(energy, exact, 1e-11 * exact);
    for (int i = 0; i < 4; ++i) {
      double row = 0;
      for (int j = 0; j < 4; ++j) row += K.at(i, j);
      EXPECT_NEAR(row, 0.0, 1e-12 * K.at(i, i));
    }
  }
}

TEST(FemStructured, StiffnessIsSevenPointStencilAndMassIsCellVolume) {
  const auto part = build_partition({{-2, -2, -2}, 4}, 3, 1, 2);
  const auto mesh = build_central_mesh(part, LevelSetGeometry{});
  const FemSpace s(mesh);
  const auto K = s.stiffness(2.0, 80.0);
  const double h = part.h();
  const auto c = part.box_extent(BoxPartition::kCentral);
  auto interior = [&](int n) {
    for (int a = 0; a < 3; ++a)
      if (mesh.vertices[n][a] < c.lo[a] + 0.5 * h || mesh.vertices[n][a] > c.hi()[a] - 0.5 * h) return false;
    return true;
  };
  int checked = 0;
  for (int i = 0; i < K.n; ++i) {
    if (!interior(i)) continue;
    ++checked;
    EXPECT_NEAR(K.at(i, i), 6 * 80.0 * h, 1e-10);
    EXPECT_NEAR(s.solvent_mass()[i], h * h * h, 1e-13);
    for (int p = K.ptr[i]; p < K.ptr[i + 1]; ++p) {
      const int j = K.col[p];
      if (j == i) continue;
      const Vec3 d = mesh.vertices[j] - mesh.vertices[i];
      const bool axis = std::abs(norm(d) - h) < 1e-9;
      EXPECT_NEAR(K.val[p], axis ? -80.0 * h : 0.0, 1e-10);
    }
  }
  EXPECT_GT(checked, 0);
}

TEST_F(BornMesh, StiffnessSymmetricAndAnnihilatesConstants) {
  const auto K = space.stiffness(2.0, 80.0);
  EXPECT_LE(symmetry_defect(K), 1e-12);
  std::vector<double> one(space.nodes(), 1.0), out(space.nodes());
  K.multiply(one, out);
  std::vector<double> out2(space.nodes());
  space.apply_stiffness(2.0, 80.0, one, out2);
  for (int n = 0; n < space.nodes(); ++n) {
    EXPECT_NEAR(out[n], 0.0, 1e-10 * K.at(n, n));
    EXPECT_NEAR(out2[n], out[n], 1e-10 * K.at(n, n));
  }
}

TEST_F(BornMesh, SolventMassEqualsSolventVolume) {
  double vol = 0, all = 0;
  for (std::size_t t = 0; t < mesh.tet_count(); ++t) {
    all += space.volume(t);
    if (mesh.regions[t] == Region::Solvent) vol += space.volume(t);
  }
  double mass = 0;
  for (double m : space.solvent_mass()) mass += m;
  EXPECT_NEAR(mass, vol, 1e-12 * vol);
  const double side = part.box_extent(BoxPartition::kCentral).side;
  EXPECT_NEAR(all, side * side * side, 1e-10);
  // solute volume approximates the unit ball (coarse mesh, h = 0.5)
  EXPECT_NEAR(all - vol, 4.0 / 3.0 * std::numbers::pi, 0.1 * 4.0 / 3.0 * std::numbers::pi);
}

TEST_F(BornMesh, EqualPermittivitiesGiveZeroLoadAndHarmonicExtension) {
  const ModelParams p = ModelParams::make(80, 80, 3.11, 298.15, 0.1);
  const CoulombField G(ChargeSystem({Atom{{0, 0, 0}, 1.0, 1.0}}), p);
  for (double v : space.psi_rhs(G, 80.0, 80.0)) EXPECT_EQ(v, 0.0);
  const auto sys = assemble_psi_system(space, G, p);
  std::vector<double> guess(space.nodes());
  for (int n = 0; n < space.nodes(); ++n) guess[n] = 2 * mesh.vertices[n].x - mesh.vertices[n].z + 1;
  auto exact = guess;
  for (int f : sys.free_nodes) guess[f] = 0.0;
  const auto res = pcg_ilu(sys, guess, 1e-12);
  ASSERT_TRUE(res.stats.converged);
  for (int n = 0; n < space.nodes(); ++n) EXPECT_NEAR(res.nodal[n], exact[n], 1e-9);
}

TEST_F(BornMesh, IncompleteCholeskyMatchesPlainCg) {
  const ModelParams p = ModelParams::standard();
  const CoulombField G(ChargeSystem({Atom{{0, 0, 0}, 1.0, 1.0}}), p);
  const auto sys = assemble_psi_system(space, G, p);
  EXPECT_LE(symmetry_defect(sys.matrix), 1e-12);
  std::vector<double> g(space.nodes(), 0.0);
  for (int n = 0; n < space.nodes(); ++n) g[n] = born_analytic(mesh.vertices[n], G.charges(), p) - G.G_or_nan(mesh.vertices[n]);
  for (int f : sys.free_nodes) g[f] = 0.0;
  const auto ic = pcg_ilu(sys, g, 1e-10);
  const auto b = sys.rhs(g);
  std::vector<double> x(sys.free_count(), 0.0);
  const auto plain = pcg(sys.matrix, b, x, 1e-10, 5000);
  ASSERT_TRUE(ic.stats.converged);
  ASSERT_TRUE(plain.converged);
  double scale = 0;
  for (double v : ic.nodal) scale = std::max(scale, std::abs(v));
  for (int i = 0; i < sys.free_count(); ++i) EXPECT_NEAR(ic.nodal[sys.free_nodes[i]], x[i], 1e-8 * scale);
  EXPECT_LT(ic.stats.iterations, plain.iterations);
}

TEST(FemSolver, DiagonalSystemConvergesImmediately) {
  std::vector<std::array<double, 3>> trip;
  for (int i = 0; i < 50; ++i) trip.push_back({double(i), double(i), 1.0 + 0.01 * i});
  const auto A = csr_from_triplets(50, trip);
  std::vector<double> b(50), x(50, 0.0);
  for (int i = 0; i < 50; ++i) b[i] = std::sin(i + 1.0);
  const IncompleteCholesky ic(A);
  EXPECT_FALSE(ic.diagonal_fallback());
  const auto st = pcg(A, b, x, 1e-8, 10, [&](std::span<const double> r, std::span<double> z) { ic.apply(r, z); });
  EXPECT_TRUE(st.converged);
  EXPECT_LE(st.iterations, 2);
  for (int i = 0; i < 50; ++i) EXPECT_NEAR(x[i], b[i] / (1.0 + 0.01 * i), 1e-12);
}

TEST(FemSolver, TripletsSumDuplicates) {
  const auto A = csr_from_triplets(3, {{0, 0, 1.0}, {0, 0, 2.0}, {2, 1, -1.0}, {1, 2, -1.0}, {1, 1, 4.0}, {2, 2, 4.0}});
  EXPECT_EQ(A.at(0, 0), 3.0);
  EXPECT_EQ(A.at(2, 1), -1.0);
  EXPECT_EQ(A.at(0, 2), 0.0);
  EXPECT_EQ(A.find(0, 2), -1);
  EXPECT_EQ(A.nnz(), 5u);
}

TEST_F(BornMesh, DirectionSystemAtZero) {
  const ModelParams p = ModelParams::standard();
  const std::vector<double> w(space.nodes(), 0.0), phi(space.nodes(), 0.0);
  const auto sys = assemble_direction_system(space, w, phi, p);
  for (double v : sys.load) EXPECT_EQ(v, 0.0);
  const auto K = space.stiffness(p.eps_p, p.eps_s);
  const double c = p.kappa2 / (1.0 + p.packing());
  EXPECT_NEAR(reaction_nl_prime(0.0, p), c, 1e-14 * c);
  for (int a = 0; a < sys.free_count(); ++a)
    for (int q = sys.matrix.ptr[a]; q < sys.matrix.ptr[a + 1]; ++q) {
      const int b = sys.matrix.col[q];
      const int na = sys.free_nodes[a], nb = sys.free_nodes[b];
      const double expect = K.at(na, nb) + (a == b ? c * space.solvent_mass()[na] : 0.0);
      EXPECT_NEAR(sys.matrix.val[q], expect, 1e-12 * std::abs(K.at(na, na)));
    }
}

TEST_F(BornMesh, DirectionLoadVanishesWithoutIonsOrCurrentIterate) {
  const ModelParams p = ModelParams::make(2, 80, 3.11, 298.15, 0.0);
  std::vector<double> w(space.nodes()), phi(space.nodes(), 0.0);
  for (int n = 0; n < space.nodes(); ++n) w[n] = std::cos(mesh.vertices[n].x) * 3;
  const auto sys = assemble_direction_system(space, w, phi, p);
  for (double v : sys.load) EXPECT_EQ(v, 0.0);
}

TEST_F(BornMesh, DirectionSolutionSatisfiesGalerkinOrthogonality) {
  const ModelParams p = ModelParams::standard();
  std::vector<double> w(space.nodes()), phi(space.nodes(), 0.0);
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> d(-2, 2);
  for (int n = 0; n < space.nodes(); ++n) {
    w[n] = d(rng);
    if (!on_box_boundary(n)) phi[n] = 0.1 * d(rng);
  }
  const auto sys = assemble_direction_system(space, w, phi, p);
  EXPECT_LE(symmetry_defect(sys.matrix), 1e-12);
  const std::vector<double> zero(space.nodes(), 0.0);
  const auto res = pcg_ilu(sys, zero, 1e-12);
  ASSERT_TRUE(res.stats.converged);
  std::vector<double> x(sys.free_count()), Ax(sys.free_count());
  for (int i = 0; i < sys.free_count(); ++i) x[i] = res.nodal[sys.free_nodes[i]];
  sys.matrix.multiply(x, Ax);
  const auto b = sys.rhs(zero);
  double rn = 0, bn = 0;
  for (int i = 0; i < sys.free_count(); ++i) {
    rn = std::max(rn, std::abs(b[i] - Ax[i]));
    bn += b[i] * b[i];
  }
  EXPECT_LE(rn, 1e-8 * std::sqrt(bn));
}

TEST_F(BornMesh, RejectsNonFiniteSolventValue) {
  const ModelParams p = ModelParams::standard();
  std::vector<double> w(space.nodes(), 0.0), phi(space.nodes(), 0.0);
  int solvent = -1;
  for (int n = 0; n < space.nodes(); ++n)
    if (space.in_solvent(n)) solvent = n;
  ASSERT_GE(solvent, 0);
  w[solvent] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_ANY_THROW(assemble_direction_system(space, w, phi, p));
}

TEST(FemBorn, PsiAtIonCentre) {
  const ModelParams p = ModelParams::make(2, 80, 3.11, 298.15, 0.0);
  const ChargeSystem cs({Atom{{0, 0, 0}, 1.0, 1.0}});
  auto part = build_partition({{-2, -2, -2}, 4}, 4, 2, 2);
  auto mesh = build_central_mesh(part, LevelSetGeometry::from_charges(cs));
  const HybridProblem prob(std::move(part), std::move(mesh), cs, p);
  SolverConfig cfg;
  cfg.boundary_u = [&](const Vec3& r) { return born_analytic(r, cs, p); };
  auto psi = prob.zeros();
  const auto res = solve_psi(prob, cfg, psi);
  ASSERT_TRUE(res.converged);
  const std::vector<Vec3> origin{Vec3{0, 0, 0}};
  const double v = eval_at_points(prob.mesh(), prob.locator(), psi.mesh, origin)[0];
  const double exact = p.alpha / (4 * std::numbers::pi) * (1 / p.eps_s - 1 / p.eps_p);
  EXPECT_NEAR(exact, -273.2, 0.05);
  EXPECT_NEAR(v, exact, 0.02 * std::abs(exact));
}

TEST_F(BornMesh, EvaluationReproducesLinearsAndNodalValues) {
  const PointLocator loc = make_locator(mesh, part);
  auto f = [](const Vec3& r) { return 3 * r.x - 2 * r.y + 0.5 * r.z - 1; };
  std::vector<double> nodal(space.nodes());
  for (int n = 0; n < space.nodes(); ++n) nodal[n] = f(mesh.vertices[n]);
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> d(-2.9, 2.9);
  std::vector<Vec3> pts;
  for (int i = 0; i < 200; ++i) pts.push_back({d(rng), d(rng), d(rng)});
  const auto vals = eval_at_points(mesh, loc, nodal, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(vals[i], f(pts[i]), 1e-11);

  std::vector<double> rnd(space.nodes());
  for (auto& v : rnd) v = d(rng);
  std::vector<Vec3> verts(mesh.vertices.begin(), mesh.vertices.begin() + 50);
  const auto at = eval_at_points(mesh, loc, rnd, verts);
  for (int i = 0; i < 50; ++i) EXPECT_NEAR(at[i], rnd[i], 1e-12);
}

TEST_F(BornMesh, SharedFaceValueIsSingleValued) {
  const PointLocator loc = make_locator(mesh, part);
  std::vector<double> rnd(space.nodes());
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> d(-1, 1);
  for (auto& v : rnd) v = d(rng);
  int checked = 0;
  for (std::size_t t = 0; t < mesh.tet_count() && checked < 40; t += 97) {
    const auto& T = mesh.tets[t];
    const Vec3 c = (mesh.vertices[T[0]] + mesh.vertices[T[1]] + mesh.vertices[T[2]]) * (1.0 / 3.0);
    const auto cube = part.box_extent(BoxPartition::kCentral);
    bool outer = false;
    for (int a = 0; a < 3; ++a) outer = outer || std::abs(c[a] - cube.lo[a]) < 1e-9 || std::abs(c[a] - cube.hi()[a]) < 1e-9;
    if (outer) continue;
    const std::vector<Vec3> pt{c};
    const double v = eval_at_points(mesh, loc, rnd, pt)[0];
    EXPECT_NEAR(v, (rnd[T[0]] + rnd[T[1]] + rnd[T[2]]) / 3.0, 1e-12);
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

TEST_F(BornMesh, EvaluationOutsideMeshThrows) {
  const PointLocator loc = make_locator(mesh, part);
  const std::vector<double> nodal(space.nodes(), 1.0);
  const std::vector<Vec3> far{Vec3{10, 0, 0}};
  EXPECT_ANY_THROW(eval_at_points(mesh, loc, nodal, far));
}
