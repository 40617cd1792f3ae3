#include <gtest/gtest.h>

#include <cmath>

#include "smpbe/error.hpp"
#include "smpbe/hybrid.hpp"
#include "smpbe/mesh.hpp"
#include "smpbe/partition.hpp"

using namespace smpbe;

namespace {

void expect_cube(const Cube& c, double lo, double hi) {
  for (int a = 0; a < 3; ++a) {
    EXPECT_NEAR(c.lo[a], lo, 1e-12);
    EXPECT_NEAR(c.hi()[a], hi, 1e-12);
  }
}

}  // namespace

TEST(Partition, BornLayout) {
  const auto p = build_partition({{-2, -2, -2}, 4}, 4, 2, 2);
  EXPECT_DOUBLE_EQ(p.h(), 0.25);
  EXPECT_DOUBLE_EQ(p.tau(), 1.0);
  EXPECT_DOUBLE_EQ(p.eta(), 4.0);
  expect_cube(p.Omega(), -6, 6);
  expect_cube(p.box_extent(BoxPartition::kCentral), -3, 3);
  EXPECT_EQ(p.lattice().intervals(), 48);
}

TEST(Partition, DipoleLayout) {
  const auto p = build_partition({{-4, -4, -4}, 8}, 5, 2, 2);
  EXPECT_DOUBLE_EQ(p.h(), 0.25);
  EXPECT_DOUBLE_EQ(p.tau(), 1.0);
  expect_cube(p.Omega(), -12, 12);
  expect_cube(p.box_extent(BoxPartition::kCentral), -5, 5);
}

TEST(Partition, UnitCubeWideOverlap) {
  const auto p = build_partition({{0, 0, 0}, 1}, 1, 1, 4);
  EXPECT_DOUBLE_EQ(p.h(), 0.5);
  EXPECT_DOUBLE_EQ(p.tau(), 1.0);
  EXPECT_DOUBLE_EQ(p.eta(), 2.0);
  expect_cube(p.Omega(), -2, 3);
}

TEST(Partition, RejectsInvalidInput) {
  EXPECT_THROW(build_partition({{0, 0, 0}, 1}, 3, 3, 1), InputError);  // tau = eta
  EXPECT_THROW(build_partition({{0, 0, 0}, 1}, 3, 4, 1), InputError);
  EXPECT_THROW(build_partition({{0, 0, 0}, 0}, 3, 1, 1), InputError);
  EXPECT_THROW(build_partition({{0, 0, 0}, -1}, 3, 1, 1), InputError);
  EXPECT_THROW(build_partition({{0, 0, 0}, 1}, 0, 1, 1), InputError);
  EXPECT_THROW(build_partition({{0, 0, 0}, 1}, 3, 1, 0), InputError);
}

TEST(Partition, BoxesCoverOmegaAndOuterBoxesCoverComplementOfD) {
  for (auto [n, m, mu] : {std::tuple{4, 2, 2}, {4, 2, 4}, {3, 1, 1}, {5, 2, 2}}) {
    const auto p = build_partition({{-2, -2, -2}, 4}, n, m, mu);
    const auto& lat = p.lattice();
    const int N = lat.intervals();
    const auto& D = p.D_index();
    for (int k = 0; k <= N; ++k)
      for (int j = 0; j <= N; ++j)
        for (int i = 0; i <= N; ++i) {
          bool any = false, outer = false;
          for (int b = 0; b < BoxPartition::kBoxes; ++b)
            if (p.box(b).contains(i, j, k)) {
              any = true;
              if (b < BoxPartition::kCentral) outer = true;
            }
          ASSERT_TRUE(any) << i << ' ' << j << ' ' << k;
          if (!D.interior(i, j, k)) ASSERT_TRUE(outer) << i << ' ' << j << ' ' << k;
        }
    const auto& c = p.central();
    for (int a = 0; a < 3; ++a) {
      EXPECT_LT(c.lo[a], D.lo[a]);
      EXPECT_GT(c.hi[a], D.hi[a]);
    }
  }
}

TEST(Partition, InnerBoundaryPointsAreInteriorToAnotherBox) {
  const auto p = build_partition({{-2, -2, -2}, 4}, 4, 2, 2);
  const auto& lat = p.lattice();
  for (int b = 0; b < BoxPartition::kBoxes; ++b) {
    const auto& B = p.box(b);
    for (int k = B.lo[2]; k <= B.hi[2]; ++k)
      for (int j = B.lo[1]; j <= B.hi[1]; ++j)
        for (int i = B.lo[0]; i <= B.hi[0]; ++i) {
          if (!B.on_boundary(i, j, k) || lat.on_outer_boundary(i, j, k)) continue;
          bool inside = false;
          for (int o = 0; o < BoxPartition::kBoxes; ++o)
            if (o != b && p.box(o).interior(i, j, k)) inside = true;
          ASSERT_TRUE(inside) << "box " << b << " point " << i << ' ' << j << ' ' << k;
        }
  }
}

TEST(Partition, BoxGridsAreLatticeSubgrids) {
  const auto p = build_partition({{-1.3, 0.7, 2.1}, 3}, 4, 2, 2);
  const auto& lat = p.lattice();
  for (int b = 0; b < BoxPartition::kBoxes; ++b) {
    const auto g = p.grid(b);
    const auto& B = p.box(b);
    for (int a = 0; a < 3; ++a) EXPECT_GE(g.dims[a], 2);
    EXPECT_EQ(g.h, lat.h());
    for (int k : {0, g.dims[2]})
      for (int j : {0, g.dims[1]})
        for (int i : {0, g.dims[0]}) {
          const Vec3 q = g.point(i, j, k), r = lat.point(B.lo[0] + i, B.lo[1] + j, B.lo[2] + k);
          EXPECT_NEAR(norm(q - r), 0.0, 1e-12);
        }
  }
}

TEST(Partition, Deterministic) {
  const auto a = build_partition({{-2, -2, -2}, 4}, 4, 2, 2);
  const auto b = build_partition({{-2, -2, -2}, 4}, 4, 2, 2);
  for (int i = 0; i < BoxPartition::kBoxes; ++i) EXPECT_EQ(a.box(i), b.box(i));
  EXPECT_EQ(a.h(), b.h());
  EXPECT_EQ(a.Omega().lo, b.Omega().lo);
}

TEST(BoundingBox, SingleAtom) {
  const auto c = bounding_box_for(ChargeSystem({Atom{{0, 0, 0}, 1.0, 1.0}}), 1.0);
  expect_cube(c, -2, 2);
}

TEST(BoundingBox, TwoAtomsCubified) {
  const auto c = bounding_box_for(ChargeSystem({Atom{{1, 0, 0}, 1, 1.5}, Atom{{-1, 0, 0}, -1, 1.5}}), 0.5);
  EXPECT_DOUBLE_EQ(c.side, 6.0);
  EXPECT_NEAR(norm(c.center()), 0.0, 1e-15);
}

class CompositeTransfer : public ::testing::Test {
 protected:
  CompositeTransfer()
      : part(build_partition({{-2, -2, -2}, 4}, 3, 1, 2)),
        mesh(build_central_mesh(part, LevelSetGeometry{})),
        coupling(part, mesh) {}

  CompositeField sampled(double (*f)(const Vec3&)) const {
    CompositeField c(part.lattice().size(), mesh.vertex_count());
    for (std::size_t L = 0; L < c.lattice.size(); ++L) c.lattice[L] = f(part.lattice().point(L));
    for (std::size_t v = 0; v < c.mesh.size(); ++v) c.mesh[v] = f(mesh.vertices[v]);
    return c;
  }

  BoxPartition part;
  InterfaceMesh mesh;
  Coupling coupling;
};

TEST_F(CompositeTransfer, ConstantFieldReadsConstant) {
  CompositeField c(part.lattice().size(), mesh.vertex_count(), 2.5);
  for (int b = 0; b < 6; ++b)
    for (double v : coupling.read_box(c, b)) EXPECT_EQ(v, 2.5);
}

TEST_F(CompositeTransfer, LinearFieldReadsCoordinates) {
  const auto c = sampled([](const Vec3& r) { return r.x; });
  const auto vals = coupling.read_box(c, 0);
  const auto g = part.grid(0);
  for (int k = 0; k < g.nz(); ++k)
    for (int j = 0; j < g.ny(); ++j)
      for (int i = 0; i < g.nx(); ++i) EXPECT_EQ(vals[g.index(i, j, k)], g.point(i, j, k).x);
}

TEST_F(CompositeTransfer, WriteIsVisibleToNeighbour) {
  CompositeField c(part.lattice().size(), mesh.vertex_count(), 0.0);
  const auto g0 = part.grid(0);
  std::vector<double> vals(g0.size());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 1.0 + 0.001 * static_cast<double>(i);
  coupling.write_box_interior(c, 0, vals);
  const auto v1 = coupling.read_box(c, 1);
  const auto& B0 = part.box(0);
  const auto& B1 = part.box(1);
  const auto g1 = part.grid(1);
  int shared = 0;
  for (int k = 0; k < g1.nz(); ++k)
    for (int j = 0; j < g1.ny(); ++j)
      for (int i = 0; i < g1.nx(); ++i) {
        const int I = B1.lo[0] + i, J = B1.lo[1] + j, K = B1.lo[2] + k;
        if (!B0.interior(I, J, K)) continue;
        ++shared;
        EXPECT_EQ(v1[g1.index(i, j, k)], vals[g0.index(I - B0.lo[0], J - B0.lo[1], K - B0.lo[2])]);
      }
  EXPECT_GT(shared, 0);
}

TEST_F(CompositeTransfer, MeshAndLatticeAgreeAfterTransfers) {
  auto c = sampled([](const Vec3& r) { return std::sin(r.x) + r.y * r.z; });
  for (auto& v : c.mesh) v += 1.0;
  coupling.mesh_to_lattice(c);
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v)
    if (mesh.lattice_link[v] >= 0) EXPECT_EQ(c.mesh[v], c.lattice[mesh.lattice_link[v]]);
  for (auto& v : c.lattice) v -= 3.0;
  coupling.lattice_to_mesh(c);
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v)
    if (mesh.lattice_link[v] >= 0) EXPECT_EQ(c.mesh[v], c.lattice[mesh.lattice_link[v]]);
}

TEST_F(CompositeTransfer, UnlinkedBoundaryNodeIsRejected) {
  auto broken = mesh;
  broken.lattice_link[broken.boundary_nodes.front()] = -1;
  EXPECT_THROW(Coupling(part, broken), InputError);
}
