#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smpbe/model.hpp"
#include "smpbe/partition.hpp"
#include "smpbe/vec3.hpp"

namespace smpbe {

struct Sphere {
  Vec3 center;
  double radius = 0.0;
};

/// Solute region D_p given as a union of spheres; phi < 0 inside, phi > 0 outside.
class LevelSetGeometry {
 public:
  LevelSetGeometry() = default;
  explicit LevelSetGeometry(std::vector<Sphere> spheres);
  /// Atom spheres of a charge system (atoms with zero radius are skipped), radii grown by `probe`.
  static LevelSetGeometry from_charges(const ChargeSystem& charges, double probe = 0.0);

  std::span<const Sphere> spheres() const { return spheres_; }
  bool empty() const { return spheres_.empty(); }

  /// min_i (|r - c_i| - r_i). Exact whenever |phi| is below the largest radius plus one bin;
  /// farther away a positive lower bound is returned.
  double phi(const Vec3& r) const;

  /// Closest point on the surface of the nearest sphere when that point lies on the union's
  /// boundary; nullopt otherwise.
  std::optional<Vec3> project(const Vec3& r) const;

  /// Throws InputError unless every sphere stays at least `min_gap` inside the cube.
  void check_inside(const Cube& D, double min_gap) const;

 private:
  void build_bins();

  std::vector<Sphere> spheres_;
  double max_radius_ = 0.0;
  double bin_ = 1.0;
  Vec3 bin_origin_;
  std::array<int, 3> bin_dims_{};
  std::vector<std::vector<int>> bins_;
};

enum class Region : std::uint8_t { Solute = 0, Solvent = 1 };

/// Tetrahedral mesh of the central box. Nodes outside D coincide with lattice points.
struct InterfaceMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;
  std::vector<Region> regions;
  std::vector<std::array<int, 3>> interface_facets;  // normal (right-hand rule) points into solvent
  std::vector<int> boundary_nodes;                   // nodes on the boundary of the central box
  std::vector<std::int64_t> lattice_link;            // global lattice index, or -1
  bool imported = false;                             // lattice coupling by interpolation when true

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t tet_count() const { return tets.size(); }
  double tet_volume(std::size_t t) const;
  bool fully_linked() const;
};

/// Fitted mesh of the central box: Kuhn split of the lattice cubes, snapping of near-interface
/// vertices onto the interface, and conforming subdivision of the remaining cut tetrahedra.
InterfaceMesh build_central_mesh(const BoxPartition& partition, const LevelSetGeometry& geometry);

/// Kuhn tetrahedra of one lattice cube, as corner numbers c = dx + 2 dy + 4 dz, optionally reflected.
/// The central mesh reflects the cubes with x above the box centre, which keeps the split conforming,
/// symmetric under x -> -x and equal to the 7-point stencil on the structured part.
std::array<std::array<int, 4>, 6> kuhn_tets(bool flip_x, bool flip_y, bool flip_z);

/// "smpbe-mesh 1" text format.
void export_mesh(const InterfaceMesh& mesh, std::ostream& out);
InterfaceMesh import_mesh(std::istream& in);
InterfaceMesh read_mesh_file(const std::string& path);

/// Fills boundary_nodes and lattice_link of an imported mesh for `partition` and validates that
/// it tiles the central box.
void attach_to_partition(InterfaceMesh& mesh, const BoxPartition& partition);

/// Throws InputError when a structural invariant fails (indices, orientation, conformity).
void validate_mesh(const InterfaceMesh& mesh);

struct PointLocation {
  int tet = -1;
  std::array<double, 4> bary{};
};

/// Point location by lattice-cell bucketing over the mesh bounding cube.
class PointLocator {
 public:
  PointLocator(const InterfaceMesh& mesh, const Vec3& lo, double cell, int cells_per_axis);

  std::optional<PointLocation> locate(const Vec3& p) const;

 private:
  const InterfaceMesh* mesh_;
  Vec3 lo_;
  double cell_;
  int n_;
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> items_;
};

PointLocator make_locator(const InterfaceMesh& mesh, const BoxPartition& partition);

/// P1 interpolation of nodal values; throws InputError for points outside the mesh.
std::vector<double> eval_at_points(const InterfaceMesh& mesh, const PointLocator& locator,
                                   std::span<const double> nodal, std::span<const Vec3> points);

}  // namespace smpbe
