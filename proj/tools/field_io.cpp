#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <string>

#include "cli.hpp"
#include "smpbe/error.hpp"

namespace smpbe::cli {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_field_csv(std::ostream& out, const HybridProblem& problem, const CompositeField& f) {
  const auto& lat = problem.partition().lattice();
  const auto& mesh = problem.mesh();
  out << "x,y,z,value\n";
  for (std::size_t L = 0; L < lat.size(); ++L) {
    const Vec3 p = lat.point(L);
    out << fmt(p.x) << ',' << fmt(p.y) << ',' << fmt(p.z) << ',' << fmt(f.lattice[L]) << '\n';
  }
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
    if (mesh.lattice_link[v] >= 0) continue;
    const Vec3& p = mesh.vertices[v];
    out << fmt(p.x) << ',' << fmt(p.y) << ',' << fmt(p.z) << ',' << fmt(f.mesh[v]) << '\n';
  }
}

std::vector<FieldRow> read_field_csv(std::istream& in) {
  std::vector<FieldRow> rows;
  std::string line;
  if (!std::getline(in, line) || line.rfind("x,y,z", 0) != 0) throw InputError("field csv: missing x,y,z header");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    double v[4];
    const char* s = line.c_str();
    for (int c = 0; c < 4; ++c) {
      char* end = nullptr;
      v[c] = std::strtod(s, &end);
      if (end == s || (c < 3 && *end != ',') || (c == 3 && *end != '\0' && *end != '\r')) {
        throw InputError("field csv: malformed row at line " + std::to_string(lineno));
      }
      s = end + 1;
    }
    rows.push_back({v[0], v[1], v[2], v[3]});
  }
  return rows;
}

std::vector<Vec3> negative_gradient(const Lattice& lattice, std::span<const double> values) {
  if (values.size() != lattice.size()) throw InputError("negative_gradient: size mismatch");
  const int n = lattice.intervals();
  const double h = lattice.h();
  std::vector<Vec3> g(values.size());
  for (std::size_t L = 0; L < values.size(); ++L) {
    const auto q = lattice.ijk(L);
    Vec3 e;
    for (int a = 0; a < 3; ++a) {
      auto lo = q, hi = q;
      if (q[a] > 0) --lo[a];
      if (q[a] < n) ++hi[a];
      const double d = (hi[a] - lo[a]) * h;
      e[a] = -(values[lattice.index(hi[0], hi[1], hi[2])] - values[lattice.index(lo[0], lo[1], lo[2])]) / d;
    }
    g[L] = e;
  }
  return g;
}

void write_gradient_csv(std::ostream& out, const Lattice& lattice, std::span<const Vec3> field) {
  out << "x,y,z,ex,ey,ez\n";
  for (std::size_t L = 0; L < field.size(); ++L) {
    const Vec3 p = lattice.point(L);
    out << fmt(p.x) << ',' << fmt(p.y) << ',' << fmt(p.z) << ',' << fmt(field[L].x) << ',' << fmt(field[L].y) << ','
        << fmt(field[L].z) << '\n';
  }
}

void write_lattice_vtk(std::ostream& out, const Lattice& lattice, std::span<const double> values) {
  if (values.size() != lattice.size()) throw InputError("write_lattice_vtk: size mismatch");
  const int p = lattice.points_per_axis();
  const Vec3& o = lattice.origin();
  out << "# vtk DataFile Version 3.0\nsmpbe lattice potential\nASCII\nDATASET STRUCTURED_POINTS\n";
  out << "DIMENSIONS " << p << ' ' << p << ' ' << p << '\n';
  out << "ORIGIN " << fmt(o.x) << ' ' << fmt(o.y) << ' ' << fmt(o.z) << '\n';
  out << "SPACING " << fmt(lattice.h()) << ' ' << fmt(lattice.h()) << ' ' << fmt(lattice.h()) << '\n';
  out << "POINT_DATA " << values.size() << "\nSCALARS u double 1\nLOOKUP_TABLE default\n";
  for (double v : values) out << fmt(v) << '\n';
  out << "VECTORS minus_grad_u double\n";
  for (const Vec3& e : negative_gradient(lattice, values)) out << fmt(e.x) << ' ' << fmt(e.y) << ' ' << fmt(e.z) << '\n';
}

void write_mesh_vtk(std::ostream& out, const InterfaceMesh& mesh, std::span<const double> values) {
  if (values.size() != mesh.vertex_count()) throw InputError("write_mesh_vtk: size mismatch");
  out << "# vtk DataFile Version 3.0\nsmpbe central mesh potential\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.vertex_count() << " double\n";
  for (const Vec3& v : mesh.vertices) out << fmt(v.x) << ' ' << fmt(v.y) << ' ' << fmt(v.z) << '\n';
  out << "CELLS " << mesh.tet_count() << ' ' << 5 * mesh.tet_count() << '\n';
  for (const auto& t : mesh.tets) out << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  out << "CELL_TYPES " << mesh.tet_count() << '\n';
  for (std::size_t t = 0; t < mesh.tet_count(); ++t) out << "10\n";
  out << "CELL_DATA " << mesh.tet_count() << "\nSCALARS region int 1\nLOOKUP_TABLE default\n";
  for (Region r : mesh.regions) out << static_cast<int>(r) << '\n';
  out << "POINT_DATA " << mesh.vertex_count() << "\nSCALARS u double 1\nLOOKUP_TABLE default\n";
  for (double v : values) out << fmt(v) << '\n';
}

}  // namespace smpbe::cli
