#include "smpbe/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "smpbe/error.hpp"

namespace smpbe {

namespace {

std::string fmt_point(const Vec3& p) {
  std::ostringstream os;
  os.precision(10);
  os << "(" << p.x << ", " << p.y << ", " << p.z << ")";
  return os.str();
}

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

struct FaceKey {
  std::array<int, 3> v;
  bool operator==(const FaceKey&) const = default;
};

struct FaceHash {
  std::size_t operator()(const FaceKey& f) const {
    std::uint64_t h = 1469598103934665603ull;
    for (int x : f.v) {
      h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(x));
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

FaceKey sorted_face(int a, int b, int c) {
  std::array<int, 3> v{a, b, c};
  std::sort(v.begin(), v.end());
  return {v};
}

constexpr std::array<std::array<int, 3>, 4> kTetFaces{{{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}}};

}  // namespace

// ---------------------------------------------------------------------------------------------
// LevelSetGeometry

LevelSetGeometry::LevelSetGeometry(std::vector<Sphere> spheres) : spheres_(std::move(spheres)) {
  for (const auto& s : spheres_) {
    if (!std::isfinite(s.center.x) || !std::isfinite(s.center.y) || !std::isfinite(s.center.z) ||
        !(s.radius > 0.0) || !std::isfinite(s.radius))
      throw InputError("LevelSetGeometry: spheres need finite centres and positive radii");
  }
  build_bins();
}

LevelSetGeometry LevelSetGeometry::from_charges(const ChargeSystem& charges, double probe) {
  std::vector<Sphere> s;
  for (const auto& a : charges.atoms()) {
    if (a.radius > 0.0) s.push_back({a.position, a.radius + probe});
  }
  return LevelSetGeometry(std::move(s));
}

void LevelSetGeometry::build_bins() {
  bins_.clear();
  if (spheres_.empty()) return;
  max_radius_ = 0.0;
  Vec3 lo = spheres_[0].center, hi = lo;
  for (const auto& s : spheres_) {
    max_radius_ = std::max(max_radius_, s.radius);
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], s.center[a]);
      hi[a] = std::max(hi[a], s.center[a]);
    }
  }
  bin_ = 2.0 * max_radius_ + 1.0;
  bin_origin_ = lo;
  for (int a = 0; a < 3; ++a) bin_dims_[a] = static_cast<int>(std::floor((hi[a] - lo[a]) / bin_)) + 1;
  bins_.assign(static_cast<std::size_t>(bin_dims_[0]) * bin_dims_[1] * bin_dims_[2], {});
  for (std::size_t i = 0; i < spheres_.size(); ++i) {
    std::array<int, 3> c{};
    for (int a = 0; a < 3; ++a)
      c[a] = std::clamp(static_cast<int>(std::floor((spheres_[i].center[a] - lo[a]) / bin_)), 0,
                        bin_dims_[a] - 1);
    bins_[c[0] + static_cast<std::size_t>(bin_dims_[0]) * (c[1] + static_cast<std::size_t>(bin_dims_[1]) * c[2])]
        .push_back(static_cast<int>(i));
  }
}

double LevelSetGeometry::phi(const Vec3& r) const {
  if (spheres_.empty()) return std::numeric_limits<double>::infinity();
  if (spheres_.size() <= 8) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : spheres_) best = std::min(best, norm(r - s.center) - s.radius);
    return best;
  }
  // Spheres outside the 27 neighbouring bins are at least bin_ away from r.
  double best = bin_ - max_radius_;
  std::array<int, 3> c{};
  for (int a = 0; a < 3; ++a) c[a] = static_cast<int>(std::floor((r[a] - bin_origin_[a]) / bin_));
  for (int dz = -1; dz <= 1; ++dz) {
    const int z = c[2] + dz;
    if (z < 0 || z >= bin_dims_[2]) continue;
    for (int dy = -1; dy <= 1; ++dy) {
      const int y = c[1] + dy;
      if (y < 0 || y >= bin_dims_[1]) continue;
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = c[0] + dx;
        if (x < 0 || x >= bin_dims_[0]) continue;
        for (int i : bins_[x + static_cast<std::size_t>(bin_dims_[0]) * (y + static_cast<std::size_t>(bin_dims_[1]) * z)]) {
          const auto& s = spheres_[i];
          best = std::min(best, norm(r - s.center) - s.radius);
        }
      }
    }
  }
  return best;
}

std::optional<Vec3> LevelSetGeometry::project(const Vec3& r) const {
  if (spheres_.empty()) return std::nullopt;
  const double p0 = phi(r);
  std::optional<Vec3> best;
  Vec3 best_disp;
  for (const auto& s : spheres_) {
    const Vec3 d = r - s.center;
    const double dist = norm(d);
    if (dist == 0.0) continue;
    if (std::abs((dist - s.radius) - p0) > 1e-14 * (1.0 + std::abs(p0))) continue;
    const Vec3 q = s.center + d * (s.radius / dist);
    if (std::abs(phi(q)) > 1e-12 * (1.0 + s.radius)) continue;
    const Vec3 disp = q - r;
    if (!best || std::lexicographical_compare(&disp.x, &disp.x + 3, &best_disp.x, &best_disp.x + 3)) {
      best = q;
      best_disp = disp;
    }
  }
  return best;
}

void LevelSetGeometry::check_inside(const Cube& D, double min_gap) const {
  const Vec3 lo = D.lo, hi = D.hi();
  for (std::size_t i = 0; i < spheres_.size(); ++i) {
    const auto& s = spheres_[i];
    for (int a = 0; a < 3; ++a) {
      const double gap = std::min(s.center[a] - s.radius - lo[a], hi[a] - s.center[a] - s.radius);
      if (gap < min_gap) {
        std::ostringstream os;
        os << "geometry: sphere " << i << " comes within " << gap << " A of the boundary of D"
           << " (at least " << min_gap << " A required)";
        throw InputError(os.str());
      }
    }
  }
}

// ---------------------------------------------------------------------------------------------
// Mesh

double InterfaceMesh::tet_volume(std::size_t t) const {
  const auto& c = tets[t];
  return signed_volume(vertices[c[0]], vertices[c[1]], vertices[c[2]], vertices[c[3]]);
}

bool InterfaceMesh::fully_linked() const {
  if (lattice_link.size() != vertices.size()) return false;
  return std::all_of(boundary_nodes.begin(), boundary_nodes.end(),
                     [&](int v) { return lattice_link[v] >= 0; });
}

std::array<std::array<int, 4>, 6> kuhn_tets(bool flip_x, bool flip_y, bool flip_z) {
  static constexpr std::array<std::array<int, 3>, 6> perms{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  const int mask = (flip_x ? 1 : 0) | (flip_y ? 2 : 0) | (flip_z ? 4 : 0);
  auto corner = [](int c) { return Vec3{double(c & 1), double((c >> 1) & 1), double((c >> 2) & 1)}; };
  std::array<std::array<int, 4>, 6> out{};
  for (int t = 0; t < 6; ++t) {
    const auto& p = perms[t];
    const int c1 = 1 << p[0];
    const int c2 = c1 | (1 << p[1]);
    std::array<int, 4> tet{0 ^ mask, c1 ^ mask, c2 ^ mask, 7 ^ mask};
    if (signed_volume(corner(tet[0]), corner(tet[1]), corner(tet[2]), corner(tet[3])) < 0.0)
      std::swap(tet[2], tet[3]);
    out[t] = tet;
  }
  return out;
}

namespace {

class MeshBuilder {
 public:
  MeshBuilder(const BoxPartition& part, const LevelSetGeometry& geom) : part_(part), geom_(geom) {}

  InterfaceMesh run();

 private:
  int sign_of(int v) const { return phi_[v] < 0.0 ? -1 : (phi_[v] > 0.0 ? 1 : 0); }
  int cut_vertex(int neg, int pos);
  void structured_tets();
  void snap();
  void subdivide();
  void emit_piece(const std::array<int, 4>& t, int sgn, std::vector<std::array<int, 4>>& out_tets,
                  std::vector<Region>& out_regions);
  void finish(InterfaceMesh& mesh);

  const BoxPartition& part_;
  const LevelSetGeometry& geom_;
  int M_ = 0;
  double h_ = 0.0;
  std::vector<Vec3> pos_;
  std::vector<double> phi_;
  std::vector<char> moved_;
  std::vector<std::array<int, 4>> tets_;
  std::unordered_map<std::uint64_t, int> cuts_;
  std::vector<std::array<int, 4>> out_tets_;
  std::vector<Region> out_regions_;
};

InterfaceMesh MeshBuilder::run() {
  const auto& box = part_.central();
  M_ = box.intervals(0);
  h_ = part_.h();
  if (!geom_.empty()) geom_.check_inside(part_.D(), 2.0 * h_ - 1e-9 * h_);

  const int P = M_ + 1;
  const auto& lat = part_.lattice();
  pos_.resize(static_cast<std::size_t>(P) * P * P);
  for (int k = 0; k < P; ++k)
    for (int j = 0; j < P; ++j)
      for (int i = 0; i < P; ++i)
        pos_[i + static_cast<std::size_t>(P) * (j + static_cast<std::size_t>(P) * k)] =
            lat.point(box.lo[0] + i, box.lo[1] + j, box.lo[2] + k);
  phi_.resize(pos_.size());
  for (std::size_t v = 0; v < pos_.size(); ++v) phi_[v] = geom_.phi(pos_[v]);
  moved_.assign(pos_.size(), 0);

  structured_tets();
  if (!geom_.empty()) {
    snap();
    subdivide();
  } else {
    out_tets_ = tets_;
    out_regions_.assign(tets_.size(), Region::Solvent);
  }

  InterfaceMesh mesh;
  finish(mesh);
  return mesh;
}

void MeshBuilder::structured_tets() {
  const int P = M_ + 1;
  const int half = M_ / 2;
  auto vid = [&](int i, int j, int k) {
    return static_cast<int>(i + static_cast<std::size_t>(P) * (j + static_cast<std::size_t>(P) * k));
  };
  const auto lower = kuhn_tets(false, false, false);
  const auto upper = kuhn_tets(true, false, false);
  tets_.reserve(static_cast<std::size_t>(6) * M_ * M_ * M_);
  for (int k = 0; k < M_; ++k)
    for (int j = 0; j < M_; ++j)
      for (int i = 0; i < M_; ++i) {
        for (const auto& t : i >= half ? upper : lower) {
          std::array<int, 4> tet;
          for (int q = 0; q < 4; ++q) {
            const int c = t[q];
            tet[q] = vid(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
          }
          tets_.push_back(tet);
        }
      }
}

void MeshBuilder::snap() {
  const double thr = 0.25 * h_;
  const double min_vol = 1e-3 * h_ * h_ * h_;
  const auto& Di = part_.D_index();
  const auto& box = part_.central();
  const int P = M_ + 1;
  std::vector<Vec3> target(pos_.size());
  std::vector<char> can(pos_.size(), 0);
  for (std::size_t v = 0; v < pos_.size(); ++v) {
    if (!(std::abs(phi_[v]) < thr)) continue;
    const int i = static_cast<int>(v % P) + box.lo[0];
    const int j = static_cast<int>((v / P) % P) + box.lo[1];
    const int k = static_cast<int>(v / (static_cast<std::size_t>(P) * P)) + box.lo[2];
    if (!Di.contains(i, j, k)) continue;
    if (auto q = geom_.project(pos_[v])) {
      target[v] = *q;
      can[v] = 1;
    }
  }
  const std::vector<Vec3> orig = pos_;
  for (;;) {
    for (std::size_t v = 0; v < pos_.size(); ++v) {
      pos_[v] = can[v] ? target[v] : orig[v];
      moved_[v] = can[v];
    }
    std::vector<int> revert;
    for (const auto& t : tets_) {
      if (!(moved_[t[0]] || moved_[t[1]] || moved_[t[2]] || moved_[t[3]])) continue;
      if (signed_volume(pos_[t[0]], pos_[t[1]], pos_[t[2]], pos_[t[3]]) < min_vol) {
        for (int v : t)
          if (moved_[v]) revert.push_back(v);
      }
    }
    if (revert.empty()) break;
    for (int v : revert) can[v] = 0;
  }
  for (std::size_t v = 0; v < pos_.size(); ++v)
    if (moved_[v]) phi_[v] = 0.0;
}

int MeshBuilder::cut_vertex(int neg, int pos) {
  const auto key = edge_key(neg, pos);
  if (auto it = cuts_.find(key); it != cuts_.end()) return it->second;
  const Vec3 a = pos_[neg], b = pos_[pos];
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double f = geom_.phi(a + (b - a) * mid);
    if (f < 0.0) lo = mid;
    else if (f > 0.0) hi = mid;
    else {
      lo = hi = mid;
      break;
    }
  }
  const double t = 0.5 * (lo + hi);
  const int id = static_cast<int>(pos_.size());
  pos_.push_back(a + (b - a) * t);
  phi_.push_back(0.0);
  moved_.push_back(1);
  cuts_.emplace(key, id);
  return id;
}

void MeshBuilder::subdivide() {
  out_tets_.reserve(tets_.size() + tets_.size() / 8);
  out_regions_.reserve(out_tets_.capacity());
  for (const auto& t : tets_) {
    int nneg = 0, npos = 0;
    for (int v : t) {
      const int s = sign_of(v);
      nneg += s < 0;
      npos += s > 0;
    }
    if (nneg == 0 || npos == 0) {
      Region r;
      if (nneg > 0) r = Region::Solute;
      else if (npos > 0) r = Region::Solvent;
      else {
        const Vec3 c = (pos_[t[0]] + pos_[t[1]] + pos_[t[2]] + pos_[t[3]]) * 0.25;
        r = geom_.phi(c) < 0.0 ? Region::Solute : Region::Solvent;
      }
      out_tets_.push_back(t);
      out_regions_.push_back(r);
      continue;
    }
    const double parent = signed_volume(pos_[t[0]], pos_[t[1]], pos_[t[2]], pos_[t[3]]);
    const std::size_t first = out_tets_.size();
    emit_piece(t, -1, out_tets_, out_regions_);
    emit_piece(t, +1, out_tets_, out_regions_);
    double sum = 0.0;
    for (std::size_t c = first; c < out_tets_.size(); ++c) {
      const auto& q = out_tets_[c];
      sum += signed_volume(pos_[q[0]], pos_[q[1]], pos_[q[2]], pos_[q[3]]);
    }
    if (std::abs(sum - parent) > 1e-9 * std::abs(parent)) {
      throw SolverError("mesh: subdivision does not conserve volume near " +
                        fmt_point((pos_[t[0]] + pos_[t[3]]) * 0.5));
    }
  }
}

void MeshBuilder::emit_piece(const std::array<int, 4>& t, int sgn,
                             std::vector<std::array<int, 4>>& out_tets, std::vector<Region>& out_regions) {
  std::vector<std::vector<int>> polys;
  polys.reserve(5);
  for (const auto& f : kTetFaces) {
    std::vector<int> poly;
    for (int e = 0; e < 3; ++e) {
      const int u = t[f[e]], w = t[f[(e + 1) % 3]];
      const int su = sign_of(u), sw = sign_of(w);
      if (su == sgn || su == 0) poly.push_back(u);
      if (su * sw == -1) poly.push_back(su < 0 ? cut_vertex(u, w) : cut_vertex(w, u));
    }
    if (poly.size() >= 3) polys.push_back(std::move(poly));
  }
  std::vector<int> negs, poss, zeros;
  for (int v : t) {
    const int s = sign_of(v);
    (s < 0 ? negs : (s > 0 ? poss : zeros)).push_back(v);
  }
  std::vector<int> iface = zeros;
  if (negs.size() == 2 && poss.size() == 2) {
    iface = {cut_vertex(negs[0], poss[0]), cut_vertex(negs[0], poss[1]), cut_vertex(negs[1], poss[1]),
             cut_vertex(negs[1], poss[0])};
  } else {
    for (int a : negs)
      for (int b : poss) iface.push_back(cut_vertex(a, b));
  }
  polys.push_back(iface);

  int apex = std::numeric_limits<int>::max();
  for (const auto& p : polys)
    for (int v : p) apex = std::min(apex, v);
  const double min_vol = 1e-12 * h_ * h_ * h_;
  const Region region = sgn < 0 ? Region::Solute : Region::Solvent;
  for (auto& p : polys) {
    if (std::find(p.begin(), p.end(), apex) != p.end()) continue;
    std::rotate(p.begin(), std::min_element(p.begin(), p.end()), p.end());
    for (std::size_t q = 1; q + 1 < p.size(); ++q) {
      std::array<int, 4> tet{apex, p[0], p[q], p[q + 1]};
      double vol = signed_volume(pos_[tet[0]], pos_[tet[1]], pos_[tet[2]], pos_[tet[3]]);
      if (vol < 0.0) {
        std::swap(tet[2], tet[3]);
        vol = -vol;
      }
      if (vol < min_vol) {
        throw SolverError("mesh: degenerate tetrahedron (volume " + std::to_string(vol) + ") near " +
                          fmt_point(pos_[apex]));
      }
      out_tets.push_back(tet);
      out_regions.push_back(region);
    }
  }
}

void MeshBuilder::finish(InterfaceMesh& mesh) {
  mesh.vertices = std::move(pos_);
  mesh.tets = std::move(out_tets_);
  mesh.regions = std::move(out_regions_);
  const int P = M_ + 1;
  const auto& box = part_.central();
  const auto& lat = part_.lattice();
  const std::size_t n_lat = static_cast<std::size_t>(P) * P * P;
  mesh.lattice_link.assign(mesh.vertices.size(), -1);
  for (std::size_t v = 0; v < n_lat; ++v) {
    const int i = static_cast<int>(v % P), j = static_cast<int>((v / P) % P),
              k = static_cast<int>(v / (static_cast<std::size_t>(P) * P));
    if (!moved_[v] || mesh.vertices[v] == lat.point(box.lo[0] + i, box.lo[1] + j, box.lo[2] + k))
      mesh.lattice_link[v] = static_cast<std::int64_t>(lat.index(box.lo[0] + i, box.lo[1] + j, box.lo[2] + k));
    if (i == 0 || j == 0 || k == 0 || i == M_ || j == M_ || k == M_) mesh.boundary_nodes.push_back(static_cast<int>(v));
  }

  std::unordered_map<FaceKey, std::pair<int, int>, FaceHash> faces;
  faces.reserve(mesh.tets.size() * 2);
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    if (mesh.regions[t] != Region::Solvent) continue;
    const auto& c = mesh.tets[t];
    bool any_zero = false;
    for (int v : c) any_zero |= v >= static_cast<int>(n_lat) || moved_[v] || phi_[v] == 0.0;
    if (!any_zero) continue;
    for (int f = 0; f < 4; ++f) faces.emplace(sorted_face(c[kTetFaces[f][0]], c[kTetFaces[f][1]], c[kTetFaces[f][2]]),
                                              std::make_pair(static_cast<int>(t), f));
  }
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    if (mesh.regions[t] != Region::Solute) continue;
    const auto& c = mesh.tets[t];
    for (int f = 0; f < 4; ++f) {
      const auto& lf = kTetFaces[f];
      auto it = faces.find(sorted_face(c[lf[0]], c[lf[1]], c[lf[2]]));
      if (it == faces.end()) continue;
      // kTetFaces are outward-oriented for positive tets, so the solute side's face points into solvent.
      mesh.interface_facets.push_back({c[lf[0]], c[lf[1]], c[lf[2]]});
    }
  }
}

}  // namespace

InterfaceMesh build_central_mesh(const BoxPartition& partition, const LevelSetGeometry& geometry) {
  return MeshBuilder(partition, geometry).run();
}

// ---------------------------------------------------------------------------------------------
// I/O

namespace {

void write_double(std::ostream& out, double x) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  out.write(buf, res.ptr - buf);
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::vector<std::string_view> next(const char* what) {
    while (std::getline(in_, line_)) {
      ++lineno_;
      tokens_.clear();
      std::size_t i = 0;
      while (i < line_.size()) {
        while (i < line_.size() && std::isspace(static_cast<unsigned char>(line_[i]))) ++i;
        std::size_t j = i;
        while (j < line_.size() && !std::isspace(static_cast<unsigned char>(line_[j]))) ++j;
        if (j > i) tokens_.emplace_back(line_.data() + i, j - i);
        i = j;
      }
      if (!tokens_.empty()) return tokens_;
    }
    throw InputError(std::string("mesh: unexpected end of input, expected ") + what);
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw InputError("mesh line " + std::to_string(lineno_) + ": " + msg);
  }

  template <class T>
  T number(std::string_view tok) const {
    T value{};
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) fail("malformed number '" + std::string(tok) + "'");
    return value;
  }

  std::size_t count(const char* what) {
    auto t = next(what);
    if (t.size() != 1) fail(std::string("expected ") + what);
    const auto n = number<long long>(t[0]);
    if (n < 0) fail(std::string("negative ") + what);
    return static_cast<std::size_t>(n);
  }

 private:
  std::istream& in_;
  std::string line_;
  std::vector<std::string_view> tokens_;
  int lineno_ = 0;
};

}  // namespace

void export_mesh(const InterfaceMesh& mesh, std::ostream& out) {
  out << "smpbe-mesh 1\n" << mesh.vertices.size() << '\n';
  for (const auto& v : mesh.vertices) {
    write_double(out, v.x);
    out << ' ';
    write_double(out, v.y);
    out << ' ';
    write_double(out, v.z);
    out << '\n';
  }
  out << mesh.tets.size() << '\n';
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    const auto& c = mesh.tets[t];
    out << c[0] << ' ' << c[1] << ' ' << c[2] << ' ' << c[3] << ' '
        << (mesh.regions[t] == Region::Solute ? "solute" : "solvent") << '\n';
  }
  out << mesh.interface_facets.size() << '\n';
  for (const auto& f : mesh.interface_facets) out << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

InterfaceMesh import_mesh(std::istream& in) {
  LineReader rd(in);
  auto head = rd.next("header");
  if (head.size() != 2 || head[0] != "smpbe-mesh" || head[1] != "1") rd.fail("expected header 'smpbe-mesh 1'");
  InterfaceMesh mesh;
  mesh.imported = true;
  const auto nv = rd.count("vertex count");
  mesh.vertices.reserve(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    auto t = rd.next("vertex");
    if (t.size() != 3) rd.fail("vertex needs 3 coordinates");
    Vec3 p{rd.number<double>(t[0]), rd.number<double>(t[1]), rd.number<double>(t[2])};
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) rd.fail("non-finite coordinate");
    mesh.vertices.push_back(p);
  }
  auto index = [&](std::string_view tok) {
    const auto v = rd.number<long long>(tok);
    if (v < 0 || static_cast<std::size_t>(v) >= nv)
      rd.fail("vertex index " + std::string(tok) + " out of range (" + std::to_string(nv) + " vertices)");
    return static_cast<int>(v);
  };
  const auto nt = rd.count("tetrahedron count");
  mesh.tets.reserve(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    auto t = rd.next("tetrahedron");
    if (t.size() != 5) rd.fail("tetrahedron needs 4 indices and a region");
    std::array<int, 4> c{index(t[0]), index(t[1]), index(t[2]), index(t[3])};
    Region r;
    if (t[4] == "solute") r = Region::Solute;
    else if (t[4] == "solvent") r = Region::Solvent;
    else rd.fail("unknown region '" + std::string(t[4]) + "'");
    const auto& V = mesh.vertices;
    if (!(signed_volume(V[c[0]], V[c[1]], V[c[2]], V[c[3]]) > 0.0)) rd.fail("tetrahedron with non-positive volume");
    mesh.tets.push_back(c);
    mesh.regions.push_back(r);
  }
  const auto nf = rd.count("facet count");
  mesh.interface_facets.reserve(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    auto t = rd.next("facet");
    if (t.size() != 3) rd.fail("facet needs 3 indices");
    mesh.interface_facets.push_back({index(t[0]), index(t[1]), index(t[2])});
  }
  validate_mesh(mesh);
  return mesh;
}

InterfaceMesh read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mesh file '" + path + "'");
  return import_mesh(in);
}

void validate_mesh(const InterfaceMesh& mesh) {
  const auto nv = mesh.vertices.size();
  if (mesh.regions.size() != mesh.tets.size()) throw InputError("mesh: region count mismatch");
  std::unordered_map<FaceKey, int, FaceHash> faces;
  faces.reserve(mesh.tets.size() * 2);
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    const auto& c = mesh.tets[t];
    for (int v : c)
      if (v < 0 || static_cast<std::size_t>(v) >= nv) throw InputError("mesh: tetrahedron " + std::to_string(t) + " index out of range");
    if (!(mesh.tet_volume(t) > 0.0)) throw InputError("mesh: tetrahedron " + std::to_string(t) + " has non-positive volume");
    for (const auto& f : kTetFaces) {
      if (++faces[sorted_face(c[f[0]], c[f[1]], c[f[2]])] > 2)
        throw InputError("mesh: face shared by more than two tetrahedra at tetrahedron " + std::to_string(t));
    }
  }
  for (const auto& f : mesh.interface_facets) {
    for (int v : f)
      if (v < 0 || static_cast<std::size_t>(v) >= nv) throw InputError("mesh: facet index out of range");
    if (faces.find(sorted_face(f[0], f[1], f[2])) == faces.end())
      throw InputError("mesh: interface facet is not a tetrahedron face");
  }
}

void attach_to_partition(InterfaceMesh& mesh, const BoxPartition& partition) {
  const auto& box = partition.central();
  const auto& lat = partition.lattice();
  const double h = lat.h();
  const Vec3 lo = lat.point(box.lo[0], box.lo[1], box.lo[2]);
  const Vec3 hi = lat.point(box.hi[0], box.hi[1], box.hi[2]);
  const double tol = 1e-9 * h;
  mesh.boundary_nodes.clear();
  mesh.lattice_link.assign(mesh.vertices.size(), -1);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    const Vec3& p = mesh.vertices[v];
    bool on_bnd = false;
    std::array<int, 3> ijk{};
    bool on_lattice = true;
    for (int a = 0; a < 3; ++a) {
      if (p[a] < lo[a] - tol || p[a] > hi[a] + tol)
        throw InputError("mesh: vertex " + std::to_string(v) + " lies outside the central box");
      on_bnd |= std::abs(p[a] - lo[a]) <= tol || std::abs(p[a] - hi[a]) <= tol;
      const double s = (p[a] - lat.origin()[a]) / h;
      ijk[a] = static_cast<int>(std::lround(s));
      on_lattice &= std::abs(s - ijk[a]) * h <= tol;
    }
    if (on_lattice) mesh.lattice_link[v] = static_cast<std::int64_t>(lat.index(ijk[0], ijk[1], ijk[2]));
    if (on_bnd) mesh.boundary_nodes.push_back(static_cast<int>(v));
  }
  double vol = 0.0;
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) vol += mesh.tet_volume(t);
  const double expect = (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z);
  if (std::abs(vol - expect) > 1e-10 * expect)
    throw InputError("mesh: total volume " + std::to_string(vol) + " does not match the central box volume " +
                     std::to_string(expect));
}

// ---------------------------------------------------------------------------------------------
// Point location

PointLocator::PointLocator(const InterfaceMesh& mesh, const Vec3& lo, double cell, int cells_per_axis)
    : mesh_(&mesh), lo_(lo), cell_(cell), n_(cells_per_axis) {
  const std::size_t ncell = static_cast<std::size_t>(n_) * n_ * n_;
  std::vector<std::uint32_t> counts(ncell + 1, 0);
  auto range = [&](std::size_t t, std::array<int, 3>& a, std::array<int, 3>& b) {
    const auto& c = mesh.tets[t];
    for (int ax = 0; ax < 3; ++ax) {
      double mn = mesh.vertices[c[0]][ax], mx = mn;
      for (int q = 1; q < 4; ++q) {
        mn = std::min(mn, mesh.vertices[c[q]][ax]);
        mx = std::max(mx, mesh.vertices[c[q]][ax]);
      }
      const double pad = 1e-9 * cell_;
      a[ax] = std::clamp(static_cast<int>(std::floor((mn - pad - lo_[ax]) / cell_)), 0, n_ - 1);
      b[ax] = std::clamp(static_cast<int>(std::floor((mx + pad - lo_[ax]) / cell_)), 0, n_ - 1);
    }
  };
  auto cid = [&](int i, int j, int k) { return i + static_cast<std::size_t>(n_) * (j + static_cast<std::size_t>(n_) * k); };
  std::array<int, 3> a{}, b{};
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    range(t, a, b);
    for (int k = a[2]; k <= b[2]; ++k)
      for (int j = a[1]; j <= b[1]; ++j)
        for (int i = a[0]; i <= b[0]; ++i) ++counts[cid(i, j, k) + 1];
  }
  for (std::size_t c = 0; c < ncell; ++c) counts[c + 1] += counts[c];
  offsets_ = counts;
  items_.resize(offsets_.back());
  std::vector<std::uint32_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    range(t, a, b);
    for (int k = a[2]; k <= b[2]; ++k)
      for (int j = a[1]; j <= b[1]; ++j)
        for (int i = a[0]; i <= b[0]; ++i) items_[fill[cid(i, j, k)]++] = static_cast<std::uint32_t>(t);
  }
}

std::optional<PointLocation> PointLocator::locate(const Vec3& p) const {
  std::array<int, 3> c{};
  for (int ax = 0; ax < 3; ++ax) {
    const double s = (p[ax] - lo_[ax]) / cell_;
    if (s < -1e-9 || s > n_ + 1e-9) return std::nullopt;
    c[ax] = std::clamp(static_cast<int>(std::floor(s)), 0, n_ - 1);
  }
  const auto id = c[0] + static_cast<std::size_t>(n_) * (c[1] + static_cast<std::size_t>(n_) * c[2]);
  const auto& V = mesh_->vertices;
  std::optional<PointLocation> best;
  double best_min = -1e-10;
  for (auto q = offsets_[id]; q < offsets_[id + 1]; ++q) {
    const auto t = items_[q];
    const auto& T = mesh_->tets[t];
    const double vol = signed_volume(V[T[0]], V[T[1]], V[T[2]], V[T[3]]);
    std::array<double, 4> lam{signed_volume(p, V[T[1]], V[T[2]], V[T[3]]) / vol,
                              signed_volume(V[T[0]], p, V[T[2]], V[T[3]]) / vol,
                              signed_volume(V[T[0]], V[T[1]], p, V[T[3]]) / vol,
                              signed_volume(V[T[0]], V[T[1]], V[T[2]], p) / vol};
    const double mn = *std::min_element(lam.begin(), lam.end());
    if (mn >= best_min) {
      best_min = mn;
      best = PointLocation{static_cast<int>(t), lam};
      if (mn >= 0.0) break;
    }
  }
  return best;
}

PointLocator make_locator(const InterfaceMesh& mesh, const BoxPartition& partition) {
  const auto& box = partition.central();
  const auto& lat = partition.lattice();
  return PointLocator(mesh, lat.point(box.lo[0], box.lo[1], box.lo[2]), lat.h(), box.intervals(0));
}

std::vector<double> eval_at_points(const InterfaceMesh& mesh, const PointLocator& locator,
                                   std::span<const double> nodal, std::span<const Vec3> points) {
  if (nodal.size() != mesh.vertices.size()) throw InputError("eval_at_points: nodal size mismatch");
  std::vector<double> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto loc = locator.locate(points[i]);
    if (!loc) throw InputError("eval_at_points: point " + fmt_point(points[i]) + " lies outside the mesh");
    const auto& T = mesh.tets[loc->tet];
    double s = 0.0;
    for (int q = 0; q < 4; ++q) s += loc->bary[q] * nodal[T[q]];
    out[i] = s;
  }
  return out;
}

}  // namespace smpbe
