#include "smpbe/partition.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "smpbe/error.hpp"

namespace smpbe {

UniformGrid Lattice::grid(const IndexBox& box) const {
  UniformGrid g;
  g.origin = point(box.lo[0], box.lo[1], box.lo[2]);
  g.h = h_;
  g.dims = {box.intervals(0), box.intervals(1), box.intervals(2)};
  return g;
}

Cube BoxPartition::box_extent(int b) const {
  // Only meaningful for the central box, which is a cube.
  const auto& box = boxes_[b];
  Cube c;
  c.lo = lattice_.point(box.lo[0], box.lo[1], box.lo[2]);
  c.side = box.intervals(0) * h_;
  return c;
}

BoxPartition build_partition(const Cube& D, int n, int m, int mu) {
  if (!(D.side > 0.0) || !std::isfinite(D.side)) throw InputError("build_partition: degenerate box D");
  if (n < 1 || m < 1 || mu < 1) throw InputError("build_partition: n, m, mu must be positive");
  if (n > 12) throw InputError("build_partition: n too large");
  if (m > 20) throw InputError("build_partition: m too large");

  BoxPartition p;
  p.D_ = D;
  p.n_ = n;
  p.m_ = m;
  p.mu_ = mu;
  p.s_ = 1 << n;
  p.t_ = 1 << m;
  // eta = mu L / 2 = mu 2^(n-1) h
  p.e_ = mu * (1 << (n - 1));
  p.h_ = D.side / p.s_;
  p.tau_ = p.t_ * p.h_;
  p.eta_ = p.e_ * p.h_;
  if (p.t_ >= p.e_) {
    throw InputError("build_partition: tau = " + std::to_string(p.tau_) +
                     " must be smaller than eta = " + std::to_string(p.eta_));
  }

  const int s = p.s_, t = p.t_, e = p.e_;
  const int N = s + 2 * e;
  p.Omega_.lo = D.lo - Vec3{p.eta_, p.eta_, p.eta_};
  p.Omega_.side = N * p.h_;
  p.lattice_ = Lattice(p.Omega_.lo, p.h_, N);

  const int a = e;          // index of a_i
  const int b = e + s;      // index of b_i
  const int ct_lo = e - t;  // a_i - tau
  const int ct_hi = b + t;  // b_i + tau
  auto& B = p.boxes_;
  B[0] = {{0, 0, 0}, {N, N, a}};
  B[1] = {{0, 0, ct_lo}, {N, a, ct_hi}};
  B[2] = {{0, ct_lo, ct_lo}, {a, ct_hi, ct_hi}};
  // The y-range of Omega_4 mirrors Omega_3; see the multigrid level counts of the x-slabs.
  B[3] = {{b, ct_lo, ct_lo}, {N, ct_hi, ct_hi}};
  B[4] = {{0, b, ct_lo}, {N, N, ct_hi}};
  B[5] = {{0, 0, b}, {N, N, N}};
  B[6] = {{ct_lo, ct_lo, ct_lo}, {ct_hi, ct_hi, ct_hi}};
  p.D_index_ = {{a, a, a}, {b, b, b}};
  return p;
}

Cube bounding_box_for(const ChargeSystem& charges, double margin) {
  if (charges.empty()) throw InputError("bounding_box_for: empty charge system");
  Vec3 centroid;
  for (const auto& atom : charges.atoms()) centroid += atom.position;
  centroid *= 1.0 / static_cast<double>(charges.size());
  double half = 0.0;
  for (const auto& atom : charges.atoms()) {
    for (int ax = 0; ax < 3; ++ax) {
      half = std::max(half, std::fabs(atom.position[ax] - centroid[ax]) + atom.radius);
    }
  }
  half += margin;
  if (!(half > 0.0)) throw InputError("bounding_box_for: zero-size box");
  return Cube{centroid - Vec3{half, half, half}, 2.0 * half};
}

}  // namespace smpbe
