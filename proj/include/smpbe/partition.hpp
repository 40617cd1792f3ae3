#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "smpbe/model.hpp"
#include "smpbe/vec3.hpp"

namespace smpbe {

/// Axis-aligned cube (lo, lo + side)^3.
struct Cube {
  Vec3 lo;
  double side = 0.0;

  Vec3 hi() const { return lo + Vec3{side, side, side}; }
  Vec3 center() const { return lo + Vec3{side, side, side} * 0.5; }
};

/// Closed box of lattice indices [lo, hi] per axis.
struct IndexBox {
  std::array<int, 3> lo{};
  std::array<int, 3> hi{};

  int intervals(int axis) const { return hi[axis] - lo[axis]; }
  bool contains(int i, int j, int k) const {
    return i >= lo[0] && i <= hi[0] && j >= lo[1] && j <= hi[1] && k >= lo[2] && k <= hi[2];
  }
  bool interior(int i, int j, int k) const {
    return i > lo[0] && i < hi[0] && j > lo[1] && j < hi[1] && k > lo[2] && k < hi[2];
  }
  bool on_boundary(int i, int j, int k) const { return contains(i, j, k) && !interior(i, j, k); }
  std::size_t point_count() const {
    return static_cast<std::size_t>(intervals(0) + 1) * (intervals(1) + 1) * (intervals(2) + 1);
  }
  friend bool operator==(const IndexBox&, const IndexBox&) = default;
};

/// Uniform grid whose points are all global-lattice points.
struct UniformGrid {
  Vec3 origin;
  double h = 0.0;
  std::array<int, 3> dims{};  // interval counts

  int nx() const { return dims[0] + 1; }
  int ny() const { return dims[1] + 1; }
  int nz() const { return dims[2] + 1; }
  std::size_t size() const { return static_cast<std::size_t>(nx()) * ny() * nz(); }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(nx()) * (j + static_cast<std::size_t>(ny()) * k);
  }
  Vec3 point(int i, int j, int k) const { return origin + Vec3{i * h, j * h, k * h}; }
};

/// Global uniform lattice over Omega with the same number of intervals on every axis.
class Lattice {
 public:
  Lattice() = default;
  Lattice(Vec3 origin, double h, int intervals) : origin_(origin), h_(h), n_(intervals) {}

  const Vec3& origin() const { return origin_; }
  double h() const { return h_; }
  int intervals() const { return n_; }
  int points_per_axis() const { return n_ + 1; }
  std::size_t size() const {
    const auto p = static_cast<std::size_t>(n_ + 1);
    return p * p * p;
  }
  std::size_t index(int i, int j, int k) const {
    const auto p = static_cast<std::size_t>(n_ + 1);
    return static_cast<std::size_t>(i) + p * (static_cast<std::size_t>(j) + p * static_cast<std::size_t>(k));
  }
  std::array<int, 3> ijk(std::size_t idx) const {
    const auto p = static_cast<std::size_t>(n_ + 1);
    return {static_cast<int>(idx % p), static_cast<int>((idx / p) % p), static_cast<int>(idx / (p * p))};
  }
  Vec3 point(int i, int j, int k) const { return origin_ + Vec3{i * h_, j * h_, k * h_}; }
  Vec3 point(std::size_t idx) const {
    const auto c = ijk(idx);
    return point(c[0], c[1], c[2]);
  }
  bool on_outer_boundary(int i, int j, int k) const {
    return i == 0 || j == 0 || k == 0 || i == n_ || j == n_ || k == n_;
  }
  UniformGrid grid(const IndexBox& box) const;

 private:
  Vec3 origin_;
  double h_ = 0.0;
  int n_ = 0;
};

/// Omega, the box D and the seven overlapped boxes; box index 0..6 stands for Omega_1..Omega_7.
class BoxPartition {
 public:
  static constexpr int kBoxes = 7;
  static constexpr int kCentral = 6;

  const Cube& D() const { return D_; }
  const Cube& Omega() const { return Omega_; }
  int n() const { return n_; }
  int m() const { return m_; }
  int mu() const { return mu_; }
  double h() const { return h_; }
  double tau() const { return tau_; }
  double eta() const { return eta_; }
  const Lattice& lattice() const { return lattice_; }

  const IndexBox& box(int b) const { return boxes_[b]; }
  const IndexBox& D_index() const { return D_index_; }
  const IndexBox& central() const { return boxes_[kCentral]; }
  UniformGrid grid(int b) const { return lattice_.grid(boxes_[b]); }
  Cube box_extent(int b) const;

  /// Interval counts of D side, tau and eta in lattice units.
  int side_intervals() const { return s_; }
  int tau_intervals() const { return t_; }
  int eta_intervals() const { return e_; }

  friend BoxPartition build_partition(const Cube& D, int n, int m, int mu);

 private:
  Cube D_;
  Cube Omega_;
  int n_ = 0, m_ = 0, mu_ = 0;
  int s_ = 0, t_ = 0, e_ = 0;
  double h_ = 0.0, tau_ = 0.0, eta_ = 0.0;
  Lattice lattice_;
  std::array<IndexBox, kBoxes> boxes_{};
  IndexBox D_index_;
};

/// h = L/2^n, tau = 2^m h, eta = mu L/2; requires tau < eta.
BoxPartition build_partition(const Cube& D, int n, int m, int mu);

/// Smallest cube holding every atom sphere, inflated by `margin` on each side and centred on the
/// charge centroid.
Cube bounding_box_for(const ChargeSystem& charges, double margin);

}  // namespace smpbe
