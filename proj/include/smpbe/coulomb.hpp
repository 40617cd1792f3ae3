#pragma once

#include <span>
#include <vector>

#include "smpbe/model.hpp"
#include "smpbe/vec3.hpp"

namespace smpbe {

/// Singular Coulomb component G(r) = alpha/(4 pi eps_p) sum_j z_j/|r - r_j| and its gradient.
class CoulombField {
 public:
  CoulombField(ChargeSystem charges, const ModelParams& params);

  double scale() const { return scale_; }
  const ChargeSystem& charges() const { return charges_; }

  /// Throws InputError if r is within 1e-8 A of an atom centre.
  double G(const Vec3& r) const;
  Vec3 gradG(const Vec3& r) const;

  std::vector<double> G(std::span<const Vec3> points) const;
  std::vector<Vec3> gradG(std::span<const Vec3> points) const;

  /// Like G(r) but returns NaN instead of throwing at atom centres.
  double G_or_nan(const Vec3& r) const;

  /// Distance from r to the closest atom centre.
  double nearest_atom_distance(const Vec3& r) const;

 private:
  ChargeSystem charges_;
  double scale_ = 0.0;
};

}  // namespace smpbe
