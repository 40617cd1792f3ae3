#include "smpbe/coulomb.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "smpbe/error.hpp"

namespace smpbe {

namespace {
constexpr double kMinDistance = 1e-8;
}

CoulombField::CoulombField(ChargeSystem charges, const ModelParams& params)
    : charges_(std::move(charges)), scale_(params.alpha / (4.0 * std::numbers::pi * params.eps_p)) {
  if (!(scale_ > 0.0)) throw InputError("CoulombField: scale must be positive");
}

double CoulombField::G(const Vec3& r) const {
  double sum = 0.0;
  const auto atoms = charges_.atoms();
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    const double d = norm(r - atoms[j].position);
    if (d < kMinDistance) {
      throw InputError("Coulomb potential evaluated at the centre of atom " + std::to_string(j));
    }
    sum += atoms[j].charge / d;
  }
  return scale_ * sum;
}

double CoulombField::G_or_nan(const Vec3& r) const {
  double sum = 0.0;
  for (const auto& atom : charges_.atoms()) {
    const double d = norm(r - atom.position);
    if (d < kMinDistance) return std::numeric_limits<double>::quiet_NaN();
    sum += atom.charge / d;
  }
  return scale_ * sum;
}

Vec3 CoulombField::gradG(const Vec3& r) const {
  Vec3 g;
  const auto atoms = charges_.atoms();
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    const Vec3 d = r - atoms[j].position;
    const double dist = norm(d);
    if (dist < kMinDistance) {
      throw InputError("Coulomb gradient evaluated at the centre of atom " + std::to_string(j));
    }
    g -= d * (atoms[j].charge / (dist * dist * dist));
  }
  return g * scale_;
}

std::vector<double> CoulombField::G(std::span<const Vec3> points) const {
  std::vector<double> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = G(points[i]);
  return out;
}

std::vector<Vec3> CoulombField::gradG(std::span<const Vec3> points) const {
  std::vector<Vec3> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = gradG(points[i]);
  return out;
}

double CoulombField::nearest_atom_distance(const Vec3& r) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& atom : charges_.atoms()) best = std::min(best, norm(r - atom.position));
  return best;
}

}  // namespace smpbe
