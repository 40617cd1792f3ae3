#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "smpbe/analysis.hpp"
#include "smpbe/error.hpp"

using namespace smpbe;

namespace {

const ModelParams kParams = ModelParams::standard();

}  // namespace

TEST(Concentrations, BulkValueAtZeroPotential) {
  const auto c = concentrations(0.0, kParams);
  const double expect = kParams.I_s / (1.0 + kParams.packing());
  EXPECT_NEAR(c.na, expect, 1e-15);
  EXPECT_NEAR(c.cl, expect, 1e-15);
  EXPECT_NEAR(c.na, 0.09964, 5e-6);
  EXPECT_FALSE(c.saturated);
}

TEST(Concentrations, SaturationLimit) {
  EXPECT_NEAR(saturation_concentration(3.11), 55.2, 0.05);
  const double cmax = saturation_concentration(kParams.Lambda);
  for (double u : {-50.0, -500.0, -1e5}) {
    const auto c = concentrations(u, kParams);
    EXPECT_NEAR(c.na, cmax, 1e-6 * cmax);
    EXPECT_GE(c.cl, 0.0);
    EXPECT_LT(c.cl, 1e-10);
  }
}

TEST(Concentrations, BoundedBySaturationAndSymmetric) {
  const double cmax = saturation_concentration(kParams.Lambda);
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> d(-800, 800);
  for (int i = 0; i < 2000; ++i) {
    const double u = d(rng) * (i % 2 ? 1.0 : 0.01);
    const auto a = concentrations(u, kParams), b = concentrations(-u, kParams);
    EXPECT_LE(std::max(a.na, a.cl), cmax * (1 + 1e-12));
    EXPECT_DOUBLE_EQ(a.na, b.cl);
    EXPECT_DOUBLE_EQ(a.cl, b.na);
  }
}

TEST(Concentrations, BoundedByQuotedSaturationValue) {
  const double bound = 55.2 * (1 + 1e-6);
  for (double u : {-2.0, -10.0, -30.0, -100.0, 100.0}) {
    const auto c = concentrations(u, kParams);
    EXPECT_LE(std::max(c.na, c.cl), bound) << "u = " << u;
  }
}

TEST(Concentrations, MatchesDirectFormulaForModeratePotentials) {
  for (double u : {-5.0, -1.0, 0.3, 2.0, 10.0}) {
    const double den = 1 + kParams.packing() * std::cosh(u);
    const auto c = concentrations(u, kParams);
    EXPECT_NEAR(c.na, kParams.I_s * std::exp(-u) / den, 1e-12 * c.na);
    EXPECT_NEAR(c.cl, kParams.I_s * std::exp(u) / den, 1e-12 * c.cl);
  }
}

TEST(Concentrations, PbeIsBoltzmannAndUnbounded) {
  const auto c = concentrations(-8.0, kParams, IonModel::PBE);
  EXPECT_NEAR(c.na, kParams.I_s * std::exp(8.0), 1e-10 * c.na);
  EXPECT_GT(c.na, 100.0);
  EXPECT_TRUE(concentrations(-1000.0, kParams, IonModel::PBE).saturated);
  const auto lam0 = ModelParams::make(2, 80, 0.0, 298.15, 0.1);
  EXPECT_NEAR(concentrations(-3.0, lam0).na, 0.1 * std::exp(3.0), 1e-12);
  EXPECT_THROW(concentrations(std::nan(""), kParams), InputError);
}

TEST(SolvationEnergy, UnitConversion) {
  EXPECT_NEAR(kcal_per_mol_per_kT(298.15), 0.592486, 1e-5);
}

TEST(BindingSlope, ExactLine) {
  std::vector<std::pair<double, double>> data;
  for (double xi : xi_grid(-3.0, 0.2, -1.0)) data.emplace_back(std::exp(xi), 2 * xi + 1);
  const auto fit = binding_slope(data, 298.15);
  EXPECT_NEAR(fit.m, 2.0, 1e-12);
  EXPECT_NEAR(fit.b, 1.0, 1e-12);
  EXPECT_LT(fit.residual, 1e-12);
  EXPECT_NEAR(fit.m_s, -2.0 / kcal_per_mol_per_kT(298.15), 1e-10);
  ASSERT_EQ(fit.points.size(), 11u);
}

TEST(BindingSlope, AffineTransformation) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> d(-1, 1);
  std::vector<std::pair<double, double>> data, moved;
  for (int j = 0; j < 9; ++j) {
    const double xi = -3 + 0.25 * j, e = 0.7 * xi - 2 + 0.1 * d(rng);
    data.emplace_back(std::exp(xi), e);
    moved.emplace_back(std::exp(xi), 3 * e - 4);
  }
  const auto a = binding_slope(data, 298.15), b = binding_slope(moved, 298.15);
  EXPECT_NEAR(b.m, 3 * a.m, 1e-12);
  EXPECT_NEAR(b.b, 3 * a.b - 4, 1e-12);
  EXPECT_GT(a.residual, 0.0);
}

TEST(BindingSlope, RejectsBadInput) {
  const std::vector<std::pair<double, double>> one{{0.1, 1.0}}, neg{{0.1, 1.0}, {-0.1, 2.0}}, same{{0.1, 1.0}, {0.1, 2.0}};
  EXPECT_THROW(binding_slope(one, 298.15), InputError);
  EXPECT_THROW(binding_slope(neg, 298.15), InputError);
  EXPECT_THROW(binding_slope(same, 298.15), InputError);
}

TEST(XiGrid, ElevenPoints) {
  const auto xs = xi_grid(-3.0, 0.2, -1.0);
  ASSERT_EQ(xs.size(), 11u);
  for (int j = 0; j <= 10; ++j) EXPECT_DOUBLE_EQ(xs[j], -3.0 + 0.2 * j);
  EXPECT_EQ(xi_grid(0, 1, 0).size(), 1u);
  EXPECT_THROW(xi_grid(0, 0, 1), InputError);
  EXPECT_THROW(xi_grid(0, 1, -1), InputError);
}

TEST(BornAnalytic, ContinuityAndSolventBranch) {
  const ChargeSystem ion({Atom{{0, 0, 0}, 1.0, 1.0}});
  const double k = kParams.alpha / (4 * std::numbers::pi * kParams.eps_s);
  EXPECT_NEAR(k, 7.006, 5e-4);
  EXPECT_NEAR(born_analytic({1 - 1e-12, 0, 0}, ion, kParams), k, 1e-8);
  EXPECT_NEAR(born_analytic({0, 1, 0}, ion, kParams), k, 1e-12);
  EXPECT_NEAR(born_analytic({0, 0, 2}, ion, kParams), 3.503, 5e-4);
  const auto same = ModelParams::make(80, 80, 3.11, 298.15, 0.1);
  for (double r : {0.3, 0.9, 1.5, 4.0}) EXPECT_NEAR(born_analytic({r, 0, 0}, ion, same), k / r, 1e-12 * k / r);
  EXPECT_THROW(born_analytic({1, 1, 1}, ChargeSystem(std::vector<Atom>{}), kParams), InputError);
}

TEST(BornAnalytic, EnergyOfTheIon) {
  // Psi at the centre is constant inside the ball; Delta E = 1/2 q Psi(0) in kcal/mol
  const ChargeSystem ion({Atom{{0, 0, 0}, 1.0, 1.0}});
  const auto p0 = ModelParams::make(2, 80, 3.11, 298.15, 0.0);
  const double psi0 = p0.alpha / (4 * std::numbers::pi) * (1 / p0.eps_s - 1 / p0.eps_p);
  EXPECT_NEAR(0.5 * psi0 * kcal_per_mol_per_kT(p0.T), -80.94, 0.01);
}
