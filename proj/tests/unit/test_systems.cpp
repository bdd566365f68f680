#include "basinrc/systems.hpp"
#include "test_util.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace basinrc;

namespace {

SystemDef linear_decay() {
  SystemDef s;
  s.name = "decay";
  s.dim = 1;
  s.vector_field = [](const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> dx) { dx[0] = -x[0]; };
  return s;
}

Matrix numerical_jacobian(const SystemDef& sys, const Vector& x) {
  const Index d = sys.dim;
  Matrix j(d, d);
  for (Index c = 0; c < d; ++c) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[c]));
    Vector xp = x, xm = x;
    xp[c] += h;
    xm[c] -= h;
    j.col(c) = (sys.evaluate(xp) - sys.evaluate(xm)) / (2.0 * h);
  }
  return j;
}

void expect_attracting_equilibria(const SystemDef& sys) {
  for (const auto& a : sys.attractors) {
    EXPECT_LE(sys.evaluate(a.location).norm(), 1e-9) << sys.name << " " << a.label;
    Eigen::EigenSolver<Matrix> es(numerical_jacobian(sys, a.location), false);
    EXPECT_LT(es.eigenvalues().real().maxCoeff(), 0.0) << sys.name << " " << a.label;
  }
}

} // namespace

TEST(Duffing, UnforcedAttractors) {
  const SystemDef sys = duffing();
  ASSERT_EQ(sys.attractors.size(), 2u);
  EXPECT_NEAR(sys.attractors[0].location[0], -std::sqrt(10.0), 1e-12);
  EXPECT_NEAR(sys.attractors[1].location[0], std::sqrt(10.0), 1e-12);
  EXPECT_NEAR(sys.attractors[1].location[0], 3.16, 0.005);
  EXPECT_EQ(sys.attractors[0].location[1], 0.0);
}

TEST(Duffing, ForcedAttractors) {
  const SystemDef sys = duffing(1.0);
  EXPECT_NEAR(sys.attractors[0].location[0], -2.42, 0.005);
  EXPECT_NEAR(sys.attractors[1].location[0], 3.58, 0.005);
  EXPECT_FALSE(sys.energy_barrier.has_value());
}

TEST(Duffing, EnergyAtAttractorBelowBarrier) {
  const SystemDef sys = duffing();
  ASSERT_TRUE(sys.energy && sys.energy_barrier);
  const double e = sys.energy(Vector{{std::sqrt(10.0), 0.0}});
  EXPECT_NEAR(e, -5.0 + 2.5, 1e-12);
  EXPECT_LT(e, *sys.energy_barrier);
  EXPECT_EQ(*sys.energy_barrier, 0.0);
}

TEST(Duffing, VectorFieldArithmetic) {
  const SystemDef sys = duffing(1.0);
  // ydot = F0 + a y - b x - c x^3 at (2, 3): 1 - 1.5 + 2 - 0.8
  const Vector f = sys.evaluate(Vector{{2.0, 3.0}});
  EXPECT_DOUBLE_EQ(f[0], 3.0);
  EXPECT_NEAR(f[1], 0.7, 1e-15);
}

TEST(Duffing, EquilibriaAttract) {
  expect_attracting_equilibria(duffing());
  expect_attracting_equilibria(duffing(1.0));
}

TEST(MultiWell, Examples) {
  const SystemDef sys = multi_well();
  EXPECT_EQ(sys.evaluate(Vector{{1.0, 1.0}}), Vector::Zero(2));
  const Vector f = sys.evaluate(Vector{{2.0, 0.0}});
  EXPECT_DOUBLE_EQ(f[0], -3.0);
  EXPECT_DOUBLE_EQ(f[1], 0.0);
  const auto basin = multi_well_basin(0.3, -2.0);
  ASSERT_TRUE(basin.has_value());
  EXPECT_EQ(sys.attractors[static_cast<std::size_t>(*basin)].location, (Vector{{1.0, -1.0}}));
  EXPECT_FALSE(multi_well_basin(0.0, 1.0).has_value());
}

TEST(MultiWell, EquilibriaAttract) { expect_attracting_equilibria(multi_well()); }

TEST(MagneticPendulum, MagnetDistanceAboveMagnetIsHeight) {
  const PendulumParams p;
  const auto magnets = magnet_positions();
  for (std::size_t i = 0; i < magnets.size(); ++i)
    EXPECT_DOUBLE_EQ(magnet_distance(magnets[i][0], magnets[i][1], i, p), 0.2);
}

TEST(MagneticPendulum, RelaxedEquilibria) {
  const SystemDef sys = magnetic_pendulum();
  ASSERT_EQ(sys.attractors.size(), 3u);
  for (const auto& a : sys.attractors) {
    EXPECT_LE(sys.evaluate(a.location).norm(), 1e-9);
    EXPECT_EQ(a.location[2], 0.0);
    EXPECT_EQ(a.location[3], 0.0);
  }
  expect_attracting_equilibria(sys);
}

TEST(MagneticPendulum, EquilibriaShareThreeFoldSymmetry) {
  const SystemDef sys = magnetic_pendulum();
  const double th = 2.0 * std::numbers::pi / 3.0;
  Eigen::Matrix2d rot;
  rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  for (const auto& a : sys.attractors) {
    const Eigen::Vector2d turned = rot * a.location.head<2>();
    double best = INFINITY;
    for (const auto& b : sys.attractors)
      best = std::min(best, (turned - b.location.head<2>()).norm());
    EXPECT_LE(best, 1e-8);
  }
}

TEST(MultistableLorenz, VectorFieldAtOrigin) {
  const SystemDef sys = multistable_lorenz();
  const Vector f = sys.evaluate(Vector::Zero(3));
  EXPECT_DOUBLE_EQ(f[0], 18.1);
  EXPECT_EQ(f[1], 0.0);
  EXPECT_EQ(f[2], 0.0);
}

TEST(MultistableLorenz, LinearCoefficientIsPositive) {
  const SystemDef sys = multistable_lorenz();
  const double a = -10.0, b = -4.0;
  const double k = -(a * b) / (a + b);
  EXPECT_NEAR(k, 20.0 / 7.0, 1e-15);
  EXPECT_GT(k, 0.0);
  EXPECT_NEAR(sys.evaluate(Vector{{1.0, 0.0, 0.0}})[0] - 18.1, 20.0 / 7.0, 1e-13);
  // ydot = a y + x z, zdot = b z + x y at (2, 3, 5)
  const Vector f = sys.evaluate(Vector{{2.0, 3.0, 5.0}});
  EXPECT_DOUBLE_EQ(f[1], -30.0 + 10.0);
  EXPECT_DOUBLE_EQ(f[2], -20.0 + 6.0);
}

TEST(MultistableLorenz, MirrorSeedsSettleOnDistinctLobes) {
  const SystemDef sys = multistable_lorenz();
  ASSERT_EQ(sys.attractors.size(), 2u);
  const TimeSeries up = integrate_rk4(sys, Vector{{0.0, 1.0, 1.0}}, 0.01, 20000, 2);
  const TimeSeries down = integrate_rk4(sys, Vector{{0.0, -1.0, -1.0}}, 0.01, 20000, 2);
  const Vector mu = up.values().bottomRows(10000).colwise().mean();
  const Vector md = down.values().bottomRows(10000).colwise().mean();
  // The lobes are mirror images under (y, z) -> (-y, -z), so the mean of z
  // (and of y) has opposite signs while the mean of y*z does not.
  EXPECT_GT(mu[2], 1.0);
  EXPECT_LT(md[2], -1.0);
  EXPECT_NEAR(mu[0], md[0], 0.5);
  for (const auto& a : sys.attractors)
    EXPECT_GE(a.reference.rows(), 500);
  EXPECT_GT(sys.attractors[0].location[2], 0.0);
  EXPECT_LT(sys.attractors[1].location[2], 0.0);
}

TEST(Rk4, ZeroFieldIsConstant) {
  SystemDef still;
  still.name = "still";
  still.dim = 2;
  still.vector_field = [](const Eigen::Ref<const Vector>&, Eigen::Ref<Vector> dx) { dx.setZero(); };
  const TimeSeries ts = integrate_rk4(still, Vector{{1.5, -2.0}}, 0.1, 50);
  EXPECT_EQ(ts.size(), 51);
  for (Index k = 0; k < ts.size(); ++k)
    EXPECT_EQ(Vector(ts.row(k).transpose()), (Vector{{1.5, -2.0}}));
}

TEST(Rk4, OneStepOfExponentialDecay) {
  const TimeSeries ts = integrate_rk4(linear_decay(), Vector::Ones(1), 0.01, 1);
  EXPECT_NEAR(ts.values()(1, 0), std::exp(-0.01), 1e-10);
}

TEST(Rk4, FourthOrderScaling) {
  std::vector<double> err;
  for (double dt : {0.02, 0.01, 0.005}) {
    const auto n = static_cast<Index>(std::lround(1.0 / dt));
    const TimeSeries ts = integrate_rk4(linear_decay(), Vector::Ones(1), dt, n);
    err.push_back(std::abs(ts.back()[0] - std::exp(-1.0)));
  }
  for (std::size_t i = 0; i + 1 < err.size(); ++i) {
    const double ratio = err[i] / err[i + 1];
    EXPECT_GE(ratio, 8.0) << ratio;
    EXPECT_LE(ratio, 32.0) << ratio;
  }
}

TEST(Rk4, SubstepsSampleCoarserGrid) {
  const TimeSeries fine = integrate_rk4(linear_decay(), Vector::Ones(1), 0.01, 20);
  const TimeSeries coarse = integrate_rk4(linear_decay(), Vector::Ones(1), 0.01, 10, 2);
  EXPECT_DOUBLE_EQ(coarse.dt(), 0.02);
  EXPECT_EQ(coarse.back()[0], fine.back()[0]);
}

TEST(Rk4, DuffingEnergyNeverIncreases) {
  const SystemDef sys = duffing();
  const TimeSeries ts = integrate_rk4(sys, Vector{{5.0, 5.0}}, 0.01, 2000);
  double prev = sys.energy(ts.front());
  for (Index k = 1; k < ts.size(); ++k) {
    const double e = sys.energy(ts.row(k).transpose());
    EXPECT_LE(e, prev + 1e-12) << "step " << k;
    prev = e;
  }
}

TEST(Rk4, BlowUpIsNonFinite) {
  SystemDef boom;
  boom.name = "boom";
  boom.dim = 1;
  boom.vector_field = [](const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> dx) { dx[0] = x[0] * x[0]; };
  EXPECT_THROW(integrate_rk4(boom, Vector::Constant(1, 10.0), 0.1, 100), NonFinite);
}

TEST(Adaptive, StaysAtPendulumEquilibrium) {
  const SystemDef sys = magnetic_pendulum();
  for (const auto& a : sys.attractors) {
    const TimeSeries ts = integrate_adaptive(sys, a.location, 40.0, 1e-10, 1e-10, 0.5);
    EXPECT_LE((ts.values().rowwise() - a.location.transpose()).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Adaptive, MatchesFineRk4OnPendulum) {
  const SystemDef sys = magnetic_pendulum();
  const Vector x0{{0.9, -0.7, 0.0, 0.0}};
  const TimeSeries ref = integrate_rk4(sys, x0, 1e-4, 100000);
  const TimeSeries ad = integrate_adaptive(sys, x0, 10.0, 1e-10, 1e-10, 10.0);
  EXPECT_LE((ad.back() - ref.back()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Adaptive, TighterToleranceReducesError) {
  const SystemDef sys = magnetic_pendulum();
  const Vector x0{{0.9, -0.7, 0.0, 0.0}};
  const Vector ref = integrate_rk4(sys, x0, 1e-4, 100000).back();
  double previous = INFINITY;
  for (double tol : {1e-4, 5e-5, 2.5e-5, 1.25e-5}) {
    const double err = (integrate_adaptive(sys, x0, 10.0, tol, tol, 10.0).back() - ref).cwiseAbs().maxCoeff();
    EXPECT_LT(err, previous) << "tolerance " << tol;
    previous = err;
  }
}

TEST(Adaptive, SamplesOnRequestedGrid) {
  const TimeSeries ts = integrate_adaptive(linear_decay(), Vector::Ones(1), 2.0, 1e-12, 1e-12, 0.25);
  EXPECT_EQ(ts.size(), 9);
  for (Index k = 0; k < ts.size(); ++k)
    EXPECT_NEAR(ts.values()(k, 0), std::exp(-0.25 * static_cast<double>(k)), 1e-10);
}

TEST(ProcessNoise, ZeroNoiseIsEulerPath) {
  const SystemDef sys = duffing();
  const Vector x0{{2.0, 1.0}};
  const double dt = 0.001;
  const TimeSeries em = integrate_with_process_noise(sys, x0, dt, 1000, 0.0, 1);
  Vector x = x0;
  for (Index k = 0; k < 1000; ++k)
    x += dt * sys.evaluate(x);
  EXPECT_LE((em.back() - x).cwiseAbs().maxCoeff(), 1e-12);
  const TimeSeries rk = integrate_rk4(sys, x0, dt, 1000);
  EXPECT_LE((em.back() - rk.back()).cwiseAbs().maxCoeff(), 10.0 * dt);
}

TEST(ProcessNoise, SameSeedBitIdentical) {
  const SystemDef sys = duffing();
  const Vector x0{{2.0, 1.0}};
  EXPECT_EQ(integrate_with_process_noise(sys, x0, 0.01, 500, 0.1, 9),
            integrate_with_process_noise(sys, x0, 0.01, 500, 0.1, 9));
  EXPECT_FALSE(integrate_with_process_noise(sys, x0, 0.01, 500, 0.1, 9) ==
               integrate_with_process_noise(sys, x0, 0.01, 500, 0.1, 10));
}

TEST(ProcessNoise, OrnsteinUhlenbeckStationaryVariance) {
  const SystemDef sys = linear_decay();
  const double eta = 0.3;
  const int paths = 10000;
  double sum = 0.0, sq = 0.0;
  for (int p = 0; p < paths; ++p) {
    const TimeSeries ts = integrate_with_process_noise(sys, Vector::Zero(1), 0.01, 800, eta, 1000 + p);
    const double v = ts.back()[0];
    sum += v;
    sq += v * v;
  }
  const double mean = sum / paths;
  const double var = sq / paths - mean * mean;
  EXPECT_NEAR(var, eta * eta / 2.0, 0.1 * eta * eta / 2.0);
}

TEST(SystemDefinition, StateSizeChecked) {
  EXPECT_THROW((void)duffing().evaluate(Vector::Zero(3)), DimensionMismatch);
  EXPECT_THROW(integrate_rk4(duffing(), Vector::Zero(3), 0.01, 1), DimensionMismatch);
}
