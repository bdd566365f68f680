#pragma once

// Benchmark multistable systems and the integrators that generate their
// trajectories.

#include "basinrc/error.hpp"
#include "basinrc/timeseries.hpp"

#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace basinrc {

using VectorField = std::function<void(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> dxdt)>;
using EnergyFunction = std::function<double(const Eigen::Ref<const Vector>& x)>;

enum class AttractorKind { FixedPoint, Chaotic };

struct AttractorDescriptor {
  AttractorKind kind = AttractorKind::FixedPoint;
  Vector location;  // equilibrium, or the mean of `reference` for chaotic sets
  Matrix reference; // on-attractor samples (rows); chaotic kind only
  std::string label;
};

struct SystemDef {
  std::string name;
  Index dim = 0;
  VectorField vector_field;
  std::map<std::string, double> params;
  std::vector<AttractorDescriptor> attractors;
  EnergyFunction energy;                // empty when no energy criterion applies
  std::optional<double> energy_barrier; // E0, set together with `energy`
  std::vector<Vector> unstable_points;

  [[nodiscard]] Vector evaluate(const Vector& x) const {
    if (x.size() != dim)
      throw DimensionMismatch(name + " state has " + std::to_string(dim) + " components");
    Vector dx(dim);
    vector_field(x, dx);
    return dx;
  }

  [[nodiscard]] bool has_chaotic_attractors() const {
    for (const auto& a : attractors)
      if (a.kind == AttractorKind::Chaotic)
        return true;
    return false;
  }
};

// ---------------------------------------------------------------------------
// Integrators

/// Classical fixed-step RK4. Returns n_steps + 1 samples starting with x0,
/// spaced dt * substeps apart.
inline TimeSeries integrate_rk4(const SystemDef& sys, const Vector& x0, double dt, Index n_steps,
                                Index substeps = 1) {
  if (!(dt > 0.0))
    throw InvalidArgument("integration step must be positive");
  if (n_steps < 0 || substeps < 1)
    throw InvalidArgument("step counts must be non-negative, substeps positive");
  if (x0.size() != sys.dim)
    throw DimensionMismatch("initial condition does not match system dimension");
  const Index d = sys.dim;
  Matrix out(n_steps + 1, d);
  Vector x = x0;
  Vector k1(d), k2(d), k3(d), k4(d), tmp(d);
  out.row(0) = x.transpose();
  for (Index n = 1; n <= n_steps; ++n) {
    for (Index s = 0; s < substeps; ++s) {
      sys.vector_field(x, k1);
      tmp = x + 0.5 * dt * k1;
      sys.vector_field(tmp, k2);
      tmp = x + 0.5 * dt * k2;
      sys.vector_field(tmp, k3);
      tmp = x + dt * k3;
      sys.vector_field(tmp, k4);
      x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!x.allFinite())
      throw NonFinite(sys.name + " trajectory overflowed at step " + std::to_string(n));
    out.row(n) = x.transpose();
  }
  return {std::move(out), dt * static_cast<double>(substeps)};
}

/// Adaptive Runge-Kutta-Fehlberg 7(8) with step-size control, sampled at
/// multiples of sample_dt up to t_end.
inline TimeSeries integrate_adaptive(const SystemDef& sys, const Vector& x0, double t_end,
                                     double rel_tol, double abs_tol, double sample_dt) {
  namespace odeint = boost::numeric::odeint;
  using State = std::vector<double>;
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || !(sample_dt > 0.0) || t_end < 0.0)
    throw InvalidArgument("adaptive integration needs positive tolerances and sample interval");
  if (x0.size() != sys.dim)
    throw DimensionMismatch("initial condition does not match system dimension");
  const auto n_samples = static_cast<Index>(std::floor(t_end / sample_dt + 1e-9)) + 1;
  std::vector<double> times(static_cast<std::size_t>(n_samples));
  for (Index k = 0; k < n_samples; ++k)
    times[static_cast<std::size_t>(k)] = static_cast<double>(k) * sample_dt;

  const Index d = sys.dim;
  Matrix out(n_samples, d);
  State x(x0.data(), x0.data() + d);
  auto rhs = [&sys, d](const State& s, State& ds, double /*t*/) {
    Eigen::Map<const Vector> in(s.data(), d);
    Eigen::Map<Vector> dx(ds.data(), d);
    sys.vector_field(in, dx);
  };
  Index row = 0;
  auto observer = [&out, &row, d](const State& s, double /*t*/) {
    out.row(row++) = Eigen::Map<const Vector>(s.data(), d).transpose();
  };
  try {
    odeint::integrate_times(
        odeint::make_controlled(abs_tol, rel_tol, odeint::runge_kutta_fehlberg78<State>()), rhs, x,
        times.begin(), times.end(), std::min(sample_dt, 1e-3), observer,
        odeint::max_step_checker(100000));
  } catch (const odeint::odeint_error& e) {
    throw StepSizeUnderflow(sys.name + ": " + e.what());
  }
  if (row != n_samples || !out.allFinite())
    throw NonFinite(sys.name + " adaptive trajectory is not finite");
  return {std::move(out), sample_dt};
}

/// Euler-Maruyama: x += f(x) dt + sqrt(dt) eta_p xi with xi ~ N(0, I).
inline TimeSeries integrate_with_process_noise(const SystemDef& sys, const Vector& x0, double dt,
                                               Index n_steps, double eta_p, std::uint64_t seed) {
  if (!(dt > 0.0) || n_steps < 0)
    throw InvalidArgument("process-noise integration needs dt > 0 and n >= 0");
  if (eta_p < 0.0)
    throw InvalidArgument("process noise must be non-negative");
  if (x0.size() != sys.dim)
    throw DimensionMismatch("initial condition does not match system dimension");
  const Index d = sys.dim;
  std::mt19937_64 rng{seed};
  std::normal_distribution<double> normal;
  const double kick = std::sqrt(dt) * eta_p;
  Matrix out(n_steps + 1, d);
  Vector x = x0;
  Vector f(d);
  out.row(0) = x.transpose();
  for (Index n = 1; n <= n_steps; ++n) {
    sys.vector_field(x, f);
    x += dt * f;
    for (Index j = 0; j < d; ++j)
      x[j] += kick * normal(rng);
    if (!x.allFinite())
      throw NonFinite(sys.name + " noisy trajectory overflowed at step " + std::to_string(n));
    out.row(n) = x.transpose();
  }
  return {std::move(out), dt};
}

// ---------------------------------------------------------------------------
// Systems

/// xdot = y, ydot = F0 + a y - b x - c x^3 with a = -1/2, b = -1, c = 1/10.
inline SystemDef duffing(double forcing = 0.0) {
  constexpr double a = -0.5;
  constexpr double b = -1.0;
  constexpr double c = 0.1;
  SystemDef sys;
  sys.name = "duffing";
  sys.dim = 2;
  sys.params = {{"a", a}, {"b", b}, {"c", c}, {"F0", forcing}};
  sys.vector_field = [a, b, c, forcing](const Eigen::Ref<const Vector>& s, Eigen::Ref<Vector> ds) {
    const double x = s[0];
    const double y = s[1];
    ds[0] = y;
    ds[1] = forcing + a * y - b * x - c * x * x * x;
  };

  // Equilibria are the real roots of c x^3 + b x - F0 = 0.
  auto newton = [&](double x) {
    for (int i = 0; i < 100; ++i) {
      const double g = c * x * x * x + b * x - forcing;
      const double dg = 3.0 * c * x * x + b;
      const double step = g / dg;
      x -= step;
      if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(x)))
        break;
    }
    return x;
  };
  const double left = newton(-6.0);
  const double right = newton(6.0);
  const double middle = newton(0.0);
  sys.attractors = {{AttractorKind::FixedPoint, Vector{{left, 0.0}}, {}, "A-"},
                    {AttractorKind::FixedPoint, Vector{{right, 0.0}}, {}, "A+"}};
  sys.unstable_points = {Vector{{middle, 0.0}}};
  if (forcing == 0.0) {
    sys.energy = [b, c](const Eigen::Ref<const Vector>& s) {
      const double x = s[0];
      const double y = s[1];
      return 0.5 * y * y + 0.5 * b * x * x + 0.25 * c * x * x * x * x;
    };
    sys.energy_barrier = 0.0;
  }
  return sys;
}

/// Decoupled wells xdot = x(1 - x^2)/2, ydot = y(1 - y^2)/2.
inline SystemDef multi_well() {
  SystemDef sys;
  sys.name = "multi_well";
  sys.dim = 2;
  sys.vector_field = [](const Eigen::Ref<const Vector>& s, Eigen::Ref<Vector> ds) {
    ds[0] = 0.5 * s[0] * (1.0 - s[0] * s[0]);
    ds[1] = 0.5 * s[1] * (1.0 - s[1] * s[1]);
  };
  // Quadrant order I, II, III, IV.
  sys.attractors = {{AttractorKind::FixedPoint, Vector{{1.0, 1.0}}, {}, "++"},
                    {AttractorKind::FixedPoint, Vector{{-1.0, 1.0}}, {}, "-+"},
                    {AttractorKind::FixedPoint, Vector{{-1.0, -1.0}}, {}, "--"},
                    {AttractorKind::FixedPoint, Vector{{1.0, -1.0}}, {}, "+-"}};
  sys.unstable_points = {Vector{{0.0, 0.0}}, Vector{{1.0, 0.0}}, Vector{{-1.0, 0.0}},
                         Vector{{0.0, 1.0}}, Vector{{0.0, -1.0}}};
  return sys;
}

/// Index of the multi-well attractor whose basin contains (x, y); the flow
/// is decoupled so the quadrant decides. Points on an axis have no basin.
inline std::optional<int> multi_well_basin(double x, double y) {
  if (x == 0.0 || y == 0.0)
    return std::nullopt;
  if (x > 0.0)
    return y > 0.0 ? 0 : 3;
  return y > 0.0 ? 1 : 2;
}

struct PendulumParams {
  double omega0 = 0.5;
  double gamma = 0.2;
  double height = 0.2;
};

inline std::array<std::array<double, 2>, 3> magnet_positions() {
  const double s3 = std::numbers::sqrt3;
  return {{{1.0 / s3, 0.0}, {-1.0 / (2.0 * s3), -0.5}, {-1.0 / (2.0 * s3), 0.5}}};
}

/// Distance from the bob at (x, y) to magnet i, which sits `height` below
/// the plane of motion.
inline double magnet_distance(double x, double y, std::size_t i, const PendulumParams& p) {
  const auto m = magnet_positions().at(i);
  const double dx = m[0] - x;
  const double dy = m[1] - y;
  return std::sqrt(dx * dx + dy * dy + p.height * p.height);
}

/// Planar acceleration of the bob at (x, y) with zero velocity.
inline std::array<double, 2> pendulum_static_force(double x, double y, const PendulumParams& p) {
  double ax = -p.omega0 * p.omega0 * x;
  double ay = -p.omega0 * p.omega0 * y;
  const auto magnets = magnet_positions();
  for (std::size_t i = 0; i < magnets.size(); ++i) {
    const double dist = magnet_distance(x, y, i, p);
    const double inv3 = 1.0 / (dist * dist * dist);
    ax += (magnets[i][0] - x) * inv3;
    ay += (magnets[i][1] - y) * inv3;
  }
  return {ax, ay};
}

/// Bob over three magnets; state (x, y, xdot, ydot).
inline SystemDef magnetic_pendulum(const PendulumParams& p = {}) {
  SystemDef sys;
  sys.name = "magnetic_pendulum";
  sys.dim = 4;
  sys.params = {{"omega0", p.omega0}, {"gamma", p.gamma}, {"d", p.height}};
  sys.vector_field = [p](const Eigen::Ref<const Vector>& s, Eigen::Ref<Vector> ds) {
    const auto f = pendulum_static_force(s[0], s[1], p);
    ds[0] = s[2];
    ds[1] = s[3];
    ds[2] = f[0] - p.gamma * s[2];
    ds[3] = f[1] - p.gamma * s[3];
  };

  // Relax the damped flow from rest above each magnet, then polish the
  // planar equilibrium with Newton steps on the static force.
  const char* labels[] = {"pink", "blue", "yellow"};
  const auto magnets = magnet_positions();
  for (std::size_t i = 0; i < magnets.size(); ++i) {
    const Vector start{{magnets[i][0], magnets[i][1], 0.0, 0.0}};
    const TimeSeries relaxed = integrate_adaptive(sys, start, 200.0, 1e-12, 1e-12, 200.0);
    double x = relaxed.back()[0];
    double y = relaxed.back()[1];
    for (int it = 0; it < 50; ++it) {
      const auto f = pendulum_static_force(x, y, p);
      if (std::hypot(f[0], f[1]) < 1e-15)
        break;
      constexpr double h = 1e-7;
      const auto fx = pendulum_static_force(x + h, y, p);
      const auto fy = pendulum_static_force(x, y + h, p);
      const double j00 = (fx[0] - f[0]) / h, j01 = (fy[0] - f[0]) / h;
      const double j10 = (fx[1] - f[1]) / h, j11 = (fy[1] - f[1]) / h;
      const double det = j00 * j11 - j01 * j10;
      x -= (j11 * f[0] - j01 * f[1]) / det;
      y -= (-j10 * f[0] + j00 * f[1]) / det;
    }
    sys.attractors.push_back(
        {AttractorKind::FixedPoint, Vector{{x, y, 0.0, 0.0}}, {}, labels[i]});
  }
  sys.unstable_points = {Vector{{0.0, 0.0, 0.0, 0.0}}};
  return sys;
}

struct LorenzReferenceOptions {
  double sample_dt = 0.02;
  Index substeps = 2;      // RK4 step = sample_dt / substeps
  Index n_samples = 10000; // first half discarded
};

/// xdot = -(ab/(a+b)) x - yz + c, ydot = a y + x z, zdot = b z + x y with
/// a = -10, b = -4, c = 18.1. The two chaotic attractors are mirror images
/// under (y, z) -> (-y, -z); references are integrated from (0, 1, 1) and
/// (0, -1, -1).
inline SystemDef multistable_lorenz(const LorenzReferenceOptions& opts = {}) {
  constexpr double a = -10.0;
  constexpr double b = -4.0;
  constexpr double c = 18.1;
  const double kx = -(a * b) / (a + b);
  SystemDef sys;
  sys.name = "multistable_lorenz";
  sys.dim = 3;
  sys.params = {{"a", a}, {"b", b}, {"c", c}};
  sys.vector_field = [kx](const Eigen::Ref<const Vector>& s, Eigen::Ref<Vector> ds) {
    ds[0] = kx * s[0] - s[1] * s[2] + c;
    ds[1] = a * s[1] + s[0] * s[2];
    ds[2] = b * s[2] + s[0] * s[1];
  };
  const double rk_dt = opts.sample_dt / static_cast<double>(opts.substeps);
  const Index keep = opts.n_samples / 2;
  const char* labels[] = {"A1", "A2"};
  const Vector seeds[] = {Vector{{0.0, 1.0, 1.0}}, Vector{{0.0, -1.0, -1.0}}};
  for (int i = 0; i < 2; ++i) {
    const TimeSeries ts = integrate_rk4(sys, seeds[i], rk_dt, opts.n_samples - 1, opts.substeps);
    Matrix ref = ts.values().bottomRows(keep);
    Vector centre = ref.colwise().mean().transpose();
    sys.attractors.push_back({AttractorKind::Chaotic, std::move(centre), std::move(ref), labels[i]});
  }
  return sys;
}

} // namespace basinrc
