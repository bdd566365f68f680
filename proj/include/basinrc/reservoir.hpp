#pragma once

// The fixed random reservoir and its two operating modes.
//
//   r <- (1 - lambda) r + lambda tanh(W_r r + W_in u + b)
//
// Open loop drives the update with an external signal; closed loop feeds the
// readout's output back in as the next input.

#include "basinrc/error.hpp"
#include "basinrc/readout.hpp"
#include "basinrc/timeseries.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace basinrc {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct ReservoirSpec {
  Index n_r = 200;
  double mean_degree = 10.0;
  double spectral_radius = 0.4;
  double input_strength = 1.0;
  double bias_strength = 0.5;
  double leakage = 1.0;
  Index n_in = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_r < 1)
      throw InvalidArgument("reservoir needs at least one node");
    if (n_in < 1)
      throw InvalidArgument("reservoir needs at least one input");
    if (!(mean_degree > 0.0) || mean_degree > static_cast<double>(n_r))
      throw InvalidArgument("mean degree must lie in (0, n_r]");
    if (spectral_radius < 0.0 || input_strength < 0.0 || bias_strength < 0.0)
      throw InvalidArgument("spectral radius, input and bias strengths must be non-negative");
    if (leakage < 0.0 || leakage > 1.0)
      throw InvalidArgument("leakage must lie in [0, 1]");
  }

  friend bool operator==(const ReservoirSpec&, const ReservoirSpec&) = default;
};

class Reservoir {
public:
  Reservoir(ReservoirSpec spec, SparseMatrix w_r, Matrix w_in, Vector bias)
      : spec_{spec}, w_r_{std::move(w_r)}, w_in_{std::move(w_in)}, bias_{std::move(bias)} {
    const Index n = w_r_.rows();
    if (w_r_.cols() != n || w_in_.rows() != n || bias_.size() != n)
      throw DimensionMismatch("reservoir weight shapes disagree");
    if (spec_.n_r != n || spec_.n_in != w_in_.cols())
      throw DimensionMismatch("reservoir weights do not match spec dimensions");
    if (spec_.leakage < 0.0 || spec_.leakage > 1.0)
      throw InvalidArgument("leakage must lie in [0, 1]");
    w_r_.makeCompressed();
  }

  [[nodiscard]] const ReservoirSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] const SparseMatrix& w_r() const noexcept { return w_r_; }
  [[nodiscard]] const Matrix& w_in() const noexcept { return w_in_; }
  [[nodiscard]] const Vector& bias() const noexcept { return bias_; }
  [[nodiscard]] double leakage() const noexcept { return spec_.leakage; }
  [[nodiscard]] Index size() const noexcept { return w_r_.rows(); }
  [[nodiscard]] Index input_dim() const noexcept { return w_in_.cols(); }

  /// One update of `state` in place. `scratch` must have size() entries.
  template <typename InputVec>
  void step(Vector& state, const InputVec& u, Vector& scratch) const {
    scratch.noalias() = w_r_ * state;
    scratch.noalias() += w_in_ * u;
    scratch += bias_;
    const double lambda = spec_.leakage;
    if (lambda == 1.0)
      state = scratch.array().tanh();
    else
      state = (1.0 - lambda) * state.array() + lambda * scratch.array().tanh();
  }

  friend bool operator==(const Reservoir& a, const Reservoir& b) {
    return a.spec_ == b.spec_ && a.w_in_ == b.w_in_ && a.bias_ == b.bias_ &&
           Matrix(a.w_r_) == Matrix(b.w_r_);
  }

private:
  ReservoirSpec spec_;
  SparseMatrix w_r_;
  Matrix w_in_;
  Vector bias_;
};

// ---------------------------------------------------------------------------
// Spectral radius

struct SpectralRadiusOptions {
  Index block = 32;             // subspace width
  Index max_iterations = 10000;
  double tolerance = 1e-10;     // relative Ritz residual
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
};

inline double dense_spectral_radius(const Matrix& a) {
  if (a.rows() == 0)
    return 0.0;
  Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw SingularSpectrum("dense eigensolver did not converge");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

namespace detail {
inline Matrix orthonormal_basis(const Matrix& z) {
  Eigen::HouseholderQR<Matrix> qr(z);
  return qr.householderQ() * Matrix::Identity(z.rows(), z.cols());
}
} // namespace detail

/// Largest |eigenvalue| of a square sparse matrix. Block power (subspace)
/// iteration with Rayleigh-Ritz extraction, which also resolves complex
/// conjugate dominant pairs. Small matrices and runs that fail to reach the
/// tolerance go to a dense eigensolve.
inline double spectral_radius(const SparseMatrix& w, const SpectralRadiusOptions& opts = {}) {
  using Complex = std::complex<double>;
  const Index n = w.rows();
  if (w.cols() != n)
    throw DimensionMismatch("spectral radius needs a square matrix");
  if (w.nonZeros() == 0)
    return 0.0;
  const Index p = std::min(opts.block, n);
  if (n <= 2 * p)
    return dense_spectral_radius(Matrix(w));

  std::mt19937_64 rng{opts.seed};
  std::normal_distribution<double> normal;
  Matrix q(n, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < n; ++i)
      q(i, j) = normal(rng);
  q = detail::orthonormal_basis(q);

  Matrix z(n, p);
  for (Index it = 0; it < opts.max_iterations; ++it) {
    z.noalias() = w * q;
    const double znorm = z.norm();
    if (znorm < 1e-300)
      return 0.0; // the subspace was annihilated: nilpotent on it
    const Matrix h = q.transpose() * z;
    Eigen::EigenSolver<Matrix> small(h, /*computeEigenvectors=*/true);
    if (small.info() == Eigen::Success) {
      Index top = 0;
      small.eigenvalues().cwiseAbs().maxCoeff(&top);
      const Complex theta = small.eigenvalues()[top];
      const Eigen::VectorXcd y = small.eigenvectors().col(top);
      const Eigen::VectorXcd residual = z.cast<Complex>() * y - theta * (q.cast<Complex>() * y);
      const double scale = std::abs(theta) * y.norm();
      if (scale > 0.0 && residual.norm() <= opts.tolerance * scale)
        return std::abs(theta);
    }
    q = detail::orthonormal_basis(z);
  }
  return dense_spectral_radius(Matrix(w));
}

/// Returns `w` multiplied so that its spectral radius equals `rho`.
inline SparseMatrix scaled_to_spectral_radius(SparseMatrix w, double rho,
                                              const SpectralRadiusOptions& opts = {}) {
  if (rho < 0.0)
    throw InvalidArgument("target spectral radius must be non-negative");
  if (rho == 0.0) {
    SparseMatrix zero(w.rows(), w.cols());
    return zero;
  }
  const double current = spectral_radius(w, opts);
  if (current < 1e-12)
    throw SingularSpectrum("generated matrix has spectral radius " + std::to_string(current) +
                           "; retry with another seed");
  w *= rho / current;
  return w;
}

/// Random reservoir per `spec`: Bernoulli(<d>/N_r) edges with U[-1,1]
/// weights rescaled to the requested spectral radius, U[-sigma,sigma] input
/// weights and U[-psi,psi] biases. All draws come from one stream seeded by
/// spec.seed, in that order.
inline Reservoir build_reservoir(const ReservoirSpec& spec) {
  spec.validate();
  const Index n = spec.n_r;
  std::mt19937_64 rng{spec.seed};
  std::uniform_real_distribution<double> unit{-1.0, 1.0};
  std::bernoulli_distribution edge{spec.mean_degree / static_cast<double>(n)};

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(spec.mean_degree * static_cast<double>(n) * 1.2));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (edge(rng))
        triplets.emplace_back(i, j, unit(rng));
  SparseMatrix w_r(n, n);
  w_r.setFromTriplets(triplets.begin(), triplets.end());
  w_r = scaled_to_spectral_radius(std::move(w_r), spec.spectral_radius);
  w_r.prune(0.0);

  Matrix w_in(n, spec.n_in);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < spec.n_in; ++j)
      w_in(i, j) = spec.input_strength * unit(rng);
  Vector bias(n);
  for (Index i = 0; i < n; ++i)
    bias[i] = spec.bias_strength * unit(rng);
  return {spec, std::move(w_r), std::move(w_in), std::move(bias)};
}

// ---------------------------------------------------------------------------
// Open and closed loop

/// Drives the reservoir from pre-input state `r0` through every sample of
/// `signal` (already in reservoir input coordinates). Row k of the result is
/// the state after consuming sample k.
inline Matrix drive_open_loop(const Reservoir& res, const TimeSeries& signal, const Vector& r0) {
  if (signal.dim() != res.input_dim())
    throw DimensionMismatch("signal has " + std::to_string(signal.dim()) +
                            " components, reservoir expects " + std::to_string(res.input_dim()));
  if (r0.size() != res.size())
    throw DimensionMismatch("initial state length differs from reservoir size");
  Matrix states(signal.size(), res.size());
  Vector r = r0;
  Vector scratch(res.size());
  for (Index k = 0; k < signal.size(); ++k) {
    res.step(r, signal.values().row(k).transpose(), scratch);
    states.row(k) = r.transpose();
  }
  return states;
}

/// Autonomous evolution: emit u = W_out r, then consume u. Runs in
/// standardized coordinates and returns the emitted series in signal
/// coordinates, starting at time t0.
inline TimeSeries run_closed_loop(const Reservoir& res, const Readout& readout, Vector r,
                                  Index n_steps, double dt, double t0 = 0.0) {
  if (n_steps < 1)
    throw InvalidArgument("closed loop needs at least one step");
  if (readout.reservoir_size() != res.size() || readout.input_dim() != res.input_dim() ||
      readout.standardizer.dim() != res.input_dim())
    throw DimensionMismatch("readout does not match reservoir");
  if (r.size() != res.size())
    throw DimensionMismatch("start state length differs from reservoir size");
  Matrix out(n_steps, res.input_dim());
  Vector u(res.input_dim());
  Vector scratch(res.size());
  for (Index k = 0; k < n_steps; ++k) {
    u.noalias() = readout.w_out * r;
    if (!u.allFinite())
      throw NonFinite("closed-loop output diverged at step " + std::to_string(k));
    out.row(k) = u.transpose();
    res.step(r, u, scratch);
    if (!r.allFinite())
      throw NonFinite("closed-loop state diverged at step " + std::to_string(k));
  }
  return readout.standardizer.invert(TimeSeries{std::move(out), dt, t0});
}

/// Final reservoir state after driving from zero through the standardized
/// test signal.
inline Vector synchronize(const Reservoir& res, const Readout& readout,
                          const TimeSeries& test_signal) {
  if (test_signal.dim() != res.input_dim() || readout.standardizer.dim() != res.input_dim())
    throw DimensionMismatch("test signal does not match reservoir input dimension");
  const Matrix z = readout.standardizer.apply(test_signal.values());
  Vector r = Vector::Zero(res.size());
  Vector scratch(res.size());
  for (Index k = 0; k < z.rows(); ++k)
    res.step(r, z.row(k).transpose(), scratch);
  return r;
}

/// Synchronize on `test_signal`, then forecast `n_steps` samples that
/// continue from its end.
inline TimeSeries forecast(const Reservoir& res, const Readout& readout,
                           const TimeSeries& test_signal, Index n_steps) {
  Vector r = synchronize(res, readout, test_signal);
  return run_closed_loop(res, readout, std::move(r), n_steps, test_signal.dt(),
                         test_signal.time(test_signal.size()));
}

} // namespace basinrc
