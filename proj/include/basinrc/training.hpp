#pragma once

// Ridge-regression readout over many disjoint training signals.
//
// Each signal is standardized, perturbed with white noise, and driven through
// the reservoir from the zero state. After the first n_trans states of every
// signal are dropped, the state that has consumed sample k is paired with
// sample k+1 as its target. Only the normal-equation sums Y R^T, R R^T (and
// Y Y^T, for the residual) are kept, so reservoir states live in memory one
// bounded batch at a time.

#include "basinrc/error.hpp"
#include "basinrc/readout.hpp"
#include "basinrc/reservoir.hpp"
#include "basinrc/timeseries.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace basinrc {

struct TrainConfig {
  Index n_trans = 5;
  double alpha = 1e-12;
  double eta = 1e-5;
  Index batch_max_states = 4096;
  std::uint64_t seed = 0;
  bool standardize = true;

  void validate() const {
    if (n_trans < 0)
      throw InvalidArgument("n_trans must be non-negative");
    if (alpha < 0.0)
      throw InvalidArgument("alpha must be non-negative");
    if (eta < 0.0)
      throw InvalidArgument("eta must be non-negative");
    if (batch_max_states < 1)
      throw InvalidArgument("batch_max_states must be at least 1");
  }
};

class NormalAccumulator {
public:
  NormalAccumulator(Index n_in, Index n_r)
      : yrt_{Matrix::Zero(n_in, n_r)}, rrt_{Matrix::Zero(n_r, n_r)}, yyt_{Matrix::Zero(n_in, n_in)} {}

  [[nodiscard]] const Matrix& yrt() const noexcept { return yrt_; }
  [[nodiscard]] const Matrix& rrt() const {
    if (!symmetric_) {
      rrt_.triangularView<Eigen::StrictlyUpper>() = rrt_.transpose();
      symmetric_ = true;
    }
    return rrt_;
  }
  [[nodiscard]] const Matrix& yyt() const noexcept { return yyt_; }
  [[nodiscard]] Index n_fit() const noexcept { return n_fit_; }
  [[nodiscard]] Index input_dim() const noexcept { return yrt_.rows(); }
  [[nodiscard]] Index reservoir_size() const noexcept { return rrt_.rows(); }

  /// Adds one batch: row i of `states` is paired with row i of `targets`.
  /// Pairs are added one at a time in row order, so the sums do not depend
  /// on how a sequence of pairs is split into batches.
  void accumulate(const Eigen::Ref<const Matrix>& states, const Eigen::Ref<const Matrix>& targets) {
    if (states.rows() != targets.rows() || states.cols() != reservoir_size() ||
        targets.cols() != input_dim())
      throw DimensionMismatch("batch shapes do not match the accumulator");
    const Index n = reservoir_size();
    Vector r(n);
    Vector y(input_dim());
    for (Index i = 0; i < states.rows(); ++i) {
      r = states.row(i).transpose();
      y = targets.row(i).transpose();
      for (Index j = 0; j < n; ++j)
        rrt_.col(j).tail(n - j) += r[j] * r.tail(n - j);
      for (Index j = 0; j < n; ++j)
        yrt_.col(j) += r[j] * y;
      yyt_ += y * y.transpose();
    }
    if (states.rows() > 0)
      symmetric_ = false;
    n_fit_ += states.rows();
  }

  /// Sum of two accumulators (associative up to rounding).
  void merge(const NormalAccumulator& other) {
    if (other.input_dim() != input_dim() || other.reservoir_size() != reservoir_size())
      throw DimensionMismatch("cannot merge accumulators of different shapes");
    yrt_ += other.yrt_;
    rrt_.triangularView<Eigen::Lower>() += other.rrt_;
    symmetric_ = false;
    yyt_ += other.yyt_;
    n_fit_ += other.n_fit_;
  }

private:
  // Only the lower triangle of rrt_ is accumulated; the upper one is filled
  // in on demand.
  Matrix yrt_;
  mutable Matrix rrt_;
  Matrix yyt_;
  Index n_fit_ = 0;
  mutable bool symmetric_ = true;
};

/// W_out = Y R^T (R R^T + alpha N_fit I)^{-1} through a Cholesky solve, with
/// a rank-revealing QR fallback when the factorization fails.
inline Matrix solve_readout(const NormalAccumulator& acc, double alpha) {
  if (acc.n_fit() < 1)
    throw InvalidArgument("no input/output pairs accumulated");
  if (alpha < 0.0)
    throw InvalidArgument("alpha must be non-negative");
  const Index n = acc.reservoir_size();
  Matrix system = acc.rrt();
  system.diagonal().array() += alpha * static_cast<double>(acc.n_fit());

  Eigen::LLT<Matrix> llt(system);
  bool usable = llt.info() == Eigen::Success;
  if (usable && alpha == 0.0) {
    // Unregularized: reject numerically rank-deficient factors.
    const Vector pivots = llt.matrixLLT().diagonal().array().square();
    usable = pivots.minCoeff() > static_cast<double>(n) * std::numeric_limits<double>::epsilon() *
                                     system.diagonal().maxCoeff();
  }
  if (usable)
    return llt.solve(acc.yrt().transpose()).transpose();

  Eigen::ColPivHouseholderQR<Matrix> qr(system);
  if (qr.rank() < n)
    throw SingularSystem("normal matrix has rank " + std::to_string(qr.rank()) + " of " +
                         std::to_string(n));
  return qr.solve(acc.yrt().transpose()).transpose();
}

/// Mean squared training error of `w_out` evaluated from the accumulated sums.
inline double training_mse(const NormalAccumulator& acc, const Matrix& w_out) {
  if (acc.n_fit() < 1)
    return 0.0;
  const double fit = (w_out * acc.rrt()).cwiseProduct(w_out).sum();
  const double cross = w_out.cwiseProduct(acc.yrt()).sum();
  const double sse = fit - 2.0 * cross + acc.yyt().trace();
  return std::max(sse, 0.0) / static_cast<double>(acc.n_fit());
}

/// Drives `res` from the zero state through one (standardized, noisy)
/// training signal and accumulates its post-transient pairs in batches of at
/// most `batch_max` rows. Returns the largest batch held.
inline Index accumulate_signal(const Reservoir& res, const TimeSeries& signal, Index n_trans,
                               Index batch_max, NormalAccumulator& acc) {
  if (signal.dim() != res.input_dim() || acc.input_dim() != res.input_dim() ||
      acc.reservoir_size() != res.size())
    throw DimensionMismatch("training signal, reservoir and accumulator disagree");
  const Index pairs = signal.size() - 1 - n_trans;
  if (pairs < 1)
    throw TooShort("signal of " + std::to_string(signal.size()) + " samples leaves no fit pairs");
  const Index rows = std::min(batch_max, pairs);
  Matrix states(rows, res.size());
  Matrix targets(rows, res.input_dim());
  Index filled = 0;

  Vector r = Vector::Zero(res.size());
  Vector scratch(res.size());
  const Matrix& u = signal.values();
  for (Index k = 0; k + 1 < signal.size(); ++k) {
    res.step(r, u.row(k).transpose(), scratch);
    if (k < n_trans)
      continue;
    states.row(filled) = r.transpose();
    targets.row(filled) = u.row(k + 1);
    if (++filled == rows) {
      acc.accumulate(states, targets);
      filled = 0;
    }
  }
  if (filled > 0)
    acc.accumulate(states.topRows(filled), targets.topRows(filled));
  return rows;
}

/// Standardizer plus the noisy standardized signals actually fed to the
/// reservoir during training.
struct PreparedSignals {
  Standardizer standardizer;
  std::vector<TimeSeries> noisy;
};

/// Standardize (or not) and add training noise, drawing signal by signal in
/// list order from one stream seeded with cfg.seed.
inline PreparedSignals prepare_training_signals(std::span<const TimeSeries> signals,
                                                const TrainConfig& cfg) {
  const Index n_in = detail::common_dim(signals);
  Standardizer standardizer =
      cfg.standardize ? fit_standardizer(signals) : Standardizer::identity(n_in);
  std::vector<TimeSeries> standardized;
  standardized.reserve(signals.size());
  for (const auto& s : signals)
    standardized.push_back(standardizer.apply(s));
  const Vector rms = component_rms(standardized);
  std::mt19937_64 rng{cfg.seed};
  std::vector<TimeSeries> noisy;
  noisy.reserve(signals.size());
  for (const auto& s : standardized)
    noisy.push_back(add_training_noise(s, cfg.eta, rms, rng));
  return {std::move(standardizer), std::move(noisy)};
}

struct TrainReport {
  Index n_fit = 0;
  Index peak_batch_states = 0;
  double training_mse = 0.0; // standardized coordinates
};

inline Readout train(const Reservoir& res, std::span<const TimeSeries> signals,
                     const TrainConfig& cfg, TrainReport* report = nullptr) {
  cfg.validate();
  const Index n_in = detail::common_dim(signals);
  if (n_in != res.input_dim())
    throw DimensionMismatch("training signals have " + std::to_string(n_in) +
                            " components, reservoir expects " + std::to_string(res.input_dim()));
  for (std::size_t i = 0; i < signals.size(); ++i)
    if (signals[i].size() < cfg.n_trans + 2)
      throw TooShort("training signal " + std::to_string(i) + " has " +
                     std::to_string(signals[i].size()) + " samples, needs at least " +
                     std::to_string(cfg.n_trans + 2));

  PreparedSignals prepared = prepare_training_signals(signals, cfg);
  NormalAccumulator acc(n_in, res.size());
  Index peak = 0;
  for (const auto& s : prepared.noisy)
    peak = std::max(peak, accumulate_signal(res, s, cfg.n_trans, cfg.batch_max_states, acc));

  Readout readout{solve_readout(acc, cfg.alpha), std::move(prepared.standardizer), acc.n_fit()};
  if (!readout.w_out.allFinite())
    throw NonFinite("readout weights are not finite");
  if (report != nullptr)
    *report = {acc.n_fit(), peak, training_mse(acc, readout.w_out)};
  return readout;
}

} // namespace basinrc
