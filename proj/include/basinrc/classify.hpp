#pragma once

// Attractor assignment for trajectories, basin scoring, and the
// Gaussian-mixture KL divergence used for chaotic attractors.

#include "basinrc/error.hpp"
#include "basinrc/systems.hpp"
#include "basinrc/timeseries.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace basinrc {

// ---------------------------------------------------------------------------
// KL divergence between sampled state distributions

enum class KernelWidth {
  Absolute,        // sigma = sigma_scale, in state units
  NearestNeighbor, // sigma = sigma_scale * mean nearest-neighbour distance of the set
};

struct KlOptions {
  Index n_samples = 1000;
  double sigma_scale = 1.0;
  double eps = 1e-10; // smallest admissible kernel width
  KernelWidth width = KernelWidth::Absolute;
  std::uint64_t seed = 0;
};

inline double mean_nearest_neighbor_distance(const Matrix& points) {
  const Index n = points.rows();
  if (n < 2)
    throw InvalidArgument("nearest-neighbour distance needs at least two points");
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j)
      if (j != i)
        best = std::min(best, (points.row(i) - points.row(j)).squaredNorm());
    total += std::sqrt(best);
  }
  return total / static_cast<double>(n);
}

inline double kernel_width(const Matrix& points, const KlOptions& opts) {
  if (!(opts.sigma_scale > 0.0))
    throw InvalidArgument("sigma_scale must be positive");
  const double sigma = opts.width == KernelWidth::Absolute
                           ? opts.sigma_scale
                           : opts.sigma_scale * mean_nearest_neighbor_distance(points);
  if (!(sigma >= opts.eps))
    throw DegenerateCloud("kernel width " + std::to_string(sigma) + " is below eps");
  return sigma;
}

/// Log-density at `x` of the equal-weight isotropic Gaussian mixture centred
/// on the rows of `centres`, evaluated with log-sum-exp.
inline double mixture_log_density(const Matrix& centres, double sigma,
                                  const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const Index d = centres.cols();
  const Vector exponents = -(centres.rowwise() - x).rowwise().squaredNorm() / (2.0 * sigma * sigma);
  const double peak = exponents.maxCoeff();
  const double lse = peak + std::log((exponents.array() - peak).exp().sum());
  return lse - std::log(static_cast<double>(centres.rows())) -
         0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * sigma * sigma);
}

/// Monte Carlo estimate of KL(P_ref || P_test), each density modelled as a
/// Gaussian kernel mixture over its samples; `n_samples` draws from the
/// reference mixture.
inline double kl_divergence(const Matrix& reference, const Matrix& test, const KlOptions& opts = {}) {
  if (reference.rows() < 2 || test.rows() < 2)
    throw InvalidArgument("KL divergence needs at least two points in each set");
  if (reference.cols() != test.cols())
    throw DimensionMismatch("point sets have different dimensions");
  if (opts.n_samples < 1)
    throw InvalidArgument("n_samples must be positive");
  const double sigma_ref = kernel_width(reference, opts);
  const double sigma_test = kernel_width(test, opts);

  std::mt19937_64 rng{opts.seed};
  std::uniform_int_distribution<Index> pick{0, reference.rows() - 1};
  std::normal_distribution<double> normal;
  Eigen::RowVectorXd sample(reference.cols());
  double total = 0.0;
  for (Index s = 0; s < opts.n_samples; ++s) {
    const Index centre = pick(rng);
    for (Index j = 0; j < sample.size(); ++j)
      sample[j] = reference(centre, j) + sigma_ref * normal(rng);
    total += mixture_log_density(reference, sigma_ref, sample) -
             mixture_log_density(test, sigma_test, sample);
  }
  return total / static_cast<double>(opts.n_samples);
}

// ---------------------------------------------------------------------------
// Convergence tests

struct ConvergenceCriteria {
  double eps_c = 0.5;
  Index tail_len = 25;
  double kl_threshold = 1.0;
  Index kl_tail = 500;
  KlOptions kl;

  void validate() const {
    if (!(eps_c > 0.0))
      throw InvalidArgument("eps_c must be positive");
    if (tail_len < 1)
      throw InvalidArgument("tail_len must be at least 1");
    if (kl_tail < 2)
      throw InvalidArgument("kl_tail must be at least 2");
  }
};

/// Where a single trajectory ended up.
struct Convergence {
  enum class Kind { Attractor, Spurious, Unresolved };
  Kind kind = Kind::Unresolved;
  int attractor = -1;  // set for Attractor
  Vector end_point;    // tail mean (fixed-point tests) or tail centroid
  std::vector<double> divergences; // per attractor, chaotic test only

  [[nodiscard]] bool converged() const noexcept { return kind == Kind::Attractor; }
};

/// Attractor locations restricted to the observed components. An empty
/// `observed` means the full state.
inline std::vector<Vector> observed_locations(const SystemDef& sys, std::span<const Index> observed) {
  std::vector<Vector> out;
  out.reserve(sys.attractors.size());
  for (const auto& a : sys.attractors) {
    if (observed.empty()) {
      out.push_back(a.location);
      continue;
    }
    Vector v(static_cast<Index>(observed.size()));
    for (std::size_t c = 0; c < observed.size(); ++c)
      v[static_cast<Index>(c)] = a.location[observed[c]];
    out.push_back(std::move(v));
  }
  return out;
}

/// Nearest entry of `points` to `x`. Distances equal to within 1e-12
/// relative count as ties, and ties go to the lowest index.
inline int nearest_index(const std::vector<Vector>& points, const Eigen::Ref<const Vector>& x) {
  int best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double dist = (points[i] - x).norm();
    if (best < 0 || dist < best_dist - 1e-12 * std::max(1.0, best_dist)) {
      best_dist = dist;
      best = static_cast<int>(i);
    }
  }
  return best;
}

/// Fixed-point test. The candidate is the attractor nearest the final
/// sample. With the full state and a defined energy barrier, convergence
/// means E(end) < E0; otherwise every one of the last tail_len samples must
/// lie within eps_c of the candidate. A non-converged tail that has settled
/// (all samples within eps_c of their mean) at a point farther than eps_c
/// from every attractor is spurious; anything else is unresolved.
inline Convergence classify_fixed_point(const TimeSeries& traj, const SystemDef& sys,
                                        const ConvergenceCriteria& crit, bool full_state,
                                        std::span<const Index> observed = {}) {
  crit.validate();
  if (traj.size() < crit.tail_len)
    throw TooShort("trajectory shorter than the convergence tail");
  const auto targets = observed_locations(sys, full_state ? std::span<const Index>{} : observed);
  if (targets.empty())
    throw InvalidArgument(sys.name + " lists no attractors");
  if (targets.front().size() != traj.dim())
    throw DimensionMismatch("trajectory components do not match attractor coordinates");

  const Matrix tail = traj.values().bottomRows(crit.tail_len);
  const Vector end = traj.back();
  const Vector mean = tail.colwise().mean().transpose();
  const int candidate = nearest_index(targets, end);

  Convergence out;
  out.end_point = mean;
  bool converged = false;
  if (full_state && sys.energy && sys.energy_barrier) {
    converged = sys.energy(end) < *sys.energy_barrier;
  } else {
    converged = ((tail.rowwise() - targets[static_cast<std::size_t>(candidate)].transpose())
                     .rowwise()
                     .norm()
                     .array() <= crit.eps_c)
                    .all();
  }
  if (converged) {
    out.kind = Convergence::Kind::Attractor;
    out.attractor = candidate;
    return out;
  }

  const bool settled =
      ((tail.rowwise() - mean.transpose()).rowwise().norm().array() <= crit.eps_c).all();
  bool far_from_all = true;
  for (const auto& t : targets)
    far_from_all = far_from_all && (t - mean).norm() > crit.eps_c;
  out.kind = settled && far_from_all ? Convergence::Kind::Spurious : Convergence::Kind::Unresolved;
  return out;
}

/// Chaotic test: KL divergence of every attractor's reference distribution
/// relative to the trajectory tail; the smallest wins if it is below the
/// threshold.
inline Convergence classify_chaotic(const TimeSeries& traj, const SystemDef& sys,
                                    const ConvergenceCriteria& crit,
                                    std::span<const Index> observed = {}) {
  crit.validate();
  if (traj.size() < crit.kl_tail)
    throw TooShort("trajectory shorter than the KL tail");
  const Matrix tail = traj.values().bottomRows(crit.kl_tail);
  Convergence out;
  out.end_point = tail.colwise().mean().transpose();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sys.attractors.size(); ++i) {
    const auto& a = sys.attractors[i];
    if (a.kind != AttractorKind::Chaotic)
      throw InvalidArgument("attractor " + a.label + " has no reference trajectory");
    Matrix ref = a.reference;
    if (!observed.empty()) {
      Matrix projected(ref.rows(), static_cast<Index>(observed.size()));
      for (std::size_t c = 0; c < observed.size(); ++c)
        projected.col(static_cast<Index>(c)) = ref.col(observed[c]);
      ref = std::move(projected);
    }
    if (ref.cols() != tail.cols())
      throw DimensionMismatch("trajectory components do not match reference coordinates");
    const double kl = kl_divergence(ref, tail, crit.kl);
    out.divergences.push_back(kl);
    if (kl < best) {
      best = kl;
      out.attractor = static_cast<int>(i);
    }
  }
  if (best < crit.kl_threshold) {
    out.kind = Convergence::Kind::Attractor;
  } else {
    out.kind = Convergence::Kind::Unresolved;
    out.attractor = -1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Outcomes and scoring

enum class OutcomeKind { Correct, Wrong, Spurious, Unresolved };

struct BasinOutcome {
  OutcomeKind kind = OutcomeKind::Unresolved;
  int attractor = -1; // predicted attractor for Correct / Wrong

  friend bool operator==(const BasinOutcome&, const BasinOutcome&) = default;
};

inline BasinOutcome compare_with_truth(const Convergence& prediction, int truth) {
  switch (prediction.kind) {
  case Convergence::Kind::Attractor:
    return {prediction.attractor == truth ? OutcomeKind::Correct : OutcomeKind::Wrong,
            prediction.attractor};
  case Convergence::Kind::Spurious:
    return {OutcomeKind::Spurious, -1};
  case Convergence::Kind::Unresolved:
    break;
  }
  return {OutcomeKind::Unresolved, -1};
}

inline const char* to_string(OutcomeKind k) {
  switch (k) {
  case OutcomeKind::Correct: return "correct";
  case OutcomeKind::Wrong: return "wrong";
  case OutcomeKind::Spurious: return "spurious";
  case OutcomeKind::Unresolved: return "unresolved";
  }
  return "unresolved";
}

inline OutcomeKind outcome_from_string(std::string_view s) {
  if (s == "correct") return OutcomeKind::Correct;
  if (s == "wrong") return OutcomeKind::Wrong;
  if (s == "spurious") return OutcomeKind::Spurious;
  if (s == "unresolved") return OutcomeKind::Unresolved;
  throw InvalidArgument("unknown outcome '" + std::string(s) + "'");
}

struct BasinScore {
  int attractor = 0;
  Index truth_count = 0;
  double fraction_correct = 0.0;
  double false_negative_rate = 0.0;
  double false_positive_rate = 0.0;
};

struct BasinMetrics {
  Index total = 0;
  Index correct = 0;
  Index wrong = 0;
  Index spurious = 0;
  Index unresolved = 0;
  double f_c = 0.0;
  double f_wrong = 0.0;
  double f_spurious = 0.0;
  double f_unresolved = 0.0;
  std::vector<BasinScore> per_basin;
};

/// Fraction correct overall and per true basin. Per-basin false-negative
/// rate is 1 - per-basin fraction correct; the false-positive rate of basin B
/// counts predictions of B among cells whose truth is not B.
inline BasinMetrics score(std::span<const BasinOutcome> outcomes, std::span<const int> truth,
                          int n_attractors) {
  if (outcomes.size() != truth.size())
    throw DimensionMismatch("outcome and truth counts differ");
  BasinMetrics m;
  m.total = static_cast<Index>(outcomes.size());
  std::vector<Index> truth_count(static_cast<std::size_t>(n_attractors), 0);
  std::vector<Index> correct_count(truth_count.size(), 0);
  std::vector<Index> false_pos(truth_count.size(), 0);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    switch (o.kind) {
    case OutcomeKind::Correct: ++m.correct; break;
    case OutcomeKind::Wrong: ++m.wrong; break;
    case OutcomeKind::Spurious: ++m.spurious; break;
    case OutcomeKind::Unresolved: ++m.unresolved; break;
    }
    const int t = truth[i];
    if (t >= 0 && t < n_attractors) {
      ++truth_count[static_cast<std::size_t>(t)];
      if (o.kind == OutcomeKind::Correct)
        ++correct_count[static_cast<std::size_t>(t)];
    }
    if (o.kind == OutcomeKind::Wrong && o.attractor >= 0 && o.attractor < n_attractors &&
        o.attractor != t)
      ++false_pos[static_cast<std::size_t>(o.attractor)];
  }
  if (m.total > 0) {
    const auto total = static_cast<double>(m.total);
    m.f_c = static_cast<double>(m.correct) / total;
    m.f_wrong = static_cast<double>(m.wrong) / total;
    m.f_spurious = static_cast<double>(m.spurious) / total;
    m.f_unresolved = static_cast<double>(m.unresolved) / total;
  }
  for (int b = 0; b < n_attractors; ++b) {
    const auto ub = static_cast<std::size_t>(b);
    BasinScore s;
    s.attractor = b;
    s.truth_count = truth_count[ub];
    s.fraction_correct =
        truth_count[ub] > 0 ? static_cast<double>(correct_count[ub]) / static_cast<double>(truth_count[ub]) : 0.0;
    s.false_negative_rate = truth_count[ub] > 0 ? 1.0 - s.fraction_correct : 0.0;
    const Index others = m.total - truth_count[ub];
    s.false_positive_rate =
        others > 0 ? static_cast<double>(false_pos[ub]) / static_cast<double>(others) : 0.0;
    m.per_basin.push_back(s);
  }
  return m;
}

/// Guesses the attractor whose planar (x, y) position is nearest the last
/// sample of each test signal. The first two signal components must be the
/// planar position.
inline std::vector<int> nearest_magnet_baseline(std::span<const TimeSeries> test_signals,
                                                const SystemDef& sys) {
  std::vector<Vector> planar;
  for (const auto& a : sys.attractors)
    planar.push_back(a.location.head(2));
  std::vector<int> labels;
  labels.reserve(test_signals.size());
  for (const auto& s : test_signals) {
    if (s.dim() < 2)
      throw DimensionMismatch("baseline needs planar (x, y) observations");
    labels.push_back(nearest_index(planar, s.back().head(2)));
  }
  return labels;
}

} // namespace basinrc
