#pragma once

// Uniformly sampled multivariate signals and the preprocessing applied to
// them before they reach a reservoir: max-abs standardization and additive
// white training noise.

#include "basinrc/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace basinrc {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// N samples x N_in components at a fixed sample interval. Rows are samples.
class TimeSeries {
public:
  TimeSeries(Matrix values, double dt, double t0 = 0.0)
      : values_{std::move(values)}, dt_{dt}, t0_{t0} {
    if (values_.rows() < 1 || values_.cols() < 1)
      throw InvalidArgument("time series needs at least one sample and one component");
    if (!(dt_ > 0.0) || !std::isfinite(dt_))
      throw InvalidArgument("time series sample interval must be positive");
    if (!values_.allFinite())
      throw NonFinite("time series contains NaN or Inf");
  }

  [[nodiscard]] Index size() const noexcept { return values_.rows(); }
  [[nodiscard]] Index dim() const noexcept { return values_.cols(); }
  [[nodiscard]] double dt() const noexcept { return dt_; }
  [[nodiscard]] double t0() const noexcept { return t0_; }
  [[nodiscard]] double time(Index k) const noexcept { return t0_ + static_cast<double>(k) * dt_; }
  [[nodiscard]] const Matrix& values() const noexcept { return values_; }

  [[nodiscard]] auto row(Index k) const { return values_.row(k); }
  [[nodiscard]] Vector front() const { return values_.row(0).transpose(); }
  [[nodiscard]] Vector back() const { return values_.row(values_.rows() - 1).transpose(); }

  /// Samples [start, start + count).
  [[nodiscard]] TimeSeries slice(Index start, Index count) const {
    if (start < 0 || count < 1 || start + count > size())
      throw InvalidArgument("slice out of range");
    return TimeSeries{values_.middleRows(start, count), dt_, time(start)};
  }
  [[nodiscard]] TimeSeries head(Index count) const { return slice(0, count); }
  [[nodiscard]] TimeSeries tail(Index count) const { return slice(size() - count, count); }

  /// Keeps only the listed components, in the given order.
  [[nodiscard]] TimeSeries select(std::span<const Index> components) const {
    Matrix out(size(), static_cast<Index>(components.size()));
    for (std::size_t c = 0; c < components.size(); ++c) {
      if (components[c] < 0 || components[c] >= dim())
        throw DimensionMismatch("component index out of range");
      out.col(static_cast<Index>(c)) = values_.col(components[c]);
    }
    return TimeSeries{std::move(out), dt_, t0_};
  }

  friend bool operator==(const TimeSeries& a, const TimeSeries& b) {
    return a.dt_ == b.dt_ && a.t0_ == b.t0_ && a.values_.rows() == b.values_.rows() &&
           a.values_.cols() == b.values_.cols() && a.values_ == b.values_;
  }

private:
  Matrix values_;
  double dt_;
  double t0_;
};

/// Affine map u -> (u - shift) / scale, applied per component.
class Standardizer {
public:
  Standardizer(Vector shift, Vector scale) : shift_{std::move(shift)}, scale_{std::move(scale)} {
    if (shift_.size() != scale_.size() || shift_.size() < 1)
      throw DimensionMismatch("standardizer shift and scale sizes differ");
    if (!shift_.allFinite() || !scale_.allFinite())
      throw NonFinite("standardizer parameters must be finite");
    for (Index j = 0; j < scale_.size(); ++j)
      if (!(scale_[j] > 0.0))
        throw ZeroRange("component " + std::to_string(j) + " has non-positive scale");
  }

  /// The map that leaves inputs untouched (raw, unstandardized training).
  static Standardizer identity(Index dim) { return {Vector::Zero(dim), Vector::Ones(dim)}; }

  [[nodiscard]] Index dim() const noexcept { return shift_.size(); }
  [[nodiscard]] const Vector& shift() const noexcept { return shift_; }
  [[nodiscard]] const Vector& scale() const noexcept { return scale_; }

  [[nodiscard]] Matrix apply(const Matrix& rows) const {
    check(rows.cols());
    return (rows.rowwise() - shift_.transpose()).array().rowwise() / scale_.transpose().array();
  }
  [[nodiscard]] Matrix invert(const Matrix& rows) const {
    check(rows.cols());
    return (rows.array().rowwise() * scale_.transpose().array()).matrix().rowwise() +
           shift_.transpose();
  }
  [[nodiscard]] TimeSeries apply(const TimeSeries& ts) const {
    return {apply(ts.values()), ts.dt(), ts.t0()};
  }
  [[nodiscard]] TimeSeries invert(const TimeSeries& ts) const {
    return {invert(ts.values()), ts.dt(), ts.t0()};
  }
  [[nodiscard]] Vector apply_point(const Vector& u) const {
    check(u.size());
    return (u - shift_).cwiseQuotient(scale_);
  }
  [[nodiscard]] Vector invert_point(const Vector& z) const {
    check(z.size());
    return z.cwiseProduct(scale_) + shift_;
  }

  friend bool operator==(const Standardizer& a, const Standardizer& b) {
    return a.shift_ == b.shift_ && a.scale_ == b.scale_;
  }

private:
  void check(Index cols) const {
    if (cols != dim())
      throw DimensionMismatch("standardizer has " + std::to_string(dim()) +
                              " components, input has " + std::to_string(cols));
  }

  Vector shift_;
  Vector scale_;
};

namespace detail {
inline Index common_dim(std::span<const TimeSeries> signals) {
  if (signals.empty())
    throw InvalidArgument("need at least one signal");
  const Index d = signals.front().dim();
  for (const auto& s : signals)
    if (s.dim() != d)
      throw DimensionMismatch("signals have differing component counts");
  return d;
}
} // namespace detail

/// Shift = mean over the union of all samples; scale = max |u - shift|.
inline Standardizer fit_standardizer(std::span<const TimeSeries> signals) {
  const Index d = detail::common_dim(signals);
  Vector sum = Vector::Zero(d);
  double count = 0.0;
  for (const auto& s : signals) {
    sum += s.values().colwise().sum().transpose();
    count += static_cast<double>(s.size());
  }
  const Vector shift = sum / count;
  Vector scale = Vector::Zero(d);
  for (const auto& s : signals)
    scale = scale.cwiseMax(
        (s.values().rowwise() - shift.transpose()).cwiseAbs().colwise().maxCoeff().transpose());
  for (Index j = 0; j < d; ++j)
    if (!(scale[j] > 0.0))
      throw ZeroRange("component " + std::to_string(j) + " is constant across all signals");
  return {shift, scale};
}

/// Root-mean-square of component j over every sample of every signal.
inline double component_rms(std::span<const TimeSeries> signals, Index j) {
  const Index d = detail::common_dim(signals);
  if (j < 0 || j >= d)
    throw DimensionMismatch("component index out of range");
  double sq = 0.0;
  double count = 0.0;
  for (const auto& s : signals) {
    sq += s.values().col(j).squaredNorm();
    count += static_cast<double>(s.size());
  }
  return std::sqrt(sq / count);
}

inline Vector component_rms(std::span<const TimeSeries> signals) {
  const Index d = detail::common_dim(signals);
  Vector out(d);
  for (Index j = 0; j < d; ++j)
    out[j] = component_rms(signals, j);
  return out;
}

/// Adds N(0, eta * rms_j) independently to every sample of component j.
/// Draws are taken row by row, component by component, from `rng`.
inline TimeSeries add_training_noise(const TimeSeries& signal, double eta, const Vector& rms,
                                     std::mt19937_64& rng) {
  if (eta < 0.0)
    throw InvalidArgument("noise amplitude must be non-negative");
  if (rms.size() != signal.dim())
    throw DimensionMismatch("rms vector does not match signal components");
  Matrix out = signal.values();
  if (eta == 0.0)
    return {std::move(out), signal.dt(), signal.t0()};
  std::normal_distribution<double> normal{0.0, 1.0};
  for (Index k = 0; k < out.rows(); ++k)
    for (Index j = 0; j < out.cols(); ++j) {
      const double z = normal(rng);
      out(k, j) += eta * rms[j] * z;
    }
  return {std::move(out), signal.dt(), signal.t0()};
}

// ---------------------------------------------------------------------------
// CSV: header `t,u0,u1,...`, one row per sample, shortest round-trip doubles.

namespace detail {
inline void put_double(std::ostream& os, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  os.write(buf, res.ptr - buf);
}

inline double parse_double(std::string_view field, std::size_t line) {
  while (!field.empty() && field.front() == ' ')
    field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r'))
    field.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw IoError("line " + std::to_string(line) + ": cannot parse number '" +
                  std::string(field) + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return out;
}
} // namespace detail

inline void write_csv(const TimeSeries& ts, std::ostream& os) {
  os << 't';
  for (Index j = 0; j < ts.dim(); ++j)
    os << ",u" << j;
  os << '\n';
  for (Index k = 0; k < ts.size(); ++k) {
    detail::put_double(os, ts.time(k));
    for (Index j = 0; j < ts.dim(); ++j) {
      os << ',';
      detail::put_double(os, ts.values()(k, j));
    }
    os << '\n';
  }
}

/// Reads the CSV layout written by write_csv. The sample interval is taken
/// from the time column; single-row files use `fallback_dt`.
inline TimeSeries read_csv(std::istream& is, double fallback_dt = 1.0) {
  std::string line;
  if (!std::getline(is, line))
    throw IoError("empty time series file");
  const auto header = detail::split(line);
  if (header.size() < 2 || header.front() != "t")
    throw IoError("time series header must start with 't,u0'");
  const auto n_in = static_cast<Index>(header.size() - 1);
  std::vector<double> times;
  std::vector<double> data;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r")
      continue;
    const auto fields = detail::split(line);
    if (static_cast<Index>(fields.size()) != n_in + 1)
      throw IoError("line " + std::to_string(lineno) + ": expected " +
                    std::to_string(n_in + 1) + " fields");
    times.push_back(detail::parse_double(fields[0], lineno));
    for (std::size_t j = 1; j < fields.size(); ++j)
      data.push_back(detail::parse_double(fields[j], lineno));
  }
  if (times.empty())
    throw IoError("time series file has no samples");
  const auto n = static_cast<Index>(times.size());
  Matrix values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      data.data(), n, n_in);
  const double dt = n > 1 ? (times.back() - times.front()) / static_cast<double>(n - 1) : fallback_dt;
  return {std::move(values), dt, times.front()};
}

} // namespace basinrc
