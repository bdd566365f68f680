#pragma once

// End-to-end basin experiments: training-set sampling, model preparation,
// per-cell truth and prediction, basin maps, sweeps, persistence and
// rendering.

#include "basinrc/classify.hpp"
#include "basinrc/error.hpp"
#include "basinrc/experiment_config.hpp"
#include "basinrc/parallel.hpp"
#include "basinrc/reservoir.hpp"
#include "basinrc/systems.hpp"
#include "basinrc/training.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace basinrc {

struct CellResult {
  Index index = 0;
  Vector ic;              // full initial state
  int truth = -1;         // -1 when the true trajectory never settles
  Convergence prediction; // classification of test signal + forecast
  BasinOutcome outcome;
};

struct ExperimentHooks {
  // Sees every signal right before it is fed to the reservoir (training
  // signals and test signals, in observed coordinates). May be called from
  // several threads at once.
  std::function<void(const TimeSeries&)> on_reservoir_input;
  // Called once per grid cell, serially, in cell order.
  std::function<void(const CellResult&)> on_cell;
};

// ---------------------------------------------------------------------------
// Truth

/// Classifies a full-state trajectory against the system's attractors.
inline Convergence classify_truth(const SystemDef& sys, const ConvergenceCriteria& crit,
                                  const TimeSeries& traj) {
  if (sys.has_chaotic_attractors())
    return classify_chaotic(traj, sys, crit);
  return classify_fixed_point(traj, sys, crit, true);
}

/// Integrates `steps` samples from x0 and labels the trajectory. Trajectories
/// still unresolved are continued, up to three more times the same length,
/// before being labelled -1. Returns the label and the initial segment.
inline std::pair<int, TimeSeries> true_trajectory(const SystemDef& sys, const ExperimentConfig& cfg,
                                                  const Vector& x0, Index steps) {
  TimeSeries traj = integrate(sys, cfg.integration, x0, steps);
  Convergence c = classify_truth(sys, cfg.criteria, traj);
  TimeSeries segment = traj;
  for (int extension = 0; extension < 3 && !c.converged(); ++extension) {
    segment = integrate(sys, cfg.integration, segment.back(), steps);
    c = classify_truth(sys, cfg.criteria, segment);
  }
  return {c.converged() ? c.attractor : -1, std::move(traj)};
}

/// Grid cell centres; cell i = row * resolution + col, col along grid_axes[0]
/// and row along grid_axes[1], both increasing.
inline Vector grid_point(const ExperimentConfig& cfg, Index cell) {
  const Index res = cfg.resolution;
  const Index row = cell / res;
  const Index col = cell % res;
  const double step = 2.0 * cfg.test_half_width / static_cast<double>(res);
  Vector x = Vector::Zero(cfg.state_dim());
  x[cfg.grid_axes[0]] = -cfg.test_half_width + (static_cast<double>(col) + 0.5) * step;
  x[cfg.grid_axes[1]] = -cfg.test_half_width + (static_cast<double>(row) + 0.5) * step;
  return x;
}

// ---------------------------------------------------------------------------
// Training data and model

struct TrainingSet {
  std::vector<TimeSeries> signals; // observed components only
  std::vector<Vector> ics;
  Index attempts = 0;
};

/// Rejection sampling: initial conditions uniform on the training square in
/// the grid plane (other components zero), each integrated for
/// max(truth_steps, train_length) samples and kept when it converges to the
/// requested basin (any attractor if none is requested). Candidates are
/// drawn in a fixed order and accepted in that order, so the result does not
/// depend on `workers`.
inline TrainingSet generate_training_set(const ExperimentConfig& cfg, const SystemDef& sys,
                                         unsigned workers = 1) {
  cfg.validate();
  const Index cap = cfg.attempt_factor * cfg.n_train;
  const Index steps = std::max(cfg.truth_steps, cfg.train_length - 1);
  std::mt19937_64 rng{cfg.seeds.sampling};
  std::uniform_real_distribution<double> coord{-cfg.train_half_width, cfg.train_half_width};

  TrainingSet out;
  const std::size_t batch = std::max<std::size_t>(8, 4 * std::size_t{workers});
  std::vector<Vector> candidates;
  std::vector<int> labels;
  std::vector<std::optional<TimeSeries>> trajectories;
  while (static_cast<Index>(out.signals.size()) < cfg.n_train) {
    const std::size_t n = static_cast<std::size_t>(std::min<Index>(static_cast<Index>(batch), cap - out.attempts));
    if (n == 0)
      throw SamplingExhausted("only " + std::to_string(out.signals.size()) + " of " +
                              std::to_string(cfg.n_train) + " training trajectories found in " +
                              std::to_string(cap) + " attempts");
    candidates.assign(n, Vector{});
    for (auto& x : candidates) {
      x = Vector::Zero(cfg.state_dim());
      x[cfg.grid_axes[0]] = coord(rng);
      x[cfg.grid_axes[1]] = coord(rng);
    }
    labels.assign(n, -1);
    trajectories.assign(n, std::nullopt);
    parallel_for(n, workers, [&](std::size_t i) {
      auto [label, traj] = true_trajectory(sys, cfg, candidates[i], steps);
      labels[i] = label;
      trajectories[i] = std::move(traj);
    });
    for (std::size_t i = 0; i < n && static_cast<Index>(out.signals.size()) < cfg.n_train; ++i) {
      ++out.attempts;
      const bool accept = labels[i] >= 0 && (!cfg.restrict_to_basin || labels[i] == *cfg.restrict_to_basin);
      if (!accept)
        continue;
      out.signals.push_back(trajectories[i]->head(cfg.train_length).select(cfg.observed));
      out.ics.push_back(candidates[i]);
    }
  }
  return out;
}

struct TrainedModel {
  Reservoir reservoir;
  Readout readout;
  TrainReport report;
  std::vector<Vector> training_ics;
};

inline TrainedModel prepare_model(const ExperimentConfig& cfg, const SystemDef& sys,
                                  unsigned workers = 1, const ExperimentHooks& hooks = {}) {
  cfg.validate();
  Reservoir res = build_reservoir(cfg.reservoir_spec());
  TrainingSet set = generate_training_set(cfg, sys, workers);
  if (hooks.on_reservoir_input)
    for (const auto& s : set.signals)
      hooks.on_reservoir_input(s);
  TrainReport report;
  Readout readout = train(res, set.signals, cfg.train_config(), &report);
  return {std::move(res), std::move(readout), report, std::move(set.ics)};
}

// ---------------------------------------------------------------------------
// One initial condition

inline TimeSeries concatenate(const TimeSeries& a, const TimeSeries& b) {
  if (a.dim() != b.dim())
    throw DimensionMismatch("cannot join series with different components");
  Matrix v(a.size() + b.size(), a.dim());
  v << a.values(), b.values();
  return {std::move(v), a.dt(), a.t0()};
}

/// Truth label from the full system, then a forecast from the first n_test
/// observed samples out to the horizon, classified on the observed
/// components. A forecast that blows up counts as unresolved.
inline CellResult evaluate_initial_condition(const ExperimentConfig& cfg, const SystemDef& sys,
                                             const TrainedModel& model, const Vector& x0,
                                             const ExperimentHooks& hooks = {}) {
  if (cfg.horizon <= cfg.n_test)
    throw InvalidWindow("horizon must exceed the test-signal length");
  CellResult cell;
  cell.ic = x0;
  auto [truth, traj] = true_trajectory(sys, cfg, x0, std::max(cfg.horizon, cfg.truth_steps));
  cell.truth = truth;

  const TimeSeries test = traj.head(cfg.n_test).select(cfg.observed);
  if (hooks.on_reservoir_input)
    hooks.on_reservoir_input(test);
  try {
    const TimeSeries predicted =
        forecast(model.reservoir, model.readout, test, cfg.horizon - cfg.n_test + 1);
    const TimeSeries joined = concatenate(test, predicted);
    cell.prediction = sys.has_chaotic_attractors()
                          ? classify_chaotic(joined, sys, cfg.criteria, cfg.observed)
                          : classify_fixed_point(joined, sys, cfg.criteria, cfg.full_state(), cfg.observed);
  } catch (const NonFinite&) {
    cell.prediction = {};
  }
  cell.outcome = compare_with_truth(cell.prediction, cell.truth);
  return cell;
}

// ---------------------------------------------------------------------------
// Basin maps

inline constexpr int kSchemaVersion = 1;

struct BasinMap {
  ExperimentConfig config;
  int n_attractors = 0;
  std::vector<std::array<double, 2>> ics; // grid-plane coordinates
  std::vector<int> truth;
  std::vector<BasinOutcome> outcomes;
  BasinMetrics metrics;

  [[nodiscard]] Index resolution() const noexcept { return config.resolution; }
  [[nodiscard]] std::size_t size() const noexcept { return outcomes.size(); }
  void rescore() { metrics = score(outcomes, truth, n_attractors); }
};

inline BasinMap run_basin_experiment(const ExperimentConfig& cfg, const SystemDef& sys,
                                     const TrainedModel& model, unsigned workers = 1,
                                     const ExperimentHooks& hooks = {}) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.resolution * cfg.resolution);
  std::vector<CellResult> cells(n);
  parallel_for(n, workers, [&](std::size_t i) {
    cells[i] = evaluate_initial_condition(cfg, sys, model, grid_point(cfg, static_cast<Index>(i)), hooks);
    cells[i].index = static_cast<Index>(i);
  });

  BasinMap map;
  map.config = cfg;
  map.n_attractors = static_cast<int>(sys.attractors.size());
  map.ics.reserve(n);
  map.truth.reserve(n);
  map.outcomes.reserve(n);
  for (const auto& c : cells) {
    map.ics.push_back({c.ic[cfg.grid_axes[0]], c.ic[cfg.grid_axes[1]]});
    map.truth.push_back(c.truth);
    map.outcomes.push_back(c.outcome);
    if (hooks.on_cell)
      hooks.on_cell(c);
  }
  map.rescore();
  return map;
}

/// Builds the system, trains a fresh model and maps the test grid.
inline BasinMap run_basin_experiment(const ExperimentConfig& cfg, unsigned workers = 1,
                                     const ExperimentHooks& hooks = {}) {
  const SystemDef sys = make_system(cfg);
  const TrainedModel model = prepare_model(cfg, sys, workers, hooks);
  return run_basin_experiment(cfg, sys, model, workers, hooks);
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepAxes {
  std::vector<Index> n_train;
  std::vector<double> half_train;
  std::vector<double> half_test;
};

struct SweepRow {
  Index n_train = 0;
  double half_train = 0.0;
  double half_test = 0.0;
  Index realization = 0;
  double f_c = std::numeric_limits<double>::quiet_NaN();
  double f_spurious = std::numeric_limits<double>::quiet_NaN();
  std::string error; // set for failed cells, not persisted
};

struct SweepTable {
  ExperimentConfig config;
  Index realizations = 0;
  std::vector<SweepRow> rows;
};

inline ExperimentConfig sweep_cell_config(const ExperimentConfig& base, const SweepRow& row) {
  ExperimentConfig c = base;
  c.n_train = row.n_train;
  c.train_half_width = row.half_train;
  c.test_half_width = row.half_test;
  c.seeds = base.seeds.offset(static_cast<std::uint64_t>(row.realization));
  return c;
}

/// Full factorial over the axes, `realizations` repeats per cell; repeat r
/// offsets every seed by r. Failed cells keep NaN metrics and their error.
inline SweepTable run_sweep(const ExperimentConfig& cfg, const SweepAxes& axes, Index realizations,
                            unsigned workers = 1) {
  if (axes.n_train.empty() || axes.half_train.empty() || axes.half_test.empty())
    throw InvalidArgument("sweep axes must be non-empty");
  if (realizations < 1)
    throw InvalidArgument("sweep needs at least one realization");
  SweepTable table;
  table.config = cfg;
  table.realizations = realizations;
  for (Index n : axes.n_train)
    for (double ht : axes.half_train)
      for (double hs : axes.half_test)
        for (Index r = 0; r < realizations; ++r)
          table.rows.push_back({n, ht, hs, r});

  const SystemDef sys = make_system(cfg);
  auto run_one = [&](SweepRow& row, unsigned inner) {
    try {
      const BasinMap map = [&] {
        const ExperimentConfig c = sweep_cell_config(cfg, row);
        const TrainedModel model = prepare_model(c, sys, inner);
        return run_basin_experiment(c, sys, model, inner);
      }();
      row.f_c = map.metrics.f_c;
      row.f_spurious = map.metrics.f_spurious;
    } catch (const Error& e) {
      row.error = e.what();
    }
  };
  if (table.rows.size() >= workers) {
    parallel_for(table.rows.size(), workers, [&](std::size_t i) { run_one(table.rows[i], 1); });
  } else {
    for (auto& row : table.rows)
      run_one(row, workers);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Persistence. A basin map is a CSV of cells plus a sidecar "<path>.meta" of
// sorted key=value lines; a sweep table likewise.

namespace detail {

inline void write_meta(std::ostream& os, const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv)
    os << k << '=' << v << '\n';
}

inline std::map<std::string, std::string> read_meta(std::istream& is, const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline const std::string& meta_get(const std::map<std::string, std::string>& kv, const std::string& key,
                                   const std::string& origin) {
  const auto it = kv.find(key);
  if (it == kv.end())
    throw IoError(origin + ": missing '" + key + "'");
  return it->second;
}

inline void check_schema(const std::map<std::string, std::string>& kv, const std::string& kind,
                         const std::string& origin) {
  const auto it = kv.find("schema_version");
  if (it == kv.end() || it->second != std::to_string(kSchemaVersion))
    throw SchemaMismatch(origin + ": schema version '" + (it == kv.end() ? "" : it->second) +
                         "', expected " + std::to_string(kSchemaVersion));
  if (meta_get(kv, "kind", origin) != kind)
    throw SchemaMismatch(origin + ": holds a " + kv.at("kind") + ", expected " + kind);
}

inline std::map<std::string, std::string> config_section(const std::map<std::string, std::string>& kv) {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : kv)
    if (k.starts_with("config."))
      out[k.substr(7)] = v;
  return out;
}

inline Index parse_index(std::string_view s, const std::string& origin) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw IoError(origin + ": bad integer '" + std::string(s) + "'");
  return static_cast<Index>(v);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace detail

inline std::filesystem::path meta_path(const std::filesystem::path& csv) {
  return std::filesystem::path(csv.string() + ".meta");
}

/// Writes `content` to a sibling temporary and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed for " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename onto " + path.string());
  }
}

inline std::map<std::string, std::string> metrics_key_values(const BasinMetrics& m) {
  using detail::format_double;
  std::map<std::string, std::string> kv;
  kv["metrics.total"] = std::to_string(m.total);
  kv["metrics.correct"] = std::to_string(m.correct);
  kv["metrics.wrong"] = std::to_string(m.wrong);
  kv["metrics.spurious"] = std::to_string(m.spurious);
  kv["metrics.unresolved"] = std::to_string(m.unresolved);
  kv["metrics.f_c"] = format_double(m.f_c);
  kv["metrics.f_wrong"] = format_double(m.f_wrong);
  kv["metrics.f_spurious"] = format_double(m.f_spurious);
  kv["metrics.f_unresolved"] = format_double(m.f_unresolved);
  for (const auto& b : m.per_basin) {
    const std::string p = "metrics.basin." + std::to_string(b.attractor) + ".";
    kv[p + "truth_count"] = std::to_string(b.truth_count);
    kv[p + "f_c"] = format_double(b.fraction_correct);
    kv[p + "fnr"] = format_double(b.false_negative_rate);
    kv[p + "fpr"] = format_double(b.false_positive_rate);
  }
  return kv;
}

inline BasinMetrics metrics_from_key_values(const std::map<std::string, std::string>& kv, int n_attractors,
                                            const std::string& origin) {
  using detail::meta_get;
  using detail::parse_double;
  using detail::parse_index;
  BasinMetrics m;
  m.total = parse_index(meta_get(kv, "metrics.total", origin), origin);
  m.correct = parse_index(meta_get(kv, "metrics.correct", origin), origin);
  m.wrong = parse_index(meta_get(kv, "metrics.wrong", origin), origin);
  m.spurious = parse_index(meta_get(kv, "metrics.spurious", origin), origin);
  m.unresolved = parse_index(meta_get(kv, "metrics.unresolved", origin), origin);
  m.f_c = parse_double(meta_get(kv, "metrics.f_c", origin), 0);
  m.f_wrong = parse_double(meta_get(kv, "metrics.f_wrong", origin), 0);
  m.f_spurious = parse_double(meta_get(kv, "metrics.f_spurious", origin), 0);
  m.f_unresolved = parse_double(meta_get(kv, "metrics.f_unresolved", origin), 0);
  for (int b = 0; b < n_attractors; ++b) {
    const std::string p = "metrics.basin." + std::to_string(b) + ".";
    BasinScore s;
    s.attractor = b;
    s.truth_count = parse_index(meta_get(kv, p + "truth_count", origin), origin);
    s.fraction_correct = parse_double(meta_get(kv, p + "f_c", origin), 0);
    s.false_negative_rate = parse_double(meta_get(kv, p + "fnr", origin), 0);
    s.false_positive_rate = parse_double(meta_get(kv, p + "fpr", origin), 0);
    m.per_basin.push_back(s);
  }
  return m;
}

inline std::string basin_map_csv(const BasinMap& map) {
  std::ostringstream os;
  os << "ic_0,ic_1,true_label,pred_label,outcome\n";
  for (std::size_t i = 0; i < map.size(); ++i) {
    detail::put_double(os, map.ics[i][0]);
    os << ',';
    detail::put_double(os, map.ics[i][1]);
    os << ',' << map.truth[i] << ',' << map.outcomes[i].attractor << ','
       << to_string(map.outcomes[i].kind) << '\n';
  }
  return os.str();
}

inline std::string basin_map_meta(const BasinMap& map) {
  std::map<std::string, std::string> kv = metrics_key_values(map.metrics);
  kv["schema_version"] = std::to_string(kSchemaVersion);
  kv["kind"] = "basin_map";
  kv["config_hash"] = config_hash(map.config);
  kv["n_attractors"] = std::to_string(map.n_attractors);
  kv["cells"] = std::to_string(map.size());
  for (const auto& [k, v] : to_key_values(map.config))
    kv["config." + k] = v;
  std::ostringstream os;
  detail::write_meta(os, kv);
  return os.str();
}

/// Writes the CSV and its sidecar; on failure neither file is left behind.
inline void save_basin_map(const BasinMap& map, const std::filesystem::path& csv) {
  const std::string table = basin_map_csv(map);
  const std::string meta = basin_map_meta(map);
  write_file_atomic(csv, table);
  try {
    write_file_atomic(meta_path(csv), meta);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(csv, ec);
    throw;
  }
}

inline BasinMap load_basin_map(const std::filesystem::path& csv) {
  const std::string origin = meta_path(csv).string();
  std::istringstream meta_in(detail::read_file(meta_path(csv)));
  const auto kv = detail::read_meta(meta_in, origin);
  detail::check_schema(kv, "basin_map", origin);

  BasinMap map;
  map.config = config_from_key_values(detail::config_section(kv), origin);
  if (config_hash(map.config) != detail::meta_get(kv, "config_hash", origin))
    throw IoError(origin + ": config hash does not match the stored config");
  map.n_attractors = static_cast<int>(detail::parse_index(detail::meta_get(kv, "n_attractors", origin), origin));
  map.metrics = metrics_from_key_values(kv, map.n_attractors, origin);

  std::istringstream in(detail::read_file(csv));
  std::string line;
  if (!std::getline(in, line) || line != "ic_0,ic_1,true_label,pred_label,outcome")
    throw SchemaMismatch(csv.string() + ": unexpected header");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty())
      continue;
    const auto f = detail::split(line);
    if (f.size() != 5)
      throw IoError(csv.string() + ":" + std::to_string(lineno) + ": expected 5 fields");
    map.ics.push_back({detail::parse_double(f[0], lineno), detail::parse_double(f[1], lineno)});
    map.truth.push_back(static_cast<int>(detail::parse_index(f[2], csv.string())));
    map.outcomes.push_back({outcome_from_string(f[4]), static_cast<int>(detail::parse_index(f[3], csv.string()))});
  }
  const Index expected = detail::parse_index(detail::meta_get(kv, "cells", origin), origin);
  if (static_cast<Index>(map.size()) != expected)
    throw IoError(csv.string() + ": holds " + std::to_string(map.size()) + " cells, metadata says " +
                  std::to_string(expected));
  return map;
}

inline std::string sweep_csv(const SweepTable& table) {
  std::ostringstream os;
  os << "n_train,half_train,half_test,realization,f_c,f_spurious\n";
  auto put = [&os](double v) {
    if (std::isnan(v))
      os << "nan";
    else
      detail::put_double(os, v);
  };
  for (const auto& r : table.rows) {
    os << r.n_train << ',';
    put(r.half_train);
    os << ',';
    put(r.half_test);
    os << ',' << r.realization << ',';
    put(r.f_c);
    os << ',';
    put(r.f_spurious);
    os << '\n';
  }
  return os.str();
}

inline std::string sweep_meta(const SweepTable& table) {
  std::map<std::string, std::string> kv;
  kv["schema_version"] = std::to_string(kSchemaVersion);
  kv["kind"] = "sweep";
  kv["config_hash"] = config_hash(table.config);
  kv["realizations"] = std::to_string(table.realizations);
  kv["rows"] = std::to_string(table.rows.size());
  for (const auto& [k, v] : to_key_values(table.config))
    kv["config." + k] = v;
  std::ostringstream os;
  detail::write_meta(os, kv);
  return os.str();
}

inline void save_sweep(const SweepTable& table, const std::filesystem::path& csv) {
  const std::string body = sweep_csv(table);
  const std::string meta = sweep_meta(table);
  write_file_atomic(csv, body);
  try {
    write_file_atomic(meta_path(csv), meta);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(csv, ec);
    throw;
  }
}

inline SweepTable load_sweep(const std::filesystem::path& csv) {
  const std::string origin = meta_path(csv).string();
  std::istringstream meta_in(detail::read_file(meta_path(csv)));
  const auto kv = detail::read_meta(meta_in, origin);
  detail::check_schema(kv, "sweep", origin);
  SweepTable table;
  table.config = config_from_key_values(detail::config_section(kv), origin);
  table.realizations = detail::parse_index(detail::meta_get(kv, "realizations", origin), origin);

  std::istringstream in(detail::read_file(csv));
  std::string line;
  if (!std::getline(in, line) || line != "n_train,half_train,half_test,realization,f_c,f_spurious")
    throw SchemaMismatch(csv.string() + ": unexpected header");
  auto num = [](std::string_view s, std::size_t lineno) {
    return s == "nan" ? std::numeric_limits<double>::quiet_NaN() : detail::parse_double(s, lineno);
  };
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty())
      continue;
    const auto f = detail::split(line);
    if (f.size() != 6)
      throw IoError(csv.string() + ":" + std::to_string(lineno) + ": expected 6 fields");
    SweepRow r;
    r.n_train = detail::parse_index(f[0], csv.string());
    r.half_train = num(f[1], lineno);
    r.half_test = num(f[2], lineno);
    r.realization = detail::parse_index(f[3], csv.string());
    r.f_c = num(f[4], lineno);
    r.f_spurious = num(f[5], lineno);
    table.rows.push_back(std::move(r));
  }
  if (static_cast<Index>(table.rows.size()) != detail::parse_index(detail::meta_get(kv, "rows", origin), origin))
    throw IoError(csv.string() + ": row count differs from metadata");
  return table;
}

// ---------------------------------------------------------------------------
// Rendering: binary PPM (P6). Header "P6\n<w> <h>\n255\n", then w*h RGB
// triples, rows from the largest grid_axes[1] value down.

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr std::array<Rgb, 4> kBasinPalette{{
    {31, 119, 180},  // blue
    {231, 41, 138},  // pink
    {27, 158, 119},  // teal
    {117, 112, 179}, // purple
}};
inline constexpr Rgb kWrongColor{255, 215, 0};
inline constexpr Rgb kSpuriousColor{255, 255, 255};
inline constexpr Rgb kUnresolvedColor{0, 0, 0};

inline Rgb outcome_color(const BasinOutcome& o) {
  switch (o.kind) {
  case OutcomeKind::Correct:
    return kBasinPalette[static_cast<std::size_t>(o.attractor) % kBasinPalette.size()];
  case OutcomeKind::Wrong: return kWrongColor;
  case OutcomeKind::Spurious: return kSpuriousColor;
  case OutcomeKind::Unresolved: break;
  }
  return kUnresolvedColor;
}

inline std::string render_basin_map(const BasinMap& map) {
  const Index res = map.resolution();
  if (static_cast<Index>(map.size()) != res * res)
    throw DimensionMismatch("basin map is not a square grid of the stated resolution");
  std::string out = "P6\n" + std::to_string(res) + " " + std::to_string(res) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(3 * res * res));
  for (Index row = res - 1; row >= 0; --row)
    for (Index col = 0; col < res; ++col) {
      const Rgb c = outcome_color(map.outcomes[static_cast<std::size_t>(row * res + col)]);
      out.append(reinterpret_cast<const char*>(c.data()), 3);
    }
  return out;
}

inline void render_basin_map(const BasinMap& map, const std::filesystem::path& path) {
  write_file_atomic(path, render_basin_map(map));
}

} // namespace basinrc
