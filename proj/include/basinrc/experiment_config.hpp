#pragma once

// Experiment settings, per-system defaults, and their key-value form.

#include "basinrc/classify.hpp"
#include "basinrc/error.hpp"
#include "basinrc/ini.hpp"
#include "basinrc/reservoir.hpp"
#include "basinrc/systems.hpp"
#include "basinrc/training.hpp"

#include <array>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace basinrc {

enum class SystemKind { Duffing, MultiWell, MagneticPendulum, Lorenz };

inline const char* to_string(SystemKind k) {
  switch (k) {
  case SystemKind::Duffing: return "duffing";
  case SystemKind::MultiWell: return "multi_well";
  case SystemKind::MagneticPendulum: return "magnetic_pendulum";
  case SystemKind::Lorenz: return "lorenz";
  }
  return "duffing";
}

inline SystemKind system_kind_from_string(std::string_view s) {
  if (s == "duffing") return SystemKind::Duffing;
  if (s == "multi_well") return SystemKind::MultiWell;
  if (s == "magnetic_pendulum") return SystemKind::MagneticPendulum;
  if (s == "lorenz") return SystemKind::Lorenz;
  throw InvalidArgument("unknown system '" + std::string(s) +
                        "' (expected duffing, multi_well, magnetic_pendulum or lorenz)");
}

enum class IntegratorKind { Rk4, Adaptive };

struct IntegrationSettings {
  IntegratorKind method = IntegratorKind::Rk4;
  double dt = 0.01;    // sample interval
  Index substeps = 1;  // RK4 steps per sample
  double rel_tol = 1e-10;
  double abs_tol = 1e-10;
};

struct Seeds {
  std::uint64_t reservoir = 1;
  std::uint64_t sampling = 2;
  std::uint64_t noise = 3;

  [[nodiscard]] Seeds offset(std::uint64_t r) const { return {reservoir + r, sampling + r, noise + r}; }
  friend bool operator==(const Seeds&, const Seeds&) = default;
};

struct ExperimentConfig {
  SystemKind system = SystemKind::Duffing;
  double forcing = 0.0;         // Duffing F0
  std::vector<Index> observed;  // components fed to the reservoir

  ReservoirSpec reservoir;      // n_in and seed are overwritten from observed/seeds
  TrainConfig train;            // seed is overwritten from seeds.noise

  Index n_train = 10;
  double train_half_width = 10.0;
  std::optional<int> restrict_to_basin; // empty: any converged trajectory
  Index train_length = 500;
  Index truth_steps = 4000;
  Index attempt_factor = 1000;

  Index resolution = 50;
  double test_half_width = 10.0;
  std::array<Index, 2> grid_axes{0, 1};
  Index n_test = 10;
  Index horizon = 2000;

  IntegrationSettings integration;
  ConvergenceCriteria criteria;
  Seeds seeds;

  [[nodiscard]] Index state_dim() const {
    switch (system) {
    case SystemKind::Duffing:
    case SystemKind::MultiWell: return 2;
    case SystemKind::Lorenz: return 3;
    case SystemKind::MagneticPendulum: return 4;
    }
    return 2;
  }

  /// Every state component observed, in order.
  [[nodiscard]] bool full_state() const {
    if (static_cast<Index>(observed.size()) != state_dim())
      return false;
    for (std::size_t i = 0; i < observed.size(); ++i)
      if (observed[i] != static_cast<Index>(i))
        return false;
    return true;
  }

  [[nodiscard]] ReservoirSpec reservoir_spec() const {
    ReservoirSpec s = reservoir;
    s.n_in = static_cast<Index>(observed.size());
    s.seed = seeds.reservoir;
    return s;
  }

  [[nodiscard]] TrainConfig train_config() const {
    TrainConfig t = train;
    t.seed = seeds.noise;
    return t;
  }

  void validate() const {
    const Index d = state_dim();
    if (observed.empty())
      throw InvalidArgument("at least one component must be observed");
    for (std::size_t i = 0; i < observed.size(); ++i) {
      if (observed[i] < 0 || observed[i] >= d)
        throw InvalidArgument("observed component " + std::to_string(observed[i]) +
                              " out of range for a " + std::to_string(d) + "-dimensional system");
      for (std::size_t j = 0; j < i; ++j)
        if (observed[j] == observed[i])
          throw InvalidArgument("observed component listed twice");
    }
    for (Index a : grid_axes)
      if (a < 0 || a >= d)
        throw InvalidArgument("grid axis out of range");
    if (grid_axes[0] == grid_axes[1])
      throw InvalidArgument("grid axes must differ");
    if (resolution < 1)
      throw InvalidArgument("grid resolution must be at least 1");
    if (n_test < 1)
      throw InvalidArgument("n_test must be at least 1");
    if (horizon <= n_test)
      throw InvalidWindow("horizon " + std::to_string(horizon) + " leaves no prediction after " +
                          std::to_string(n_test) + " test samples");
    if (!(train_half_width > 0.0) || !(test_half_width > 0.0))
      throw InvalidArgument("half-widths must be positive");
    if (n_train < 1)
      throw InvalidArgument("n_train must be at least 1");
    if (train_length < train.n_trans + 2)
      throw TooShort("training length leaves no fit pairs after the transient");
    if (truth_steps < 1 || attempt_factor < 1)
      throw InvalidArgument("truth_steps and attempt_factor must be positive");
    if (!(integration.dt > 0.0) || integration.substeps < 1)
      throw InvalidArgument("integration step settings must be positive");
    if (integration.method == IntegratorKind::Adaptive &&
        (!(integration.rel_tol > 0.0) || !(integration.abs_tol > 0.0)))
      throw InvalidArgument("adaptive tolerances must be positive");
    reservoir_spec().validate();
    train.validate();
    criteria.validate();
  }
};

/// Settings used for each benchmark unless a config overrides them.
inline ExperimentConfig default_config(SystemKind kind) {
  ExperimentConfig c;
  c.system = kind;
  switch (kind) {
  case SystemKind::Duffing:
    c.observed = {0};
    c.reservoir.n_r = 200;
    c.reservoir.input_strength = 1.0;
    c.train.n_trans = 5;
    c.train.alpha = 1e-12;
    c.train.eta = 1e-5;
    c.n_train = 10;
    c.train_half_width = 10.0;
    c.restrict_to_basin = 0;
    c.resolution = 50;
    c.test_half_width = 10.0;
    c.n_test = 10;
    c.horizon = 2000;
    c.integration = {IntegratorKind::Rk4, 0.01, 1, 1e-10, 1e-10};
    c.criteria.eps_c = 0.5;
    break;
  case SystemKind::MultiWell:
    c.observed = {0, 1};
    c.reservoir.n_r = 200;
    c.reservoir.input_strength = 1.0;
    c.train.n_trans = 5;
    c.train.alpha = 1e-12;
    c.train.eta = 1e-5;
    c.n_train = 25;
    c.train_half_width = 4.0;
    c.restrict_to_basin = 2;
    c.resolution = 10;
    c.test_half_width = 4.0;
    c.n_test = 5;
    c.horizon = 2000;
    c.integration = {IntegratorKind::Rk4, 0.01, 1, 1e-10, 1e-10};
    c.criteria.eps_c = 0.25;
    break;
  case SystemKind::MagneticPendulum:
    c.observed = {0, 1};
    c.reservoir.n_r = 2500;
    c.reservoir.input_strength = 5.0;
    c.train.n_trans = 25;
    c.train.alpha = 1e-10;
    c.train.eta = 1e-3;
    c.n_train = 100;
    c.train_half_width = 1.5;
    c.restrict_to_basin = 0;
    c.resolution = 60;
    c.test_half_width = 1.5;
    c.n_test = 100;
    c.horizon = 2000;
    c.integration = {IntegratorKind::Adaptive, 0.02, 1, 1e-10, 1e-10};
    c.criteria.eps_c = 0.25;
    break;
  case SystemKind::Lorenz:
    c.observed = {0, 1, 2};
    c.reservoir.n_r = 500;
    c.reservoir.input_strength = 0.5;
    c.train.n_trans = 5;
    c.train.alpha = 1e-10;
    c.train.eta = 1e-3;
    c.n_train = 1;
    c.train_half_width = 10.0;
    c.restrict_to_basin = 0;
    c.train_length = 5000;
    c.resolution = 6;
    c.test_half_width = 10.0;
    c.grid_axes = {1, 2};
    c.n_test = 50;
    c.horizon = 5000;
    c.integration = {IntegratorKind::Rk4, 0.02, 2, 1e-10, 1e-10};
    c.criteria.eps_c = 1.0;
    c.criteria.kl_threshold = 1.0;
    break;
  }
  return c;
}

inline SystemDef make_system(const ExperimentConfig& cfg) {
  switch (cfg.system) {
  case SystemKind::Duffing: return duffing(cfg.forcing);
  case SystemKind::MultiWell: return multi_well();
  case SystemKind::MagneticPendulum: return magnetic_pendulum();
  case SystemKind::Lorenz: {
    LorenzReferenceOptions opts;
    opts.sample_dt = cfg.integration.dt;
    opts.substeps = cfg.integration.substeps;
    return multistable_lorenz(opts);
  }
  }
  throw InvalidArgument("unknown system");
}

/// n_steps + 1 samples at the configured sample interval, starting at x0.
inline TimeSeries integrate(const SystemDef& sys, const IntegrationSettings& s, const Vector& x0,
                            Index n_steps) {
  if (s.method == IntegratorKind::Adaptive)
    return integrate_adaptive(sys, x0, static_cast<double>(n_steps) * s.dt, s.rel_tol, s.abs_tol, s.dt);
  return integrate_rk4(sys, x0, s.dt / static_cast<double>(s.substeps), n_steps, s.substeps);
}

// ---------------------------------------------------------------------------
// Key-value form. Keys are "section.key"; the same names are used in config
// files and in the metadata written next to results.

namespace detail {
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0)
      out += ',';
    if constexpr (std::is_floating_point_v<T>)
      out += format_double(v[i]);
    else
      out += std::to_string(v[i]);
  }
  return out;
}
} // namespace detail

inline std::map<std::string, std::string> to_key_values(const ExperimentConfig& c) {
  using detail::format_double;
  std::map<std::string, std::string> kv;
  kv["system.name"] = to_string(c.system);
  kv["system.forcing"] = format_double(c.forcing);
  kv["observation.components"] = detail::join(c.observed);
  kv["reservoir.nodes"] = std::to_string(c.reservoir.n_r);
  kv["reservoir.mean_degree"] = format_double(c.reservoir.mean_degree);
  kv["reservoir.spectral_radius"] = format_double(c.reservoir.spectral_radius);
  kv["reservoir.input_strength"] = format_double(c.reservoir.input_strength);
  kv["reservoir.bias_strength"] = format_double(c.reservoir.bias_strength);
  kv["reservoir.leakage"] = format_double(c.reservoir.leakage);
  kv["training.transient"] = std::to_string(c.train.n_trans);
  kv["training.alpha"] = format_double(c.train.alpha);
  kv["training.eta"] = format_double(c.train.eta);
  kv["training.batch_max_states"] = std::to_string(c.train.batch_max_states);
  kv["training.standardize"] = c.train.standardize ? "true" : "false";
  kv["training.n_train"] = std::to_string(c.n_train);
  kv["training.half_width"] = format_double(c.train_half_width);
  kv["training.basin"] = c.restrict_to_basin ? std::to_string(*c.restrict_to_basin) : "any";
  kv["training.length"] = std::to_string(c.train_length);
  kv["training.truth_steps"] = std::to_string(c.truth_steps);
  kv["training.attempt_factor"] = std::to_string(c.attempt_factor);
  kv["test.resolution"] = std::to_string(c.resolution);
  kv["test.half_width"] = format_double(c.test_half_width);
  kv["test.axes"] = std::to_string(c.grid_axes[0]) + "," + std::to_string(c.grid_axes[1]);
  kv["test.n_test"] = std::to_string(c.n_test);
  kv["test.horizon"] = std::to_string(c.horizon);
  kv["integration.method"] = c.integration.method == IntegratorKind::Adaptive ? "adaptive" : "rk4";
  kv["integration.dt"] = format_double(c.integration.dt);
  kv["integration.substeps"] = std::to_string(c.integration.substeps);
  kv["integration.rel_tol"] = format_double(c.integration.rel_tol);
  kv["integration.abs_tol"] = format_double(c.integration.abs_tol);
  kv["criteria.eps_c"] = format_double(c.criteria.eps_c);
  kv["criteria.tail_len"] = std::to_string(c.criteria.tail_len);
  kv["criteria.kl_threshold"] = format_double(c.criteria.kl_threshold);
  kv["criteria.kl_tail"] = std::to_string(c.criteria.kl_tail);
  kv["criteria.kl_samples"] = std::to_string(c.criteria.kl.n_samples);
  kv["criteria.kl_sigma_scale"] = format_double(c.criteria.kl.sigma_scale);
  kv["criteria.kl_eps"] = format_double(c.criteria.kl.eps);
  kv["criteria.kl_width"] =
      c.criteria.kl.width == KernelWidth::Absolute ? "absolute" : "nearest_neighbor";
  kv["criteria.kl_seed"] = std::to_string(c.criteria.kl.seed);
  kv["seeds.reservoir"] = std::to_string(c.seeds.reservoir);
  kv["seeds.sampling"] = std::to_string(c.seeds.sampling);
  kv["seeds.noise"] = std::to_string(c.seeds.noise);
  return kv;
}

/// Builds a config from `ini`: system.name selects the defaults, every other
/// recognised key overrides them. Keys outside the experiment sections are
/// left for the caller; call ini.reject_unused() afterwards to catch typos.
inline ExperimentConfig config_from_ini(const IniFile& ini) {
  const std::string name = ini.require_string("system.name");
  ExperimentConfig c;
  try {
    c = default_config(system_kind_from_string(name));
  } catch (const InvalidArgument& e) {
    ini.fail("system.name", e.what());
  }

  auto index = [&](const std::string& key, Index& out) {
    if (auto v = ini.get_int(key))
      out = static_cast<Index>(*v);
  };
  auto real = [&](const std::string& key, double& out) {
    if (auto v = ini.get_double(key))
      out = *v;
  };
  auto seed = [&](const std::string& key, std::uint64_t& out) {
    if (auto v = ini.get_uint(key))
      out = *v;
  };

  real("system.forcing", c.forcing);
  if (auto v = ini.get_ints("observation.components")) {
    c.observed.assign(v->begin(), v->end());
  }
  index("reservoir.nodes", c.reservoir.n_r);
  real("reservoir.mean_degree", c.reservoir.mean_degree);
  real("reservoir.spectral_radius", c.reservoir.spectral_radius);
  real("reservoir.input_strength", c.reservoir.input_strength);
  real("reservoir.bias_strength", c.reservoir.bias_strength);
  real("reservoir.leakage", c.reservoir.leakage);
  index("training.transient", c.train.n_trans);
  real("training.alpha", c.train.alpha);
  real("training.eta", c.train.eta);
  index("training.batch_max_states", c.train.batch_max_states);
  if (auto v = ini.get_bool("training.standardize"))
    c.train.standardize = *v;
  index("training.n_train", c.n_train);
  real("training.half_width", c.train_half_width);
  if (auto v = ini.get_string("training.basin")) {
    if (*v == "any") {
      c.restrict_to_basin.reset();
    } else {
      auto n = ini.get_int("training.basin");
      c.restrict_to_basin = static_cast<int>(*n);
    }
  }
  index("training.length", c.train_length);
  index("training.truth_steps", c.truth_steps);
  index("training.attempt_factor", c.attempt_factor);
  index("test.resolution", c.resolution);
  real("test.half_width", c.test_half_width);
  if (auto v = ini.get_ints("test.axes")) {
    if (v->size() != 2)
      ini.fail("test.axes", "expected two component indices");
    c.grid_axes = {static_cast<Index>((*v)[0]), static_cast<Index>((*v)[1])};
  }
  index("test.n_test", c.n_test);
  index("test.horizon", c.horizon);
  if (auto v = ini.get_string("integration.method")) {
    if (*v == "rk4")
      c.integration.method = IntegratorKind::Rk4;
    else if (*v == "adaptive")
      c.integration.method = IntegratorKind::Adaptive;
    else
      ini.fail("integration.method", "expected rk4 or adaptive, got '" + *v + "'");
  }
  real("integration.dt", c.integration.dt);
  index("integration.substeps", c.integration.substeps);
  real("integration.rel_tol", c.integration.rel_tol);
  real("integration.abs_tol", c.integration.abs_tol);
  real("criteria.eps_c", c.criteria.eps_c);
  index("criteria.tail_len", c.criteria.tail_len);
  real("criteria.kl_threshold", c.criteria.kl_threshold);
  index("criteria.kl_tail", c.criteria.kl_tail);
  index("criteria.kl_samples", c.criteria.kl.n_samples);
  real("criteria.kl_sigma_scale", c.criteria.kl.sigma_scale);
  real("criteria.kl_eps", c.criteria.kl.eps);
  if (auto v = ini.get_string("criteria.kl_width")) {
    if (*v == "absolute")
      c.criteria.kl.width = KernelWidth::Absolute;
    else if (*v == "nearest_neighbor")
      c.criteria.kl.width = KernelWidth::NearestNeighbor;
    else
      ini.fail("criteria.kl_width", "expected absolute or nearest_neighbor, got '" + *v + "'");
  }
  seed("criteria.kl_seed", c.criteria.kl.seed);
  seed("seeds.reservoir", c.seeds.reservoir);
  seed("seeds.sampling", c.seeds.sampling);
  seed("seeds.noise", c.seeds.noise);

  try {
    c.validate();
  } catch (const Error& e) {
    throw ConfigError(ini.origin() + ": " + e.what());
  }
  return c;
}

inline ExperimentConfig config_from_key_values(const std::map<std::string, std::string>& kv,
                                               const std::string& origin = "<metadata>") {
  std::ostringstream text;
  for (const auto& [k, v] : kv) {
    const auto dot = k.find('.');
    text << '[' << k.substr(0, dot) << "]\n" << k.substr(dot + 1) << " = " << v << '\n';
  }
  std::istringstream in(text.str());
  const IniFile ini = IniFile::parse(in, origin);
  ExperimentConfig c = config_from_ini(ini);
  ini.reject_unused();
  return c;
}

/// 64-bit FNV-1a of the canonical key-value dump.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : to_key_values(c)) {
    for (const char ch : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  const auto res = std::to_chars(buf, buf + sizeof buf, h, 16);
  std::string hex(buf, res.ptr);
  return std::string(16 - hex.size(), '0') + hex;
}

} // namespace basinrc
