// basinrc: command-line front end for the basin experiments.
//
//   basinrc simulate  --config sim.ini --out dir
//   basinrc train     --config duffing.ini --out dir
//   basinrc predict   --bundle dir/model.json --input test.csv --out dir [--steps N]
//   basinrc basin-map --config duffing.ini [--bundle model.json] --out dir
//   basinrc sweep     --config sweep.ini --out dir
//   basinrc render    --input dir/basin_map.csv --out dir

#include "basinrc/bundle.hpp"
#include "basinrc/experiment.hpp"
#include "basinrc/experiment_config.hpp"
#include "basinrc/ini.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace basinrc;

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  std::string bundle;
  std::string input;
  std::optional<std::uint64_t> seed_reservoir;
  std::optional<std::uint64_t> seed_sampling;
  std::optional<std::uint64_t> seed_noise;
  std::optional<Index> steps;
  unsigned parallel = default_workers();
};

// Files written by the current command; removed if the command fails.
class OutputSet {
public:
  explicit OutputSet(fs::path dir) : dir_{std::move(dir)} {}

  fs::path add(const std::string& name) {
    files_.push_back(dir_ / name);
    return files_.back();
  }
  void commit() noexcept { files_.clear(); }
  ~OutputSet() {
    std::error_code ec;
    for (const auto& f : files_) {
      fs::remove(f, ec);
      fs::remove(meta_path(f), ec);
    }
  }

private:
  fs::path dir_;
  std::vector<fs::path> files_;
};

IniFile read_config(const std::string& path) {
  if (path.empty())
    throw ConfigError("--config is required");
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file '" + path + "'");
  return IniFile::parse(in, path);
}

// Config sections understood by each command beyond the experiment ones.
void reject_unknown(const IniFile& ini, std::initializer_list<std::string_view> extra_sections) {
  for (const auto& key : ini.unused()) {
    const auto section = std::string_view(key).substr(0, key.find('.'));
    bool other = false;
    for (auto s : {std::string_view("simulate"), std::string_view("sweep")})
      other = other || section == s;
    for (auto s : extra_sections)
      if (section == s)
        other = false;
    if (!other)
      ini.fail(key, "unknown field");
  }
}

ExperimentConfig apply_seeds(ExperimentConfig cfg, const Options& o) {
  if (o.seed_reservoir)
    cfg.seeds.reservoir = *o.seed_reservoir;
  if (o.seed_sampling)
    cfg.seeds.sampling = *o.seed_sampling;
  if (o.seed_noise)
    cfg.seeds.noise = *o.seed_noise;
  return cfg;
}

std::string fmt(double v) { return detail::format_double(v); }

void print_metrics(const BasinMap& map, const SystemDef& sys) {
  const auto& m = map.metrics;
  std::cout << "cells       " << m.total << '\n'
            << "f_c         " << fmt(m.f_c) << '\n'
            << "f_wrong     " << fmt(m.f_wrong) << '\n'
            << "f_spurious  " << fmt(m.f_spurious) << '\n'
            << "f_unresolved " << fmt(m.f_unresolved) << '\n'
            << "basin  label    truth  f_c       fnr       fpr\n";
  for (const auto& b : m.per_basin) {
    char line[128];
    std::snprintf(line, sizeof line, "%-6d %-8s %-6lld %-9.4f %-9.4f %-9.4f\n", b.attractor,
                  sys.attractors[static_cast<std::size_t>(b.attractor)].label.c_str(),
                  static_cast<long long>(b.truth_count), b.fraction_correct, b.false_negative_rate,
                  b.false_positive_rate);
    std::cout << line;
  }
}

int cmd_simulate(const Options& o) {
  const IniFile ini = read_config(o.config);
  const ExperimentConfig cfg = apply_seeds(config_from_ini(ini), o);
  const auto ic = ini.get_doubles("simulate.initial_condition");
  if (!ic)
    ini.fail("simulate.initial_condition", "required field is missing");
  const auto steps = ini.get_int("simulate.steps");
  if (!steps)
    ini.fail("simulate.steps", "required field is missing");
  if (*steps < 0)
    ini.fail("simulate.steps", "must be non-negative");
  const double eta_p = ini.get_double("simulate.process_noise").value_or(0.0);
  reject_unknown(ini, {"simulate"});

  const SystemDef sys = make_system(cfg);
  if (static_cast<Index>(ic->size()) != sys.dim)
    ini.fail("simulate.initial_condition",
             "expected " + std::to_string(sys.dim) + " components, got " + std::to_string(ic->size()));
  const Vector x0 = Eigen::Map<const Vector>(ic->data(), sys.dim);
  const TimeSeries traj =
      eta_p > 0.0 ? integrate_with_process_noise(sys, x0, cfg.integration.dt, *steps, eta_p, cfg.seeds.noise)
                  : integrate(sys, cfg.integration, x0, *steps);

  fs::create_directories(o.out);
  OutputSet outputs(o.out);
  std::ostringstream csv;
  write_csv(traj, csv);
  write_file_atomic(outputs.add("trajectory.csv"), csv.str());
  outputs.commit();

  std::cout << "final state";
  for (Index j = 0; j < traj.dim(); ++j)
    std::cout << ' ' << fmt(traj.back()[j]);
  std::cout << '\n';
  if (!sys.has_chaotic_attractors() && traj.size() >= cfg.criteria.tail_len) {
    const Convergence c = classify_fixed_point(traj, sys, cfg.criteria, true);
    if (c.converged())
      std::cout << "converged to " << sys.attractors[static_cast<std::size_t>(c.attractor)].label << '\n';
    else
      std::cout << (c.kind == Convergence::Kind::Spurious ? "settled away from every attractor\n"
                                                          : "not converged\n");
  }
  return 0;
}

int cmd_train(const Options& o) {
  const IniFile ini = read_config(o.config);
  const ExperimentConfig cfg = apply_seeds(config_from_ini(ini), o);
  reject_unknown(ini, {});
  const SystemDef sys = make_system(cfg);
  ModelBundle bundle{cfg, prepare_model(cfg, sys, o.parallel)};

  fs::create_directories(o.out);
  OutputSet outputs(o.out);
  save_bundle(bundle, outputs.add("model.json"));
  outputs.commit();

  const auto& s = bundle.model.reservoir.spec();
  std::cout << "system          " << to_string(cfg.system) << '\n'
            << "nodes           " << s.n_r << '\n'
            << "mean_degree     " << fmt(s.mean_degree) << '\n'
            << "input_strength  " << fmt(s.input_strength) << '\n'
            << "spectral_radius " << fmt(s.spectral_radius) << '\n'
            << "bias_strength   " << fmt(s.bias_strength) << '\n'
            << "leakage         " << fmt(s.leakage) << '\n'
            << "alpha           " << fmt(cfg.train.alpha) << '\n'
            << "eta             " << fmt(cfg.train.eta) << '\n'
            << "n_train         " << bundle.model.training_ics.size() << '\n'
            << "n_fit           " << bundle.model.report.n_fit << '\n'
            << "training_mse    " << fmt(bundle.model.report.training_mse) << '\n';
  return 0;
}

int cmd_predict(const Options& o) {
  if (o.bundle.empty() || o.input.empty())
    throw ConfigError("predict needs --bundle and --input");
  const ModelBundle bundle = load_bundle(o.bundle);
  std::ifstream in(o.input);
  if (!in)
    throw IoError("cannot open " + o.input);
  const TimeSeries test = read_csv(in, bundle.config.integration.dt);
  const Index steps = o.steps.value_or(bundle.config.horizon - test.size() + 1);
  if (steps < 1)
    throw InvalidWindow("test signal already reaches the horizon; pass --steps");
  const TimeSeries predicted = forecast(bundle.model.reservoir, bundle.model.readout, test, steps);

  fs::create_directories(o.out);
  OutputSet outputs(o.out);
  std::ostringstream csv;
  write_csv(predicted, csv);
  write_file_atomic(outputs.add("prediction.csv"), csv.str());
  outputs.commit();

  const SystemDef sys = make_system(bundle.config);
  const TimeSeries joined = concatenate(test, predicted);
  const Convergence c =
      sys.has_chaotic_attractors()
          ? classify_chaotic(joined, sys, bundle.config.criteria, bundle.config.observed)
          : classify_fixed_point(joined, sys, bundle.config.criteria, bundle.config.full_state(),
                                 bundle.config.observed);
  std::cout << "samples " << predicted.size() << '\n';
  if (c.converged())
    std::cout << "prediction converges to " << sys.attractors[static_cast<std::size_t>(c.attractor)].label << '\n';
  else
    std::cout << (c.kind == Convergence::Kind::Spurious ? "prediction settles on a spurious point\n"
                                                        : "prediction unresolved\n");
  return 0;
}

int cmd_basin_map(const Options& o) {
  const IniFile ini = read_config(o.config);
  const ExperimentConfig cfg = apply_seeds(config_from_ini(ini), o);
  reject_unknown(ini, {});
  const SystemDef sys = make_system(cfg);
  std::optional<TrainedModel> model;
  if (!o.bundle.empty()) {
    ModelBundle b = load_bundle(o.bundle);
    if (b.config.observed != cfg.observed || b.config.system != cfg.system)
      throw ConfigError("bundle was trained for a different system or observation");
    model.emplace(std::move(b.model));
  } else {
    model.emplace(prepare_model(cfg, sys, o.parallel));
  }
  const BasinMap map = run_basin_experiment(cfg, sys, *model, o.parallel);

  fs::create_directories(o.out);
  OutputSet outputs(o.out);
  save_basin_map(map, outputs.add("basin_map.csv"));
  render_basin_map(map, outputs.add("basin_map.ppm"));
  outputs.commit();
  print_metrics(map, sys);
  return 0;
}

int cmd_sweep(const Options& o) {
  const IniFile ini = read_config(o.config);
  const ExperimentConfig cfg = apply_seeds(config_from_ini(ini), o);
  SweepAxes axes;
  if (auto v = ini.get_ints("sweep.n_train"))
    axes.n_train.assign(v->begin(), v->end());
  else
    axes.n_train = {cfg.n_train};
  axes.half_train = ini.get_doubles("sweep.half_train").value_or(std::vector<double>{cfg.train_half_width});
  axes.half_test = ini.get_doubles("sweep.half_test").value_or(std::vector<double>{cfg.test_half_width});
  const Index realizations = ini.get_int("sweep.realizations").value_or(1);
  reject_unknown(ini, {"sweep"});

  const SweepTable table = run_sweep(cfg, axes, realizations, o.parallel);
  fs::create_directories(o.out);
  OutputSet outputs(o.out);
  save_sweep(table, outputs.add("sweep.csv"));
  outputs.commit();

  std::cout << "n_train half_train half_test realization f_c f_spurious\n";
  for (const auto& r : table.rows) {
    std::cout << r.n_train << ' ' << fmt(r.half_train) << ' ' << fmt(r.half_test) << ' ' << r.realization
              << ' ' << fmt(r.f_c) << ' ' << fmt(r.f_spurious) << '\n';
    if (!r.error.empty())
      std::cerr << "  cell failed: " << r.error << '\n';
  }
  return 0;
}

int cmd_render(const Options& o) {
  if (o.input.empty())
    throw ConfigError("render needs --input <basin_map.csv>");
  const BasinMap map = load_basin_map(o.input);
  fs::create_directories(o.out);
  OutputSet outputs(o.out);
  render_basin_map(map, outputs.add(fs::path(o.input).stem().string() + ".ppm"));
  outputs.commit();
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reservoir-computer basin prediction experiments"};
  app.require_subcommand(1, 1);
  Options o;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--parallel", o.parallel, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  };
  auto add_seeds = [&o](CLI::App* sub) {
    sub->add_option("--seed-reservoir", o.seed_reservoir, "Override seeds.reservoir");
    sub->add_option("--seed-sampling", o.seed_sampling, "Override seeds.sampling");
    sub->add_option("--seed-noise", o.seed_noise, "Override seeds.noise");
  };

  auto* simulate = app.add_subcommand("simulate", "Integrate one trajectory");
  simulate->add_option("--config", o.config, "Config file")->required();
  add_common(simulate);
  add_seeds(simulate);

  auto* train = app.add_subcommand("train", "Sample training data and fit a model bundle");
  train->add_option("--config", o.config, "Config file")->required();
  add_common(train);
  add_seeds(train);

  auto* predict = app.add_subcommand("predict", "Forecast from a test signal");
  predict->add_option("--bundle", o.bundle, "Model bundle")->required();
  predict->add_option("--input", o.input, "Test signal CSV")->required();
  predict->add_option("--steps", o.steps, "Forecast length");
  add_common(predict);

  auto* basin_map = app.add_subcommand("basin-map", "Predict basins over the test grid");
  basin_map->add_option("--config", o.config, "Config file")->required();
  basin_map->add_option("--bundle", o.bundle, "Use a trained bundle instead of training");
  add_common(basin_map);
  add_seeds(basin_map);

  auto* sweep = app.add_subcommand("sweep", "Factorial sweep over training and test ranges");
  sweep->add_option("--config", o.config, "Config file")->required();
  add_common(sweep);
  add_seeds(sweep);

  auto* render = app.add_subcommand("render", "Render a saved basin map as PPM");
  render->add_option("--input", o.input, "Basin map CSV")->required();
  add_common(render);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(o);
    if (train->parsed()) return cmd_train(o);
    if (predict->parsed()) return cmd_predict(o);
    if (basin_map->parsed()) return cmd_basin_map(o);
    if (sweep->parsed()) return cmd_sweep(o);
    if (render->parsed()) return cmd_render(o);
  } catch (const Error& e) {
    std::cerr << "basinrc: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "basinrc: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
