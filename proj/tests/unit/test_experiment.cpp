#include "basinrc/experiment.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <vector>

using namespace basinrc;
using basinrc::testing::TempDir;
using basinrc::testing::slurp;
using basinrc::testing::spit;

namespace {

ExperimentConfig multi_well_config() {
  ExperimentConfig c = default_config(SystemKind::MultiWell);
  c.restrict_to_basin.reset();
  c.resolution = 10;
  return c;
}

ExperimentConfig small_duffing_config() {
  ExperimentConfig c = default_config(SystemKind::Duffing);
  c.n_train = 3;
  c.resolution = 3;
  c.reservoir.n_r = 50;
  return c;
}

BasinMap hand_map() {
  BasinMap map;
  map.config = default_config(SystemKind::Duffing);
  map.config.resolution = 2;
  map.n_attractors = 2;
  for (Index i = 0; i < 4; ++i) {
    const Vector x = grid_point(map.config, i);
    map.ics.push_back({x[0], x[1]});
  }
  map.truth = {0, 1, 1, -1};
  map.outcomes = {{OutcomeKind::Correct, 0}, {OutcomeKind::Wrong, 0}, {OutcomeKind::Spurious, -1},
                  {OutcomeKind::Unresolved, -1}};
  map.rescore();
  return map;
}

void expect_same_maps(const BasinMap& a, const BasinMap& b) {
  EXPECT_EQ(a.truth, b.truth);
  EXPECT_EQ(a.outcomes, b.outcomes);
  EXPECT_EQ(a.ics, b.ics);
  EXPECT_EQ(a.metrics.f_c, b.metrics.f_c);
  EXPECT_EQ(a.metrics.f_spurious, b.metrics.f_spurious);
}

} // namespace

TEST(GridPoint, CellCentresRowMajor) {
  ExperimentConfig c = default_config(SystemKind::Duffing);
  c.resolution = 2;
  c.test_half_width = 10;
  EXPECT_EQ(grid_point(c, 0), (Vector{{-5.0, -5.0}}));
  EXPECT_EQ(grid_point(c, 1), (Vector{{5.0, -5.0}}));
  EXPECT_EQ(grid_point(c, 2), (Vector{{-5.0, 5.0}}));
  ExperimentConfig l = default_config(SystemKind::Lorenz);
  l.resolution = 2;
  const Vector p = grid_point(l, 3);
  EXPECT_EQ(p[0], 0.0);
  EXPECT_GT(p[1], 0.0);
  EXPECT_GT(p[2], 0.0);
  ExperimentConfig m = default_config(SystemKind::MagneticPendulum);
  EXPECT_EQ(grid_point(m, 5).tail(2), Vector::Zero(2));
}

TEST(TrainingSet, MultiWellRestrictedToOneQuadrant) {
  ExperimentConfig c = default_config(SystemKind::MultiWell);
  c.restrict_to_basin = 2;
  c.train_half_width = 4;
  const TrainingSet set = generate_training_set(c, multi_well());
  ASSERT_EQ(set.ics.size(), 25u);
  for (const auto& x : set.ics) {
    EXPECT_LT(x[0], 0.0);
    EXPECT_LT(x[1], 0.0);
    EXPECT_LE(x.cwiseAbs().maxCoeff(), 4.0);
  }
  for (const auto& s : set.signals) {
    EXPECT_EQ(s.size(), 500);
    EXPECT_EQ(s.dim(), 2);
  }
  EXPECT_GE(set.attempts, 25);
}

TEST(TrainingSet, DuffingRestrictedSignalsReclassifyByEnergy) {
  const ExperimentConfig c = default_config(SystemKind::Duffing);
  ASSERT_EQ(c.restrict_to_basin, 0);
  const SystemDef sys = duffing();
  const TrainingSet set = generate_training_set(c, sys);
  ASSERT_EQ(set.ics.size(), 10u);
  for (const auto& x0 : set.ics) {
    // Independent integrator, long horizon, energy test.
    const TimeSeries ref = integrate_adaptive(sys, x0, 60.0, 1e-10, 1e-10, 60.0);
    EXPECT_LT(sys.energy(ref.back()), 0.0);
    EXPECT_LT(ref.back()[0], 0.0);
  }
  for (const auto& s : set.signals)
    EXPECT_EQ(s.dim(), 1);
}

TEST(TrainingSet, UnreachableBasinExhaustsAttempts) {
  ExperimentConfig c = default_config(SystemKind::MultiWell);
  c.restrict_to_basin = 9;
  c.n_train = 2;
  c.attempt_factor = 5;
  EXPECT_THROW(generate_training_set(c, multi_well()), SamplingExhausted);
}

TEST(TrainingSet, IndependentOfWorkerCount) {
  ExperimentConfig c = default_config(SystemKind::Duffing);
  const TrainingSet a = generate_training_set(c, duffing(), 1);
  const TrainingSet b = generate_training_set(c, duffing(), 3);
  ASSERT_EQ(a.ics.size(), b.ics.size());
  for (std::size_t i = 0; i < a.ics.size(); ++i)
    EXPECT_EQ(a.ics[i], b.ics[i]);
  EXPECT_EQ(a.attempts, b.attempts);
}

TEST(BasinExperiment, MultiWellAllBasinsEasyRegime) {
  const BasinMap map = run_basin_experiment(multi_well_config());
  EXPECT_EQ(map.size(), 100u);
  EXPECT_GE(map.metrics.f_c, 0.95);
}

TEST(BasinExperiment, HorizonMustExceedTestLength) {
  ExperimentConfig c = small_duffing_config();
  c.n_test = c.horizon;
  EXPECT_THROW(run_basin_experiment(c), InvalidWindow);
  EXPECT_THROW(c.validate(), InvalidWindow);
}

TEST(BasinExperiment, DuffingTruthMatchesReferenceIntegration) {
  ExperimentConfig c = default_config(SystemKind::Duffing);
  const SystemDef sys = duffing();
  Index agree = 0, cells = 0;
  std::set<int> seen;
  for (Index i = 0; i < c.resolution * c.resolution; ++i) {
    const Vector x0 = grid_point(c, i);
    const int label = true_trajectory(sys, c, x0, c.truth_steps).first;
    const TimeSeries ref = integrate_adaptive(sys, x0, 200.0, 1e-10, 1e-10, 200.0);
    const int oracle = ref.back()[0] < 0.0 ? 0 : 1;
    agree += label == oracle;
    ++cells;
    seen.insert(label);
  }
  EXPECT_EQ(seen, (std::set<int>{0, 1}));
  EXPECT_GE(static_cast<double>(agree) / static_cast<double>(cells), 0.99);
}

TEST(BasinExperiment, DuffingTruthIsNotASignSplit) {
  // The basins interleave as spirals, so along a vertical line the label
  // changes several times. Labels are checked against a tight adaptive
  // integration with the sign of x at t = 200.
  ExperimentConfig c = default_config(SystemKind::Duffing);
  const SystemDef sys = duffing();
  int changes = 0, oracle_changes = 0, previous = -2, oracle_previous = -2, disagree = 0;
  for (double y = -10.0; y <= 10.0; y += 0.25) {
    const Vector x0{{0.05, y}};
    const int label = true_trajectory(sys, c, x0, c.truth_steps).first;
    const int oracle = integrate_adaptive(sys, x0, 200.0, 1e-10, 1e-10, 200.0).back()[0] < 0.0 ? 0 : 1;
    disagree += label != oracle;
    if (previous != -2) {
      changes += label != previous;
      oracle_changes += oracle != oracle_previous;
    }
    previous = label;
    oracle_previous = oracle;
  }
  EXPECT_LE(disagree, 1);
  EXPECT_GE(oracle_changes, 3);
  EXPECT_EQ(changes, oracle_changes);
}

TEST(BasinExperiment, DeterministicAcrossWorkerCounts) {
  ExperimentConfig c = multi_well_config();
  c.resolution = 6;
  expect_same_maps(run_basin_experiment(c, 1), run_basin_experiment(c, 4));
}

TEST(BasinExperiment, CellOrderDoesNotMatter) {
  ExperimentConfig c = small_duffing_config();
  const SystemDef sys = make_system(c);
  const TrainedModel model = prepare_model(c, sys);
  const BasinMap map = run_basin_experiment(c, sys, model);
  for (Index i = c.resolution * c.resolution - 1; i >= 0; --i) {
    const CellResult cell = evaluate_initial_condition(c, sys, model, grid_point(c, i));
    EXPECT_EQ(cell.outcome, map.outcomes[static_cast<std::size_t>(i)]);
    EXPECT_EQ(cell.truth, map.truth[static_cast<std::size_t>(i)]);
  }
}

TEST(BasinExperiment, TruthIgnoresReservoirSeed) {
  ExperimentConfig a = small_duffing_config();
  ExperimentConfig b = a;
  b.seeds.reservoir = 99;
  EXPECT_EQ(run_basin_experiment(a).truth, run_basin_experiment(b).truth);
}

TEST(BasinExperiment, PartialObservationHidesVelocity) {
  ExperimentConfig c = small_duffing_config();
  const SystemDef sys = make_system(c);
  std::mutex mu;
  std::vector<TimeSeries> seen;
  ExperimentHooks hooks;
  hooks.on_reservoir_input = [&](const TimeSeries& s) {
    std::lock_guard lock{mu};
    seen.push_back(s);
  };
  std::vector<CellResult> cells;
  hooks.on_cell = [&](const CellResult& r) { cells.push_back(r); };
  const TrainedModel model = prepare_model(c, sys, 2, hooks);
  (void)run_basin_experiment(c, sys, model, 2, hooks);
  ASSERT_EQ(seen.size(), static_cast<std::size_t>(c.n_train + c.resolution * c.resolution));
  for (const auto& s : seen)
    EXPECT_EQ(s.dim(), 1);
  // Test signals carry exactly the x samples of the true trajectory.
  ASSERT_EQ(cells.size(), 9u);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    EXPECT_EQ(cells[i].index, static_cast<Index>(i));
    const TimeSeries truth = integrate(sys, c.integration, cells[i].ic, c.n_test - 1);
    const bool found = std::any_of(seen.begin(), seen.end(), [&](const TimeSeries& s) {
      return s.size() == c.n_test && s.values().col(0) == truth.values().col(0);
    });
    EXPECT_TRUE(found) << "cell " << i;
  }
}

TEST(BasinExperiment, SameConfigSameMap) {
  const ExperimentConfig c = small_duffing_config();
  expect_same_maps(run_basin_experiment(c), run_basin_experiment(c));
}

TEST(Sweep, SingleCellEqualsBasinExperiment) {
  ExperimentConfig c = multi_well_config();
  c.resolution = 5;
  const SweepTable t = run_sweep(c, {{c.n_train}, {c.train_half_width}, {c.test_half_width}}, 1);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].f_c, run_basin_experiment(c).metrics.f_c);
}

TEST(Sweep, FactorialRowsAndFailedCells) {
  ExperimentConfig c = small_duffing_config();
  c.restrict_to_basin = 7; // never reachable
  c.attempt_factor = 2;
  const SweepTable t = run_sweep(c, {{1, 2}, {5.0, 10.0}, {10.0}}, 2);
  ASSERT_EQ(t.rows.size(), 8u);
  for (const auto& r : t.rows) {
    EXPECT_TRUE(std::isnan(r.f_c));
    EXPECT_NE(r.error.find("SamplingExhausted"), std::string::npos);
  }
  EXPECT_EQ(t.rows[1].realization, 1);
  EXPECT_EQ(t.rows[2].half_train, 10.0);
  EXPECT_EQ(t.rows[4].n_train, 2);
  EXPECT_THROW(run_sweep(c, {{}, {1.0}, {1.0}}, 1), InvalidArgument);
  EXPECT_THROW(run_sweep(c, {{1}, {1.0}, {1.0}}, 0), InvalidArgument);
}

TEST(Sweep, RealizationOffsetsEverySeed) {
  ExperimentConfig c = small_duffing_config();
  const SweepRow row{4, 3.0, 8.0, 2};
  const ExperimentConfig cell = sweep_cell_config(c, row);
  EXPECT_EQ(cell.seeds, c.seeds.offset(2));
  EXPECT_EQ(cell.n_train, 4);
  EXPECT_EQ(cell.train_half_width, 3.0);
  EXPECT_EQ(cell.test_half_width, 8.0);
}

TEST(Sweep, DuffingNarrowTrainingCollapses) {
  ExperimentConfig c = default_config(SystemKind::Duffing);
  c.resolution = 20;
  const SweepTable t = run_sweep(c, {{2, 10}, {4.0, 10.0}, {10.0}}, 2);
  ASSERT_EQ(t.rows.size(), 8u);
  auto mean_at = [&](Index n, double ht) {
    double sum = 0.0, lo = INFINITY, hi = -INFINITY;
    int count = 0;
    for (const auto& r : t.rows)
      if (r.n_train == n && r.half_train == ht) {
        EXPECT_TRUE(r.error.empty()) << r.error;
        sum += r.f_c;
        lo = std::min(lo, r.f_c);
        hi = std::max(hi, r.f_c);
        ++count;
      }
    const double mean = sum / count;
    EXPECT_GE(mean, lo);
    EXPECT_LE(mean, hi);
    return mean;
  };
  EXPECT_GT(mean_at(10, 10.0), mean_at(10, 4.0));
  (void)mean_at(2, 10.0);
  (void)mean_at(2, 4.0);
}

TEST(Persistence, BasinMapRoundTripIsByteIdentical) {
  TempDir dir("persist");
  const BasinMap map = hand_map();
  save_basin_map(map, dir / "a.csv");
  const BasinMap loaded = load_basin_map(dir / "a.csv");
  save_basin_map(loaded, dir / "b.csv");
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  EXPECT_EQ(slurp(dir / "a.csv.meta"), slurp(dir / "b.csv.meta"));
  EXPECT_EQ(slurp(dir / "a.csv").substr(0, 41), "ic_0,ic_1,true_label,pred_label,outcome\n-");
  expect_same_maps(map, loaded);
}

TEST(Persistence, LoadedMetricsEqualRecomputed) {
  TempDir dir("metrics");
  save_basin_map(hand_map(), dir / "m.csv");
  BasinMap loaded = load_basin_map(dir / "m.csv");
  const BasinMetrics stored = loaded.metrics;
  loaded.rescore();
  EXPECT_EQ(stored.f_c, loaded.metrics.f_c);
  EXPECT_EQ(stored.f_wrong, loaded.metrics.f_wrong);
  EXPECT_EQ(stored.f_spurious, loaded.metrics.f_spurious);
  EXPECT_EQ(stored.f_unresolved, loaded.metrics.f_unresolved);
  ASSERT_EQ(stored.per_basin.size(), loaded.metrics.per_basin.size());
  for (std::size_t b = 0; b < stored.per_basin.size(); ++b) {
    EXPECT_EQ(stored.per_basin[b].fraction_correct, loaded.metrics.per_basin[b].fraction_correct);
    EXPECT_EQ(stored.per_basin[b].false_positive_rate, loaded.metrics.per_basin[b].false_positive_rate);
  }
  EXPECT_DOUBLE_EQ(loaded.metrics.f_c, 0.25);
}

TEST(Persistence, OtherSchemaVersionRejected) {
  TempDir dir("schema");
  save_basin_map(hand_map(), dir / "m.csv");
  std::string meta = slurp(dir / "m.csv.meta");
  const auto pos = meta.find("schema_version=1");
  ASSERT_NE(pos, std::string::npos);
  meta.replace(pos, 16, "schema_version=2");
  spit(dir / "m.csv.meta", meta);
  EXPECT_THROW(load_basin_map(dir / "m.csv"), SchemaMismatch);
}

TEST(Persistence, TamperedConfigFailsHashCheck) {
  TempDir dir("hash");
  save_basin_map(hand_map(), dir / "m.csv");
  std::string meta = slurp(dir / "m.csv.meta");
  const auto pos = meta.find("config.reservoir.nodes=200");
  ASSERT_NE(pos, std::string::npos);
  meta.replace(pos, 26, "config.reservoir.nodes=201");
  spit(dir / "m.csv.meta", meta);
  EXPECT_THROW(load_basin_map(dir / "m.csv"), IoError);
}

TEST(Persistence, MissingFileIsIoError) {
  TempDir dir("missing");
  EXPECT_THROW(load_basin_map(dir / "nope.csv"), IoError);
}

TEST(Persistence, SweepRoundTripKeepsNaN) {
  TempDir dir("sweep");
  SweepTable t;
  t.config = small_duffing_config();
  t.realizations = 1;
  t.rows.push_back({2, 4.0, 10.0, 0, 0.5, 0.125});
  t.rows.push_back({10, 4.0, 10.0, 0});
  save_sweep(t, dir / "s.csv");
  const SweepTable back = load_sweep(dir / "s.csv");
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[0].f_c, 0.5);
  EXPECT_TRUE(std::isnan(back.rows[1].f_c));
  save_sweep(back, dir / "t.csv");
  EXPECT_EQ(slurp(dir / "s.csv"), slurp(dir / "t.csv"));
  EXPECT_EQ(slurp(dir / "s.csv").substr(0, 54), "n_train,half_train,half_test,realization,f_c,f_spuriou");
}

TEST(Render, AllCorrectBasinZero) {
  BasinMap map = hand_map();
  map.truth.assign(4, 0);
  map.outcomes.assign(4, BasinOutcome{OutcomeKind::Correct, 0});
  const std::string ppm = render_basin_map(map);
  const std::string header = "P6\n2 2\n255\n";
  ASSERT_EQ(ppm.size(), header.size() + 12);
  EXPECT_EQ(ppm.substr(0, header.size()), header);
  for (int p = 0; p < 4; ++p) {
    EXPECT_EQ(static_cast<unsigned char>(ppm[header.size() + 3 * p + 0]), kBasinPalette[0][0]);
    EXPECT_EQ(static_cast<unsigned char>(ppm[header.size() + 3 * p + 1]), kBasinPalette[0][1]);
    EXPECT_EQ(static_cast<unsigned char>(ppm[header.size() + 3 * p + 2]), kBasinPalette[0][2]);
  }
}

TEST(Render, TopRowIsLargestSecondAxis) {
  const BasinMap map = hand_map();
  const std::string ppm = render_basin_map(map);
  const std::size_t body = std::string("P6\n2 2\n255\n").size();
  // Image row 0 holds cells 2 and 3 (upper half of the plane).
  const Rgb first{static_cast<std::uint8_t>(ppm[body]), static_cast<std::uint8_t>(ppm[body + 1]),
                  static_cast<std::uint8_t>(ppm[body + 2])};
  EXPECT_EQ(first, outcome_color(map.outcomes[2]));
}

TEST(Render, PaletteIsInjective) {
  std::vector<Rgb> colors;
  for (int b = 0; b < static_cast<int>(kBasinPalette.size()); ++b)
    colors.push_back(outcome_color({OutcomeKind::Correct, b}));
  colors.push_back(outcome_color({OutcomeKind::Wrong, 0}));
  colors.push_back(outcome_color({OutcomeKind::Spurious, -1}));
  colors.push_back(outcome_color({OutcomeKind::Unresolved, -1}));
  for (std::size_t i = 0; i < colors.size(); ++i)
    for (std::size_t j = i + 1; j < colors.size(); ++j)
      EXPECT_FALSE(colors[i] == colors[j]) << i << " vs " << j;
}

TEST(Render, RerenderIsByteIdentical) {
  TempDir dir("render");
  const BasinMap map = hand_map();
  render_basin_map(map, dir / "a.ppm");
  render_basin_map(map, dir / "b.ppm");
  EXPECT_EQ(slurp(dir / "a.ppm"), slurp(dir / "b.ppm"));
  EXPECT_EQ(slurp(dir / "a.ppm"), render_basin_map(map));
}
