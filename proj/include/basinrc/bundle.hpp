#pragma once

// Trained-model bundle: reservoir spec and weights, standardizer, readout and
// the experiment settings that produced them, as one JSON document. Doubles
// are written in shortest round-trip form, so loading restores bit-identical
// weights.

#include "basinrc/error.hpp"
#include "basinrc/experiment.hpp"
#include "basinrc/experiment_config.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace basinrc {

inline constexpr int kBundleVersion = 1;

struct ModelBundle {
  ExperimentConfig config;
  TrainedModel model;
};

namespace detail {
using nlohmann::json;

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j)
      row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, Index rows, Index cols) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows)
    throw SchemaMismatch("matrix has the wrong number of rows");
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw SchemaMismatch("matrix row has the wrong number of columns");
    for (Index c = 0; c < cols; ++c)
      m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from_json(const json& j, Index n) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Index>(v.size()) != n)
    throw SchemaMismatch("vector has the wrong length");
  return Eigen::Map<const Vector>(v.data(), n);
}
} // namespace detail

inline std::string bundle_to_string(const ModelBundle& b) {
  using detail::json;
  const Reservoir& res = b.model.reservoir;
  const ReservoirSpec& s = res.spec();
  json j;
  j["format"] = "basinrc-model";
  j["version"] = kBundleVersion;
  j["config"] = to_key_values(b.config);
  j["reservoir"]["spec"] = {{"nodes", s.n_r},
                            {"mean_degree", s.mean_degree},
                            {"spectral_radius", s.spectral_radius},
                            {"input_strength", s.input_strength},
                            {"bias_strength", s.bias_strength},
                            {"leakage", s.leakage},
                            {"inputs", s.n_in},
                            {"seed", s.seed}};
  json triplets = json::array();
  for (Index k = 0; k < res.w_r().outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(res.w_r(), k); it; ++it)
      triplets.push_back(json::array({it.row(), it.col(), it.value()}));
  j["reservoir"]["w_r"] = std::move(triplets);
  j["reservoir"]["w_in"] = detail::matrix_to_json(res.w_in());
  j["reservoir"]["bias"] = detail::vector_to_json(res.bias());
  j["readout"]["w_out"] = detail::matrix_to_json(b.model.readout.w_out);
  j["readout"]["shift"] = detail::vector_to_json(b.model.readout.standardizer.shift());
  j["readout"]["scale"] = detail::vector_to_json(b.model.readout.standardizer.scale());
  j["readout"]["n_fit"] = b.model.readout.n_fit;
  j["training"]["n_fit"] = b.model.report.n_fit;
  j["training"]["peak_batch_states"] = b.model.report.peak_batch_states;
  j["training"]["mse"] = b.model.report.training_mse;
  json ics = json::array();
  for (const auto& x : b.model.training_ics)
    ics.push_back(detail::vector_to_json(x));
  j["training"]["initial_conditions"] = std::move(ics);
  return j.dump(1) + "\n";
}

inline ModelBundle bundle_from_string(const std::string& text, const std::string& origin = "<bundle>") {
  using detail::json;
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != "basinrc-model")
      throw SchemaMismatch(origin + ": not a model bundle");
    if (j.value("version", -1) != kBundleVersion)
      throw SchemaMismatch(origin + ": bundle version " + std::to_string(j.value("version", -1)) +
                           ", expected " + std::to_string(kBundleVersion));
    ExperimentConfig cfg =
        config_from_key_values(j.at("config").get<std::map<std::string, std::string>>(), origin);

    const json& js = j.at("reservoir").at("spec");
    ReservoirSpec spec;
    spec.n_r = js.at("nodes").get<Index>();
    spec.mean_degree = js.at("mean_degree").get<double>();
    spec.spectral_radius = js.at("spectral_radius").get<double>();
    spec.input_strength = js.at("input_strength").get<double>();
    spec.bias_strength = js.at("bias_strength").get<double>();
    spec.leakage = js.at("leakage").get<double>();
    spec.n_in = js.at("inputs").get<Index>();
    spec.seed = js.at("seed").get<std::uint64_t>();
    spec.validate();

    std::vector<Eigen::Triplet<double>> triplets;
    for (const auto& t : j.at("reservoir").at("w_r")) {
      const auto r = t.at(0).get<Index>();
      const auto c = t.at(1).get<Index>();
      if (r < 0 || c < 0 || r >= spec.n_r || c >= spec.n_r)
        throw SchemaMismatch(origin + ": reservoir edge out of range");
      triplets.emplace_back(r, c, t.at(2).get<double>());
    }
    SparseMatrix w_r(spec.n_r, spec.n_r);
    w_r.setFromTriplets(triplets.begin(), triplets.end());
    Matrix w_in = detail::matrix_from_json(j.at("reservoir").at("w_in"), spec.n_r, spec.n_in);
    Vector bias = detail::vector_from_json(j.at("reservoir").at("bias"), spec.n_r);
    Reservoir res(spec, std::move(w_r), std::move(w_in), std::move(bias));

    const json& jr = j.at("readout");
    Readout readout{detail::matrix_from_json(jr.at("w_out"), spec.n_in, spec.n_r),
                    Standardizer(detail::vector_from_json(jr.at("shift"), spec.n_in),
                                 detail::vector_from_json(jr.at("scale"), spec.n_in)),
                    jr.at("n_fit").get<Index>()};
    TrainReport report;
    const json& jt = j.at("training");
    report.n_fit = jt.at("n_fit").get<Index>();
    report.peak_batch_states = jt.at("peak_batch_states").get<Index>();
    report.training_mse = jt.at("mse").get<double>();
    std::vector<Vector> ics;
    for (const auto& x : jt.at("initial_conditions"))
      ics.push_back(detail::vector_from_json(x, static_cast<Index>(x.size())));
    return {std::move(cfg), {std::move(res), std::move(readout), report, std::move(ics)}};
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(origin + ": " + e.what());
  }
}

inline void save_bundle(const ModelBundle& b, const std::filesystem::path& path) {
  write_file_atomic(path, bundle_to_string(b));
}

inline ModelBundle load_bundle(const std::filesystem::path& path) {
  return bundle_from_string(detail::read_file(path), path.string());
}

} // namespace basinrc
