#pragma once

#include "basinrc/timeseries.hpp"

namespace basinrc {

/// Trained linear output map. `w_out` acts on reservoir states and produces
/// standardized inputs; `standardizer` maps those back to signal coordinates.
struct Readout {
  Matrix w_out;              // n_in x n_r
  Standardizer standardizer; // fitted on the training union
  Index n_fit = 0;           // input/output pairs used in the fit

  [[nodiscard]] Index input_dim() const noexcept { return w_out.rows(); }
  [[nodiscard]] Index reservoir_size() const noexcept { return w_out.cols(); }
};

} // namespace basinrc
