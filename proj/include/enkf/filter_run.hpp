// Copyright 2026 The enkf-limit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ENKF__FILTER_RUN_HPP_
#define ENKF__FILTER_RUN_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "enkf/classical.hpp"
#include "enkf/linalg.hpp"
#include "enkf/model.hpp"
#include "enkf/modified.hpp"
#include "enkf/noise.hpp"

namespace enkf
{

enum class Variant
{
  kClassical,
  kModified,
};

inline std::string to_string(Variant v) {return v == Variant::kClassical ? "classical" : "modified";}

inline Variant parse_variant(const std::string & s)
{
  if (s == "classical") {
    return Variant::kClassical;
  }
  if (s == "modified") {
    return Variant::kModified;
  }
  throw ConfigError("unknown variant '" + s + "' (expected classical or modified)");
}

struct FilterOptions
{
  GainForm gain_form = GainForm::kRegularized;
  double collapse_floor = 1e-6;  // modified variant only
  bool keep_forecasts = false;
};

/// Time-indexed record of one filter run on one grid.
///
/// Analysis quantities are indexed k = 0..n (k = 0 is the initial ensemble);
/// forecast quantities and gains k = 1..n are stored at index k-1.
struct FilterRun
{
  Variant variant = Variant::kClassical;
  double h = 0.0;
  std::vector<Matrix> analysis;
  std::vector<Matrix> forecast;
  std::vector<Matrix> gains;
  std::vector<double> forecast_spread;
  std::vector<double> analysis_spread;
  std::vector<double> lambda_min;  // lambda_min(P^a_k)

  Index steps() const {return static_cast<Index>(gains.size());}
};

/// Runs either variant from `initial` over every step of `noise`.
/// `dY` holds the observation increments on the same grid (p x n).
inline FilterRun run_filter(
  Variant variant, const ModelSpec & model, const Ensemble & initial, const CoarseNoise & noise,
  const Matrix & dY, const FilterOptions & opt = {})
{
  const Index n = noise.steps();
  if (dY.cols() != n || dY.rows() != model.dim_obs) {
    throw ConfigError("run_filter: observation increments do not match the noise grid");
  }
  if (variant == Variant::kClassical && noise.ensemble_size != initial.size()) {
    throw ConfigError("run_filter: lattice ensemble size differs from the initial ensemble");
  }
  const double h = noise.h;
  FilterRun run;
  run.variant = variant;
  run.h = h;
  run.analysis.reserve(static_cast<std::size_t>(n + 1));
  run.gains.reserve(static_cast<std::size_t>(n));

  auto record_analysis = [&](const Ensemble & e) {
      const EnsembleStats s = compute_stats(e, model);
      run.analysis.push_back(e.members());
      run.analysis_spread.push_back(s.spread);
      run.lambda_min.push_back(linalg::min_eigenvalue(s.covariance));
    };

  Ensemble current = initial;
  record_analysis(current);
  for (Index k = 0; k < n; ++k) {
    const std::int64_t step = k + 1;
    if (variant == Variant::kClassical) {
      ClassicalStep st = step_classical(
        current, model, h, noise.ens_signal_at(k), dY.col(k), noise.ens_obs_at(k),
        opt.gain_form, step);
      run.forecast_spread.push_back(st.forecast_stats.spread);
      run.gains.push_back(std::move(st.gain));
      if (opt.keep_forecasts) {
        run.forecast.push_back(st.forecast.members());
      }
      current = std::move(st.analysis);
    } else {
      ModifiedStep st = step_modified(
        current, model, h, dY.col(k), opt.collapse_floor, opt.gain_form, step);
      run.forecast_spread.push_back(st.forecast_stats.spread);
      run.gains.push_back(std::move(st.gain));
      if (opt.keep_forecasts) {
        run.forecast.push_back(st.forecast.members());
      }
      current = std::move(st.analysis);
    }
    record_analysis(current);
  }
  return run;
}

}  // namespace enkf

#endif  // ENKF__FILTER_RUN_HPP_
