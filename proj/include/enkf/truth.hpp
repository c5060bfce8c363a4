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

#ifndef ENKF__TRUTH_HPP_
#define ENKF__TRUTH_HPP_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "enkf/csv.hpp"
#include "enkf/error.hpp"
#include "enkf/model.hpp"
#include "enkf/noise.hpp"

namespace enkf
{

/// Reference signal at the nodes of the grid it was simulated on.
struct ReferencePath
{
  Matrix states;  // d x (N+1), column k = X at t_k
  Vector x0;
  double h = 0.0;

  Index steps() const {return states.cols() - 1;}
};

/// Euler-Maruyama: X_{k+1} = X_k + h f(X_k) + Q^{1/2} dW_k.
inline ReferencePath simulate_signal(
  const ModelSpec & model, const Matrix & dW, double h, const Vector & x0)
{
  if (x0.size() != model.dim_state || dW.rows() != model.dim_state) {
    throw ConfigError("simulate_signal: dimension mismatch");
  }
  if (!x0.allFinite()) {
    throw ConfigError("simulate_signal: non-finite initial condition");
  }
  ReferencePath path;
  path.x0 = x0;
  path.h = h;
  path.states.resize(model.dim_state, dW.cols() + 1);
  path.states.col(0) = x0;
  for (Index k = 0; k < dW.cols(); ++k) {
    const Vector x = path.states.col(k);
    const Vector next = x + h * model.f(x) + model.Q_sqrt * dW.col(k);
    if (!next.allFinite()) {
      throw NumericalDivergence("signal became non-finite", k + 1);
    }
    path.states.col(k + 1) = next;
  }
  return path;
}

inline ReferencePath simulate_signal(
  const ModelSpec & model, const NoiseLattice & lattice, const Vector & x0)
{
  return simulate_signal(model, lattice.blocks().signal, lattice.grid().fine_h(), x0);
}

inline ReferencePath simulate_signal(
  const ModelSpec & model, const CoarseNoise & noise, const Vector & x0)
{
  return simulate_signal(model, noise.blocks.signal, noise.h, x0);
}

/// Observation increments dY for every coarsening level j = 0..r of a lattice.
/// Level 0 is the fine grid; level j is built by pairwise summation of level j-1.
struct ObservationIncrements
{
  std::vector<Matrix> levels;  // levels[j] is p x (N_fine / 2^j)

  const Matrix & level(int j) const
  {
    if (j < 0 || j >= static_cast<int>(levels.size())) {
      throw RangeError("observation increments: level out of range");
    }
    return levels[static_cast<std::size_t>(j)];
  }
};

/// dY_k = h g(X_{t_{k-1}}) + C^{1/2} (V_{t_k} - V_{t_{k-1}}) at the fine level,
/// aggregated to every coarser level by exact summation.
inline ObservationIncrements observation_increments(
  const ModelSpec & model, const ReferencePath & path, const NoiseLattice & lattice)
{
  const Matrix & dV = lattice.blocks().observation;
  if (path.states.rows() != model.dim_state || dV.rows() != model.dim_obs) {
    throw ConfigError("observation_increments: dimension mismatch");
  }
  if (path.steps() != dV.cols()) {
    throw ConfigError("observation_increments: path and lattice step counts differ");
  }
  const double h = lattice.grid().fine_h();
  Matrix fine(model.dim_obs, dV.cols());
  for (Index k = 0; k < dV.cols(); ++k) {
    fine.col(k) = h * model.g(path.states.col(k)) + model.C_sqrt * dV.col(k);
  }
  ObservationIncrements out;
  out.levels.push_back(std::move(fine));
  for (int j = 1; j <= lattice.grid().refinement; ++j) {
    out.levels.push_back(pairwise_coarsen(out.levels.back(), 1));
  }
  return out;
}

/// CSV columns: step, t, x_1..x_d.
inline void write_path_csv(std::ostream & os, const ReferencePath & path, const std::string & header = {})
{
  if (!header.empty()) {
    csv::write_comment_block(os, header);
  }
  os << "step,t";
  for (Index i = 0; i < path.states.rows(); ++i) {
    os << ",x_" << (i + 1);
  }
  os << '\n';
  for (Index k = 0; k <= path.steps(); ++k) {
    os << k << ',' << csv::format_double(static_cast<double>(k) * path.h);
    for (Index i = 0; i < path.states.rows(); ++i) {
      os << ',' << csv::format_double(path.states(i, k));
    }
    os << '\n';
  }
}

/// CSV columns: step, t_end, dy_1..dy_p; row k holds the increment over [t_{k-1}, t_k].
inline void write_increments_csv(
  std::ostream & os, const Matrix & dY, double h, const std::string & header = {})
{
  if (!header.empty()) {
    csv::write_comment_block(os, header);
  }
  os << "step,t";
  for (Index i = 0; i < dY.rows(); ++i) {
    os << ",dy_" << (i + 1);
  }
  os << '\n';
  for (Index k = 0; k < dY.cols(); ++k) {
    os << (k + 1) << ',' << csv::format_double(static_cast<double>(k + 1) * h);
    for (Index i = 0; i < dY.rows(); ++i) {
      os << ',' << csv::format_double(dY(i, k));
    }
    os << '\n';
  }
}

}  // namespace enkf

#endif  // ENKF__TRUTH_HPP_
