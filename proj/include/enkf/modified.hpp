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

#ifndef ENKF__MODIFIED_HPP_
#define ENKF__MODIFIED_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include "enkf/classical.hpp"
#include "enkf/error.hpp"
#include "enkf/linalg.hpp"
#include "enkf/model.hpp"

namespace enkf
{

/// P^{-1} through a symmetric eigendecomposition. Refuses, rather than
/// regularises, when lambda_min(P) < floor.
inline Matrix inverse_covariance(const Matrix & P, double floor, std::int64_t step = -1)
{
  if (!linalg::is_symmetric(P, 1e-10)) {
    throw ConfigError("inverse_covariance: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (P + P.transpose()));
  const Vector & ev = es.eigenvalues();
  const double lmin = ev.minCoeff();
  if (!(lmin >= floor) || !(lmin > 0.0)) {
    throw EnsembleCollapse(lmin, floor, step);
  }
  Matrix inv = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (inv + inv.transpose());
}

struct ModifiedForecast
{
  Ensemble forecast;
  Matrix inv_cov;        // (P^a_{k-1})^{-1}
  double lambda_min;     // lambda_min(P^a_{k-1})
};

/// Deterministic forecast: X^(i) + h f(X^(i)) + (h/2) Q (P^a)^{-1} (X^(i) - x bar^a).
inline ModifiedForecast forecast_modified(
  const Ensemble & analysis, const ModelSpec & model, double h, double floor,
  std::int64_t step = -1)
{
  const Matrix & X = analysis.members();
  if (X.rows() != model.dim_state) {
    throw ConfigError("forecast_modified: dimension mismatch");
  }
  if (analysis.size() <= model.dim_state) {
    throw ConfigError("forecast_modified: needs more members than state dimensions");
  }
  const double m1 = static_cast<double>(analysis.size() - 1);
  const Vector mean = X.rowwise().mean();
  const Matrix E = X.colwise() - mean;
  Matrix P = E * E.transpose() / m1;
  P = 0.5 * (P + P.transpose());
  Matrix inv = inverse_covariance(P, floor, step);
  const double lmin = linalg::min_eigenvalue(P);
  Matrix out = X + h * apply_columns(model.drift, X, model.dim_state) +
    (0.5 * h) * model.Q * inv * E;
  if (!out.allFinite()) {
    throw NumericalDivergence("modified forecast became non-finite", step);
  }
  return {Ensemble(std::move(out)), std::move(inv), lmin};
}

/// Deterministic update: X^(i),f + K (dY - (h/2)(g(X^(i),f) + g bar^f)).
inline Ensemble update_modified(
  const Ensemble & forecast, const Matrix & K, const Vector & dY, const ModelSpec & model,
  double h, std::int64_t step = -1)
{
  const Matrix & X = forecast.members();
  if (K.rows() != model.dim_state || K.cols() != model.dim_obs || dY.size() != model.dim_obs) {
    throw ConfigError("update_modified: dimension mismatch");
  }
  const Matrix gx = apply_columns(model.obs_map, X, model.dim_obs);
  const Vector gbar = gx.rowwise().mean();
  Matrix innovation = -(0.5 * h) * gx;
  innovation.colwise() += dY - (0.5 * h) * gbar;
  Matrix out = X + K * innovation;
  if (!out.allFinite()) {
    throw NumericalDivergence("modified analysis became non-finite", step);
  }
  return Ensemble(std::move(out));
}

struct ModifiedStep
{
  Ensemble forecast;
  EnsembleStats forecast_stats;
  Matrix gain;
  Ensemble analysis;
  Matrix inv_cov;
  double lambda_min_prev;  // lambda_min(P^a_{k-1})
};

inline ModifiedStep step_modified(
  const Ensemble & analysis, const ModelSpec & model, double h, const Vector & dY,
  double floor, GainForm form = GainForm::kRegularized, std::int64_t step = -1)
{
  ModifiedForecast fc = forecast_modified(analysis, model, h, floor, step);
  EnsembleStats st = compute_stats(fc.forecast, model);
  Matrix K = gain(st, model.C, h, fc.forecast.size(), form);
  Ensemble an = update_modified(fc.forecast, K, dY, model, h, step);
  return {std::move(fc.forecast), std::move(st), std::move(K), std::move(an),
    std::move(fc.inv_cov), fc.lambda_min};
}

// ---------------------------------------------------------------------------
// Kalman-Bucy moment equations (linear case)

/// Linear model data for the moment equations. Q may be singular here.
struct LinearMoments
{
  Matrix A;
  Matrix G;
  Matrix Q;
  Matrix C;

  static LinearMoments from_model(const ModelSpec & model)
  {
    if (!model.is_linear()) {
      throw UnsupportedMode("moment equations need a linear model (f = A x, g = G x)");
    }
    return {*model.drift_matrix, *model.obs_matrix, model.Q, model.C};
  }
};

struct MomentState
{
  Vector mean;
  Matrix cov;
};

/// Time derivatives (dm/dt, dP/dt) given an observation rate dY/dt:
///   dm/dt = A m + P G^T C^{-1} (dY/dt - G m)
///   dP/dt = A P + P A^T + Q - P G^T C^{-1} G P
inline std::pair<Vector, Matrix> moment_rhs(
  const MomentState & s, const LinearMoments & lin, const Vector & dy_rate)
{
  const Index d = lin.A.rows();
  if (s.mean.size() != d || s.cov.rows() != d || lin.G.cols() != d ||
    dy_rate.size() != lin.G.rows())
  {
    throw ConfigError("moment_rhs: dimension mismatch");
  }
  const Matrix PGt_Cinv = linalg::right_solve_spd(s.cov * lin.G.transpose(), lin.C);
  Vector dm = lin.A * s.mean + PGt_Cinv * (dy_rate - lin.G * s.mean);
  Matrix dP = lin.A * s.cov + s.cov * lin.A.transpose() + lin.Q - PGt_Cinv * lin.G * s.cov;
  dP = 0.5 * (dP + dP.transpose());
  return {std::move(dm), std::move(dP)};
}

/// Explicit Euler on the moment equations along an increment stream dY (p x n).
/// Returns states at t_0..t_n.
inline std::vector<MomentState> integrate_moments(
  const MomentState & initial, const LinearMoments & lin, const Matrix & dY, double h)
{
  std::vector<MomentState> out;
  out.reserve(static_cast<std::size_t>(dY.cols() + 1));
  out.push_back(initial);
  for (Index k = 0; k < dY.cols(); ++k) {
    const MomentState & s = out.back();
    auto [dm, dP] = moment_rhs(s, lin, dY.col(k) / h);
    MomentState next{s.mean + h * dm, s.cov + h * dP};
    if (!next.mean.allFinite() || !next.cov.allFinite()) {
      throw NumericalDivergence("moment integration became non-finite", k + 1);
    }
    out.push_back(std::move(next));
  }
  return out;
}

}  // namespace enkf

#endif  // ENKF__MODIFIED_HPP_
