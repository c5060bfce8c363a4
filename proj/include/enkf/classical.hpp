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

#ifndef ENKF__CLASSICAL_HPP_
#define ENKF__CLASSICAL_HPP_

#include <cstdint>

#include "enkf/error.hpp"
#include "enkf/linalg.hpp"
#include "enkf/model.hpp"

namespace enkf
{

/// Which gain the update uses.
enum class GainForm
{
  kRegularized,  // (1/(M-1)) E G^T (C + h/(M-1) G G^T)^{-1}
  kBare,         // (1/(M-1)) E G^T C^{-1}
};

/// Ensemble Kalman gain from forecast statistics.
///
///   K = 1/(M-1) E^f (G^f)^T (C + h/(M-1) G^f (G^f)^T)^{-1}
///
/// The bracket is C plus a PSD term, hence SPD; it is factored with Cholesky
/// and never inverted explicitly.
inline Matrix gain(
  const EnsembleStats & fc, const Matrix & C, double h, Index M,
  GainForm form = GainForm::kRegularized)
{
  if (M < 2) {
    throw ConfigError("gain: ensemble size must be at least 2");
  }
  if (C.rows() != fc.obs_anomalies.rows()) {
    throw ConfigError("gain: C does not match the observation dimension");
  }
  const double m1 = static_cast<double>(M - 1);
  const Matrix cross = fc.anomalies * fc.obs_anomalies.transpose() / m1;  // d x p
  Matrix S = C;
  if (form == GainForm::kRegularized) {
    S += (h / m1) * fc.obs_anomalies * fc.obs_anomalies.transpose();
    S = 0.5 * (S + S.transpose());
  }
  return linalg::right_solve_spd(cross, S);
}

/// Linear-observation gain P G^T (C + h G P G^T)^{-1}.
inline Matrix linear_gain(const Matrix & P, const Matrix & G, const Matrix & C, double h)
{
  Matrix S = C + h * G * P * G.transpose();
  S = 0.5 * (S + S.transpose());
  return linalg::right_solve_spd(P * G.transpose(), S);
}

/// Forecast: X^(i) + h f(X^(i)) + Q^{1/2} w~(i).
inline Ensemble forecast_classical(
  const Ensemble & analysis, const ModelSpec & model, double h, const Matrix & dW,
  std::int64_t step = -1)
{
  const Matrix & X = analysis.members();
  if (dW.rows() != model.dim_state || dW.cols() != X.cols() || X.rows() != model.dim_state) {
    throw ConfigError("forecast_classical: dimension mismatch");
  }
  Matrix out = X + h * apply_columns(model.drift, X, model.dim_state) + model.Q_sqrt * dW;
  if (!out.allFinite()) {
    throw NumericalDivergence("classical forecast became non-finite", step);
  }
  return Ensemble(std::move(out));
}

/// Perturbed-observation update: X^(i),f + K (dY + C^{1/2} v~(i) - h g(X^(i),f)).
inline Ensemble update_classical(
  const Ensemble & forecast, const Matrix & K, const Vector & dY, const Matrix & dV,
  const ModelSpec & model, double h, std::int64_t step = -1)
{
  const Matrix & X = forecast.members();
  const Index M = X.cols();
  if (K.rows() != model.dim_state || K.cols() != model.dim_obs ||
    dY.size() != model.dim_obs || dV.rows() != model.dim_obs || dV.cols() != M)
  {
    throw ConfigError("update_classical: dimension mismatch");
  }
  Matrix innovation = model.C_sqrt * dV - h * apply_columns(model.obs_map, X, model.dim_obs);
  innovation.colwise() += dY;
  Matrix out = X + K * innovation;
  if (!out.allFinite()) {
    throw NumericalDivergence("classical analysis became non-finite", step);
  }
  return Ensemble(std::move(out));
}

struct ClassicalStep
{
  Ensemble forecast;
  EnsembleStats forecast_stats;
  Matrix gain;
  Ensemble analysis;
};

/// One forecast/update cycle from t_{k-1} to t_k.
inline ClassicalStep step_classical(
  const Ensemble & analysis, const ModelSpec & model, double h, const Matrix & dW,
  const Vector & dY, const Matrix & dV, GainForm form = GainForm::kRegularized,
  std::int64_t step = -1)
{
  Ensemble fc = forecast_classical(analysis, model, h, dW, step);
  EnsembleStats st = compute_stats(fc, model);
  Matrix K = gain(st, model.C, h, fc.size(), form);
  Ensemble an = update_classical(fc, K, dY, dV, model, h, step);
  return {std::move(fc), std::move(st), std::move(K), std::move(an)};
}

/// Weighting of the innovation term in the variational form of the update.
enum class InnovationWeight
{
  /// ||.||_{hC}: covariance of the observation increment. The minimiser is the
  /// update with gain P G^T (C + h G P G^T)^{-1}.
  kIncrementCovariance,
  /// ||.||_C as the functional is usually written. The minimiser uses
  /// h P G^T (C + h^2 G P G^T)^{-1}, which agrees with the update only at h = 1.
  kObservationCovariance,
};

/// J(X) = 1/2 |dY_i - h G X|^2_W + 1/2 |X - X_i^f|^2_{P^f},  |x|^2_A = x^T A^{-1} x.
inline double cost_functional(
  const Vector & X, const Vector & dY_i, const Vector & forecast_i, const Matrix & G,
  const Matrix & C, const Matrix & Pf, double h,
  InnovationWeight weight = InnovationWeight::kIncrementCovariance)
{
  if (G.cols() != X.size() || G.rows() != dY_i.size() || Pf.rows() != X.size() ||
    forecast_i.size() != X.size() || C.rows() != dY_i.size())
  {
    throw ConfigError("cost_functional: dimension mismatch");
  }
  Eigen::LLT<Matrix> p_llt(Pf);
  if (p_llt.info() != Eigen::Success ||
    linalg::min_eigenvalue(Pf) <= 1e-14 * std::max(1.0, Pf.norm()))
  {
    throw RankError(
      "cost_functional: forecast covariance is singular; use more members than state dimensions");
  }
  Matrix W = C;
  if (weight == InnovationWeight::kIncrementCovariance) {
    if (!(h > 0.0)) {
      throw RangeError("cost_functional: increment weighting needs h > 0");
    }
    W = h * C;
  }
  Eigen::LLT<Matrix> w_llt(W);
  if (w_llt.info() != Eigen::Success) {
    throw RankError("cost_functional: innovation weight is not positive definite");
  }
  const Vector r = dY_i - h * G * X;
  const Vector e = X - forecast_i;
  return 0.5 * r.dot(w_llt.solve(r)) + 0.5 * e.dot(p_llt.solve(e));
}

}  // namespace enkf

#endif  // ENKF__CLASSICAL_HPP_
