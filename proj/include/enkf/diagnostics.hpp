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

#ifndef ENKF__DIAGNOSTICS_HPP_
#define ENKF__DIAGNOSTICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "enkf/csv.hpp"
#include "enkf/error.hpp"
#include "enkf/filter_run.hpp"
#include "enkf/linalg.hpp"
#include "enkf/model.hpp"

namespace enkf
{

// ---------------------------------------------------------------------------
// Bound reports

enum class BoundSense
{
  kUpper,  // value <= bound
  kLower,  // value >= bound
};

struct BoundRecord
{
  std::int64_t k;
  double t;
  double value;
  double bound;
  double margin;
  bool pass;
};

/// Per-step (value, bound) pairs for one monitored inequality.
/// pass <=> margin >= -tolerance, margin = bound - value (upper) or value - bound (lower).
struct BoundReport
{
  std::string name;
  BoundSense sense = BoundSense::kUpper;
  double tolerance = 0.0;
  std::vector<BoundRecord> records;
  std::vector<std::string> flags;

  static double margin_of(BoundSense sense, double value, double bound)
  {
    return sense == BoundSense::kUpper ? bound - value : value - bound;
  }

  void add(std::int64_t k, double t, double value, double bound)
  {
    const double m = margin_of(sense, value, bound);
    records.push_back({k, t, value, bound, m, m >= -tolerance});
  }

  std::size_t violations() const
  {
    return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const BoundRecord & r) {return !r.pass;}));
  }
  bool passed() const {return violations() == 0;}

  double min_margin() const
  {
    double m = std::numeric_limits<double>::infinity();
    for (const auto & r : records) {
      m = std::min(m, r.margin);
    }
    return m;
  }

  std::optional<std::int64_t> first_violation() const
  {
    for (const auto & r : records) {
      if (!r.pass) {
        return r.k;
      }
    }
    return std::nullopt;
  }

  /// True when every stored pass flag agrees with its stored (value, bound) pair.
  bool consistent() const
  {
    return std::all_of(
      records.begin(), records.end(), [this](const BoundRecord & r) {
        const double m = margin_of(sense, r.value, r.bound);
        return m == r.margin && (m >= -tolerance) == r.pass;
      });
  }

  void merge(const BoundReport & other)
  {
    records.insert(records.end(), other.records.begin(), other.records.end());
    for (const auto & f : other.flags) {
      if (std::find(flags.begin(), flags.end(), f) == flags.end()) {
        flags.push_back(f);
      }
    }
  }
};

/// Pointwise worst case of equally long reports: at each index the record with
/// the smallest margin. Flags are united.
inline BoundReport envelope(const std::vector<BoundReport> & reports)
{
  if (reports.empty()) {
    throw ConfigError("envelope: no reports");
  }
  BoundReport out = reports.front();
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const BoundReport & r = reports[i];
    if (r.records.size() != out.records.size()) {
      throw ConfigError("envelope: reports differ in length");
    }
    for (std::size_t k = 0; k < r.records.size(); ++k) {
      if (r.records[k].margin < out.records[k].margin) {
        out.records[k] = r.records[k];
      }
    }
    BoundReport flags_only;
    flags_only.flags = r.flags;
    out.merge(flags_only);
  }
  return out;
}

/// CSV columns: k, t, value, bound, margin, pass.
inline void write_report_csv(std::ostream & os, const BoundReport & r, const std::string & header = {})
{
  if (!header.empty()) {
    csv::write_comment_block(os, header);
  }
  os << "# monitor: " << r.name << '\n';
  for (const auto & f : r.flags) {
    os << "# flag: " << f << '\n';
  }
  os << "k,t,value,bound,margin,pass\n";
  for (const auto & rec : r.records) {
    os << rec.k << ',' << csv::format_double(rec.t) << ',' << csv::format_double(rec.value) << ',' <<
      csv::format_double(rec.bound) << ',' << csv::format_double(rec.margin) << ',' <<
      (rec.pass ? 1 : 0) << '\n';
  }
}

/// Running violation count over many reports of the same monitor.
struct MonitorTally
{
  std::size_t checked = 0;
  std::size_t violations = 0;
  double min_margin = std::numeric_limits<double>::infinity();

  void add(const BoundReport & r)
  {
    checked += r.records.size();
    violations += r.violations();
    min_margin = std::min(min_margin, r.min_margin());
  }
  void merge(const MonitorTally & o)
  {
    checked += o.checked;
    violations += o.violations;
    min_margin = std::min(min_margin, o.min_margin);
  }
};

// ---------------------------------------------------------------------------
// Weight process

namespace detail
{

inline void require_bounded(const ModelSpec & model, const char * what)
{
  if (!model.bounded_obs()) {
    throw UnsupportedMode(std::string(what) + " needs a bounded observation map (sup_g finite)");
  }
}

/// (e^{2 a t} - 1) / (2 a), with limit t at a = 0.
inline double growth_integral(double a, double t)
{
  if (a == 0.0) {
    return t;
  }
  return std::expm1(2.0 * a * t) / (2.0 * a);
}

}  // namespace detail

/// kappa = 64 |C^{-1}|^2 (4 sup_g^2 + |C|) M/(M-1).
inline double weight_kappa(const ModelSpec & model, Index M)
{
  detail::require_bounded(model, "weight_kappa");
  const double ci = linalg::op_norm(model.C_inv);
  const double c = linalg::op_norm(model.C);
  const double mm = static_cast<double>(M) / static_cast<double>(M - 1);
  return 64.0 * ci * ci * (4.0 * model.sup_g * model.sup_g + c) * mm;
}

/// L = 1/2 + Lip(f) + Lip(g)^2 |C^{-1}| V + kappa (4 sup_g^2 M/(M-1) + Lip(g)^2 V).
inline double weight_L(double spread, const ModelSpec & model, Index M)
{
  detail::require_bounded(model, "weight_L");
  if (M < 2) {
    throw ConfigError("weight_L: ensemble size must be at least 2");
  }
  const double ci = linalg::op_norm(model.C_inv);
  const double mm = static_cast<double>(M) / static_cast<double>(M - 1);
  const double lg2 = model.lip_g * model.lip_g;
  const double kappa = weight_kappa(model, M);
  return 0.5 + model.lip_f + lg2 * ci * spread +
         kappa * (4.0 * model.sup_g * model.sup_g * mm + lg2 * spread);
}

/// L along a uniform grid, its running integral of 2L (trapezoid) and e^{-int 2L}.
struct WeightProcess
{
  double h = 0.0;
  Vector L;
  Vector integral;  // int_0^{t_k} 2 L(s) ds
  Vector weight;    // exp(-integral)

  static WeightProcess from_values(const Vector & L, double h)
  {
    WeightProcess w;
    w.h = h;
    w.L = L;
    w.integral = Vector::Zero(L.size());
    for (Index k = 1; k < L.size(); ++k) {
      w.integral(k) = w.integral(k - 1) + h * (L(k - 1) + L(k));  // 2 * (h/2)(L_{k-1}+L_k)
    }
    w.weight = (-w.integral.array()).exp().matrix();
    return w;
  }

  static WeightProcess from_spread(
    const std::vector<double> & spread, const ModelSpec & model, Index M, double h)
  {
    Vector L(static_cast<Index>(spread.size()));
    for (Index k = 0; k < L.size(); ++k) {
      L(k) = weight_L(spread[static_cast<std::size_t>(k)], model, M);
    }
    return from_values(L, h);
  }
};

struct MomentEstimate
{
  double estimate = 0.0;
  double standard_error = 0.0;
  std::int64_t argmax = 0;
  bool overflow = false;
};

/// Monte-Carlo estimate of sup_k mean_r exp(2 delta int_0^{t_k} L_r). Observational only.
inline MomentEstimate exp_moment_estimate(const std::vector<WeightProcess> & paths, double delta)
{
  if (paths.empty()) {
    throw ConfigError("exp_moment_estimate: no paths");
  }
  if (!(delta > 0.0)) {
    throw RangeError("exp_moment_estimate: delta must be positive");
  }
  const Index n = paths.front().integral.size();
  const double R = static_cast<double>(paths.size());
  MomentEstimate out;
  out.estimate = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < n; ++k) {
    double sum = 0.0;
    double sum2 = 0.0;
    for (const auto & p : paths) {
      if (p.integral.size() != n) {
        throw ConfigError("exp_moment_estimate: paths differ in length");
      }
      const double v = std::exp(delta * p.integral(k));
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / R;
    if (!std::isfinite(mean)) {
      out.estimate = std::numeric_limits<double>::infinity();
      out.standard_error = std::numeric_limits<double>::infinity();
      out.argmax = k;
      out.overflow = true;
      return out;
    }
    if (mean > out.estimate) {
      out.estimate = mean;
      out.argmax = k;
      const double var = paths.size() > 1 ? std::max(0.0, (sum2 - R * mean * mean) / (R - 1.0)) : 0.0;
      out.standard_error = std::isfinite(var) ? std::sqrt(var / R) :
        std::numeric_limits<double>::infinity();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spread bounds

/// v* = e^{2 (Lf)_+ T} V_0 + tr(Q) (e^{2 (Lf)_+ T} - 1) / (2 (Lf)_+).
inline double spread_bound_value(const ModelSpec & model, double V0, double T)
{
  const double a = model.one_sided_f;
  return std::exp(2.0 * a * T) * V0 + model.Q.trace() * detail::growth_integral(a, T);
}

/// Pathwise spread bound for the modified filter, with an O(h) allowance
/// slack = (tr(Q) + 2 (Lf)_+ v*) h for the discrete overshoot.
inline BoundReport spread_bound_modified(
  const std::vector<double> & spread, const ModelSpec & model, double T, double h,
  std::optional<double> initial_spread = std::nullopt, double tolerance = 1e-12)
{
  BoundReport r;
  r.name = "spread-modified";
  r.tolerance = tolerance;
  if (spread.empty()) {
    return r;
  }
  const double V0 = initial_spread.value_or(spread.front());
  const double vstar = spread_bound_value(model, V0, T);
  const double slack = (model.Q.trace() + 2.0 * model.one_sided_f * vstar) * h;
  for (std::size_t k = 0; k < spread.size(); ++k) {
    r.add(static_cast<std::int64_t>(k), static_cast<double>(k) * h, spread[k], vstar + slack);
  }
  return r;
}

/// Replication-mean spread of the classical filter against
/// e^{2 (Lf)_+ t} E[V_0] + tr(Q)(e^{2 (Lf)_+ t} - 1)/(2 (Lf)_+) + 5 SE.
inline BoundReport spread_expectation_classical(
  const std::vector<std::vector<double>> & paths, const ModelSpec & model, double h,
  double tolerance = 1e-12)
{
  BoundReport r;
  r.name = "spread-classical-expectation";
  r.tolerance = tolerance;
  if (paths.empty()) {
    throw ConfigError("spread_expectation_classical: no replications");
  }
  if (paths.size() < 30) {
    r.flags.push_back("insufficient-replications");
  }
  const std::size_t n = paths.front().size();
  const double R = static_cast<double>(paths.size());
  auto moments = [&](std::size_t k) {
      double s = 0.0;
      double s2 = 0.0;
      for (const auto & p : paths) {
        if (p.size() != n) {
          throw ConfigError("spread_expectation_classical: paths differ in length");
        }
        s += p[k];
        s2 += p[k] * p[k];
      }
      const double mean = s / R;
      const double var = R > 1.0 ? std::max(0.0, (s2 - R * mean * mean) / (R - 1.0)) : 0.0;
      return std::pair{mean, std::sqrt(var / R)};
    };
  const double EV0 = moments(0).first;
  const double a = model.one_sided_f;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * h;
    auto [mean, se] = moments(k);
    const double bound = std::exp(2.0 * a * t) * EV0 + model.Q.trace() * detail::growth_integral(a, t) +
      5.0 * se;
    r.add(static_cast<std::int64_t>(k), t, mean, bound);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Gain coefficient bounds

struct GainBoundReports
{
  BoundReport gain;       // |K|^2 <= c V^f
  BoundReport coupling;   // |E G^T C^{-1}/(M-1)|^2 <= c V
  BoundReport deviation;  // |K - E_t G_t^T C^{-1}/(M-1)|^2 <= explicit rhs (needs a reference)
};

/// 4 sup_g^2 |C^{-1}|^2 M/(M-1).
inline double gain_bound_constant(const ModelSpec & model, Index M)
{
  detail::require_bounded(model, "gain bounds");
  const double ci = linalg::op_norm(model.C_inv);
  return 4.0 * model.sup_g * model.sup_g * ci * ci * static_cast<double>(M) /
         static_cast<double>(M - 1);
}

/// Checks the gain coefficient bounds at every step of `run`.
///
/// When `reference` (a run of the same variant on a grid `factor` times finer,
/// started from the same ensemble) is given, the reference analysis at t_k stands
/// in for the continuous ensemble. `run` must then have been recorded with
/// keep_forecasts. Without a reference the coupling bound is checked on the
/// run's own analysis ensembles and the deviation report stays empty.
inline GainBoundReports gain_bounds(
  const FilterRun & run, const ModelSpec & model, Index M,
  const FilterRun * reference = nullptr, std::int64_t factor = 1, double tolerance = 1e-10)
{
  const double c2 = gain_bound_constant(model, M);
  const double ci = linalg::op_norm(model.C_inv);
  const double m1 = static_cast<double>(M - 1);
  const double mm = static_cast<double>(M) / m1;
  const double s2 = model.sup_g * model.sup_g;
  const double lg2 = model.lip_g * model.lip_g;
  const double h = run.h;

  GainBoundReports out;
  out.gain.name = "gain-norm";
  out.coupling.name = "coupling-norm";
  out.deviation.name = "gain-deviation";
  for (auto * r : {&out.gain, &out.coupling, &out.deviation}) {
    r->tolerance = tolerance;
  }

  auto coupling_matrix = [&](const Matrix & members, double & spread, Matrix & E) {
      const Ensemble ens(members);
      const EnsembleStats s = compute_stats(ens, model);
      spread = s.spread;
      E = s.anomalies;
      return Matrix(s.anomalies * s.obs_anomalies.transpose() / m1 * model.C_inv);
    };

  for (Index k = 1; k <= run.steps(); ++k) {
    const double t = static_cast<double>(k) * h;
    const Matrix & K = run.gains[static_cast<std::size_t>(k - 1)];
    const double Vf = run.forecast_spread[static_cast<std::size_t>(k - 1)];
    const double kn = linalg::op_norm(K);
    out.gain.add(k, t, kn * kn, c2 * Vf);

    const Matrix & cont = reference ?
      reference->analysis[static_cast<std::size_t>(k * factor)] :
      run.analysis[static_cast<std::size_t>(k)];
    double Vt = 0.0;
    Matrix Et;
    const Matrix B = coupling_matrix(cont, Vt, Et);
    const double bn = linalg::op_norm(B);
    out.coupling.add(k, t, bn * bn, c2 * Vt);

    if (reference) {
      if (run.forecast.size() != static_cast<std::size_t>(run.steps())) {
        throw ConfigError("gain_bounds: deviation check needs a run recorded with keep_forecasts");
      }
      const Matrix & Xf = run.forecast[static_cast<std::size_t>(k - 1)];
      const double disc = (Xf - cont).squaredNorm() / m1;
      const double dn = linalg::op_norm(K - B);
      const double rhs = 16.0 * ci * ci *
        (h * h * 8.0 * s2 * s2 * lg2 * ci * ci * mm * mm * Vf * Vf + (4.0 * s2 * mm + lg2 * Vt) * disc);
      out.deviation.add(k, t, dn * dn, rhs);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Eigenvalue floor

/// lambda_min(P^a_k) >= floor at every step.
inline BoundReport eigen_floor(const std::vector<double> & lambda_min, double floor, double h)
{
  BoundReport r;
  r.name = "eigen-floor";
  r.sense = BoundSense::kLower;
  for (std::size_t k = 0; k < lambda_min.size(); ++k) {
    r.add(static_cast<std::int64_t>(k), static_cast<double>(k) * h, lambda_min[k], floor);
  }
  return r;
}

/// exp(-2 (1/eps + beta) T) lambda_min(P^a_0) with the harness choice
/// eps = lambda_min(Q) / (4 Lip(f)^2 v* + 1) unless eps is given.
inline double discrete_eigen_floor(
  const ModelSpec & model, double T, double vstar, double lambda0, double beta = 1.0,
  std::optional<double> eps = std::nullopt)
{
  const double e = eps.value_or(
    linalg::min_eigenvalue(model.Q) / (4.0 * model.lip_f * model.lip_f * vstar + 1.0));
  if (!(e > 0.0)) {
    throw RangeError("discrete_eigen_floor: epsilon must be positive");
  }
  return std::exp(-2.0 * (1.0 / e + beta) * T) * lambda0;
}

}  // namespace enkf

#endif  // ENKF__DIAGNOSTICS_HPP_
