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

#ifndef ENKF__HARNESS_HPP_
#define ENKF__HARNESS_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>  // nlohmann::json, vendored

#include "enkf/csv.hpp"
#include "enkf/diagnostics.hpp"
#include "enkf/error.hpp"
#include "enkf/filter_run.hpp"
#include "enkf/model.hpp"
#include "enkf/noise.hpp"
#include "enkf/truth.hpp"

namespace enkf
{

enum class Metric
{
  kWeightedSup,     // sup_k mean_r e^{-int 2L} D
  kSupExpectation,  // mean_r sup_k D
  kPlainSupMse,     // sup_k mean_r D
  kCorollary,       // sup_k mean_r D^{delta/(1+delta)}
};

inline std::string to_string(Metric m)
{
  switch (m) {
    case Metric::kWeightedSup: return "weighted-sup";
    case Metric::kSupExpectation: return "sup-expectation";
    case Metric::kPlainSupMse: return "plain-sup-mse";
    case Metric::kCorollary: return "corollary";
  }
  return "unknown";
}

inline Metric parse_metric(const std::string & s)
{
  for (Metric m : {Metric::kWeightedSup, Metric::kSupExpectation, Metric::kPlainSupMse,
      Metric::kCorollary})
  {
    if (to_string(m) == s) {
      return m;
    }
  }
  throw ConfigError(
    "unknown metric '" + s + "' (expected weighted-sup, sup-expectation, plain-sup-mse or corollary)");
}

/// One coupled multi-resolution experiment.
///
/// Levels are refinement exponents: level l runs with h = T / (L 2^l). The
/// reference runs at level grid.refinement, which must exceed every tested level.
struct ExperimentPlan
{
  Variant variant = Variant::kModified;
  ModelConfig model;
  GridSpec grid{1.0, 16, 8};
  std::vector<int> levels{0, 1, 2, 3, 4, 5};
  Index ensemble_size = 10;
  std::int64_t replications = 64;
  std::uint64_t seed = 1;
  std::optional<Metric> metric;  // default depends on the variant
  double gamma = 0.49;
  std::optional<double> delta;
  double x0 = 0.0;               // truth initial state, every component
  double initial_spread = 3.0;   // std of the initial ensemble around x0
  FilterOptions filter;
  bool monitors = false;         // evaluate bound monitors on every run
  double max_failure_rate = 0.05;

  Metric resolved_metric() const
  {
    if (metric) {
      return *metric;
    }
    return variant == Variant::kModified ? Metric::kSupExpectation : Metric::kWeightedSup;
  }

  /// Slope predicted for the chosen metric.
  double theory_rate() const
  {
    const Metric m = resolved_metric();
    if (variant == Variant::kModified) {
      return m == Metric::kCorollary ? delta.value_or(1.0) / (1.0 + delta.value_or(1.0)) : 1.0;
    }
    if (m == Metric::kCorollary) {
      const double dl = delta.value_or(1.0);
      return 2.0 * gamma * dl / (1.0 + dl);
    }
    return 2.0 * gamma;
  }

  void validate(const ModelSpec & m) const
  {
    grid.validate();
    if (!(gamma > 0.0 && gamma < 0.5)) {
      throw ConfigError("gamma", "gamma must lie in (0, 1/2), got " + csv::format_short(gamma));
    }
    if (levels.empty()) {
      throw ConfigError("levels", "levels must not be empty");
    }
    std::set<int> seen;
    for (int l : levels) {
      if (l < 0 || l >= grid.refinement) {
        throw ConfigError(
          "levels", "level " + std::to_string(l) + " must lie in [0, refinement) = [0, " +
          std::to_string(grid.refinement) + ")");
      }
      if (!seen.insert(l).second) {
        throw ConfigError("levels", "level " + std::to_string(l) + " listed twice");
      }
    }
    if (replications < 1) {
      throw ConfigError("replications", "replications must be at least 1");
    }
    if (ensemble_size < 2) {
      throw ConfigError("ensemble_size", "ensemble_size must be at least 2");
    }
    if (variant == Variant::kModified && ensemble_size <= m.dim_state) {
      throw ConfigError("ensemble_size", "modified variant needs ensemble_size > state dimension");
    }
    if (!(initial_spread > 0.0) || !std::isfinite(initial_spread)) {
      throw ConfigError("initial_spread", "initial_spread must be positive");
    }
    if (!std::isfinite(x0)) {
      throw ConfigError("x0", "x0 must be finite");
    }
    if (!(filter.collapse_floor > 0.0)) {
      throw ConfigError("collapse_floor", "collapse_floor must be positive");
    }
    if (!(max_failure_rate >= 0.0 && max_failure_rate <= 1.0)) {
      throw ConfigError("max_failure_rate", "max_failure_rate must lie in [0, 1]");
    }
    if (delta && !(*delta > 0.0)) {
      throw ConfigError("delta", "delta must be positive");
    }
    const Metric metric_kind = resolved_metric();
    if (metric_kind == Metric::kCorollary && !delta) {
      throw ConfigError("delta", "corollary metric needs delta");
    }
    if (metric_kind == Metric::kWeightedSup && !m.bounded_obs()) {
      throw ConfigError("metric", "weighted metric needs a bounded observation map");
    }
  }
};

// ---------------------------------------------------------------------------
// Replications

struct LevelCurve
{
  int level = 0;
  double h = 0.0;
  std::vector<double> D;  // D(t_k), k = 0..n on the level grid
};

struct ReplicationResult
{
  std::int64_t index = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  std::vector<LevelCurve> curves;   // in the order levels were requested
  std::vector<double> ref_spread;   // reference analysis spread at fine nodes
  std::vector<double> ref_lambda_min;
  MonitorTally gain;
  MonitorTally coupling;
  MonitorTally deviation;
  MonitorTally spread;
  MonitorTally floor;
};

/// Initial ensemble shared by every level: x0 + sigma * N(0, Id) per member.
inline Ensemble initial_ensemble(
  std::uint64_t rep_seed, Index d, Index M, double x0, double sigma)
{
  Matrix X(d, M);
  for (Index i = 0; i < M; ++i) {
    for (Index c = 0; c < d; ++c) {
      const StreamKey key{rep_seed, StreamRole::kInitial, static_cast<std::uint64_t>(i),
        static_cast<std::uint64_t>(c)};
      X(c, i) = x0 + sigma * normal_at(key, 0);
    }
  }
  return Ensemble(std::move(X));
}

/// One coupled replication. `levels` are refinement exponents in
/// [0, grid.refinement]; passing grid.refinement compares the reference with itself.
inline ReplicationResult run_replication(
  const ExperimentPlan & plan, const ModelSpec & model, std::int64_t rep,
  const std::vector<int> & levels)
{
  const GridSpec & grid = plan.grid;
  const int r = grid.refinement;
  ReplicationResult out;
  out.index = rep;
  out.seed = replication_seed(plan.seed, static_cast<std::uint64_t>(rep));

  const NoiseLattice lattice = NoiseLattice::generate(
    out.seed, model.dim_state, model.dim_obs, grid, plan.ensemble_size);
  const ReferencePath truth = simulate_signal(
    model, lattice, Vector::Constant(model.dim_state, plan.x0));
  const ObservationIncrements dY = observation_increments(model, truth, lattice);
  const Ensemble init = initial_ensemble(
    out.seed, model.dim_state, plan.ensemble_size, plan.x0, plan.initial_spread);

  const bool monitor_gain = plan.monitors && model.bounded_obs();
  auto check_run = [&](const FilterRun & run, const FilterRun * ref, std::int64_t factor) {
      if (!plan.monitors) {
        return;
      }
      if (monitor_gain) {
        const GainBoundReports g = gain_bounds(run, model, plan.ensemble_size, ref, factor);
        out.gain.add(g.gain);
        out.coupling.add(g.coupling);
        if (ref) {
          out.deviation.add(g.deviation);
        }
      }
      if (plan.variant == Variant::kModified) {
        out.spread.add(spread_bound_modified(run.analysis_spread, model, grid.horizon, run.h));
        out.floor.add(eigen_floor(run.lambda_min, plan.filter.collapse_floor, run.h));
      }
    };

  try {
    const CoarseNoise fine = coarsen(lattice, 0);
    const FilterRun ref = run_filter(plan.variant, model, init, fine, dY.level(0), plan.filter);
    out.ref_spread = ref.analysis_spread;
    out.ref_lambda_min = ref.lambda_min;
    check_run(ref, nullptr, 1);

    FilterOptions opt = plan.filter;
    opt.keep_forecasts = opt.keep_forecasts || monitor_gain;
    for (int l : levels) {
      if (l < 0 || l > r) {
        throw RangeError("run_replication: level outside [0, refinement]");
      }
      const int j = r - l;
      LevelCurve curve;
      curve.level = l;
      curve.h = grid.h(l);
      const std::int64_t factor = std::int64_t{1} << j;
      if (j == 0) {
        curve.D.assign(ref.analysis.size(), 0.0);
        for (std::size_t k = 0; k < ref.analysis.size(); ++k) {
          curve.D[k] = (ref.analysis[k] - ref.analysis[k]).squaredNorm();
        }
      } else {
        const CoarseNoise noise = coarsen(lattice, j);
        const FilterRun run = run_filter(plan.variant, model, init, noise, dY.level(j), opt);
        curve.D.resize(run.analysis.size());
        for (std::size_t k = 0; k < run.analysis.size(); ++k) {
          curve.D[k] = (run.analysis[k] - ref.analysis[k * static_cast<std::size_t>(factor)])
            .squaredNorm();
        }
        check_run(run, &ref, factor);
      }
      out.curves.push_back(std::move(curve));
    }
  } catch (const EnsembleCollapse & e) {
    out.failed = true;
    out.failure = e.what();
    out.curves.clear();
  } catch (const NumericalDivergence & e) {
    out.failed = true;
    out.failure = e.what();
    out.curves.clear();
  }
  return out;
}

/// Calls fn(i) for i in [0, n) on up to `workers` threads. Indices are handed
/// out through an atomic counter; the first exception stops the pool and is rethrown.
template<typename F>
void parallel_for(std::size_t n, unsigned workers, F fn)
{
  workers = std::max(1U, static_cast<unsigned>(std::min<std::size_t>(workers, n)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) {
          return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) {
            error = std::current_exception();
          }
          next.store(n);
          return;
        }
      }
    };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back(work);
    }
    for (auto & t : pool) {
      t.join();
    }
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

/// Runs every replication of `plan` on `workers` threads. Results are ordered
/// by replication index and do not depend on the worker count.
inline std::vector<ReplicationResult> run_coupled(
  const ExperimentPlan & plan, const ModelSpec & model, unsigned workers = 1)
{
  plan.validate(model);
  std::vector<ReplicationResult> results(static_cast<std::size_t>(plan.replications));
  parallel_for(
    results.size(), workers, [&](std::size_t i) {
      results[i] = run_replication(plan, model, static_cast<std::int64_t>(i), plan.levels);
    });
  return results;
}

inline std::vector<ReplicationResult> run_coupled(
  const ExperimentPlan & plan, const ModelRegistry & registry, unsigned workers = 1)
{
  return run_coupled(plan, registry.make(plan.model), workers);
}

// ---------------------------------------------------------------------------
// Metrics
//
// `curves[r][k]` is D(t_k) of replication r on one level.

struct MetricValue
{
  double value = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

namespace detail
{

inline void check_curves(const std::vector<std::vector<double>> & curves)
{
  if (curves.empty()) {
    throw ConfigError("metric: no replications");
  }
  for (const auto & c : curves) {
    if (c.size() != curves.front().size() || c.empty()) {
      throw ConfigError("metric: curves must be non-empty and of equal length");
    }
  }
}

inline std::pair<double, double> mean_se(const std::vector<double> & v)
{
  const double n = static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) {
    s += x;
  }
  const double mean = s / n;
  if (v.size() < 2) {
    return {mean, 0.0};
  }
  double ss = 0.0;
  for (double x : v) {
    ss += (x - mean) * (x - mean);
  }
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

/// sup over nodes of the replication mean of transform(r, k, D).
template<typename F>
MetricValue sup_of_mean(const std::vector<std::vector<double>> & curves, F transform)
{
  check_curves(curves);
  MetricValue best;
  best.value = -std::numeric_limits<double>::infinity();
  best.n = curves.size();
  std::vector<double> col(curves.size());
  for (std::size_t k = 0; k < curves.front().size(); ++k) {
    for (std::size_t r = 0; r < curves.size(); ++r) {
      col[r] = transform(r, k, curves[r][k]);
    }
    auto [m, se] = mean_se(col);
    if (m > best.value) {
      best.value = m;
      best.se = se;
    }
  }
  return best;
}

}  // namespace detail

/// Replication mean of the pathwise sup of D.
inline MetricValue metric_modified_sup(const std::vector<std::vector<double>> & curves)
{
  detail::check_curves(curves);
  std::vector<double> sups;
  sups.reserve(curves.size());
  for (const auto & c : curves) {
    sups.push_back(*std::max_element(c.begin(), c.end()));
  }
  auto [m, se] = detail::mean_se(sups);
  return {m, se, curves.size()};
}

/// sup_k mean_r D.
inline MetricValue metric_plain_sup(const std::vector<std::vector<double>> & curves)
{
  return detail::sup_of_mean(curves, [](std::size_t, std::size_t, double d) {return d;});
}

/// sup_k mean_r w_r(t_k) D_r(t_k), weights sampled at the same nodes as D.
inline MetricValue metric_classical_weighted(
  const std::vector<std::vector<double>> & curves, const std::vector<std::vector<double>> & weights)
{
  if (weights.size() != curves.size()) {
    throw ConfigError("weighted metric: missing weight processes");
  }
  for (std::size_t r = 0; r < curves.size(); ++r) {
    if (weights[r].size() != curves[r].size()) {
      throw ConfigError("weighted metric: weight process length differs from the curve");
    }
  }
  return detail::sup_of_mean(
    curves, [&](std::size_t r, std::size_t k, double d) {return weights[r][k] * d;});
}

/// sup_k mean_r D^{delta/(1+delta)}.
inline MetricValue corollary_metric(const std::vector<std::vector<double>> & curves, double delta)
{
  if (!(delta > 0.0)) {
    throw RangeError("corollary metric: delta must be positive");
  }
  const double e = std::isinf(delta) ? 1.0 : delta / (1.0 + delta);
  return detail::sup_of_mean(
    curves, [e](std::size_t, std::size_t, double d) {return std::pow(d, e);});
}

struct RateFit
{
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least squares of log m on log h.
inline RateFit fit_rate(const std::vector<std::pair<double, double>> & points)
{
  if (points.size() < 3) {
    throw ConfigError("fit_rate: need at least three levels");
  }
  std::vector<double> x;
  std::vector<double> y;
  for (const auto & [h, m] : points) {
    if (!(h > 0.0) || !std::isfinite(h)) {
      throw ConfigError("fit_rate: step sizes must be positive");
    }
    if (!(m > 0.0) || !std::isfinite(m)) {
      throw DegenerateMetric(
        "fit_rate: metric value " + csv::format_short(m) + " at h = " + csv::format_short(h) +
        " is not positive (self-comparison level included?)");
    }
    x.push_back(std::log(h));
    y.push_back(std::log(m));
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) {
    throw ConfigError("fit_rate: step sizes must not all be equal");
  }
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += e * e;
  }
  f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : (ss_res == 0.0 ? 1.0 : 0.0);
  return f;
}

// ---------------------------------------------------------------------------
// Report

struct LevelResult
{
  int level = 0;
  double h = 0.0;
  MetricValue metric;
};

struct ConvergenceReport
{
  Variant variant = Variant::kModified;
  Metric metric = Metric::kSupExpectation;
  std::uint64_t seed = 0;
  double theory_rate = 1.0;
  std::vector<LevelResult> levels;  // sorted by decreasing h
  RateFit fit;
  std::int64_t replications = 0;
  std::int64_t failed = 0;
  std::vector<std::string> failures;
  bool gate_passed = true;
  std::optional<MomentEstimate> exp_moment;
  double mean_L = 0.0;  // average weight rate over replications and nodes (bounded g only)
  MonitorTally gain;
  MonitorTally coupling;
  MonitorTally deviation;
  MonitorTally spread;
  MonitorTally floor;

  double failure_rate() const
  {
    return replications > 0 ? static_cast<double>(failed) / static_cast<double>(replications) : 0.0;
  }
};

/// Per-replication weight process sampled on the fine grid.
inline WeightProcess replication_weights(
  const ReplicationResult & rep, const ModelSpec & model, Index M, const GridSpec & grid)
{
  return WeightProcess::from_spread(rep.ref_spread, model, M, grid.fine_h());
}

/// Aggregates replications into per-level metrics and a fitted rate.
inline ConvergenceReport summarize(
  const ExperimentPlan & plan, const ModelSpec & model, const std::vector<ReplicationResult> & reps)
{
  ConvergenceReport rep;
  rep.variant = plan.variant;
  rep.metric = plan.resolved_metric();
  rep.seed = plan.seed;
  rep.theory_rate = plan.theory_rate();
  rep.replications = static_cast<std::int64_t>(reps.size());

  std::vector<const ReplicationResult *> ok;
  for (const auto & r : reps) {
    if (r.failed) {
      ++rep.failed;
      rep.failures.push_back("replication " + std::to_string(r.index) + ": " + r.failure);
    } else {
      ok.push_back(&r);
    }
    rep.gain.merge(r.gain);
    rep.coupling.merge(r.coupling);
    rep.deviation.merge(r.deviation);
    rep.spread.merge(r.spread);
    rep.floor.merge(r.floor);
  }
  rep.gate_passed = rep.failure_rate() <= plan.max_failure_rate;
  if (ok.empty()) {
    rep.gate_passed = false;
    return rep;
  }

  std::vector<WeightProcess> weights;
  if (model.bounded_obs()) {
    double sum = 0.0;
    double count = 0.0;
    for (const auto * r : ok) {
      weights.push_back(replication_weights(*r, model, plan.ensemble_size, plan.grid));
      sum += weights.back().L.sum();
      count += static_cast<double>(weights.back().L.size());
    }
    rep.mean_L = sum / count;
    if (plan.delta && plan.variant == Variant::kClassical) {
      rep.exp_moment = exp_moment_estimate(weights, *plan.delta);
    }
  }

  const int r = plan.grid.refinement;
  for (std::size_t li = 0; li < plan.levels.size(); ++li) {
    std::vector<std::vector<double>> curves;
    curves.reserve(ok.size());
    for (const auto * rr : ok) {
      curves.push_back(rr->curves[li].D);
    }
    LevelResult lr;
    lr.level = plan.levels[li];
    lr.h = plan.grid.h(lr.level);
    switch (rep.metric) {
      case Metric::kSupExpectation:
        lr.metric = metric_modified_sup(curves);
        break;
      case Metric::kPlainSupMse:
        lr.metric = metric_plain_sup(curves);
        break;
      case Metric::kCorollary:
        lr.metric = corollary_metric(curves, *plan.delta);
        break;
      case Metric::kWeightedSup: {
          if (weights.size() != ok.size()) {
            throw ConfigError("weighted metric: missing weight processes");
          }
          const auto factor = static_cast<Index>(std::int64_t{1} << (r - lr.level));
          std::vector<std::vector<double>> w(ok.size());
          for (std::size_t i = 0; i < ok.size(); ++i) {
            const std::size_t n = curves[i].size();
            w[i].resize(n);
            for (std::size_t k = 0; k < n; ++k) {
              w[i][k] = weights[i].weight(static_cast<Index>(k) * factor);
            }
          }
          lr.metric = metric_classical_weighted(curves, w);
          break;
        }
    }
    rep.levels.push_back(lr);
  }
  std::sort(
    rep.levels.begin(), rep.levels.end(),
    [](const LevelResult & a, const LevelResult & b) {return a.h > b.h;});
  if (rep.levels.size() >= 3) {
    std::vector<std::pair<double, double>> pts;
    for (const auto & l : rep.levels) {
      pts.emplace_back(l.h, l.metric.value);
    }
    rep.fit = fit_rate(pts);
  }
  return rep;
}

/// CSV columns: level, h, metric, se, n.
inline void write_report_csv(
  std::ostream & os, const ConvergenceReport & r, const std::string & header = {})
{
  if (!header.empty()) {
    csv::write_comment_block(os, header);
  }
  os << "level,h,metric,se,n\n";
  for (const auto & l : r.levels) {
    os << l.level << ',' << csv::format_double(l.h) << ',' << csv::format_double(l.metric.value) <<
      ',' << csv::format_double(l.metric.se) << ',' << l.metric.n << '\n';
  }
}

inline nlohmann::ordered_json tally_json(const MonitorTally & t)
{
  nlohmann::ordered_json j;
  j["checked"] = t.checked;
  j["violations"] = t.violations;
  j["min_margin"] = std::isfinite(t.min_margin) ? nlohmann::ordered_json(t.min_margin) : nullptr;
  return j;
}

inline nlohmann::ordered_json summary_json(const ConvergenceReport & r)
{
  nlohmann::ordered_json j;
  j["slope"] = r.fit.slope;
  j["intercept"] = r.fit.intercept;
  j["r2"] = r.fit.r2;
  j["theory_rate"] = r.theory_rate;
  j["variant"] = to_string(r.variant);
  j["metric"] = to_string(r.metric);
  j["seed"] = r.seed;
  j["replications"] = r.replications;
  j["failed"] = r.failed;
  j["failure_rate"] = r.failure_rate();
  j["gate_passed"] = r.gate_passed;
  j["failures"] = r.failures;
  j["mean_L"] = r.mean_L;
  if (r.exp_moment) {
    nlohmann::ordered_json e;
    e["estimate"] = std::isfinite(r.exp_moment->estimate) ?
      nlohmann::ordered_json(r.exp_moment->estimate) : nullptr;
    e["se"] = std::isfinite(r.exp_moment->standard_error) ?
      nlohmann::ordered_json(r.exp_moment->standard_error) : nullptr;
    e["overflow"] = r.exp_moment->overflow;
    j["exp_moment"] = e;
  }
  if (r.gain.checked + r.spread.checked + r.floor.checked > 0) {
    nlohmann::ordered_json m;
    m["gain"] = tally_json(r.gain);
    m["coupling"] = tally_json(r.coupling);
    m["deviation"] = tally_json(r.deviation);
    m["spread"] = tally_json(r.spread);
    m["floor"] = tally_json(r.floor);
    j["monitors"] = m;
  }
  return j;
}

}  // namespace enkf

#endif  // ENKF__HARNESS_HPP_
