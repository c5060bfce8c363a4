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


// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "enkf/classical.hpp"
#include "enkf/commands.hpp"
#include "enkf/diagnostics.hpp"
#include "enkf/harness.hpp"
#include "enkf/modified.hpp"
#include "enkf/noise.hpp"
#include "enkf/truth.hpp"

namespace
{

using enkf::Matrix;
using enkf::Vector;

int g_failures = 0;

void verdict(int id, const char * name, bool ok, const std::string & detail)
{
  std::printf("%s %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) {
    ++g_failures;
  }
}

template<typename... A>
std::string fmt(const char * f, A... a)
{
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, a...);
  return buf;
}

unsigned workers()
{
  return std::max(2U, std::thread::hardware_concurrency());
}

std::string report_bytes(const enkf::ConvergenceReport & r)
{
  std::ostringstream os;
  enkf::write_report_csv(os, r, "acceptance");
  os << enkf::summary_json(r).dump();
  return os.str();
}

struct RateRun
{
  enkf::ExperimentPlan plan;
  enkf::ModelSpec model;
  std::vector<enkf::ReplicationResult> reps;
  enkf::ConvergenceReport report;
};

RateRun rate_run(enkf::Variant v, unsigned w)
{
  RateRun out;
  out.plan.variant = v;
  out.plan.monitors = true;
  out.model = enkf::ModelRegistry::builtin().make(out.plan.model);
  out.reps = enkf::run_coupled(out.plan, out.model, w);
  out.report = enkf::summarize(out.plan, out.model, out.reps);
  return out;
}

double min_over(const std::vector<double> & v)
{
  return *std::min_element(v.begin(), v.end());
}

// Criterion 3: final ensemble covariance of the modified filter against Euler
// integration of the moment equations, both on the same increment stream.
double kalman_bucy_gap(const enkf::GridSpec & grid, int j)
{
  const auto m = enkf::linear_model(
    Matrix::Constant(1, 1, -0.5), Matrix::Identity(1, 1), Matrix::Identity(1, 1),
    Matrix::Identity(1, 1));
  const enkf::Index M = 64;
  const auto lat = enkf::NoiseLattice::generate(2024, 1, 1, grid, M);
  const auto truth = enkf::simulate_signal(m, lat, Vector::Zero(1));
  const auto dY = enkf::observation_increments(m, truth, lat);
  const auto init = enkf::initial_ensemble(2024, 1, M, 0.0, 1.0);
  const auto noise = enkf::coarsen(lat, j);
  const auto run = enkf::run_filter(enkf::Variant::kModified, m, init, noise, dY.level(j));
  const auto st = enkf::compute_stats(init, m);
  const auto mom = enkf::integrate_moments(
    {st.mean, st.covariance}, enkf::LinearMoments::from_model(m), dY.level(j), noise.h);
  return std::abs(run.analysis_spread.back() - mom.back().cov(0, 0));
}

// Criterion 9: zooming grid search over the cost functional for one member.
Vector grid_argmin(
  const Vector & dYi, const Vector & xf, const Matrix & G, const Matrix & C, const Matrix & Pf,
  double h, double & resolution)
{
  Vector centre = xf;
  double half = 4.0;
  const int n = 40;
  while (true) {
    const double step = 2.0 * half / n;
    Vector best = centre;
    double best_j = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= n; ++a) {
      for (int b = 0; b <= n; ++b) {
        Vector x = centre;
        x(0) += -half + a * step;
        x(1) += -half + b * step;
        const double jv = enkf::cost_functional(x, dYi, xf, G, C, Pf, h);
        if (jv < best_j) {
          best_j = jv;
          best = x;
        }
      }
    }
    centre = best;
    resolution = step;
    if (step < 1e-8) {
      return centre;
    }
    half = 2.0 * step;
  }
}

}  // namespace

int main()
{
  const unsigned w = workers();

  // 1, 2, 5, 6 (modified part), 7 share the default-plan runs.
  const RateRun mod = rate_run(enkf::Variant::kModified, w);
  const RateRun cls = rate_run(enkf::Variant::kClassical, w);
  {
    const auto & f = mod.report.fit;
    verdict(
      1, "modified-rate", f.slope >= 0.8 && f.slope <= 1.3 && f.r2 >= 0.98 && mod.report.gate_passed,
      fmt("slope %.4f (want [0.8, 1.3]), r2 %.4f (want >= 0.98), failed %lld/%lld",
      f.slope, f.r2, static_cast<long long>(mod.report.failed),
      static_cast<long long>(mod.report.replications)));
  }
  {
    const auto & f = cls.report.fit;
    verdict(
      2, "classical-rate", f.slope >= 0.6 && f.r2 >= 0.9 && cls.report.gate_passed,
      fmt("weighted metric slope %.4f (want >= 0.6), r2 %.4f (want >= 0.9), theory %.2f",
      f.slope, f.r2, cls.report.theory_rate));
  }

  {
    const enkf::GridSpec grid{1.0, 1024, 1};
    const double e1 = kalman_bucy_gap(grid, 1);  // h = 2^-10
    const double e2 = kalman_bucy_gap(grid, 0);  // h = 2^-11
    const double h = std::ldexp(1.0, -10);
    const double ratio = e2 / e1;
    verdict(
      3, "kalman-bucy", e1 <= 10.0 * h && ratio >= 0.35 && ratio <= 0.65,
      fmt("|P_ens - P_mom| = %.3e at h=2^-10 (want <= %.3e), ratio at h/2 %.4f (want [0.35, 0.65])",
      e1, 10.0 * h, ratio));
  }

  {
    const enkf::LinearMoments lin{
      Matrix::Zero(1, 1), Matrix::Identity(1, 1), Matrix::Zero(1, 1), Matrix::Identity(1, 1)};
    const int n = 10000;
    const auto path = enkf::integrate_moments(
      {Vector::Zero(1), Matrix::Identity(1, 1)}, lin, Matrix::Zero(1, n), 1.0 / n);
    const double p1 = path.back().cov(0, 0);
    verdict(
      4, "riccati", std::abs(p1 - 0.5) <= 1e-3,
      fmt("P(1) = %.8f (want 0.5 +- 1e-3)", p1));
  }

  {
    const auto g = mod.report.gain;
    const auto c = cls.report.gain;
    verdict(
      5, "gain-bound", g.violations == 0 && c.violations == 0 && g.checked > 0 && c.checked > 0,
      fmt("violations %zu of %zu steps (modified), %zu of %zu (classical); min margin %.3e",
      g.violations, g.checked, c.violations, c.checked, std::min(g.min_margin, c.min_margin)));
  }

  {
    const auto s = mod.report.spread;
    enkf::ExperimentPlan p;
    p.variant = enkf::Variant::kClassical;
    p.replications = 100;
    p.levels = {0, 1, 2};
    const auto reps = enkf::run_coupled(p, cls.model, w);
    std::vector<std::vector<double>> fine;
    std::vector<std::vector<double>> coarse;
    for (std::int64_t i = 0; i < p.replications; ++i) {
      fine.push_back(reps[static_cast<std::size_t>(i)].ref_spread);
      const auto in = enkf::detail::replication_inputs(p, cls.model, i);
      const auto run = enkf::run_filter(
        p.variant, cls.model, in.initial, enkf::coarsen(in.lattice, p.grid.refinement),
        in.dY.level(p.grid.refinement));
      coarse.push_back(run.analysis_spread);
    }
    const auto ef = enkf::spread_expectation_classical(fine, cls.model, p.grid.fine_h());
    const auto ec = enkf::spread_expectation_classical(coarse, cls.model, p.grid.h(0));
    verdict(
      6, "spread-bound",
      s.violations == 0 && s.checked > 0 && ef.passed() && ec.passed() && ef.flags.empty(),
      fmt("modified %zu violations in %zu steps; classical expectation R=100 violations %zu (h=2^-12), "
      "%zu (h=2^-4), min margin %.3e", s.violations, s.checked, ef.violations(), ec.violations(),
      std::min(ef.min_margin(), ec.min_margin())));
  }

  {
    double lmin = std::numeric_limits<double>::infinity();
    for (const auto & r : mod.reps) {
      if (!r.ref_lambda_min.empty()) {
        lmin = std::min(lmin, min_over(r.ref_lambda_min));
      }
    }
    const auto fl = mod.report.floor;
    verdict(
      7, "eigen-floor",
      mod.report.failed == 0 && fl.violations == 0 && fl.checked > 0 && lmin >= 1e-6,
      fmt("collapses %lld, floor violations %zu of %zu, min lambda %.4e on the reference grid",
      static_cast<long long>(mod.report.failed), fl.violations, fl.checked, lmin));
  }

  {
    const int draws = 10000;
    const enkf::GridSpec grid{1.0, 625, 4};  // 10^4 fine steps, h = 1e-4
    const auto lat = enkf::NoiseLattice::generate(77, 1, 1, grid, 10);
    const auto & ens = lat.blocks().ens_signal;
    double s = 0.0;
    double s2 = 0.0;
    for (int k = 0; k < draws; ++k) {
      const Matrix block = ens.col(k).reshaped(1, 10);
      const double v = enkf::centered_perturbations(block).statistic;
      s += v;
      s2 += v * v;
    }
    const double mean = s / draws;
    const double sd = std::sqrt((s2 - draws * mean * mean) / (draws - 1));
    const double se = sd / std::sqrt(static_cast<double>(draws));
    const double h = grid.fine_h();
    const double z = (mean - h) / se;
    verdict(
      8, "noise-moment", std::abs(z) <= 5.0,
      fmt("mean %.6e vs h %.6e, z = %.3f (want |z| <= 5)", mean, h, z));
  }

  {
    const auto m = enkf::linear_model(
      Matrix{{-0.5, 0.2}, {0.1, -0.3}}, Matrix{{1.0, 0.5}, {0.0, 1.0}},
      Matrix::Identity(2, 2), Matrix{{1.0, 0.2}, {0.2, 0.5}});
    const double h = 0.1;
    const enkf::Index M = 8;
    const auto init = enkf::initial_ensemble(9, 2, M, 0.0, 1.0);
    Matrix dW(2, M);
    Matrix dV(2, M);
    for (enkf::Index i = 0; i < M; ++i) {
      for (enkf::Index c = 0; c < 2; ++c) {
        dW(c, i) = std::sqrt(h) * enkf::normal_at({9, enkf::StreamRole::kEnsembleSignal,
            static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(c)}, 1);
        dV(c, i) = std::sqrt(h) * enkf::normal_at({9, enkf::StreamRole::kEnsembleObservation,
            static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(c)}, 1);
      }
    }
    const Vector dY{{0.07, -0.03}};
    const auto st = enkf::step_classical(init, m, h, dW, dY, dV);
    const Matrix & Xf = st.forecast.members();
    const Matrix & G = *m.obs_matrix;
    double worst = 0.0;
    double res = 0.0;
    for (enkf::Index i = 0; i < M; ++i) {
      const Vector dYi = dY + m.C_sqrt * dV.col(i);
      const Vector x = grid_argmin(dYi, Xf.col(i), G, m.C, st.forecast_stats.covariance, h, res);
      worst = std::max(worst, (x - st.analysis.members().col(i)).lpNorm<Eigen::Infinity>());
    }
    verdict(
      9, "cost-functional", worst <= 1e-6,
      fmt("max |argmin - update| = %.3e over %lld members (grid resolution %.1e)", worst,
      static_cast<long long>(M), res));
  }

  {
    const RateRun mod1 = rate_run(enkf::Variant::kModified, 1);
    const RateRun cls1 = rate_run(enkf::Variant::kClassical, 1);
    const bool same = report_bytes(mod1.report) == report_bytes(mod.report) &&
      report_bytes(cls1.report) == report_bytes(cls.report);
    verdict(
      10, "determinism", same,
      fmt("reports with 1 and %u workers %s", w, same ? "byte-identical" : "DIFFER"));
  }

  return g_failures == 0 ? 0 : 1;
}
