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

#ifndef ENKF__COMMANDS_HPP_
#define ENKF__COMMANDS_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>  // nlohmann::json, vendored

#include "enkf/config.hpp"
#include "enkf/diagnostics.hpp"
#include "enkf/harness.hpp"
#include "enkf/noise.hpp"
#include "enkf/truth.hpp"

namespace enkf
{

inline constexpr const char * kVersion = "0.1.0";

/// Comment block embedded at the top of every output file.
inline std::string provenance_header(const RunConfig & cfg, const std::string & command)
{
  std::ostringstream os;
  os << "enkf " << kVersion << ' ' << command << '\n';
  os << "seed " << cfg.plan.seed << '\n';
  os << "config " << cfg.resolved().dump();
  return os.str();
}

namespace detail
{

inline std::ofstream open_output(const std::filesystem::path & path)
{
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw Error("cannot open '" + path.string() + "' for writing");
  }
  return os;
}

inline void finish_output(std::ofstream & os, const std::filesystem::path & path)
{
  os.flush();
  if (!os) {
    throw Error("write to '" + path.string() + "' failed");
  }
}

inline void write_json_file(
  const std::filesystem::path & path, const nlohmann::ordered_json & j)
{
  auto os = open_output(path);
  os << j.dump(2) << '\n';
  finish_output(os, path);
}

/// Lattice, truth path, observation increments and initial ensemble of one replication.
struct ReplicationInputs
{
  std::uint64_t seed;
  NoiseLattice lattice;
  ReferencePath truth;
  ObservationIncrements dY;
  Ensemble initial;
};

inline ReplicationInputs replication_inputs(
  const ExperimentPlan & plan, const ModelSpec & model, std::int64_t rep)
{
  const std::uint64_t seed = replication_seed(plan.seed, static_cast<std::uint64_t>(rep));
  NoiseLattice lattice = NoiseLattice::generate(
    seed, model.dim_state, model.dim_obs, plan.grid, plan.ensemble_size);
  ReferencePath truth = simulate_signal(
    model, lattice, Vector::Constant(model.dim_state, plan.x0));
  ObservationIncrements dY = observation_increments(model, truth, lattice);
  Ensemble init = initial_ensemble(
    seed, model.dim_state, plan.ensemble_size, plan.x0, plan.initial_spread);
  return {seed, std::move(lattice), std::move(truth), std::move(dY), std::move(init)};
}

inline void maybe_dump_lattice(
  const RunConfig & cfg, const ReplicationInputs & in, const std::filesystem::path & dir)
{
  if (cfg.dump_lattice) {
    in.lattice.dump((dir / "lattice.bin").string());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// truth

struct TruthOutput
{
  std::filesystem::path path_csv;
  std::filesystem::path observations_csv;
  std::optional<std::filesystem::path> lattice_bin;
};

/// Exports the signal path and fine-grid observation increments of replication
/// `cfg.replication`.
inline TruthOutput cmd_truth(const RunConfig & cfg, const ModelSpec & model)
{
  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  const auto in = detail::replication_inputs(cfg.plan, model, cfg.replication);
  const std::string header = provenance_header(cfg, "truth");

  TruthOutput out;
  out.path_csv = dir / "truth.csv";
  out.observations_csv = dir / "observations.csv";
  {
    auto os = detail::open_output(out.path_csv);
    write_path_csv(os, in.truth, header);
    detail::finish_output(os, out.path_csv);
  }
  {
    auto os = detail::open_output(out.observations_csv);
    write_increments_csv(os, in.dY.level(0), in.lattice.grid().fine_h(), header);
    detail::finish_output(os, out.observations_csv);
  }
  if (cfg.dump_lattice) {
    detail::maybe_dump_lattice(cfg, in, dir);
    out.lattice_bin = dir / "lattice.bin";
  }
  return out;
}

// ---------------------------------------------------------------------------
// converge

struct ConvergeOutput
{
  ConvergenceReport report;
  std::filesystem::path csv;
  std::filesystem::path json;
  bool ok = false;  // experiment completed and the failure gate passed
};

inline ConvergeOutput cmd_converge(const RunConfig & cfg, const ModelSpec & model)
{
  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  const auto reps = run_coupled(cfg.plan, model, cfg.workers);

  ConvergeOutput out;
  out.report = summarize(cfg.plan, model, reps);
  const std::string header = provenance_header(cfg, "converge");
  out.csv = dir / "convergence.csv";
  out.json = dir / "summary.json";
  {
    auto os = detail::open_output(out.csv);
    write_report_csv(os, out.report, header);
    detail::finish_output(os, out.csv);
  }
  nlohmann::ordered_json j = summary_json(out.report);
  if (out.report.levels.size() < 3) {
    j["slope"] = nullptr;
    j["intercept"] = nullptr;
    j["r2"] = nullptr;
  }
  j["config"] = cfg.resolved();
  detail::write_json_file(out.json, j);
  if (cfg.dump_lattice) {
    detail::maybe_dump_lattice(
      cfg, detail::replication_inputs(cfg.plan, model, cfg.replication), dir);
  }
  out.ok = out.report.gate_passed && out.report.levels.size() == cfg.plan.levels.size();
  return out;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseOutput
{
  std::map<std::string, BoundReport> reports;  // envelope over replications
  std::optional<MomentEstimate> exp_moment;
  std::vector<std::filesystem::path> files;
  bool ok = false;  // every hard monitor passed
};

/// Runs the configured variant at `diagnose_level` for every replication and
/// evaluates the requested monitors. Ensemble collapse is not caught here.
inline DiagnoseOutput cmd_diagnose(const RunConfig & cfg, const ModelSpec & model)
{
  if (cfg.monitors.empty()) {
    throw ConfigError("monitors", "monitor list is empty");
  }
  const ExperimentPlan & plan = cfg.plan;
  const int level = cfg.resolved_diagnose_level();
  const int r = plan.grid.refinement;
  const int j = r - level;
  const std::int64_t factor = std::int64_t{1} << j;
  const double T = plan.grid.horizon;
  auto wants = [&](const std::string & name) {
      return std::find(cfg.monitors.begin(), cfg.monitors.end(), name) != cfg.monitors.end();
    };
  const bool deviation = wants("gain-deviation");
  const bool gains = wants("gain-norm") || wants("coupling-norm") || deviation;

  const auto R = static_cast<std::size_t>(plan.replications);
  std::vector<std::map<std::string, BoundReport>> per_rep(R);
  std::vector<std::vector<double>> spreads(R);

  parallel_for(
    R, cfg.workers, [&](std::size_t i) {
      const auto in = detail::replication_inputs(plan, model, static_cast<std::int64_t>(i));
      FilterOptions opt = plan.filter;
      opt.keep_forecasts = opt.keep_forecasts || deviation;
      const FilterRun run = run_filter(
        plan.variant, model, in.initial, coarsen(in.lattice, j), in.dY.level(j), opt);
      std::optional<FilterRun> ref;
      if (deviation) {
        ref = run_filter(
          plan.variant, model, in.initial, coarsen(in.lattice, 0), in.dY.level(0), plan.filter);
      }
      auto & out = per_rep[i];
      if (gains) {
        const GainBoundReports g = gain_bounds(
          run, model, plan.ensemble_size, ref ? &*ref : nullptr, factor);
        out["gain-norm"] = g.gain;
        out["coupling-norm"] = g.coupling;
        if (deviation) {
          out["gain-deviation"] = g.deviation;
        }
      }
      if (wants("spread-modified")) {
        out["spread-modified"] = spread_bound_modified(run.analysis_spread, model, T, run.h);
      }
      if (wants("eigen-floor")) {
        out["eigen-floor"] = eigen_floor(run.lambda_min, plan.filter.collapse_floor, run.h);
      }
      if (wants("eigen-floor-discrete")) {
        const double vstar = spread_bound_value(model, run.analysis_spread.front(), T);
        const double floor = discrete_eigen_floor(model, T, vstar, run.lambda_min.front());
        BoundReport rep = eigen_floor(run.lambda_min, floor, run.h);
        rep.name = "eigen-floor-discrete";
        out["eigen-floor-discrete"] = std::move(rep);
      }
      spreads[i] = run.analysis_spread;
    });

  DiagnoseOutput out;
  for (const auto & name : cfg.monitors) {
    if (name == "exp-moment" || name == "spread-classical-expectation") {
      continue;
    }
    if (out.reports.count(name) != 0U) {
      continue;
    }
    std::vector<BoundReport> reps;
    reps.reserve(R);
    for (auto & m : per_rep) {
      reps.push_back(std::move(m.at(name)));
    }
    out.reports[name] = envelope(reps);
  }
  const double h = plan.grid.h(level);
  if (wants("spread-classical-expectation")) {
    out.reports["spread-classical-expectation"] = spread_expectation_classical(spreads, model, h);
  }
  if (wants("exp-moment")) {
    std::vector<WeightProcess> w;
    w.reserve(R);
    for (const auto & s : spreads) {
      w.push_back(WeightProcess::from_spread(s, model, plan.ensemble_size, h));
    }
    out.exp_moment = exp_moment_estimate(w, *plan.delta);
  }

  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  const std::string header = provenance_header(cfg, "diagnose");
  nlohmann::ordered_json summary;
  summary["variant"] = to_string(plan.variant);
  summary["seed"] = plan.seed;
  summary["level"] = level;
  summary["h"] = h;
  summary["replications"] = plan.replications;
  out.ok = true;
  for (const auto & [name, rep] : out.reports) {
    const std::filesystem::path file = dir / (name + ".csv");
    auto os = detail::open_output(file);
    write_report_csv(os, rep, header);
    detail::finish_output(os, file);
    out.files.push_back(file);
    out.ok = out.ok && rep.passed();
    nlohmann::ordered_json m;
    m["checked"] = rep.records.size();
    m["violations"] = rep.violations();
    m["min_margin"] = std::isfinite(rep.min_margin()) ?
      nlohmann::ordered_json(rep.min_margin()) : nullptr;
    const auto first = rep.first_violation();
    m["first_violation"] = first ? nlohmann::ordered_json(*first) : nullptr;
    m["flags"] = rep.flags;
    m["passed"] = rep.passed();
    summary["monitors"][name] = m;
  }
  if (out.exp_moment) {
    nlohmann::ordered_json e;
    e["delta"] = *plan.delta;
    e["estimate"] = std::isfinite(out.exp_moment->estimate) ?
      nlohmann::ordered_json(out.exp_moment->estimate) : nullptr;
    e["se"] = std::isfinite(out.exp_moment->standard_error) ?
      nlohmann::ordered_json(out.exp_moment->standard_error) : nullptr;
    e["overflow"] = out.exp_moment->overflow;
    summary["exp_moment"] = e;
  }
  summary["passed"] = out.ok;
  summary["config"] = cfg.resolved();
  const std::filesystem::path sj = dir / "diagnose.json";
  detail::write_json_file(sj, summary);
  out.files.push_back(sj);
  if (cfg.dump_lattice) {
    detail::maybe_dump_lattice(
      cfg, detail::replication_inputs(plan, model, cfg.replication), dir);
  }
  return out;
}

// ---------------------------------------------------------------------------
// report

/// Plain-text digest of the summaries found in `dir`. Throws when there are none.
inline std::string cmd_report(const std::filesystem::path & dir)
{
  auto read_json = [](const std::filesystem::path & p) {
      std::ifstream is(p);
      return nlohmann::json::parse(is);
    };
  std::ostringstream os;
  bool found = false;
  const auto conv = dir / "summary.json";
  if (std::filesystem::exists(conv)) {
    found = true;
    const auto j = read_json(conv);
    os << "convergence (" << j.at("variant").get<std::string>() << ", " <<
      j.at("metric").get<std::string>() << ", seed " << j.at("seed").get<std::uint64_t>() << ")\n";
    const auto csv_path = dir / "convergence.csv";
    std::ifstream csv(csv_path);
    std::string line;
    while (std::getline(csv, line)) {
      if (!line.empty() && line.front() != '#') {
        os << "  " << line << '\n';
      }
    }
    auto num = [&](const char * key) {
        return j.at(key).is_null() ? std::string("n/a") : csv::format_double(j.at(key).get<double>());
      };
    os << "  slope " << num("slope") << "  r2 " << num("r2") << "  theory " << num("theory_rate") <<
      '\n';
    os << "  failed " << j.at("failed").get<std::int64_t>() << " of " <<
      j.at("replications").get<std::int64_t>() << (j.at("gate_passed").get<bool>() ? "" :
      "  (failure gate NOT passed)") << '\n';
  }
  const auto diag = dir / "diagnose.json";
  if (std::filesystem::exists(diag)) {
    found = true;
    const auto j = read_json(diag);
    os << "monitors (" << j.at("variant").get<std::string>() << ", h " <<
      csv::format_double(j.at("h").get<double>()) << ")\n";
    if (j.contains("monitors")) {
      for (const auto & [name, m] : j.at("monitors").items()) {
        os << "  " << name << ": " << (m.at("passed").get<bool>() ? "pass" : "FAIL") << ", " <<
          m.at("violations").get<std::size_t>() << " violations in " <<
          m.at("checked").get<std::size_t>() << " steps\n";
      }
    }
    os << "  overall " << (j.at("passed").get<bool>() ? "pass" : "FAIL") << '\n';
  }
  if (!found) {
    throw Error("no summary.json or diagnose.json in '" + dir.string() + "'");
  }
  return os.str();
}

}  // namespace enkf

#endif  // ENKF__COMMANDS_HPP_
