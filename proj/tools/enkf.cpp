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

// enkf: batch front end for coupled ensemble Kalman filter experiments.
//
//   enkf truth    --config run.json     export signal path and observation increments
//   enkf converge --config run.json     multi-resolution convergence experiment
//   enkf diagnose --config run.json     bound monitors, one CSV per monitor
//   enkf report   --out DIR             digest of the summaries in DIR
//
// Exit status: 0 success, 1 runtime failure, 2 invalid configuration.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include <CLI11.hpp>

#include "enkf/commands.hpp"
#include "enkf/config.hpp"

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Flags
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> out;
  std::optional<std::string> variant;
};

void add_common(CLI::App * sub, Flags & f)
{
  sub->add_option("--config", f.config, "flat JSON configuration file");
  sub->add_option("--seed", f.seed, "base seed (overrides ENKF_SEED and the config)");
  sub->add_option("--workers", f.workers, "worker threads")->check(CLI::Range(1U, 4096U));
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--variant", f.variant, "filter variant")
  ->check(CLI::IsMember({"classical", "modified"}));
}

std::string read_file(const std::string & path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw enkf::ConfigError(path + ": cannot read configuration file");
  }
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Config file, then ENKF_SEED, then flags.
enkf::RunConfig resolve(const Flags & f, std::string & text, std::string & source)
{
  source = f.config.empty() ? std::string("<defaults>") : f.config;
  text = f.config.empty() ? std::string("{}") : read_file(f.config);
  enkf::RunConfig cfg = enkf::RunConfig::parse(text, source);
  if (const char * env = std::getenv("ENKF_SEED")) {
    try {
      cfg.plan.seed = enkf::parse_u64(env, "ENKF_SEED");
    } catch (const enkf::ConfigError & e) {
      throw enkf::ConfigError("seed", e.what());
    }
  }
  if (f.seed) {
    cfg.plan.seed = *f.seed;
  }
  if (f.workers) {
    cfg.workers = *f.workers;
  }
  if (f.out) {
    cfg.out_dir = *f.out;
  }
  if (f.variant) {
    cfg.plan.variant = enkf::parse_variant(*f.variant);
  }
  return cfg;
}

std::string locate(const enkf::ConfigError & e, const std::string & text, const std::string & source)
{
  const std::string msg = e.what();
  if (e.field().empty() || msg.rfind(source + ":", 0) == 0) {
    return msg;
  }
  const int line = enkf::detail::line_of_key(text, e.field());
  const std::string where = line > 0 ? source + ":" + std::to_string(line) : source;
  return where + ": field '" + e.field() + "': " + msg;
}

int run(const std::string & command, const Flags & flags)
{
  std::string text;
  std::string source;
  enkf::RunConfig cfg;
  enkf::ModelSpec model;
  try {
    cfg = resolve(flags, text, source);
    if (command == "report") {
      std::cout << enkf::cmd_report(cfg.out_dir);
      return kExitOk;
    }
    model = cfg.validate(enkf::ModelRegistry::builtin());
    if (command == "diagnose" && cfg.monitors.empty()) {
      throw enkf::ConfigError("monitors", "monitor list is empty");
    }
  } catch (const enkf::ConfigError & e) {
    std::cerr << "enkf: invalid configuration: " << locate(e, text, source) << '\n';
    return kExitConfig;
  } catch (const enkf::Error & e) {
    if (command == "report") {
      std::cerr << "enkf: " << e.what() << '\n';
      return kExitRuntime;
    }
    std::cerr << "enkf: invalid configuration: " << source << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception & e) {
    std::cerr << "enkf: " << e.what() << '\n';
    return kExitRuntime;
  }

  try {
    if (command == "truth") {
      const auto out = enkf::cmd_truth(cfg, model);
      std::cout << "wrote " << out.path_csv.string() << " and " << out.observations_csv.string() <<
        '\n';
      return kExitOk;
    }
    if (command == "converge") {
      const auto out = enkf::cmd_converge(cfg, model);
      const auto & r = out.report;
      std::cout << enkf::to_string(r.variant) << ' ' << enkf::to_string(r.metric) << ": slope " <<
        r.fit.slope << ", r2 " << r.fit.r2 << ", theory " << r.theory_rate << ", failed " <<
        r.failed << '/' << r.replications << '\n';
      if (!r.gate_passed) {
        std::cerr << "enkf: failure rate " << r.failure_rate() << " exceeds " <<
          cfg.plan.max_failure_rate << '\n';
      }
      return out.ok ? kExitOk : kExitRuntime;
    }
    const auto out = enkf::cmd_diagnose(cfg, model);
    for (const auto & [name, rep] : out.reports) {
      std::cout << name << ": " << (rep.passed() ? "pass" : "FAIL") << " (" << rep.violations() <<
        " violations, min margin " << rep.min_margin() << ")\n";
    }
    return out.ok ? kExitOk : kExitRuntime;
  } catch (const enkf::ConfigError & e) {
    std::cerr << "enkf: invalid configuration: " << locate(e, text, source) << '\n';
    return kExitConfig;
  } catch (const std::exception & e) {
    std::cerr << "enkf: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Coupled multi-resolution ensemble Kalman filter experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", enkf::kVersion);
  Flags flags;
  std::string command;
  const std::pair<const char *, const char *> subcommands[] = {
    {"truth", "export the signal path and observation increments"},
    {"converge", "run the coupled convergence experiment"},
    {"diagnose", "evaluate bound monitors"},
    {"report", "summarise an output directory"},
  };
  for (const auto & [name, help] : subcommands) {
    CLI::App * sub = app.add_subcommand(name, help);
    add_common(sub, flags);
    sub->callback([&command, n = std::string(name)]() {command = n;});
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  return run(command, flags);
}
