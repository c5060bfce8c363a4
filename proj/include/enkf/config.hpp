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

#ifndef ENKF__CONFIG_HPP_
#define ENKF__CONFIG_HPP_

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>  // nlohmann::json, vendored

#include "enkf/error.hpp"
#include "enkf/filter_run.hpp"
#include "enkf/harness.hpp"
#include "enkf/model.hpp"

namespace enkf
{

/// Monitors the diagnose command knows about.
inline const std::vector<std::string> & known_monitors()
{
  static const std::vector<std::string> names{
    "gain-norm", "coupling-norm", "gain-deviation", "spread-modified",
    "spread-classical-expectation", "eigen-floor", "eigen-floor-discrete", "exp-moment"};
  return names;
}

/// Batch configuration: a flat JSON object. Every key is optional; unknown keys are rejected.
struct RunConfig
{
  ExperimentPlan plan;
  std::string out_dir = "out";
  unsigned workers = 1;
  bool dump_lattice = false;
  std::vector<std::string> monitors;
  std::int64_t replication = 0;           // replication exported by `truth`
  std::optional<int> diagnose_level;      // default: the reference level

  int resolved_diagnose_level() const {return diagnose_level.value_or(plan.grid.refinement);}

  /// Every key in a fixed order, omitting the run-environment keys (workers, out_dir),
  /// so files written by differently parallelised runs stay identical.
  nlohmann::ordered_json resolved() const
  {
    nlohmann::ordered_json j;
    const ModelConfig & m = plan.model;
    j["model"] = m.id;
    j["dim"] = m.dim;
    j["drift_scale"] = m.drift_scale;
    j["obs_scale"] = m.obs_scale;
    j["q"] = m.q;
    j["c"] = m.c;
    j["linear_a"] = m.linear_a;
    j["linear_g"] = m.linear_g;
    j["variant"] = to_string(plan.variant);
    j["horizon"] = plan.grid.horizon;
    j["coarse_steps"] = plan.grid.coarse_steps;
    j["refinement"] = plan.grid.refinement;
    j["levels"] = plan.levels;
    j["ensemble_size"] = plan.ensemble_size;
    j["replications"] = plan.replications;
    j["seed"] = plan.seed;
    j["metric"] = to_string(plan.resolved_metric());
    j["gamma"] = plan.gamma;
    j["delta"] = plan.delta ? nlohmann::ordered_json(*plan.delta) : nullptr;
    j["x0"] = plan.x0;
    j["initial_spread"] = plan.initial_spread;
    j["gain_form"] = plan.filter.gain_form == GainForm::kRegularized ? "regularized" : "bare";
    j["collapse_floor"] = plan.filter.collapse_floor;
    j["max_failure_rate"] = plan.max_failure_rate;
    j["dump_lattice"] = dump_lattice;
    j["monitors"] = monitors;
    j["replication"] = replication;
    j["diagnose_level"] = resolved_diagnose_level();
    return j;
  }

  /// Parses `text`; `source` names the file in diagnostics ("path:line: field 'x': ...").
  static RunConfig parse(const std::string & text, const std::string & source = "<config>");

  /// Re-validates the plan, the model and the monitor set.
  ModelSpec validate(const ModelRegistry & registry) const
  {
    const ModelSpec model = registry.make(plan.model);
    plan.validate(model);
    if (replication < 0 || replication >= plan.replications) {
      throw ConfigError("replication", "replication must lie in [0, replications)");
    }
    const int dl = resolved_diagnose_level();
    if (dl < 0 || dl > plan.grid.refinement) {
      throw ConfigError("diagnose_level", "diagnose_level must lie in [0, refinement]");
    }
    for (const auto & name : monitors) {
      if (std::find(known_monitors().begin(), known_monitors().end(), name) ==
        known_monitors().end())
      {
        throw ConfigError("monitors", "unknown monitor '" + name + "'");
      }
      const bool modified_only = name == "spread-modified" || name == "eigen-floor" ||
        name == "eigen-floor-discrete";
      if (modified_only && plan.variant != Variant::kModified) {
        throw ConfigError("monitors", "monitor '" + name + "' applies to the modified variant only");
      }
      if (name == "spread-classical-expectation" && plan.variant != Variant::kClassical) {
        throw ConfigError(
          "monitors", "monitor '" + name + "' applies to the classical variant only");
      }
      const bool needs_bounded = name == "gain-norm" || name == "coupling-norm" ||
        name == "gain-deviation" || name == "exp-moment";
      if (needs_bounded && !model.bounded_obs()) {
        throw ConfigError("monitors", "monitor '" + name + "' needs a bounded observation map");
      }
      if (name == "exp-moment" && !plan.delta) {
        throw ConfigError("monitors", "monitor 'exp-moment' needs delta");
      }
      if (name == "gain-deviation" && dl >= plan.grid.refinement) {
        throw ConfigError(
          "monitors", "monitor 'gain-deviation' needs diagnose_level < refinement");
      }
    }
    return model;
  }
};

namespace detail
{

inline int line_of_key(const std::string & text, const std::string & key)
{
  const auto pos = text.find("\"" + key + "\"");
  if (pos == std::string::npos) {
    return 0;
  }
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

inline int line_of_byte(const std::string & text, std::size_t byte)
{
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

}  // namespace detail

inline RunConfig RunConfig::parse(const std::string & text, const std::string & source)
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error & e) {
    throw ConfigError(
      source + ":" + std::to_string(detail::line_of_byte(text, e.byte)) + ": malformed JSON: " +
      e.what());
  }
  if (!j.is_object()) {
    throw ConfigError(source + ":1: top level must be a JSON object");
  }

  RunConfig cfg;
  using Json = nlohmann::json;
  auto number = [](const Json & v) {
      if (!v.is_number()) {
        throw ConfigError("expected a number");
      }
      return v.get<double>();
    };
  auto integer = [](const Json & v) {
      if (!v.is_number_integer()) {
        throw ConfigError("expected an integer");
      }
      return v.get<std::int64_t>();
    };
  auto string = [](const Json & v) {
      if (!v.is_string()) {
        throw ConfigError("expected a string");
      }
      return v.get<std::string>();
    };
  auto boolean = [](const Json & v) {
      if (!v.is_boolean()) {
        throw ConfigError("expected true or false");
      }
      return v.get<bool>();
    };
  auto small_int = [&](const Json & v) {
      const std::int64_t i = integer(v);
      if (i < -(1LL << 30) || i > (1LL << 30)) {
        throw ConfigError("integer out of range");
      }
      return static_cast<int>(i);
    };

  ExperimentPlan & p = cfg.plan;
  const std::map<std::string, std::function<void(const Json &)>> setters{
    {"model", [&](const Json & v) {p.model.id = string(v);}},
    {"dim", [&](const Json & v) {p.model.dim = integer(v);}},
    {"drift_scale", [&](const Json & v) {p.model.drift_scale = number(v);}},
    {"obs_scale", [&](const Json & v) {p.model.obs_scale = number(v);}},
    {"q", [&](const Json & v) {p.model.q = number(v);}},
    {"c", [&](const Json & v) {p.model.c = number(v);}},
    {"linear_a", [&](const Json & v) {p.model.linear_a = number(v);}},
    {"linear_g", [&](const Json & v) {p.model.linear_g = number(v);}},
    {"variant", [&](const Json & v) {p.variant = parse_variant(string(v));}},
    {"horizon", [&](const Json & v) {p.grid.horizon = number(v);}},
    {"coarse_steps", [&](const Json & v) {p.grid.coarse_steps = integer(v);}},
    {"refinement", [&](const Json & v) {p.grid.refinement = small_int(v);}},
    {"levels", [&](const Json & v) {
        if (!v.is_array()) {
          throw ConfigError("expected an array of integers");
        }
        p.levels.clear();
        for (const auto & e : v) {
          p.levels.push_back(small_int(e));
        }
      }},
    {"ensemble_size", [&](const Json & v) {p.ensemble_size = integer(v);}},
    {"replications", [&](const Json & v) {p.replications = integer(v);}},
    {"seed", [&](const Json & v) {
        if (!v.is_number_unsigned()) {
          throw ConfigError("expected an unsigned 64-bit integer");
        }
        p.seed = v.get<std::uint64_t>();
      }},
    {"metric", [&](const Json & v) {
        if (v.is_null()) {
          p.metric.reset();
        } else {
          p.metric = parse_metric(string(v));
        }
      }},
    {"gamma", [&](const Json & v) {p.gamma = number(v);}},
    {"delta", [&](const Json & v) {
        if (v.is_null()) {
          p.delta.reset();
        } else {
          p.delta = number(v);
        }
      }},
    {"x0", [&](const Json & v) {p.x0 = number(v);}},
    {"initial_spread", [&](const Json & v) {p.initial_spread = number(v);}},
    {"gain_form", [&](const Json & v) {
        const std::string s = string(v);
        if (s == "regularized") {
          p.filter.gain_form = GainForm::kRegularized;
        } else if (s == "bare") {
          p.filter.gain_form = GainForm::kBare;
        } else {
          throw ConfigError("expected 'regularized' or 'bare'");
        }
      }},
    {"collapse_floor", [&](const Json & v) {p.filter.collapse_floor = number(v);}},
    {"max_failure_rate", [&](const Json & v) {p.max_failure_rate = number(v);}},
    {"out_dir", [&](const Json & v) {cfg.out_dir = string(v);}},
    {"workers", [&](const Json & v) {
        const std::int64_t w = integer(v);
        if (w < 1 || w > 4096) {
          throw ConfigError("expected an integer in [1, 4096]");
        }
        cfg.workers = static_cast<unsigned>(w);
      }},
    {"dump_lattice", [&](const Json & v) {cfg.dump_lattice = boolean(v);}},
    {"monitors", [&](const Json & v) {
        if (!v.is_array()) {
          throw ConfigError("expected an array of strings");
        }
        cfg.monitors.clear();
        for (const auto & e : v) {
          cfg.monitors.push_back(string(e));
        }
      }},
    {"replication", [&](const Json & v) {cfg.replication = integer(v);}},
    {"diagnose_level", [&](const Json & v) {
        if (v.is_null()) {
          cfg.diagnose_level.reset();
        } else {
          cfg.diagnose_level = small_int(v);
        }
      }},
  };

  for (const auto & [key, value] : j.items()) {
    const std::string where = source + ":" + std::to_string(detail::line_of_key(text, key)) +
      ": field '" + key + "': ";
    auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError(where + "unknown key");
    }
    try {
      it->second(value);
    } catch (const Error & e) {
      throw ConfigError(key, where + e.what());
    }
  }
  return cfg;
}

/// Strict decimal u64 (used for the seed override).
inline std::uint64_t parse_u64(const std::string & s, const std::string & what)
{
  std::uint64_t v = 0;
  const auto * b = s.data();
  const auto * e = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (s.empty() || ec != std::errc() || ptr != e) {
    throw ConfigError(what + ": '" + s + "' is not an unsigned 64-bit integer");
  }
  return v;
}

}  // namespace enkf

#endif  // ENKF__CONFIG_HPP_
