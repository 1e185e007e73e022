#pragma once

// ExperimentConfig from JSON text, with every validation failure collected.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "y00/errors.hpp"
#include "y00/experiments.hpp"

namespace y00 {

inline const std::set<std::string>& config_fields() {
  static const std::set<std::string> fields{
      "experiment", "m",       "alpha",  "spec1", "spec2",           "noise",          "neighbor_probs",
      "trials",     "slots_per_trial",   "master_seed", "sweep",   "attack", "n", "fca_max_iterations",
      "fca_parity_rounds", "fca_crossover"};
  return fields;
}

inline const std::set<std::string>& sweep_fields() {
  static const std::set<std::string> fields{"m", "alpha", "n", "slots_per_trial"};
  return fields;
}

struct ConfigParseResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const noexcept { return config.has_value(); }

  std::string error_text() const {
    std::string s;
    for (const auto& e : errors) s += "error: " + e + "\n";
    return s;
  }
};

/// Applies "key=value" to a parsed config object. The value is read as JSON
/// when it parses, otherwise as a string.
inline void apply_override(nlohmann::json& obj, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  if (!config_fields().contains(key)) throw ConfigError("override names unknown config field '" + key + "'");
  auto value = nlohmann::json::parse(raw, nullptr, false);
  obj[key] = value.is_discarded() ? nlohmann::json(raw) : value;
}

namespace detail {

class FieldReader {
 public:
  FieldReader(const nlohmann::json& obj, std::vector<std::string>& errors, std::string prefix = "")
      : obj_(obj), errors_(errors), prefix_(std::move(prefix)) {}

  bool has(const std::string& key) const { return obj_.contains(key) && !obj_.at(key).is_null(); }

  void fail(const std::string& key, const std::string& msg) { errors_.push_back("field '" + prefix_ + key + "': " + msg); }

  std::optional<std::uint64_t> unsigned_int(const std::string& key, bool required) {
    if (!has(key)) {
      if (required) fail(key, "required");
      return std::nullopt;
    }
    const auto& v = obj_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
      fail(key, "must be non-negative, got " + v.dump());
    } else if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>() && v.get<double>() >= 0 &&
               v.get<double>() < 9.0e15) {
      return static_cast<std::uint64_t>(v.get<double>());
    } else {
      fail(key, "must be an integer, got " + v.dump());
    }
    return std::nullopt;
  }

  std::optional<double> number(const std::string& key, bool required) {
    if (!has(key)) {
      if (required) fail(key, "required");
      return std::nullopt;
    }
    const auto& v = obj_.at(key);
    if (!v.is_number()) {
      fail(key, "must be a number, got " + v.dump());
      return std::nullopt;
    }
    return v.get<double>();
  }

  std::optional<std::string> string(const std::string& key, bool required) {
    if (!has(key)) {
      if (required) fail(key, "required");
      return std::nullopt;
    }
    const auto& v = obj_.at(key);
    if (!v.is_string()) {
      fail(key, "must be a string, got " + v.dump());
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  std::optional<std::uint32_t> constellation_size(const std::string& key, bool required) {
    const auto v = unsigned_int(key, required);
    if (!v) return std::nullopt;
    if (!is_power_of_two(*v) || *v > 65536) {
      fail(key, "M must be a power of two in 2..65536, got " + std::to_string(*v));
      return std::nullopt;
    }
    return static_cast<std::uint32_t>(*v);
  }

  std::optional<double> amplitude(const std::string& key, bool required) {
    const auto v = number(key, required);
    if (v && !(*v > 0.0 && std::isfinite(*v))) {
      fail(key, "alpha must be positive");
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::size_t> positive_count(const std::string& key, bool required) {
    const auto v = unsigned_int(key, required);
    if (v && *v < 1) {
      fail(key, "must be at least 1");
      return std::nullopt;
    }
    return v;
  }

  std::optional<LfsrSpec> spec(const std::string& key, bool required) {
    const auto s = string(key, required);
    if (!s) return std::nullopt;
    try {
      return LfsrSpec::parse(*s);
    } catch (const ConfigError& e) {
      fail(key, e.what());
      return std::nullopt;
    }
  }

 private:
  const nlohmann::json& obj_;
  std::vector<std::string>& errors_;
  std::string prefix_;
};

inline void check_choice(FieldReader& r, const std::string& key, const std::optional<std::string>& v,
                         std::initializer_list<const char*> choices) {
  if (!v) return;
  for (const char* c : choices) {
    if (*v == c) return;
  }
  std::string list;
  for (const char* c : choices) list += (list.empty() ? "" : "|") + std::string(c);
  r.fail(key, "unknown value '" + *v + "' (" + list + ")");
}

inline std::string masking_warning(std::uint32_t m, double alpha, const std::string& where) {
  return "noise-masking condition violated" + where + ": alpha=" + format_g12(alpha) + " >= M/(2 pi)=" +
         format_g12(m / kTwoPi) + " for M=" + std::to_string(m) + "; keys are resolvable through the wedge";
}

}  // namespace detail

/// Validates a config object; `overrides` ("key=value") are applied after
/// the JSON parse and before validation.
inline ConfigParseResult parse_config(std::string_view text, std::span<const std::string> overrides = {}) {
  ConfigParseResult res;
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Report the line and column of the failing byte.
    std::size_t line = 1, col = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    res.errors.push_back("syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                         " (byte " + std::to_string(e.byte) + "): " + e.what());
    return res;
  }
  if (!obj.is_object()) {
    res.errors.push_back("config must be a JSON object");
    return res;
  }
  for (const auto& o : overrides) {
    try {
      apply_override(obj, o);
    } catch (const ConfigError& e) {
      res.errors.push_back(e.what());
    }
  }
  for (const auto& item : obj.items()) {
    if (!config_fields().contains(item.key())) res.errors.push_back("unknown field '" + item.key() + "'");
  }

  detail::FieldReader r(obj, res.errors);
  ExperimentConfig cfg;
  const auto experiment = r.string("experiment", false);
  detail::check_choice(r, "experiment", experiment, {"profile", "immunity", "attack"});
  const auto m = r.constellation_size("m", true);
  const auto alpha = r.amplitude("alpha", true);
  const auto spec1 = r.spec("spec1", true);
  const auto spec2 = r.spec("spec2", false);
  const auto noise = r.string("noise", true);
  detail::check_choice(r, "noise", noise, {"noiseless", "gaussian", "wedge", "discrete"});
  const auto trials = r.positive_count("trials", true);
  const auto slots = r.positive_count("slots_per_trial", true);
  const auto seed = r.unsigned_int("master_seed", true);
  const auto attack = r.string("attack", false);
  detail::check_choice(r, "attack", attack, {"ml", "fca"});
  const auto n = r.positive_count("n", false);
  const auto max_it = r.unsigned_int("fca_max_iterations", false);
  const auto rounds = r.positive_count("fca_parity_rounds", false);
  const auto crossover = r.number("fca_crossover", false);
  if (crossover && !(*crossover >= 0.0 && *crossover < 0.5)) r.fail("fca_crossover", "must lie in [0, 1/2)");

  std::optional<std::array<double, 3>> probs;
  if (r.has("neighbor_probs")) {
    const auto& v = obj.at("neighbor_probs");
    if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](const auto& x) { return x.is_number(); })) {
      r.fail("neighbor_probs", "must be an array of three numbers [p0, p1, p2]");
    } else {
      std::array<double, 3> p{v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
      try {
        NoiseModel::discrete(p[0], p[1], p[2]);
        probs = p;
      } catch (const ConfigError& e) {
        r.fail("neighbor_probs", e.what());
      }
    }
  }

  std::vector<SweepPoint> sweep;
  if (r.has("sweep")) {
    const auto& v = obj.at("sweep");
    if (!v.is_array()) {
      r.fail("sweep", "must be an array of override objects");
    } else {
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string where = "sweep[" + std::to_string(i) + "].";
        if (!v[i].is_object()) {
          res.errors.push_back("field '" + where.substr(0, where.size() - 1) + "': must be an object");
          continue;
        }
        for (const auto& item : v[i].items()) {
          if (!sweep_fields().contains(item.key())) {
            res.errors.push_back("field '" + where + item.key() + "': not a sweepable parameter (m|alpha|n|slots_per_trial)");
          }
        }
        detail::FieldReader pr(v[i], res.errors, where);
        SweepPoint pt;
        pt.m = pr.constellation_size("m", false);
        pt.alpha = pr.amplitude("alpha", false);
        pt.n = pr.positive_count("n", false);
        pt.slots_per_trial = pr.positive_count("slots_per_trial", false);
        sweep.push_back(pt);
      }
    }
  }

  if (!res.errors.empty()) return res;

  cfg.experiment = experiment.value_or(cfg.experiment);
  cfg.m = *m;
  cfg.alpha = *alpha;
  cfg.spec1 = *spec1;
  cfg.spec2 = spec2;
  cfg.noise = *noise;
  cfg.neighbor_probs = probs;
  cfg.trials = *trials;
  cfg.slots_per_trial = *slots;
  cfg.master_seed = *seed;
  cfg.sweep = std::move(sweep);
  cfg.attack = attack.value_or(cfg.attack);
  cfg.n = n;
  if (max_it) cfg.fca_max_iterations = static_cast<int>(*max_it);
  if (rounds) cfg.fca_parity_rounds = static_cast<int>(*rounds);
  cfg.fca_crossover = crossover;

  if (cfg.experiment == "immunity" && cfg.noise == "wedge") {
    if (!keys_masked_by_noise(SignalParams(cfg.alpha, cfg.m))) {
      res.warnings.push_back(detail::masking_warning(cfg.m, cfg.alpha, ""));
    }
    for (std::size_t i = 0; i < cfg.sweep.size(); ++i) {
      const auto pc = apply_point(cfg, cfg.sweep[i]);
      if (!keys_masked_by_noise(SignalParams(pc.alpha, pc.m))) {
        res.warnings.push_back(detail::masking_warning(pc.m, pc.alpha, " at sweep[" + std::to_string(i) + "]"));
      }
    }
  }
  res.config = std::move(cfg);
  return res;
}

}  // namespace y00
