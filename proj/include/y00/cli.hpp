#pragma once

// y00lab command-line front end.
//
// Exit status 0 on success, 1 on any validation failure, 2 when a guarded
// operation refuses (for example brute force above the degree guard).

#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "y00/attack.hpp"
#include "y00/config.hpp"
#include "y00/errors.hpp"
#include "y00/experiments.hpp"

namespace y00 {

namespace detail {

struct CliOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_path;
  std::string format = "json";
  unsigned workers = 1;

  // keystream
  std::string spec;
  std::string seed_hex;
  std::optional<std::size_t> n;

  // attack
  std::string method;

  // feasibility
  int key_bits = 0;
  double p = 0.0;
  int taps = 3;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::optional<ExperimentConfig> load_config(const CliOptions& o, std::ostream& err) {
  if (o.config_path.empty()) {
    if (!o.overrides.empty()) throw ConfigError("--set needs a --config file to override");
    return std::nullopt;
  }
  const auto res = parse_config(read_file(o.config_path), o.overrides);
  for (const auto& w : res.warnings) err << "warning: " << w << "\n";
  if (!res.ok()) {
    err << res.error_text();
    throw ConfigError(o.config_path + ": " + std::to_string(res.errors.size()) + " validation error(s)");
  }
  return res.config;
}

inline ExperimentConfig require_config(const std::optional<ExperimentConfig>& cfg, const char* sub) {
  if (!cfg) throw ConfigError(std::string(sub) + " needs --config");
  return *cfg;
}

inline std::string run_keystream(const CliOptions& o, const std::optional<ExperimentConfig>& cfg) {
  std::optional<LfsrSpec> spec;
  if (!o.spec.empty()) {
    spec = LfsrSpec::parse(o.spec);
  } else if (cfg) {
    spec = cfg->spec1;
  } else {
    throw ConfigError("keystream needs --spec or --config");
  }
  BitVector seed;
  if (!o.seed_hex.empty()) {
    seed = from_hex(o.seed_hex, static_cast<std::size_t>(spec->degree()));
  } else if (cfg) {
    Rng rng(derive_seed(cfg->master_seed, 0, 0));
    seed = random_register(rng, spec->degree());
  } else {
    throw ConfigError("keystream needs --seed or --config");
  }
  const std::size_t n = o.n.value_or(cfg && cfg->n ? *cfg->n : static_cast<std::size_t>(spec->degree()));
  if (n == 0) throw ArgumentError("--n must be at least 1");
  const auto bits = lfsr_sequence(*spec, seed, n);

  Report rep;
  rep.config = {{"spec", spec->to_string()}, {"seed", to_hex(seed)}, {"n", n}};
  if (cfg) rep.config["from_config"] = to_json(*cfg);
  rep.master_seed = cfg ? cfg->master_seed : 0;
  rep.result = {{"keystream", to_hex(bits)}};
  MetricsTable t{"keystream", {}};
  const std::string point = "spec=" + spec->to_string();
  t.add(point, "length", static_cast<double>(n), 0.0, n);
  t.add(point, "linear_complexity", linear_complexity(bits), 0.0, n);
  rep.tables.push_back(std::move(t));
  return emit_report(rep, o.format);
}

inline std::string run_simulate(const CliOptions& o, const ExperimentConfig& cfg) {
  const auto ob = observe(cfg, derive_seed(cfg.master_seed, 0, 0), cfg.slots_per_trial);
  if (o.format == "csv") {
    std::ostringstream os;
    os << "# config: " << to_json(cfg).dump() << "\n";
    os << "# master_seed: " << cfg.master_seed << "\n";
    os << "# version: " << kVersion << "\n";
    write_slot_csv(os, ob.slots);
    return os.str();
  }
  if (o.format != "json") throw ArgumentError("unknown report format '" + o.format + "' (csv|json)");
  nlohmann::json j;
  j["config"] = to_json(cfg);
  j["provenance"] = {{"master_seed", cfg.master_seed}, {"version", kVersion}};
  j["slots"] = nlohmann::json::array();
  for (const auto& s : ob.slots) {
    j["slots"].push_back({{"index", s.index},
                          {"data_bit", s.data_bit},
                          {"running_key", s.running_key},
                          {"pattern_index", s.pattern_index},
                          {"true_phase", round_g12(s.true_phase)},
                          {"measured_phase", round_g12(*s.measured_phase)}});
  }
  return j.dump(2) + "\n";
}

inline std::string run_attack(const CliOptions& o, ExperimentConfig cfg) {
  const std::string method = o.method.empty() ? cfg.attack : o.method;
  const auto w = static_cast<std::size_t>(log2_exact(cfg.m));
  const Constellation c(cfg.m);
  const std::uint64_t seed = derive_seed(cfg.master_seed, 0, 0);
  MetricsTable t{"attack", {}};
  Report rep;

  if (method == "equivocation") {
    const auto ob = observe(cfg, seed, cfg.slots_per_trial);
    const auto curve = key_equivocation(ob.slots, ob.keys.data, cfg.spec1, cfg.spec2, noise_model(cfg), c);
    for (std::size_t n = 0; n < curve.entropy_bits.size(); ++n) {
      t.add("slots=" + std::to_string(n), "entropy_bits", curve.entropy_bits[n], 0.0, n);
    }
    rep.result = {{"method", "equivocation"},
                  {"unicity_slots", curve.unicity_slots ? nlohmann::json(*curve.unicity_slots) : nlohmann::json(nullptr)}};
  } else if (method == "ml" || method == "fca") {
    const std::size_t n = cfg.n.value_or(cfg.slots_per_trial * w);
    auto ob = observe(cfg, seed, (n + w - 1) / w);
    ob.derived.bits.resize(n);
    const auto truth = std::span<const std::uint8_t>(ob.keys.seed1);
    const auto p = estimate_crossover(ob.derived.bits, std::span<const std::uint8_t>(ob.keys.stream1).first(n));
    AttackReport ar;
    if (method == "ml") {
      ar = ml_bruteforce(ob.derived.bits, cfg.spec1, truth);
    } else {
      FcaConfig fc;
      fc.max_iterations = cfg.fca_max_iterations;
      fc.parity_rounds = cfg.fca_parity_rounds;
      fc.crossover = std::min(cfg.fca_crossover.value_or(calibrate_crossover(cfg, derive_seed(cfg.master_seed, 0, 0xca11b7a7eull))),
                              0.5 - 1e-6);
      ar = fast_correlation(ob.derived.bits, cfg.spec1, fc, truth);
    }
    cfg.n = n;
    const auto point = point_label(cfg, true);
    const auto f = feasibility(cfg.spec1.degree(), cfg.spec1.tap_count(), p.p, static_cast<double>(n));
    t.add(point, "success", ar.success ? 1.0 : 0.0, 0.0, 1);
    t.add(point, "crossover", p.p, std::sqrt(p.p * (1 - p.p) / static_cast<double>(n)), n);
    t.add(point, "n0", f.n0, 0.0, n);
    t.add(point, "residual_mismatch", ar.residual_mismatch, 0.0, n);
    t.add(point, "work_units", static_cast<double>(ar.work_units), 0.0, 1);
    t.add(point, "iterations_used", static_cast<double>(ar.iterations_used), 0.0, 1);
    t.add(point, "parity_checks_used", static_cast<double>(ar.parity_checks_used), 0.0, 1);
    rep.result = to_json(ar);
    rep.result["true_state"] = to_hex(ob.keys.seed1);
  } else {
    throw ArgumentError("unknown attack method '" + method + "' (ml|fca|equivocation)");
  }
  auto echo = to_json(cfg);
  echo["method"] = method;
  rep.config = echo;
  rep.master_seed = cfg.master_seed;
  rep.tables.push_back(std::move(t));
  return emit_report(rep, o.format);
}

inline std::string run_feasibility(const CliOptions& o) {
  const auto f = o.n ? feasibility(o.key_bits, o.taps, o.p, static_cast<double>(*o.n))
                     : feasibility(o.key_bits, o.taps, o.p);
  Report rep;
  rep.config = {{"key_bits", o.key_bits}, {"p", o.p}, {"taps", o.taps}};
  if (o.n) rep.config["n"] = *o.n;
  MetricsTable t{"feasibility", {}};
  const std::string point = "key_bits=" + std::to_string(o.key_bits) + ";p=" + format_g12(o.p) +
                            ";taps=" + std::to_string(o.taps);
  t.add(point, "capacity", f.capacity, 0.0, 0);
  t.add(point, "n0", f.n0, 0.0, 0);
  t.add(point, "required_n", f.required_n, 0.0, 0);
  t.add(point, "log2_complexity", f.log2_complexity, 0.0, 0);
  if (f.log2_complexity_observed) t.add(point, "log2_complexity_observed", *f.log2_complexity_observed, 0.0, 0);
  rep.tables.push_back(std::move(t));
  return emit_report(rep, o.format);
}

inline std::string run_experiment_cmd(const CliOptions& o, const ExperimentConfig& cfg) {
  return emit_report(make_report(cfg, {run_experiment(cfg, o.workers)}), o.format);
}

}  // namespace detail

/// Parses `args` (without the program name) and runs one subcommand.
inline int dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Y-00 quantum stream cipher cryptanalysis lab", "y00lab"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  detail::CliOptions o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON config file");
    sub->add_option("--set", o.overrides, "override a config field, key=value (repeatable)");
    sub->add_option("--output", o.output_path, "write the report here instead of standard output");
    sub->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--workers", o.workers, "worker threads for trials")->check(CLI::Range(1u, 256u));
  };

  auto* keystream = app.add_subcommand("keystream", "LFSR output bits as hex");
  common(keystream);
  keystream->add_option("--spec", o.spec, "degree:taps, e.g. 17:17,3");
  keystream->add_option("--seed", o.seed_hex, "initial register as hex, cell 0 first");
  keystream->add_option("--n", o.n, "number of output bits");

  auto* simulate = app.add_subcommand("simulate", "transmit and measure one slot trace");
  common(simulate);

  auto* attack = app.add_subcommand("attack", "recover the basis LFSR state from a simulated observation");
  common(attack);
  attack->add_option("--method", o.method, "ml, fca or equivocation")->check(CLI::IsMember({"ml", "fca", "equivocation"}));

  auto* feas = app.add_subcommand("feasibility", "critical length and attack complexity");
  common(feas);
  feas->add_option("--key-bits", o.key_bits, "key length in bits")->required();
  feas->add_option("--p", o.p, "keystream crossover probability")->required();
  feas->add_option("--taps", o.taps, "feedback tap count t");
  feas->add_option("--n", o.n, "observed length for the observed-length variant");

  auto* experiment = app.add_subcommand("experiment", "run the configured Monte Carlo campaign");
  common(experiment);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    const auto cfg = detail::load_config(o, err);
    std::string text;
    if (keystream->parsed()) {
      text = detail::run_keystream(o, cfg);
    } else if (simulate->parsed()) {
      text = detail::run_simulate(o, detail::require_config(cfg, "simulate"));
    } else if (attack->parsed()) {
      text = detail::run_attack(o, detail::require_config(cfg, "attack"));
    } else if (feas->parsed()) {
      if (cfg) err << "warning: feasibility ignores --config\n";
      text = detail::run_feasibility(o);
    } else {
      text = detail::run_experiment_cmd(o, detail::require_config(cfg, "experiment"));
    }
    if (o.output_path.empty()) {
      out << text;
    } else {
      std::ofstream file(o.output_path, std::ios::binary);
      if (!file) throw ArgumentError("cannot write '" + o.output_path + "'");
      file << text;
      if (!file.flush()) throw ArgumentError("write to '" + o.output_path + "' failed");
    }
    return 0;
  } catch (const Refusal& e) {
    err << "refused: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace y00
