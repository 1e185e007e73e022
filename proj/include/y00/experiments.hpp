#pragma once

// Seeded Monte Carlo campaigns and their reports.
//
// Every trial draws from derive_seed(master_seed, point, trial), trials run
// on any number of workers, and results are merged in trial order, so a
// config always produces the same bytes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"
#include "y00/attack.hpp"
#include "y00/keystream.hpp"
#include "y00/mapping.hpp"
#include "y00/physical.hpp"
#include "y00/rng.hpp"

namespace y00 {

inline constexpr const char* kVersion = "y00lab 0.1.0";

struct SweepPoint {
  std::optional<std::uint32_t> m;
  std::optional<double> alpha;
  std::optional<std::size_t> n;
  std::optional<std::size_t> slots_per_trial;

  bool operator==(const SweepPoint&) const = default;
};

struct ExperimentConfig {
  std::string experiment = "immunity";  // profile | immunity | attack
  std::uint32_t m = 16;
  double alpha = 1.0;
  LfsrSpec spec1{17, {17, 3}};
  std::optional<LfsrSpec> spec2;
  std::string noise = "wedge";
  std::optional<std::array<double, 3>> neighbor_probs;  // p0, p1, p2
  std::size_t trials = 1;
  std::size_t slots_per_trial = 1000;
  std::uint64_t master_seed = 0;
  std::vector<SweepPoint> sweep;
  std::string attack = "ml";             // ml | fca
  std::optional<std::size_t> n;          // observed keystream bits (attack)
  int fca_max_iterations = 20;
  int fca_parity_rounds = 5;
  std::optional<double> fca_crossover;   // decoder prior; estimated when absent
};

inline SignalParams signal_params(const ExperimentConfig& cfg) { return SignalParams(cfg.alpha, cfg.m); }

inline NoiseModel noise_model(const ExperimentConfig& cfg) {
  if (cfg.noise == "discrete" && cfg.neighbor_probs) {
    const auto& p = *cfg.neighbor_probs;
    return NoiseModel::discrete(p[0], p[1], p[2]);
  }
  return NoiseModel::from_selector(cfg.noise, signal_params(cfg));
}

inline ExperimentConfig apply_point(ExperimentConfig cfg, const SweepPoint& pt) {
  if (pt.m) cfg.m = *pt.m;
  if (pt.alpha) cfg.alpha = *pt.alpha;
  if (pt.n) cfg.n = *pt.n;
  if (pt.slots_per_trial) cfg.slots_per_trial = *pt.slots_per_trial;
  cfg.sweep.clear();
  return cfg;
}

inline nlohmann::json to_json(const SweepPoint& pt) {
  nlohmann::json j = nlohmann::json::object();
  if (pt.m) j["m"] = *pt.m;
  if (pt.alpha) j["alpha"] = *pt.alpha;
  if (pt.n) j["n"] = *pt.n;
  if (pt.slots_per_trial) j["slots_per_trial"] = *pt.slots_per_trial;
  return j;
}

/// Full config echo; `keys_masked_by_noise` records the noise-masking
/// condition at the base point.
inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["experiment"] = cfg.experiment;
  j["m"] = cfg.m;
  j["alpha"] = cfg.alpha;
  j["spec1"] = cfg.spec1.to_string();
  j["spec2"] = cfg.spec2 ? nlohmann::json(cfg.spec2->to_string()) : nlohmann::json(nullptr);
  j["noise"] = cfg.noise;
  j["neighbor_probs"] = cfg.neighbor_probs ? nlohmann::json(*cfg.neighbor_probs) : nlohmann::json(nullptr);
  j["trials"] = cfg.trials;
  j["slots_per_trial"] = cfg.slots_per_trial;
  j["master_seed"] = cfg.master_seed;
  j["sweep"] = nlohmann::json::array();
  for (const auto& pt : cfg.sweep) j["sweep"].push_back(to_json(pt));
  j["attack"] = cfg.attack;
  j["n"] = cfg.n ? nlohmann::json(*cfg.n) : nlohmann::json(nullptr);
  j["fca_max_iterations"] = cfg.fca_max_iterations;
  j["fca_parity_rounds"] = cfg.fca_parity_rounds;
  j["fca_crossover"] = cfg.fca_crossover ? nlohmann::json(*cfg.fca_crossover) : nlohmann::json(nullptr);
  j["keys_masked_by_noise"] = keys_masked_by_noise(signal_params(cfg));
  return j;
}

// Metrics.

inline double round_g12(double v) {
  if (!std::isfinite(v)) return v;
  return std::stod(format_g12(v));
}

struct MetricRow {
  std::string point;
  std::string metric;
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t count = 0;

  bool operator==(const MetricRow& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return point == o.point && metric == o.metric && same(value, o.value) && same(std_error, o.std_error) &&
           count == o.count;
  }
};

struct MetricsTable {
  std::string name;
  std::vector<MetricRow> rows;

  /// Values are stored at the 12 significant digits they are reported with.
  void add(std::string point, std::string metric, double value, double std_error, std::uint64_t count) {
    rows.push_back({std::move(point), std::move(metric), round_g12(value), round_g12(std_error), count});
  }

  void add_rate(const std::string& point, const std::string& metric, std::uint64_t hits, std::uint64_t count) {
    const double v = count ? static_cast<double>(hits) / static_cast<double>(count) : 0.0;
    const double se = count ? std::sqrt(v * (1.0 - v) / static_cast<double>(count)) : 0.0;
    add(point, metric, v, se, count);
  }

  const MetricRow* find(std::string_view point, std::string_view metric) const {
    for (const auto& r : rows) {
      if (r.point == point && r.metric == metric) return &r;
    }
    return nullptr;
  }

  bool operator==(const MetricsTable&) const = default;
};

inline std::string point_label(const ExperimentConfig& cfg, bool with_n = false) {
  std::string s = "m=" + std::to_string(cfg.m) + ";alpha=" + format_g12(cfg.alpha);
  if (with_n && cfg.n) s += ";n=" + std::to_string(*cfg.n);
  return s;
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads, results
/// stored by index.
template <typename Result, typename Fn>
std::vector<Result> parallel_trials(std::size_t count, unsigned workers, Fn fn) {
  std::vector<Result> out(count);
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < count; i += workers) out[i] = fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

namespace detail {

struct TrialKeys {
  BitVector seed1, seed2;
  BitVector stream1, stream2;  // LFSR output bits consumed
  BitVector data;
};

inline BitVector random_register(Rng& rng, int degree) {
  BitVector reg;
  do {
    reg = rng.bits(static_cast<std::size_t>(degree));
  } while (std::none_of(reg.begin(), reg.end(), [](std::uint8_t b) { return b != 0; }));
  return reg;
}

inline TrialKeys draw_trial(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t slots) {
  Rng rng(seed);
  TrialKeys t;
  const auto w = static_cast<std::size_t>(log2_exact(cfg.m));
  t.seed1 = random_register(rng, cfg.spec1.degree());
  if (cfg.spec2) t.seed2 = random_register(rng, cfg.spec2->degree());
  t.data = rng.bits(slots);
  t.stream1 = lfsr_sequence(cfg.spec1, t.seed1, slots * w);
  if (cfg.spec2) t.stream2 = lfsr_sequence(*cfg.spec2, t.seed2, slots * w);
  return t;
}

/// One simulated observation: Eve's derived keystream against the truth.
struct Observation {
  TrialKeys keys;
  std::vector<SlotRecord> slots;
  DerivedKeystream derived;
};

inline Observation observe(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t slots) {
  const Constellation c(cfg.m);
  Observation ob;
  ob.keys = draw_trial(cfg, seed, slots);
  const auto rk1 = running_keys(ob.keys.stream1, cfg.m);
  const auto sent = cfg.spec2 ? transmit(ob.keys.data, rk1, running_keys(ob.keys.stream2, cfg.m), c)
                              : transmit(ob.keys.data, rk1, c);
  const auto noise = noise_model(cfg);
  ob.slots = measure(sent, noise, derive_seed(seed, 0x6d656173ull), c);
  const double window = noise.kind == NoiseKind::DiscreteNeighbor ? 0.0 : noise.sigma;
  ob.derived = derive_noisy_keystream(ob.slots, ob.keys.data, c, cfg.spec2.has_value(), window,
                                      std::span<const std::uint8_t>(ob.keys.stream1));
  return ob;
}

struct ErrorCounts {
  std::uint64_t symbols = 0, symbol_errors = 0;
  std::vector<std::uint64_t> bit_errors;  // index 0 = least significant

  void merge(const ErrorCounts& o) {
    symbols += o.symbols;
    symbol_errors += o.symbol_errors;
    if (bit_errors.size() < o.bit_errors.size()) bit_errors.resize(o.bit_errors.size(), 0);
    for (std::size_t b = 0; b < o.bit_errors.size(); ++b) bit_errors[b] += o.bit_errors[b];
  }
};

inline ErrorCounts count_errors(const Observation& ob, std::uint32_t m) {
  const int w = log2_exact(m);
  ErrorCounts ec;
  ec.bit_errors.assign(static_cast<std::size_t>(w), 0);
  ec.symbols = ob.slots.size();
  for (std::size_t s = 0; s < ob.slots.size(); ++s) {
    const std::uint32_t diff = (ob.derived.keys[s] - 1) ^ (ob.slots[s].running_key - 1);
    ec.symbol_errors += diff != 0;
    for (int b = 0; b < w; ++b) ec.bit_errors[static_cast<std::size_t>(b)] += (diff >> b) & 1u;
  }
  return ec;
}

inline std::vector<ExperimentConfig> sweep_points(const ExperimentConfig& cfg) {
  std::vector<ExperimentConfig> pts;
  if (cfg.sweep.empty()) {
    pts.push_back(apply_point(cfg, {}));
  } else {
    for (const auto& pt : cfg.sweep) pts.push_back(apply_point(cfg, pt));
  }
  return pts;
}

inline void add_bit_rates(MetricsTable& t, const std::string& point, const ErrorCounts& ec) {
  const std::uint64_t bits = ec.symbols * ec.bit_errors.size();
  std::uint64_t all = 0;
  for (auto e : ec.bit_errors) all += e;
  t.add_rate(point, "symbol_error_rate", ec.symbol_errors, ec.symbols);
  t.add_rate(point, "bit_error_rate", all, bits);
  for (std::size_t b = 0; b < ec.bit_errors.size(); ++b) {
    t.add_rate(point, "bit_error_rate_b" + std::to_string(b), ec.bit_errors[b], ec.symbols);
  }
}

}  // namespace detail

/// Per-bit-position error rates of Eve's keystream estimate under the
/// deterministic mapping. Bit 0 is the least significant bit of the symbol.
inline MetricsTable run_bit_position_profile(const ExperimentConfig& cfg, unsigned workers = 1) {
  if (cfg.spec2) throw Refusal("bit-position profile applies to the deterministic mapping; remove spec2");
  if (cfg.noise == "wedge") throw ConfigError("bit-position profile needs gaussian, discrete or noiseless noise");
  MetricsTable table{"bit_position_profile", {}};
  const auto points = detail::sweep_points(cfg);
  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto& pc = points[p];
    const auto counts = parallel_trials<detail::ErrorCounts>(pc.trials, workers, [&](std::size_t t) {
      return detail::count_errors(detail::observe(pc, derive_seed(pc.master_seed, p, t), pc.slots_per_trial), pc.m);
    });
    detail::ErrorCounts total;
    for (const auto& c : counts) total.merge(c);
    const auto label = point_label(pc);
    detail::add_bit_rates(table, label, total);
    if (pc.noise == "gaussian") {
      const auto predicted = predicted_keystream_bit_errors(signal_params(pc));
      for (std::size_t b = 0; b < predicted.size(); ++b) {
        table.add(label, "predicted_bit_error_rate_b" + std::to_string(b), predicted[b], 0.0, 0);
      }
    }
  }
  return table;
}

/// Eve's symbol and bit error rates under keyed randomization across M.
/// Points violating the noise-masking condition are flagged, not run.
inline MetricsTable run_immunity_curve(const ExperimentConfig& cfg, unsigned workers = 1) {
  if (!cfg.spec2) throw ConfigError("immunity curve needs spec2 (the pattern-selecting LFSR)");
  if (cfg.noise != "wedge" && cfg.noise != "gaussian") throw ConfigError("immunity curve needs wedge or gaussian noise");
  MetricsTable table{"immunity_curve", {}};
  const auto points = detail::sweep_points(cfg);
  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto& pc = points[p];
    const auto label = point_label(pc);
    if (!keys_masked_by_noise(signal_params(pc))) {
      table.add(label, "noise_masking_violated", 1.0, 0.0, 0);
      continue;
    }
    const auto counts = parallel_trials<detail::ErrorCounts>(pc.trials, workers, [&](std::size_t t) {
      return detail::count_errors(detail::observe(pc, derive_seed(pc.master_seed, p, t), pc.slots_per_trial), pc.m);
    });
    detail::ErrorCounts total;
    for (const auto& c : counts) total.merge(c);
    detail::add_bit_rates(table, label, total);

    const std::uint64_t bits = total.symbols * total.bit_errors.size();
    std::uint64_t all = 0;
    for (auto e : total.bit_errors) all += e;
    const double pb = static_cast<double>(all) / static_cast<double>(bits);
    table.add(label, "epsilon_hat", 0.5 - pb, std::sqrt(pb * (1 - pb) / static_cast<double>(bits)), bits);

    // Flatness of the per-position rates.
    const auto n = static_cast<double>(total.symbols);
    const auto [lo, hi] = std::minmax_element(total.bit_errors.begin(), total.bit_errors.end());
    const double rlo = static_cast<double>(*lo) / n, rhi = static_cast<double>(*hi) / n;
    const double combined = std::sqrt((rlo * (1 - rlo) + rhi * (1 - rhi)) / n);
    table.add(label, "position_spread", rhi - rlo, combined, total.symbols);
    table.add(label, "position_spread_z", combined > 0 ? (rhi - rlo) / combined : 0.0, 0.0, total.symbols);

    const double mm = pc.m;
    table.add(label, "symbol_error_rate_wedge_model", 1.0 - 1.0 / mm, 0.0, 0);
    table.add(label, "bit_error_rate_wedge_model", 0.5 * (1.0 - 1.0 / mm), 0.0, 0);
  }
  return table;
}

/// Crossover Eve can estimate herself from the public channel parameters by
/// simulating it with keys of her own choosing.
inline double calibrate_crossover(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t bits = 1 << 15) {
  const auto w = static_cast<std::size_t>(log2_exact(cfg.m));
  const auto ob = detail::observe(cfg, seed, (bits + w - 1) / w);
  return ob.derived.crossover->p;
}

/// Attack success versus observed keystream length, fresh keys per trial.
inline MetricsTable run_attack_sweep(const ExperimentConfig& cfg, unsigned workers = 1) {
  if (cfg.attack != "ml" && cfg.attack != "fca") throw ConfigError("attack must be ml or fca");
  MetricsTable table{"attack_sweep", {}};
  const auto points = detail::sweep_points(cfg);
  for (std::size_t p = 0; p < points.size(); ++p) {
    auto pc = points[p];
    const auto w = static_cast<std::size_t>(log2_exact(pc.m));
    const std::size_t n = pc.n.value_or(pc.slots_per_trial * w);
    pc.n = n;
    const auto label = point_label(pc, true);
    const double prior = pc.fca_crossover.value_or(
        pc.attack == "fca" ? calibrate_crossover(pc, derive_seed(pc.master_seed, p, 0xca11b7a7eull)) : 0.25);

    struct TrialResult {
      bool refused = false;
      bool success = false;
      double crossover = 0.0;
      std::uint64_t work = 0;
    };
    const auto results = parallel_trials<TrialResult>(pc.trials, workers, [&](std::size_t t) {
      TrialResult tr;
      auto ob = detail::observe(pc, derive_seed(pc.master_seed, p, t), (n + w - 1) / w);
      ob.derived.bits.resize(n);
      const auto truth = std::span<const std::uint8_t>(ob.keys.seed1);
      tr.crossover = estimate_crossover(ob.derived.bits, std::span<const std::uint8_t>(ob.keys.stream1).first(n)).p;
      try {
        AttackReport rep;
        if (pc.attack == "ml") {
          rep = ml_bruteforce(ob.derived.bits, pc.spec1, truth);
        } else {
          FcaConfig fc;
          fc.max_iterations = pc.fca_max_iterations;
          fc.parity_rounds = pc.fca_parity_rounds;
          fc.crossover = std::min(prior, 0.5 - 1e-6);
          rep = fast_correlation(ob.derived.bits, pc.spec1, fc, truth);
        }
        tr.success = rep.success;
        tr.work = rep.work_units;
      } catch (const Refusal&) {
        tr.refused = true;
      }
      return tr;
    });

    std::uint64_t refused = 0, wins = 0, runs = 0;
    double xsum = 0.0, xsq = 0.0, work = 0.0;
    for (const auto& r : results) {
      xsum += r.crossover;
      xsq += r.crossover * r.crossover;
      if (r.refused) {
        ++refused;
        continue;
      }
      ++runs;
      wins += r.success;
      work += static_cast<double>(r.work);
    }
    const double trials = static_cast<double>(results.size());
    const double pbar = xsum / trials;
    const double pvar = std::max(0.0, xsq / trials - pbar * pbar);
    table.add(label, "observation_bits", static_cast<double>(n), 0.0, results.size());
    table.add(label, "crossover", pbar, std::sqrt(pvar / trials), results.size());
    const auto f = feasibility(pc.spec1.degree(), pc.spec1.tap_count(), std::min(pbar, 0.5), static_cast<double>(n));
    table.add(label, "n0", f.n0, 0.0, results.size());
    table.add(label, "refused", static_cast<double>(refused), 0.0, results.size());
    if (runs > 0) {
      table.add_rate(label, "success_rate", wins, runs);
      table.add(label, "mean_work_units", work / static_cast<double>(runs), 0.0, runs);
    }
  }
  return table;
}

inline MetricsTable run_experiment(const ExperimentConfig& cfg, unsigned workers = 1) {
  if (cfg.experiment == "profile") return run_bit_position_profile(cfg, workers);
  if (cfg.experiment == "immunity") return run_immunity_curve(cfg, workers);
  if (cfg.experiment == "attack") return run_attack_sweep(cfg, workers);
  throw ConfigError("unknown experiment '" + cfg.experiment + "' (profile|immunity|attack)");
}

// Reports.

struct Report {
  nlohmann::json config = nlohmann::json::object();
  std::vector<MetricsTable> tables;
  std::uint64_t master_seed = 0;
  std::string version = kVersion;
  nlohmann::json result;  // optional free-form payload, e.g. a recovered state

  bool operator==(const Report&) const = default;
};

namespace detail {

inline nlohmann::json number_or_tag(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

/// Quoted only when it holds a comma, quote or line break.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

inline double number_from(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInfinity;
    if (s == "-inf") return -kInfinity;
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ArgumentError("report: bad numeric tag '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace detail

/// Stable serialization: sorted keys, values at 12 significant digits, LF
/// line endings, config echo and seed included.
inline std::string emit_report(const Report& report, std::string_view format) {
  if (report.tables.empty()) throw ArgumentError("emit_report: no tables");
  if (format == "json") {
    nlohmann::json j;
    j["config"] = report.config;
    j["provenance"] = {{"master_seed", report.master_seed}, {"version", report.version}};
    if (!report.result.is_null()) j["result"] = report.result;
    j["rows"] = nlohmann::json::array();
    for (const auto& t : report.tables) {
      for (const auto& r : t.rows) {
        j["rows"].push_back({{"table", t.name},
                             {"point", r.point},
                             {"metric", r.metric},
                             {"value", detail::number_or_tag(round_g12(r.value))},
                             {"std_error", detail::number_or_tag(round_g12(r.std_error))},
                             {"count", r.count}});
      }
    }
    return j.dump(2) + "\n";
  }
  if (format == "csv") {
    std::ostringstream os;
    os << "# config: " << report.config.dump() << "\n";
    os << "# master_seed: " << report.master_seed << "\n";
    os << "# version: " << report.version << "\n";
    if (!report.result.is_null()) os << "# result: " << report.result.dump() << "\n";
    os << "table,point,metric,value,std_error,count\n";
    for (const auto& t : report.tables) {
      for (const auto& r : t.rows) {
        os << detail::csv_field(t.name) << ',' << detail::csv_field(r.point) << ',' << detail::csv_field(r.metric) << ',' << format_g12(r.value) << ','
           << format_g12(r.std_error) << ',' << r.count << '\n';
      }
    }
    return os.str();
  }
  throw ArgumentError("unknown report format '" + std::string(format) + "' (csv|json)");
}

inline Report parse_report_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  Report rep;
  rep.config = j.at("config");
  rep.master_seed = j.at("provenance").at("master_seed").get<std::uint64_t>();
  rep.version = j.at("provenance").at("version").get<std::string>();
  if (j.contains("result")) rep.result = j.at("result");
  for (const auto& row : j.at("rows")) {
    const auto name = row.at("table").get<std::string>();
    auto it = std::find_if(rep.tables.begin(), rep.tables.end(), [&](const MetricsTable& t) { return t.name == name; });
    if (it == rep.tables.end()) {
      rep.tables.push_back({name, {}});
      it = rep.tables.end() - 1;
    }
    it->rows.push_back({row.at("point").get<std::string>(), row.at("metric").get<std::string>(),
                        detail::number_from(row.at("value")), detail::number_from(row.at("std_error")),
                        row.at("count").get<std::uint64_t>()});
  }
  return rep;
}

inline Report make_report(const ExperimentConfig& cfg, std::vector<MetricsTable> tables) {
  Report rep;
  rep.config = to_json(cfg);
  rep.tables = std::move(tables);
  rep.master_seed = cfg.master_seed;
  return rep;
}

}  // namespace y00
