#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "apt/errors.hpp"
#include "apt/io.hpp"
#include "apt/ising.hpp"
#include "apt/replicate.hpp"
#include "apt/sampler.hpp"
#include "apt/target.hpp"

namespace apt {

// ---------------------------------------------------------------------------
// Experiment configuration: a target description plus sampler settings,
// read from and written to flat "key = value" text.

struct ExperimentConfig {
  // mixture | normal | ising
  std::string target = "mixture";

  // mixture: component file (empty selects the bundled 20-component file),
  // component variance, dimension (means are padded with zeros).
  std::string mixture_file;
  double variance = 0.01;
  std::size_t dim = 2;

  // ising: observed image file (empty selects the synthetic image of the
  // given size) and the posterior weights.
  std::string image;
  std::size_t image_size = 40;
  double ising_alpha = 1.0;
  double ising_beta = 0.7;

  SamplerConfig sampler;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer (got '" + v + "')");
  }
  if (used != v.size()) throw ConfigError(key + ": expected a non-negative integer (got '" + v + "')");
  return static_cast<std::size_t>(x);
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const RuntimeError&) {
    throw ConfigError(key + ": expected a number (got '" + v + "')");
  }
}

inline bool parse_flag(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false (got '" + v + "')");
}

inline std::string flag_text(bool b) { return b ? "true" : "false"; }

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

inline const std::vector<ConfigKey>& config_keys() {
  using C = ExperimentConfig;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto count = [&](std::string name, std::string help, std::size_t SamplerConfig::*field) {
      k.push_back({name, std::move(help),
                   [name, field](C& c, const std::string& v) { c.sampler.*field = parse_count(name, v); },
                   [field](const C& c) { return std::to_string(c.sampler.*field); }});
    };
    auto real = [&](std::string name, std::string help, std::function<double&(C&)> ref) {
      k.push_back({name, std::move(help), [name, ref](C& c, const std::string& v) { ref(c) = parse_real(name, v); },
                   [ref](const C& c) { return format_double(ref(const_cast<C&>(c))); }});
    };
    auto flag = [&](std::string name, std::string help, std::function<bool&(C&)> ref) {
      k.push_back({name, std::move(help), [name, ref](C& c, const std::string& v) { ref(c) = parse_flag(name, v); },
                   [ref](const C& c) { return flag_text(ref(const_cast<C&>(c))); }});
    };

    k.push_back({"target", "mixture | normal | ising",
                 [](C& c, const std::string& v) {
                   if (v != "mixture" && v != "normal" && v != "ising")
                     throw ConfigError("target: expected one of mixture, normal, ising (got '" + v + "')");
                   c.target = v;
                 },
                 [](const C& c) { return c.target; }});
    k.push_back({"mixture_file", "mixture component file; empty for the bundled file",
                 [](C& c, const std::string& v) { c.mixture_file = v; }, [](const C& c) { return c.mixture_file; }});
    real("variance", "mixture component variance", [](C& c) -> double& { return c.variance; });
    k.push_back({"dim", "state dimension (mixture means are zero-padded)",
                 [](C& c, const std::string& v) { c.dim = parse_count("dim", v); },
                 [](const C& c) { return std::to_string(c.dim); }});
    k.push_back({"image", "observed binary image; empty for the synthetic image",
                 [](C& c, const std::string& v) { c.image = v; }, [](const C& c) { return c.image; }});
    k.push_back({"image_size", "side length of the synthetic image",
                 [](C& c, const std::string& v) { c.image_size = parse_count("image_size", v); },
                 [](const C& c) { return std::to_string(c.image_size); }});
    real("ising_alpha", "weight of agreement with the observed image", [](C& c) -> double& { return c.ising_alpha; });
    real("ising_beta", "weight of neighbour agreement", [](C& c) -> double& { return c.ising_beta; });

    count("levels", "number of temperature levels L", &SamplerConfig::levels);
    count("iters", "iterations N", &SamplerConfig::iterations);
    k.push_back({"burnin", "burn-in iterations B (default N/2)",
                 [](C& c, const std::string& v) { c.sampler.burn_in = parse_count("burnin", v); },
                 [](const C& c) { return std::to_string(c.sampler.effective_burn_in()); }});
    k.push_back({"seed", "random seed",
                 [](C& c, const std::string& v) { c.sampler.seed = parse_count("seed", v); },
                 [](const C& c) { return std::to_string(c.sampler.seed); }});
    count("thin", "trace thinning interval", &SamplerConfig::thin);
    k.push_back({"adaptation", "cov | covg | ram",
                 [](C& c, const std::string& v) { c.sampler.adapt.mode = parse_adapt_mode(v); },
                 [](const C& c) { return std::string(to_string(c.sampler.adapt.mode)); }});
    k.push_back({"ram_direction", "increment | noise",
                 [](C& c, const std::string& v) {
                   if (v == "increment") c.sampler.adapt.ram_direction = RamDirection::Increment;
                   else if (v == "noise") c.sampler.adapt.ram_direction = RamDirection::Noise;
                   else throw ConfigError("ram_direction: expected increment or noise (got '" + v + "')");
                 },
                 [](const C& c) {
                   return std::string(c.sampler.adapt.ram_direction == RamDirection::Noise ? "noise" : "increment");
                 }});
    real("alpha_star", "target acceptance rate", [](C& c) -> double& { return c.sampler.adapt.alpha_star; });
    real("eps_clamp", "covariance eigenvalue clamp", [](C& c) -> double& { return c.sampler.adapt.eps_clamp; });
    real("t_lo", "lower bound of the proposal log-scale", [](C& c) -> double& { return c.sampler.adapt.log_scale_lo; });
    real("t_hi", "upper bound of the proposal log-scale", [](C& c) -> double& { return c.sampler.adapt.log_scale_hi; });
    for (int i = 0; i < 3; ++i) {
      const std::string s = std::to_string(i + 1);
      real("c" + s, "step size constant " + s, [i](C& c) -> double& { return c.sampler.schedule.c[i]; });
      real("xi" + s, "step size exponent " + s, [i](C& c) -> double& { return c.sampler.schedule.xi[i]; });
    }
    flag("ram_scaled_step", "use min(ram_cap, d (n+1)^-xi2) for the RAM step size",
         [](C& c) -> bool& { return c.sampler.schedule.ram_dimension_scaled; });
    real("ram_cap", "cap of the dimension-scaled RAM step size", [](C& c) -> double& { return c.sampler.schedule.ram_cap; });
    real("rho_lo", "lower projection bound of the temperature parameters",
         [](C& c) -> double& { return c.sampler.rho_bounds.lo; });
    real("rho_hi", "upper projection bound of the temperature parameters",
         [](C& c) -> double& { return c.sampler.rho_bounds.hi; });
    real("rho_init", "initial temperature parameter", [](C& c) -> double& { return c.sampler.rho_init; });
    real("t_init", "initial proposal log-scale", [](C& c) -> double& { return c.sampler.log_scale_init; });
    flag("geometric", "share one temperature parameter across pairs", [](C& c) -> bool& { return c.sampler.geometric_ladder; });
    flag("freeze_after_burnin", "stop all adaptation after burn-in",
         [](C& c) -> bool& { return c.sampler.freeze_after_burn_in; });
    real("init_lo", "initial states: lower corner of the uniform box", [](C& c) -> double& { return c.sampler.init_lo; });
    real("init_hi", "initial states: upper corner of the uniform box", [](C& c) -> double& { return c.sampler.init_hi; });
    count("flips_per_iter", "single-site flips per level per iteration (lattice targets)",
          &SamplerConfig::flips_per_iteration);
    flag("record_state", "include the level-1 state in trace rows", [](C& c) -> bool& { return c.sampler.record_state; });
    return k;
  }();
  return keys;
}

}  // namespace detail

/// Apply one key. Unknown keys and malformed values raise ConfigError naming
/// the key.
inline void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  for (const auto& k : detail::config_keys())
    if (k.name == key) {
      k.set(config, value);
      return;
    }
  throw ConfigError(key + ": unknown config key");
}

/// Apply "key = value" lines on top of `base`. '#' starts a comment.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {}) {
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!seen.insert(key).second) throw ConfigError(key + ": given more than once");
    set_config_value(base, key, value);
  }
  return base;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config not found: " + path.string());
  return parse_config(in, std::move(base));
}

/// Every key with its resolved value, one per line, in a fixed order.
inline void write_config(std::ostream& out, const ExperimentConfig& config) {
  for (const auto& k : detail::config_keys()) out << k.name << " = " << k.get(config) << '\n';
}

/// Key names with one-line descriptions.
inline std::vector<std::pair<std::string, std::string>> config_key_help() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : detail::config_keys()) out.emplace_back(k.name, k.help);
  return out;
}

inline void validate(const ExperimentConfig& config) {
  if (config.dim < 1) throw ConfigError("dim: must be >= 1");
  if (!(config.variance > 0.0)) throw ConfigError("variance: must be positive");
  if (config.target == "ising" && config.image.empty() && config.image_size < 2)
    throw ConfigError("image_size: must be >= 2");
  if (config.target == "ising" && !(config.ising_alpha >= 0.0)) throw ConfigError("ising_alpha: must be >= 0");
  config.sampler.validate();
}

// ---------------------------------------------------------------------------
// Target construction.

using AnyTarget = std::variant<GaussianMixture, IsingPosterior>;

inline GaussianMixtureSpec mixture_spec(const ExperimentConfig& config) {
  if (config.target == "normal") {
    auto spec = standard_normal_spec(config.dim);
    spec.variance = config.variance;
    return spec;
  }
  GaussianMixtureSpec spec;
  if (config.mixture_file.empty()) {
    spec = canonical_mixture(config.variance, config.dim);
  } else {
    spec = load_mixture(config.mixture_file);
    spec.variance = config.variance;
    if (config.dim > spec.dim()) spec = spec.padded(config.dim);
  }
  if (spec.dim() != config.dim)
    throw ConfigError("dim: mixture means have dimension " + std::to_string(spec.dim()) + ", config asks for " +
                      std::to_string(config.dim));
  spec.validate();
  return spec;
}

inline IsingPosteriorSpec ising_spec(const ExperimentConfig& config) {
  IsingPosteriorSpec spec;
  spec.observed = config.image.empty() ? synthetic_image(config.image_size) : load_image(config.image);
  spec.alpha = config.ising_alpha;
  spec.beta = config.ising_beta;
  spec.validate();
  return spec;
}

inline AnyTarget make_target(const ExperimentConfig& config) {
  if (config.target == "ising") return IsingPosterior(ising_spec(config));
  return GaussianMixture(mixture_spec(config));
}

inline std::optional<TrueValues> known_truth(const ExperimentConfig& config) {
  if (config.target == "ising") return std::nullopt;
  return true_values(mixture_spec(config));
}

// ---------------------------------------------------------------------------
// Published protocols.

/// The three random-walk adaptations in display order.
struct ModeColumn {
  AdaptMode mode;
  const char* label;
};
inline constexpr ModeColumn kModeColumns[] = {
    {AdaptMode::Cov, "Cov"}, {AdaptMode::CovGlobal, "Cov(g)"}, {AdaptMode::Ram, "RAM"}};

/// Step-size and initial-value settings common to all protocols. RAM uses
/// the dimension-scaled step size.
inline ExperimentConfig protocol_base(AdaptMode mode) {
  ExperimentConfig c;
  c.sampler.adapt.mode = mode;
  c.sampler.schedule.ram_dimension_scaled = mode == AdaptMode::Ram;
  c.sampler.record_state = false;
  return c;
}

/// Two-dimensional mixture, 5 levels, 5000 iterations, 2500 burn-in.
inline ExperimentConfig table1_config(AdaptMode mode) {
  ExperimentConfig c = protocol_base(mode);
  c.sampler.levels = 5;
  c.sampler.iterations = 5000;
  c.sampler.burn_in = 2500;
  return c;
}

/// Two-dimensional mixture, 3 levels, 8333 iterations, 4167 burn-in.
inline ExperimentConfig table2_config(AdaptMode mode) {
  ExperimentConfig c = protocol_base(mode);
  c.sampler.levels = 3;
  c.sampler.iterations = 8333;
  c.sampler.burn_in = 4167;
  return c;
}

/// Narrow eight-dimensional mixture, 8 levels, burn-in half of N.
inline ExperimentConfig table3_config(AdaptMode mode, std::size_t iterations) {
  ExperimentConfig c = protocol_base(mode);
  c.variance = 0.001;
  c.dim = 8;
  c.sampler.levels = 8;
  c.sampler.iterations = iterations;
  c.sampler.burn_in = iterations / 2;
  return c;
}

inline const std::vector<std::size_t>& table3_default_sizes() {
  static const std::vector<std::size_t> sizes{10'000, 20'000, 40'000, 80'000, 160'000};
  return sizes;
}

/// 40x40 binary image, 10 levels, 100000 iterations. Each iteration makes
/// one sweep worth of single-site flips per level, and the temperature
/// parameters are capped at 3 so that a level pushed to a numerically flat
/// temperature early on can recover within the run.
inline ExperimentConfig ising_config() {
  ExperimentConfig c;
  c.target = "ising";
  c.image_size = 40;
  c.ising_alpha = 1.0;
  c.ising_beta = 0.7;
  c.sampler.levels = 10;
  c.sampler.iterations = 100'000;
  c.sampler.burn_in = 50'000;
  c.sampler.flips_per_iteration = c.image_size * c.image_size;
  c.sampler.rho_bounds.hi = 3.0;
  c.sampler.record_state = false;
  return c;
}

// ---------------------------------------------------------------------------
// Table layout.

namespace detail {

inline std::string fixed3(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

}  // namespace detail

/// Mean (std) table with a true-value row, columns E[X1] E[X2] E[X1^2] E[X2^2]
/// (or as many coordinates as the target has, up to 4 of each).
inline void write_moment_table(std::ostream& out, const std::string& title,
                               const std::vector<std::pair<std::string, ReplicationTable>>& rows,
                               const TrueValues& truth) {
  const std::size_t d = std::min<std::size_t>(truth.mean.size(), 4);
  std::vector<std::string> names;
  for (std::size_t i = 1; i <= d; ++i) names.push_back("E[X" + std::to_string(i) + "]");
  for (std::size_t i = 1; i <= d; ++i) names.push_back("E[X" + std::to_string(i) + "^2]");
  constexpr std::size_t label_w = 12, col_w = 18;
  out << title << '\n';
  out << detail::pad("", label_w);
  for (const auto& n : names) out << detail::pad(n, col_w);
  out << '\n';
  out << detail::pad("True value", label_w);
  for (std::size_t i = 0; i < d; ++i) out << detail::pad(detail::fixed3(truth.mean[i]), col_w);
  for (std::size_t i = 0; i < d; ++i) out << detail::pad(detail::fixed3(truth.second_moment[i]), col_w);
  out << '\n';
  for (const auto& [label, table] : rows) {
    out << detail::pad(label, label_w);
    for (const auto& n : names) {
      const auto& r = table.row(n);
      out << detail::pad(detail::fixed3(r.mean) + " (" + detail::fixed3(r.std) + ")", col_w);
    }
    out << '\n';
  }
}

/// RMSE table: one block per N with rows E[X] and E[|X|^2], one column per
/// adaptation.
struct RmseCell {
  std::size_t iterations;
  std::string label;
  ReplicationTable table;
};

inline void write_rmse_table(std::ostream& out, const std::string& title, const std::vector<RmseCell>& cells) {
  constexpr std::size_t w = 12;
  std::vector<std::string> labels;
  std::vector<std::size_t> sizes;
  for (const auto& c : cells) {
    if (std::find(labels.begin(), labels.end(), c.label) == labels.end()) labels.push_back(c.label);
    if (std::find(sizes.begin(), sizes.end(), c.iterations) == sizes.end()) sizes.push_back(c.iterations);
  }
  out << title << '\n' << detail::pad("N", w) << detail::pad("Est.", w);
  for (const auto& l : labels) out << detail::pad(l, w);
  out << '\n';
  for (std::size_t n : sizes) {
    const std::string n_label = n % 1000 == 0 ? std::to_string(n / 1000) + "k" : std::to_string(n);
    for (const char* est : {"E[X]", "E[|X|^2]"}) {
      out << detail::pad(std::string(est) == "E[X]" ? n_label : "", w) << detail::pad(est, w);
      for (const auto& l : labels) {
        std::string v = "-";
        for (const auto& c : cells)
          if (c.iterations == n && c.label == l) v = detail::fixed3(c.table.row(est).rmse);
        out << detail::pad(v, w);
      }
      out << '\n';
    }
  }
}

/// Long-form CSV of every estimator row for every labelled table.
inline void write_table_csv(std::ostream& out, const std::vector<std::pair<std::string, const ReplicationTable*>>& tables) {
  out << "# apt-table v1\n" << "label,estimator,mean,std,rmse\n";
  for (const auto& [label, t] : tables)
    for (const auto& r : t->rows)
      out << label << ',' << r.name << ',' << format_double(r.mean) << ',' << format_double(r.std) << ','
          << format_double(r.rmse) << '\n';
}

}  // namespace apt
