#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "apt/errors.hpp"

namespace apt {

using ContinuousState = Eigen::VectorXd;

/// A density on R^d known up to a constant, evaluated in log space.
/// log_density may return -infinity outside the support.
template <class T>
concept ContinuousTarget = requires(const T& t, const ContinuousState& x) {
  { t.dim() } -> std::convertible_to<std::size_t>;
  { t.log_density(x) } -> std::convertible_to<double>;
};

/// Type-erased continuous target for user-supplied log densities.
class LogDensityFunction {
 public:
  LogDensityFunction(std::size_t dim,
                     std::function<double(const ContinuousState&)> fn)
      : dim_(dim), fn_(std::move(fn)) {}

  std::size_t dim() const { return dim_; }
  double log_density(const ContinuousState& x) const { return fn_(x); }

 private:
  std::size_t dim_;
  std::function<double(const ContinuousState&)> fn_;
};

struct GaussianMixtureSpec {
  std::vector<ContinuousState> means;
  std::vector<double> weights;
  double variance = 1.0;

  std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }
  std::size_t components() const { return means.size(); }

  void validate() const {
    if (means.empty()) throw ConfigError("mixture: at least one component required");
    if (weights.size() != means.size())
      throw ConfigError("mixture: weights count does not match means count");
    if (!(variance > 0.0) || !std::isfinite(variance))
      throw ConfigError("mixture: variance must be positive");
    const auto d = dim();
    if (d == 0) throw ConfigError("mixture: means must be non-empty vectors");
    double total = 0.0;
    for (std::size_t k = 0; k < means.size(); ++k) {
      if (static_cast<std::size_t>(means[k].size()) != d)
        throw ConfigError("mixture: means have inconsistent dimension");
      if (!means[k].allFinite()) throw ConfigError("mixture: non-finite mean");
      if (!(weights[k] >= 0.0)) throw ConfigError("mixture: negative weight");
      total += weights[k];
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw ConfigError("mixture: weights must sum to 1");
  }

  /// E[X] under the mixture.
  ContinuousState mean() const {
    ContinuousState m = ContinuousState::Zero(static_cast<Eigen::Index>(dim()));
    for (std::size_t k = 0; k < means.size(); ++k) m += weights[k] * means[k];
    return m;
  }

  /// E[X_i^2] per coordinate.
  ContinuousState second_moment() const {
    ContinuousState s = ContinuousState::Constant(static_cast<Eigen::Index>(dim()), variance);
    for (std::size_t k = 0; k < means.size(); ++k)
      s += weights[k] * means[k].cwiseProduct(means[k]);
    return s;
  }

  /// Copy with zero coordinates appended to every mean.
  GaussianMixtureSpec padded(std::size_t new_dim) const {
    if (new_dim < dim()) throw ConfigError("mixture: cannot pad to a smaller dimension");
    GaussianMixtureSpec out = *this;
    for (auto& m : out.means) {
      ContinuousState p = ContinuousState::Zero(static_cast<Eigen::Index>(new_dim));
      p.head(m.size()) = m;
      m = std::move(p);
    }
    return out;
  }
};

/// log sum_k w_k N(x; m_k, sigma^2 I), evaluated with log-sum-exp.
inline double mixture_log_density(const GaussianMixtureSpec& spec,
                                  const ContinuousState& x) {
  const auto d = spec.dim();
  if (static_cast<std::size_t>(x.size()) != d)
    throw ConfigError("mixture: state dimension " + std::to_string(x.size()) +
                      " does not match target dimension " + std::to_string(d));
  const double log_norm =
      -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * spec.variance);
  const double inv2var = 0.5 / spec.variance;
  double best = -std::numeric_limits<double>::infinity();
  // Terms are recomputed in the second pass instead of stored; K is small.
  for (std::size_t k = 0; k < spec.components(); ++k) {
    if (spec.weights[k] <= 0.0) continue;
    const double t = std::log(spec.weights[k]) - inv2var * (x - spec.means[k]).squaredNorm();
    best = std::max(best, t);
  }
  if (!std::isfinite(best)) return best;
  double acc = 0.0;
  for (std::size_t k = 0; k < spec.components(); ++k) {
    if (spec.weights[k] <= 0.0) continue;
    const double t = std::log(spec.weights[k]) - inv2var * (x - spec.means[k]).squaredNorm();
    acc += std::exp(t - best);
  }
  return log_norm + best + std::log(acc);
}

class GaussianMixture {
 public:
  explicit GaussianMixture(GaussianMixtureSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
  }

  std::size_t dim() const { return spec_.dim(); }
  double log_density(const ContinuousState& x) const {
    return mixture_log_density(spec_, x);
  }
  const GaussianMixtureSpec& spec() const { return spec_; }

 private:
  GaussianMixtureSpec spec_;
};

/// Standard normal in d dimensions, as a one-component mixture.
inline GaussianMixtureSpec standard_normal_spec(std::size_t d) {
  if (d == 0) throw ConfigError("normal: dimension must be positive");
  GaussianMixtureSpec s;
  s.means.push_back(ContinuousState::Zero(static_cast<Eigen::Index>(d)));
  s.weights.push_back(1.0);
  s.variance = 1.0;
  return s;
}

// Mixture file format (text, '#' comments):
//   variance <v>
//   weights equal | weights <w1> ... <wK>
//   mean <x1> ... <xd>        (one line per component)
inline GaussianMixtureSpec parse_mixture(std::istream& in) {
  GaussianMixtureSpec spec;
  bool have_variance = false;
  bool equal_weights = false;
  std::vector<double> weights;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    auto fail = [&](const std::string& what) {
      return ConfigError("mixture file line " + std::to_string(lineno) + ": " + what);
    };
    if (key == "variance") {
      if (!(ls >> spec.variance)) throw fail("bad variance");
      have_variance = true;
    } else if (key == "weights") {
      std::string tok;
      while (ls >> tok) {
        if (tok == "equal") {
          equal_weights = true;
        } else {
          try {
            weights.push_back(std::stod(tok));
          } catch (const std::exception&) {
            throw fail("bad weight '" + tok + "'");
          }
        }
      }
    } else if (key == "mean") {
      std::vector<double> v;
      std::string tok;
      while (ls >> tok) {
        try {
          v.push_back(std::stod(tok));
        } catch (const std::exception&) {
          throw fail("bad coordinate '" + tok + "'");
        }
      }
      spec.means.emplace_back(Eigen::Map<const ContinuousState>(v.data(), static_cast<Eigen::Index>(v.size())));
    } else {
      throw fail("unknown key '" + key + "'");
    }
  }
  if (!have_variance) throw ConfigError("mixture file: missing 'variance'");
  if (equal_weights || weights.empty()) {
    spec.weights.assign(spec.means.size(), spec.means.empty() ? 0.0 : 1.0 / static_cast<double>(spec.means.size()));
  } else {
    spec.weights = std::move(weights);
  }
  spec.validate();
  return spec;
}

inline GaussianMixtureSpec load_mixture(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("mixture file not found: " + path.string());
  return parse_mixture(in);
}

inline void write_mixture(std::ostream& out, const GaussianMixtureSpec& spec) {
  out << "# apt-mixture v1\n";
  out.precision(17);
  out << "variance " << spec.variance << "\nweights";
  for (double w : spec.weights) out << ' ' << w;
  out << '\n';
  for (const auto& m : spec.means) {
    out << "mean";
    for (Eigen::Index i = 0; i < m.size(); ++i) out << ' ' << m[i];
    out << '\n';
  }
}

#ifdef APT_DATA_DIR
inline constexpr const char* kDefaultDataDir = APT_DATA_DIR;
#else
inline constexpr const char* kDefaultDataDir = "data";
#endif

/// The 20-component two-dimensional benchmark mixture, loaded from the
/// versioned data file. Equal weights are assumed.
inline GaussianMixtureSpec canonical_mixture(double variance = 0.01,
                                             std::size_t dim = 2,
                                             const std::filesystem::path& data_dir = kDefaultDataDir) {
  auto spec = load_mixture(data_dir / "mixture20.txt");
  spec.variance = variance;
  spec.validate();
  return dim > spec.dim() ? spec.padded(dim) : spec;
}

}  // namespace apt
