#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "apt/errors.hpp"

namespace apt {

struct RhoBounds {
  double lo = -10.0;
  double hi = 10.0;
};

/// Unconstrained temperature parameters, one per adjacent level pair.
/// Every component stays inside `bounds` after any update.
class RhoVector {
 public:
  RhoVector() = default;
  RhoVector(std::vector<double> values, RhoBounds bounds = {})
      : values_(std::move(values)), bounds_(bounds) {
    if (!(bounds_.lo < bounds_.hi)) throw ConfigError("rho bounds: need rho_lo < rho_hi");
    for (double& v : values_) v = clamp(v);
  }

  std::size_t size() const { return values_.size(); }
  std::size_t levels() const { return values_.size() + 1; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  const RhoBounds& bounds() const { return bounds_; }

  void set(std::size_t i, double v) { values_[i] = clamp(v); }

 private:
  double clamp(double v) const {
    if (std::isnan(v)) throw RuntimeError("rho update produced NaN");
    return std::clamp(v, bounds_.lo, bounds_.hi);
  }

  std::vector<double> values_;
  RhoBounds bounds_;
};

/// Componentwise projection onto [lo, hi].
inline RhoVector project_rho(std::vector<double> raw, RhoBounds bounds = {}) {
  return RhoVector(std::move(raw), bounds);
}

/// Inverse temperatures 1 = b_1 > b_2 > ... > b_L > 0, with log b kept
/// alongside so that very hot levels do not lose precision.
class BetaLadder {
 public:
  BetaLadder() = default;

  std::size_t size() const { return log_betas_.size(); }
  double beta(std::size_t level) const { return betas_[level]; }
  double log_beta(std::size_t level) const { return log_betas_[level]; }
  std::span<const double> betas() const { return betas_; }
  std::span<const double> log_betas() const { return log_betas_; }

  /// b_l - b_{l+1} for 0-based pair index l.
  double delta(std::size_t pair) const { return deltas_.at(pair); }

 private:
  friend BetaLadder beta_from_rho(const RhoVector& rho);
  std::vector<double> log_betas_;
  std::vector<double> betas_;
  std::vector<double> deltas_;
};

/// log b_{l+1} = -sum_{i<=l} exp(rho_i); b_1 = 1.
inline BetaLadder beta_from_rho(const RhoVector& rho) {
  BetaLadder ladder;
  const std::size_t levels = rho.levels();
  ladder.log_betas_.resize(levels);
  ladder.betas_.resize(levels);
  ladder.deltas_.resize(levels - 1);
  double log_b = 0.0;
  ladder.log_betas_[0] = 0.0;
  ladder.betas_[0] = 1.0;
  for (std::size_t l = 0; l + 1 < levels; ++l) {
    const double step = std::exp(rho[l]);
    // b_l - b_{l+1} = b_l (1 - exp(-exp(rho_l)))
    ladder.deltas_[l] = -std::exp(log_b) * std::expm1(-step);
    log_b -= step;
    ladder.log_betas_[l + 1] = log_b;
    ladder.betas_[l + 1] = std::exp(log_b);
  }
  return ladder;
}

/// Delta beta for 1-based level l in [1, L-1].
inline double delta_beta(const RhoVector& rho, std::size_t level) {
  if (level < 1 || level > rho.size())
    throw std::out_of_range("delta_beta: level " + std::to_string(level) + " outside [1, " +
                            std::to_string(rho.size()) + "]");
  double log_b = 0.0;
  for (std::size_t i = 0; i + 1 < level; ++i) log_b -= std::exp(rho[i]);
  return -std::exp(log_b) * std::expm1(-std::exp(rho[level - 1]));
}

/// Inverse of beta_from_rho for a strictly decreasing ladder starting at 1.
inline std::vector<double> rho_from_betas(std::span<const double> betas) {
  if (betas.empty() || betas[0] != 1.0) throw ConfigError("ladder must start at beta = 1");
  std::vector<double> rho;
  for (std::size_t l = 0; l + 1 < betas.size(); ++l) {
    if (!(betas[l + 1] < betas[l]) || !(betas[l + 1] > 0.0))
      throw ConfigError("ladder must be strictly decreasing and positive");
    rho.push_back(std::log(std::log(betas[l]) - std::log(betas[l + 1])));
  }
  return rho;
}

}  // namespace apt
