#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "apt/errors.hpp"
#include "apt/kernels.hpp"
#include "apt/ladder.hpp"

namespace apt {

/// Step sizes gamma_{n,i} = c_i (n+1)^(-xi_i), i = 1 (temperature),
/// 2 (covariance / mean / RAM), 3 (scale).
struct StepSizeSchedule {
  std::array<double, 3> c{1.0, 1.0, 1.0};
  std::array<double, 3> xi{0.6, 0.6, 0.6};
  // RAM variant: gamma_{n,2} = min(ram_cap, d (n+1)^(-xi_2)).
  bool ram_dimension_scaled = false;
  std::size_t dim = 1;
  double ram_cap = 0.9;

  void validate() const {
    for (int i = 0; i < 3; ++i) {
      const std::string k = std::to_string(i + 1);
      if (!(c[i] >= 0.0) || !std::isfinite(c[i])) throw ConfigError("c" + k + ": must be a non-negative number");
      if (!(xi[i] > 0.5 && xi[i] <= 1.0)) throw ConfigError("xi" + k + ": must lie in (1/2, 1]");
    }
    if (c[1] > 1.0) throw ConfigError("c2: must be <= 1");
    if (!(ram_cap > 0.0 && ram_cap < 1.0)) throw ConfigError("ram_cap: must lie in (0, 1)");
  }

  /// which in {1, 2, 3}.
  double operator()(std::size_t n, int which) const {
    if (which < 1 || which > 3) throw std::out_of_range("step size index must be 1, 2 or 3");
    const double base = std::pow(static_cast<double>(n) + 1.0, -xi[which - 1]);
    if (which == 2 && ram_dimension_scaled)
      return std::min(ram_cap, static_cast<double>(dim) * base);
    return c[which - 1] * base;
  }
};

inline double step_size(const StepSizeSchedule& schedule, std::size_t n, int which) {
  return schedule(n, which);
}

// ---------------------------------------------------------------------------
// Temperature adaptation.

struct TempAdaptState {
  RhoVector rho;
  double alpha_star = 0.234;
  // Single shared rho for all pairs (geometric ladder); driven by the mean
  // of the per-pair increments.
  bool geometric = false;
};

/// rho_l <- Proj(rho_l + gamma1 (swap_prob_l - alpha*)) for all pairs at once,
/// with swap_prob_l evaluated at the post-move states under the pre-update
/// ladder.
inline TempAdaptState temp_update(const TempAdaptState& state, std::span<const double> log_pi,
                                  double gamma1) {
  const std::size_t pairs = state.rho.size();
  if (log_pi.size() != pairs + 1) throw ConfigError("temp_update: level count mismatch");
  const BetaLadder ladder = beta_from_rho(state.rho);
  TempAdaptState next = state;
  if (state.geometric) {
    double mean_h = 0.0;
    for (std::size_t l = 0; l < pairs; ++l)
      mean_h += swap_acceptance_gap(log_pi[l], log_pi[l + 1], ladder.delta(l)) - state.alpha_star;
    mean_h /= static_cast<double>(pairs);
    const double shared = state.rho[0] + gamma1 * mean_h;
    for (std::size_t l = 0; l < pairs; ++l) next.rho.set(l, shared);
    return next;
  }
  for (std::size_t l = 0; l < pairs; ++l) {
    const double h = swap_acceptance_gap(log_pi[l], log_pi[l + 1], ladder.delta(l)) - state.alpha_star;
    next.rho.set(l, state.rho[l] + gamma1 * h);
  }
  return next;
}

// ---------------------------------------------------------------------------
// Random-walk adaptation.

enum class AdaptMode { Cov, CovGlobal, Ram };

inline const char* to_string(AdaptMode m) {
  switch (m) {
    case AdaptMode::Cov: return "cov";
    case AdaptMode::CovGlobal: return "covg";
    case AdaptMode::Ram: return "ram";
  }
  return "?";
}

inline AdaptMode parse_adapt_mode(const std::string& s) {
  if (s == "cov") return AdaptMode::Cov;
  if (s == "covg") return AdaptMode::CovGlobal;
  if (s == "ram") return AdaptMode::Ram;
  throw ConfigError("adaptation: expected one of cov, covg, ram (got '" + s + "')");
}

/// Symmetrize and clamp eigenvalues into [eps, 1/eps].
inline Eigen::MatrixXd project_gamma(const Eigen::MatrixXd& m, double eps) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw RuntimeError("project_gamma: eigendecomposition failed");
  const auto& ev = es.eigenvalues();
  const double lo = eps, hi = 1.0 / eps;
  if (ev.minCoeff() >= lo && ev.maxCoeff() <= hi) return sym;
  const Eigen::VectorXd clamped = ev.cwiseMax(lo).cwiseMin(hi);
  Eigen::MatrixXd out = es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

/// In-place rank-one update (sign > 0) or downdate (sign < 0) of a lower
/// Cholesky factor: L L^T <- L L^T + sign * w w^T. Returns false and leaves
/// L untouched if a downdate would lose positive definiteness.
inline bool cholesky_rank_one(Eigen::MatrixXd& lower, Eigen::VectorXd w, int sign) {
  const Eigen::Index n = lower.rows();
  Eigen::MatrixXd work = lower;
  const double s = sign >= 0 ? 1.0 : -1.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double lkk = work(k, k);
    const double r2 = lkk * lkk + s * w[k] * w[k];
    if (!(r2 > 0.0) || !std::isfinite(r2)) return false;
    const double r = std::sqrt(r2);
    const double c = r / lkk;
    const double sn = w[k] / lkk;
    work(k, k) = r;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      work(i, k) = (work(i, k) + s * sn * w[i]) / c;
      w[i] = c * w[i] - sn * work(i, k);
    }
  }
  lower = std::move(work);
  return true;
}

/// Which vector drives the RAM direction: the proposal increment
/// Y - X (as in the tempering algorithm) or the standard normal draw that
/// generated it (as in the original RAM).
enum class RamDirection { Increment, Noise };

struct AdaptSettings {
  AdaptMode mode = AdaptMode::Cov;
  double alpha_star = 0.234;
  double eps_clamp = 1e-6;
  double log_scale_lo = -20.0;
  double log_scale_hi = 20.0;
  RamDirection ram_direction = RamDirection::Increment;

  void validate() const {
    if (!(alpha_star > 0.0 && alpha_star < 1.0)) throw ConfigError("alpha_star: must lie in (0, 1)");
    if (!(eps_clamp > 0.0 && eps_clamp <= 1.0)) throw ConfigError("eps_clamp: must lie in (0, 1]");
    if (!(log_scale_lo < log_scale_hi)) throw ConfigError("t_lo: must be below t_hi");
  }
};

/// Proposal parameters for every level. In Cov and Ram modes there is one
/// (gamma, mu) per level; in CovGlobal mode a single shared pair at index 0.
/// In Ram mode gamma holds the lower Cholesky factor and log_scale is unused.
struct CovAdaptState {
  AdaptSettings settings;
  std::vector<Eigen::MatrixXd> gamma;
  std::vector<Eigen::VectorXd> mu;
  std::vector<double> log_scale;
  std::vector<ProposalShape> shapes;  // kept in sync with the above

  static CovAdaptState initial(const AdaptSettings& settings, std::size_t levels, std::size_t dim,
                               double initial_log_scale = 0.0) {
    CovAdaptState s;
    s.settings = settings;
    const auto d = static_cast<Eigen::Index>(dim);
    const std::size_t blocks = settings.mode == AdaptMode::CovGlobal ? 1 : levels;
    s.gamma.assign(blocks, Eigen::MatrixXd::Identity(d, d));
    s.mu.assign(blocks, Eigen::VectorXd::Zero(d));
    s.log_scale.assign(levels, std::clamp(initial_log_scale, settings.log_scale_lo, settings.log_scale_hi));
    for (std::size_t l = 0; l < levels; ++l) s.shapes.push_back(s.make_shape(l));
    return s;
  }

  std::size_t levels() const { return log_scale.size(); }
  std::size_t block(std::size_t level) const { return settings.mode == AdaptMode::CovGlobal ? 0 : level; }
  const ProposalShape& shape(std::size_t level) const { return shapes[level]; }

  ProposalShape make_shape(std::size_t level) const {
    if (settings.mode == AdaptMode::Ram) return ProposalShape::from_factor(gamma[level]);
    return ProposalShape::from_covariance(gamma[block(level)], log_scale[level]);
  }
  void refresh_shape(std::size_t level) { shapes[level] = make_shape(level); }
  void refresh_all() {
    for (std::size_t l = 0; l < levels(); ++l) refresh_shape(l);
  }
};

/// Per-level covariance and mean recursion. The outer product uses the
/// mean from before this update. Does not refresh the cached shape.
inline void am_update(CovAdaptState& state, const ContinuousState& x, std::size_t level, double gamma2) {
  if (state.settings.mode == AdaptMode::Ram) throw ConfigError("am_update: not available in ram mode");
  const std::size_t b = state.block(level);
  const Eigen::VectorXd centred = x - state.mu[b];
  state.gamma[b] = project_gamma((1.0 - gamma2) * state.gamma[b] + gamma2 * centred * centred.transpose(),
                                 state.settings.eps_clamp);
  state.mu[b] = (1.0 - gamma2) * state.mu[b] + gamma2 * x;
}

/// Shared covariance and mean, averaged over all levels.
inline void global_am_update(CovAdaptState& state, std::span<const ContinuousState> xs, double gamma2) {
  if (state.settings.mode != AdaptMode::CovGlobal) throw ConfigError("global_am_update: requires covg mode");
  if (xs.empty()) return;
  const Eigen::Index d = state.mu[0].size();
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& x : xs) {
    const Eigen::VectorXd centred = x - state.mu[0];
    outer.noalias() += centred * centred.transpose();
    mean += x;
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  state.gamma[0] = project_gamma((1.0 - gamma2) * state.gamma[0] + (gamma2 * inv) * outer, state.settings.eps_clamp);
  state.mu[0] = (1.0 - gamma2) * state.mu[0] + (gamma2 * inv) * mean;
}

/// T <- Proj_T(T + gamma3 (acceptance_prob - alpha*)).
inline void scale_update(CovAdaptState& state, double acceptance_prob, std::size_t level, double gamma3) {
  const auto& s = state.settings;
  state.log_scale[level] =
      std::clamp(state.log_scale[level] + gamma3 * (acceptance_prob - s.alpha_star), s.log_scale_lo, s.log_scale_hi);
}

/// RAM factor update: Gamma Gamma^T <- Gamma (I + eta u u^T) Gamma^T with
/// eta = gamma2 (acceptance_prob - alpha*) and u = z / |z|, done as a rank-one
/// Cholesky update or downdate of Gamma. Returns false if the update was
/// skipped because it would break positive definiteness.
inline bool ram_update(CovAdaptState& state, const Eigen::VectorXd& z, double acceptance_prob, std::size_t level,
                       double gamma2) {
  if (state.settings.mode != AdaptMode::Ram) throw ConfigError("ram_update: requires ram mode");
  const double eta = gamma2 * (acceptance_prob - state.settings.alpha_star);
  const double norm = z.norm();
  if (eta == 0.0 || norm == 0.0) return true;
  Eigen::MatrixXd& g = state.gamma[level];
  const Eigen::VectorXd u = z / norm;
  Eigen::VectorXd w = g.triangularView<Eigen::Lower>() * u;
  w *= std::sqrt(std::abs(eta));
  return cholesky_rank_one(g, w, eta > 0.0 ? 1 : -1);
}

}  // namespace apt
