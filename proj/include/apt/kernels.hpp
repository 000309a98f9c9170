#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "apt/errors.hpp"
#include "apt/ising.hpp"
#include "apt/ladder.hpp"
#include "apt/rng.hpp"
#include "apt/target.hpp"

namespace apt {

// ---------------------------------------------------------------------------
// Acceptance probabilities. All ratios are formed in log space and clamped
// before exponentiation so that extreme exponents cannot overflow.

/// log min(1, (pi(y)/pi(x))^beta).
inline double log_rwm_acceptance(double log_pi_x, double log_pi_y, double beta) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  if (std::isnan(log_pi_y) || log_pi_y == ninf) return ninf;
  if (log_pi_x == ninf) return 0.0;
  const double diff = log_pi_y - log_pi_x;
  if (diff >= 0.0) return 0.0;
  return beta * diff;
}

/// min(1, (pi(y)/pi(x))^beta).
inline double rwm_acceptance(double log_pi_x, double log_pi_y, double beta) {
  return std::exp(log_rwm_acceptance(log_pi_x, log_pi_y, beta));
}

/// Swap acceptance for an adjacent pair given the gap beta_j - beta_{j+1}.
inline double swap_acceptance_gap(double log_pi_j, double log_pi_j1, double delta_beta) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  if (log_pi_j1 == log_pi_j) return 1.0;
  if (log_pi_j1 == ninf) return 0.0;
  if (log_pi_j == ninf) return 1.0;
  const double diff = log_pi_j1 - log_pi_j;
  if (diff >= 0.0) return 1.0;
  return std::exp(delta_beta * diff);
}

/// min(1, (pi(x_{j+1}) / pi(x_j))^(beta_j - beta_{j+1})).
inline double swap_acceptance(double log_pi_j, double log_pi_j1, double beta_j, double beta_j1) {
  return swap_acceptance_gap(log_pi_j, log_pi_j1, beta_j - beta_j1);
}

// ---------------------------------------------------------------------------
// Proposal shape.

/// Gaussian random-walk increment with covariance exp(T) * Gamma. The lower
/// Cholesky factor of the covariance is cached; call refresh() after Gamma or
/// T change. In factor mode (RAM) Gamma already is the lower factor and the
/// covariance is Gamma Gamma^T.
class ProposalShape {
 public:
  ProposalShape() = default;

  static ProposalShape from_covariance(Eigen::MatrixXd gamma, double log_scale = 0.0) {
    ProposalShape s;
    s.gamma_ = std::move(gamma);
    s.log_scale_ = log_scale;
    s.factor_mode_ = false;
    s.refresh();
    return s;
  }

  static ProposalShape from_factor(Eigen::MatrixXd lower) {
    ProposalShape s;
    s.gamma_ = std::move(lower);
    s.log_scale_ = 0.0;
    s.factor_mode_ = true;
    s.refresh();
    return s;
  }

  static ProposalShape identity(std::size_t d) {
    return from_covariance(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)));
  }

  std::size_t dim() const { return static_cast<std::size_t>(gamma_.rows()); }
  const Eigen::MatrixXd& gamma() const { return gamma_; }
  double log_scale() const { return log_scale_; }
  bool factor_mode() const { return factor_mode_; }
  const Eigen::MatrixXd& cholesky() const { return chol_; }

  Eigen::MatrixXd covariance() const { return chol_ * chol_.transpose(); }

  void set_gamma(Eigen::MatrixXd gamma) {
    gamma_ = std::move(gamma);
    refresh();
  }
  void set_log_scale(double t) {
    log_scale_ = t;
    refresh();
  }
  void set(Eigen::MatrixXd gamma, double log_scale) {
    gamma_ = std::move(gamma);
    log_scale_ = log_scale;
    refresh();
  }

  void refresh() {
    if (factor_mode_) {
      chol_ = gamma_.triangularView<Eigen::Lower>();
      return;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(gamma_);
    if (llt.info() != Eigen::Success)
      throw RuntimeError("proposal covariance is not positive definite");
    chol_ = std::exp(0.5 * log_scale_) * Eigen::MatrixXd(llt.matrixL());
  }

  /// log q(z) for the zero-mean Gaussian with this covariance.
  double log_increment_density(const Eigen::VectorXd& z) const {
    const Eigen::VectorXd w = chol_.triangularView<Eigen::Lower>().solve(z);
    const double log_det = 2.0 * chol_.diagonal().array().abs().log().sum();
    return -0.5 * (static_cast<double>(z.size()) * std::log(2.0 * std::numbers::pi) + log_det + w.squaredNorm());
  }

 private:
  Eigen::MatrixXd gamma_;
  double log_scale_ = 0.0;
  bool factor_mode_ = false;
  Eigen::MatrixXd chol_;
};

// ---------------------------------------------------------------------------
// Chain state and outcomes.

/// States at every level plus their cached log pi values.
template <class State>
struct ChainState {
  std::vector<State> states;
  std::vector<double> log_pi;

  std::size_t levels() const { return states.size(); }
};

struct RwmOutcome {
  ContinuousState proposal;
  ContinuousState increment;  // proposal - current
  ContinuousState noise;      // standard normal draw, increment = chol * noise
  double acceptance_prob = 0.0;
  bool accepted = false;
  ContinuousState new_state;
  double new_log_pi = 0.0;
};

struct FlipOutcome {
  Site site;
  double acceptance_prob = 0.0;
  bool accepted = false;
  double new_log_pi = 0.0;
};

struct SwapOutcome {
  std::size_t pair = 0;  // 0-based: levels pair and pair+1
  double acceptance_prob = 0.0;
  bool accepted = false;
};

// ---------------------------------------------------------------------------
// Kernels.

/// One tempered random-walk Metropolis step. The acceptance probability is
/// reported even on rejection.
template <ContinuousTarget Target>
RwmOutcome rwm_step(const ContinuousState& state, double log_pi, const Target& target,
                    const ProposalShape& shape, double beta, StreamRng& rng) {
  const auto d = static_cast<Eigen::Index>(state.size());
  if (static_cast<std::size_t>(d) != shape.dim())
    throw ConfigError("rwm_step: proposal dimension does not match state dimension");
  RwmOutcome out;
  out.noise.resize(d);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < d; ++i) out.noise[i] = normal(rng);
  out.increment = shape.cholesky().triangularView<Eigen::Lower>() * out.noise;
  out.proposal = state + out.increment;
  const double log_pi_y = target.log_density(out.proposal);
  out.acceptance_prob = rwm_acceptance(log_pi, log_pi_y, beta);
  out.accepted = rng.uniform() < out.acceptance_prob;
  if (out.accepted) {
    out.new_state = out.proposal;
    out.new_log_pi = log_pi_y;
  } else {
    out.new_state = state;
    out.new_log_pi = log_pi;
  }
  return out;
}

/// Single-site flip Metropolis step on an Ising state, in place.
inline FlipOutcome flip_step(IsingState& state, double& log_pi, const IsingPosterior& target,
                             double beta, StreamRng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, target.sites() - 1);
  const std::size_t k = pick(rng);
  FlipOutcome out;
  out.site = Site{k / target.cols(), k % target.cols()};
  const IsingStats d = target.delta_stats(state, out.site);
  const IsingStats after{state.stats().matches + d.matches, state.stats().agreements + d.agreements};
  const double log_pi_new = target.spec().value(after);
  out.acceptance_prob = rwm_acceptance(log_pi, log_pi_new, beta);
  out.accepted = rng.uniform() < out.acceptance_prob;
  if (out.accepted) {
    state.flip(out.site, d);
    log_pi = log_pi_new;
  }
  out.new_log_pi = log_pi;
  return out;
}

/// Propose one uniformly chosen adjacent swap and accept it with the swap
/// probability. Only the chosen pair (states and caches) can change.
template <class State>
SwapOutcome swap_step(ChainState<State>& chain, const BetaLadder& ladder, StreamRng& rng) {
  const std::size_t levels = chain.levels();
  if (levels < 2) throw ConfigError("swap_step: need at least two levels");
  SwapOutcome out;
  if (levels == 2) {
    out.pair = 0;
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, levels - 2);
    out.pair = pick(rng);
  }
  const std::size_t j = out.pair;
  out.acceptance_prob = swap_acceptance_gap(chain.log_pi[j], chain.log_pi[j + 1], ladder.delta(j));
  out.accepted = rng.uniform() < out.acceptance_prob;
  if (out.accepted) {
    using std::swap;
    swap(chain.states[j], chain.states[j + 1]);
    swap(chain.log_pi[j], chain.log_pi[j + 1]);
  }
  return out;
}

}  // namespace apt
