#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "apt/adaptation.hpp"
#include "apt/errors.hpp"
#include "apt/ising.hpp"
#include "apt/kernels.hpp"
#include "apt/ladder.hpp"
#include "apt/rng.hpp"
#include "apt/target.hpp"
#include "apt/worker_pool.hpp"

namespace apt {

struct SamplerConfig {
  std::size_t levels = 5;
  std::size_t iterations = 5000;
  std::optional<std::size_t> burn_in;  // defaults to iterations / 2
  std::uint64_t seed = 1;
  std::size_t thin = 10;

  AdaptSettings adapt;
  StepSizeSchedule schedule;
  RhoBounds rho_bounds;
  double rho_init = 1.0;
  double log_scale_init = 0.0;
  bool geometric_ladder = false;
  bool freeze_after_burn_in = false;

  // Initial states: uniform over [init_lo, init_hi]^d (continuous targets);
  // lattice targets start from the observed image.
  double init_lo = 0.0;
  double init_hi = 10.0;

  // Lattice targets: single-site flip proposals per level per iteration.
  std::size_t flips_per_iteration = 1;

  // Include the level-1 state in trace records (continuous targets).
  bool record_state = true;

  std::size_t effective_burn_in() const { return burn_in.value_or(iterations / 2); }

  void validate() const {
    if (levels < 2) throw ConfigError("levels: must be >= 2");
    if (iterations < 1) throw ConfigError("iters: must be >= 1");
    if (effective_burn_in() >= iterations) throw ConfigError("burnin: must be < iters");
    if (thin < 1) throw ConfigError("thin: must be >= 1");
    if (flips_per_iteration < 1) throw ConfigError("flips_per_iter: must be >= 1");
    if (!(init_lo < init_hi)) throw ConfigError("init_lo: must be below init_hi");
    if (!(rho_bounds.lo < rho_bounds.hi)) throw ConfigError("rho_lo: must be below rho_hi");
    if (!std::isfinite(rho_init)) throw ConfigError("rho_init: must be finite");
    adapt.validate();
    schedule.validate();
  }
};

/// One row of the iteration trace.
struct IterationRecord {
  std::size_t iteration = 0;
  std::vector<double> betas;
  std::vector<double> rho;
  std::size_t swap_pair = 0;  // 0-based
  double swap_prob = 0.0;
  bool swap_accepted = false;
  std::vector<double> accept_prob;
  std::vector<std::uint8_t> accepted;
  std::vector<double> log_scale;
  std::vector<double> x1;  // level-1 state, empty when not recorded

  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

/// Running first and second moments of level-1 coordinates, plus any
/// registered scalar functionals.
class EstimatorAccumulator {
 public:
  using Functional = std::function<double(std::span<const double>)>;

  explicit EstimatorAccumulator(std::size_t dim = 0) : sum_(dim, 0.0), sum_sq_(dim, 0.0) {}

  void add_functional(std::string name, Functional f) {
    names_.push_back(std::move(name));
    functionals_.push_back(std::move(f));
    functional_sums_.push_back(0.0);
  }

  void add(std::span<const double> x) {
    if (x.size() != sum_.size()) throw RuntimeError("estimator: dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) {
      sum_[i] += x[i];
      sum_sq_[i] += x[i] * x[i];
    }
    for (std::size_t k = 0; k < functionals_.size(); ++k) functional_sums_[k] += functionals_[k](x);
    ++count_;
  }

  std::size_t count() const { return count_; }
  std::size_t dim() const { return sum_.size(); }

  std::vector<double> mean() const { return scaled(sum_); }
  std::vector<double> second_moment() const { return scaled(sum_sq_); }
  std::vector<double> functional_means() const { return scaled(functional_sums_); }
  const std::vector<std::string>& functional_names() const { return names_; }

 private:
  std::vector<double> scaled(const std::vector<double>& v) const {
    std::vector<double> out(v.size(), std::numeric_limits<double>::quiet_NaN());
    if (count_ == 0) return out;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / static_cast<double>(count_);
    return out;
  }

  std::size_t count_ = 0;
  std::vector<double> sum_;
  std::vector<double> sum_sq_;
  std::vector<std::string> names_;
  std::vector<Functional> functionals_;
  std::vector<double> functional_sums_;
};

template <class T>
concept LatticeTarget = std::same_as<T, IsingPosterior>;

template <class T>
concept SamplerTarget = ContinuousTarget<T> || LatticeTarget<T>;

template <class Target>
struct state_of {
  using type = ContinuousState;
};
template <>
struct state_of<IsingPosterior> {
  using type = IsingState;
};

/// Adaptive parallel tempering sampler.
///
/// Each call to step() performs one full iteration n -> n+1:
///   1. one random adjacent swap under the current ladder;
///   2. one random-walk (or single-flip) move per level under the current
///      ladder and proposal shapes;
///   3. temperature adaptation from the post-move states;
///   4. covariance / mean adaptation (cov, covg);
///   5. scale adaptation from the per-level acceptance probabilities, or the
///      RAM factor update.
/// Parameters used by the kernels at step n are those produced at step n-1.
/// Lattice targets only adapt the temperatures.
template <SamplerTarget Target>
class ParallelTempering {
 public:
  using State = typename state_of<Target>::type;
  static constexpr bool kLattice = LatticeTarget<Target>;

  ParallelTempering(const Target& target, SamplerConfig config, WorkerPool* pool = nullptr)
      : target_(&target), config_(std::move(config)), pool_(pool) {
    config_.validate();
    if constexpr (!kLattice) {
      config_.schedule.dim = target.dim();
    }
    const std::size_t L = config_.levels;
    temp_.rho = RhoVector(std::vector<double>(L - 1, config_.rho_init), config_.rho_bounds);
    temp_.alpha_star = config_.adapt.alpha_star;
    temp_.geometric = config_.geometric_ladder;
    ladder_ = beta_from_rho(temp_.rho);
    if constexpr (!kLattice) {
      proposals_ = CovAdaptState::initial(config_.adapt, L, target.dim(), config_.log_scale_init);
    }
    initialize_states();
  }

  const Target& target() const { return *target_; }
  const SamplerConfig& config() const { return config_; }
  const ChainState<State>& chain() const { return chain_; }
  const BetaLadder& ladder() const { return ladder_; }
  const TempAdaptState& temperature() const { return temp_; }
  const CovAdaptState& proposals() const { return proposals_; }
  std::size_t iteration() const { return n_; }
  std::size_t ram_skips() const { return ram_skips_; }

  /// Replace the chain (tests and restarts). Caches are recomputed.
  void set_states(std::vector<State> states) {
    if (states.size() != config_.levels) throw ConfigError("set_states: level count mismatch");
    chain_.states = std::move(states);
    chain_.log_pi.resize(config_.levels);
    for (std::size_t l = 0; l < config_.levels; ++l) chain_.log_pi[l] = target_->log_density(chain_.states[l]);
    check_initial();
  }

  IterationRecord step() {
    const std::size_t n = ++n_;
    const std::size_t L = config_.levels;
    IterationRecord rec;
    rec.iteration = n;
    rec.accept_prob.assign(L, 0.0);
    rec.accepted.assign(L, 0);

    // 1. swap
    {
      StreamRng rng(config_.seed, n, kSwapSlot);
      const SwapOutcome s = swap_step(chain_, ladder_, rng);
      rec.swap_pair = s.pair;
      rec.swap_prob = s.acceptance_prob;
      rec.swap_accepted = s.accepted;
    }

    // 2. per-level moves
    if constexpr (!kLattice) directions_.assign(L, Eigen::VectorXd());
    for_levels([&](std::size_t l) {
      StreamRng rng(config_.seed, n, l);
      if constexpr (kLattice) {
        double sum = 0.0;
        bool any = false;
        for (std::size_t k = 0; k < config_.flips_per_iteration; ++k) {
          const FlipOutcome o = flip_step(chain_.states[l], chain_.log_pi[l], *target_, ladder_.beta(l), rng);
          sum += o.acceptance_prob;
          any = any || o.accepted;
        }
        rec.accept_prob[l] = sum / static_cast<double>(config_.flips_per_iteration);
        rec.accepted[l] = any ? 1 : 0;
      } else {
        RwmOutcome o = rwm_step(chain_.states[l], chain_.log_pi[l], *target_, proposals_.shape(l), ladder_.beta(l), rng);
        rec.accept_prob[l] = o.acceptance_prob;
        rec.accepted[l] = o.accepted ? 1 : 0;
        chain_.states[l] = std::move(o.new_state);
        chain_.log_pi[l] = o.new_log_pi;
        directions_[l] = config_.adapt.ram_direction == RamDirection::Noise ? std::move(o.noise) : std::move(o.increment);
      }
    });

    const bool adapting = !(config_.freeze_after_burn_in && n > config_.effective_burn_in());
    if (adapting) {
      // 3. temperatures
      temp_ = temp_update(temp_, chain_.log_pi, config_.schedule(n, 1));
      ladder_ = beta_from_rho(temp_.rho);

      // 4-5. proposals
      if constexpr (!kLattice) adapt_proposals(n, rec.accept_prob);
    }

    rec.betas.assign(ladder_.betas().begin(), ladder_.betas().end());
    rec.rho.assign(temp_.rho.values().begin(), temp_.rho.values().end());
    if constexpr (!kLattice) {
      rec.log_scale.resize(L);
      for (std::size_t l = 0; l < L; ++l) rec.log_scale[l] = proposals_.log_scale[l];
      if (config_.record_state) rec.x1.assign(chain_.states[0].data(), chain_.states[0].data() + chain_.states[0].size());
    }
    return rec;
  }

  /// Level-1 coordinates as doubles (pixels for lattice targets).
  std::vector<double> level1_coordinates() const {
    if constexpr (kLattice) {
      const auto& px = chain_.states[0].image().pixels();
      return std::vector<double>(px.begin(), px.end());
    } else {
      const auto& x = chain_.states[0];
      return std::vector<double>(x.data(), x.data() + x.size());
    }
  }

  std::size_t coordinate_count() const {
    if constexpr (kLattice) {
      return target_->sites();
    } else {
      return target_->dim();
    }
  }

 private:
  template <class F>
  void for_levels(F&& f) {
    if (pool_ && pool_->size() > 1) {
      pool_->parallel_for(config_.levels, [&](std::size_t l) { f(l); });
    } else {
      for (std::size_t l = 0; l < config_.levels; ++l) f(l);
    }
  }

  void adapt_proposals(std::size_t n, const std::vector<double>& accept_prob) {
    const double g2 = config_.schedule(n, 2);
    const double g3 = config_.schedule(n, 3);
    switch (config_.adapt.mode) {
      case AdaptMode::Cov:
        for_levels([&](std::size_t l) {
          am_update(proposals_, chain_.states[l], l, g2);
          scale_update(proposals_, accept_prob[l], l, g3);
          proposals_.refresh_shape(l);
        });
        break;
      case AdaptMode::CovGlobal:
        global_am_update(proposals_, chain_.states, g2);
        for_levels([&](std::size_t l) {
          scale_update(proposals_, accept_prob[l], l, g3);
          proposals_.refresh_shape(l);
        });
        break;
      case AdaptMode::Ram: {
        std::vector<std::uint8_t> ok(config_.levels, 1);
        for_levels([&](std::size_t l) {
          ok[l] = ram_update(proposals_, directions_[l], accept_prob[l], l, g2) ? 1 : 0;
          proposals_.refresh_shape(l);
        });
        for (auto v : ok) ram_skips_ += v ? 0 : 1;
        break;
      }
    }
  }

  void initialize_states() {
    const std::size_t L = config_.levels;
    std::vector<State> states;
    states.reserve(L);
    for (std::size_t l = 0; l < L; ++l) {
      if constexpr (kLattice) {
        states.push_back(target_->make_state(target_->spec().observed));
      } else {
        StreamRng rng(config_.seed, 0, kInitSlotBase + l);
        std::uniform_real_distribution<double> u(config_.init_lo, config_.init_hi);
        ContinuousState x(static_cast<Eigen::Index>(target_->dim()));
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = u(rng);
        states.push_back(std::move(x));
      }
    }
    set_states(std::move(states));
  }

  void check_initial() const {
    for (std::size_t l = 0; l < chain_.log_pi.size(); ++l)
      if (!std::isfinite(chain_.log_pi[l]))
        throw RuntimeError("initial state at level " + std::to_string(l + 1) + " has non-finite log density");
  }

  const Target* target_;
  SamplerConfig config_;
  WorkerPool* pool_ = nullptr;
  ChainState<State> chain_;
  TempAdaptState temp_;
  BetaLadder ladder_;
  CovAdaptState proposals_;
  std::vector<Eigen::VectorXd> directions_;
  std::size_t n_ = 0;
  std::size_t ram_skips_ = 0;
};

// ---------------------------------------------------------------------------
// Whole runs.

struct RunSummary {
  std::size_t iterations = 0;
  std::size_t burn_in = 0;
  std::size_t count = 0;                 // samples in the estimators
  std::vector<double> mean;              // E[X_i], level 1
  std::vector<double> second_moment;     // E[X_i^2], level 1
  double mean_sq_norm = 0.0;             // E[|X|^2], level 1
  std::vector<std::string> functional_names;
  std::vector<double> functional_means;
  std::vector<double> final_betas;
  std::vector<double> final_rho;
  std::vector<double> swap_accept_mean;  // per adjacent pair, post burn-in
  std::vector<std::size_t> swap_proposals;
  std::vector<double> move_accept_mean;  // per level, post burn-in
  std::size_t ram_skips = 0;
};

using TraceSink = std::function<void(const IterationRecord&)>;

/// Run a sampler for config.iterations steps. Records are handed to `sink`
/// on every `thin`-th iteration. Level-1 moments are accumulated over the
/// iterations after burn-in.
template <SamplerTarget Target>
RunSummary run(const Target& target, const SamplerConfig& config, const TraceSink& sink = {},
               WorkerPool* pool = nullptr,
               std::vector<std::pair<std::string, EstimatorAccumulator::Functional>> functionals = {}) {
  ParallelTempering<Target> sampler(target, config, pool);
  const std::size_t N = config.iterations;
  const std::size_t B = config.effective_burn_in();
  const std::size_t L = config.levels;
  EstimatorAccumulator acc(sampler.coordinate_count());
  for (auto& [name, f] : functionals) acc.add_functional(name, std::move(f));
  std::vector<double> swap_sum(L - 1, 0.0), move_sum(L, 0.0);
  std::vector<std::size_t> swap_count(L - 1, 0);
  double sq_norm_sum = 0.0;
  for (std::size_t n = 1; n <= N; ++n) {
    IterationRecord rec = sampler.step();
    if (n > B) {
      const auto x = sampler.level1_coordinates();
      acc.add(x);
      double s = 0.0;
      for (double v : x) s += v * v;
      sq_norm_sum += s;
      swap_sum[rec.swap_pair] += rec.swap_prob;
      ++swap_count[rec.swap_pair];
      for (std::size_t l = 0; l < L; ++l) move_sum[l] += rec.accept_prob[l];
    }
    if (sink && n % config.thin == 0) sink(rec);
  }
  RunSummary out;
  out.iterations = N;
  out.burn_in = B;
  out.count = acc.count();
  out.mean = acc.mean();
  out.second_moment = acc.second_moment();
  out.mean_sq_norm = sq_norm_sum / static_cast<double>(acc.count());
  out.functional_names = acc.functional_names();
  out.functional_means = acc.functional_means();
  out.final_betas.assign(sampler.ladder().betas().begin(), sampler.ladder().betas().end());
  out.final_rho.assign(sampler.temperature().rho.values().begin(), sampler.temperature().rho.values().end());
  out.swap_proposals = swap_count;
  out.swap_accept_mean.resize(L - 1);
  for (std::size_t j = 0; j + 1 < L; ++j)
    out.swap_accept_mean[j] = swap_count[j] ? swap_sum[j] / static_cast<double>(swap_count[j])
                                            : std::numeric_limits<double>::quiet_NaN();
  out.move_accept_mean.resize(L);
  for (std::size_t l = 0; l < L; ++l) out.move_accept_mean[l] = move_sum[l] / static_cast<double>(acc.count());
  out.ram_skips = sampler.ram_skips();
  return out;
}

}  // namespace apt
