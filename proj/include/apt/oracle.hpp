#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "apt/errors.hpp"
#include "apt/kernels.hpp"
#include "apt/ladder.hpp"
#include "apt/rng.hpp"

namespace apt::oracle {

/// One-dimensional target with tractable tempering, used for ground truth.
struct Target1D {
  std::string name;
  std::function<double(double)> log_density;  // unnormalized
  double log_max = 0.0;                       // sup of log_density
  double scale = 1.0;                         // width of pi; pi^b has width ~ scale / sqrt(b)
  // Exact draw from pi^b / Z(b), when available (enables the MC integrator).
  std::function<double(double b, StreamRng&)> sample_tempered;
};

inline Target1D standard_normal() {
  Target1D t;
  t.name = "normal";
  t.log_density = [](double x) { return -0.5 * x * x; };
  t.log_max = 0.0;
  t.scale = 1.0;
  t.sample_tempered = [](double b, StreamRng& rng) {
    std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(b));
    return n(rng);
  };
  return t;
}

inline Target1D laplace() {
  Target1D t;
  t.name = "laplace";
  t.log_density = [](double x) { return -std::abs(x); };
  t.log_max = 0.0;
  t.scale = 1.0;
  t.sample_tempered = [](double b, StreamRng& rng) {
    const double u = rng.uniform() - 0.5;
    const double sgn = u < 0 ? -1.0 : 1.0;
    return -sgn * std::log1p(-2.0 * std::abs(u)) / b;
  };
  return t;
}

/// 0.5 N(-3, 1) + 0.5 N(3, 1).
inline Target1D bimodal() {
  Target1D t;
  t.name = "bimodal";
  t.log_density = [](double x) {
    const double a = -0.5 * (x - 3.0) * (x - 3.0), b = -0.5 * (x + 3.0) * (x + 3.0);
    const double m = std::max(a, b);
    return m + std::log(0.5 * std::exp(a - m) + 0.5 * std::exp(b - m));
  };
  t.log_max = t.log_density(3.0);
  t.scale = 3.5;
  return t;
}

inline std::optional<Target1D> target_by_name(const std::string& name) {
  if (name == "normal") return standard_normal();
  if (name == "laplace") return laplace();
  if (name == "bimodal") return bimodal();
  return std::nullopt;
}

enum class Integrator { Quadrature, MonteCarlo };

struct MeanFieldQuery {
  double u = 0.5;
  double v = 1.0;
  Integrator method = Integrator::Quadrature;
  std::size_t mc_samples = 1'000'000;
  std::uint64_t mc_seed = 7;
  double tolerance = 1e-10;

  void validate() const {
    if (!(u > 0.0 && u <= 1.0 && v > 0.0 && v <= 1.0))
      throw ConfigError("mean field: tempering exponents must lie in (0, 1]");
  }
};

struct MeanFieldValue {
  double value = 0.0;
  double error = 0.0;  // quadrature error estimate or MC standard error
};

namespace detail {

inline double integrate_line(const std::function<double(double)>& f, double tol, double* err) {
  double e = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 20, tol, &e);
  if (err) *err = e;
  return v;
}

}  // namespace detail

/// log Z(b) = log of the integral of pi^b, by quadrature.
inline double log_normalizer(const Target1D& target, double b, double tol = 1e-12) {
  const double s = target.scale / std::sqrt(b);
  auto f = [&](double t) { return s * std::exp(b * (target.log_density(s * t) - target.log_max)); };
  double err = 0.0;
  const double z = detail::integrate_line(f, tol, &err);
  if (!(z > 0.0) || !std::isfinite(z) || err > 1e-6 * z) {
    std::ostringstream os;
    os << "normalizing constant did not converge for b=" << b << " (value " << z << ", error " << err << ")";
    throw RuntimeError(os.str());
  }
  return std::log(z) + b * target.log_max;
}

/// Mean swap acceptance between exponents u and v in stationarity:
/// E[1 ^ (pi(Y)/pi(X))^(v-u)], X ~ pi^v/Z(v), Y ~ pi^u/Z(u).
inline MeanFieldValue h_tilde(const Target1D& target, const MeanFieldQuery& q) {
  q.validate();
  const double u = q.u, v = q.v;
  auto accept = [&](double lx, double ly) {
    const double e = (v - u) * (ly - lx);
    return e >= 0.0 ? 1.0 : std::exp(e);
  };
  if (q.method == Integrator::MonteCarlo) {
    if (!target.sample_tempered) throw ConfigError("mean field: target '" + target.name + "' has no exact sampler");
    StreamRng rng(q.mc_seed, 0, 0);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < q.mc_samples; ++i) {
      const double x = target.sample_tempered(v, rng);
      const double y = target.sample_tempered(u, rng);
      const double a = accept(target.log_density(x), target.log_density(y));
      sum += a;
      sum2 += a * a;
    }
    const double n = static_cast<double>(q.mc_samples);
    const double mean = sum / n;
    return {mean, std::sqrt(std::max(0.0, sum2 / n - mean * mean) / n)};
  }
  // h~ is symmetric in (u, v); the quadrature is better conditioned with the
  // smaller exponent on the outer integral.
  if (u > v) {
    MeanFieldQuery swapped = q;
    std::swap(swapped.u, swapped.v);
    return h_tilde(target, swapped);
  }
  const double log_zu = log_normalizer(target, u);
  const double log_zv = log_normalizer(target, v);
  const double su = target.scale / std::sqrt(u), sv = target.scale / std::sqrt(v);
  double worst_inner = 0.0;
  auto outer = [&](double ty) {
    const double y = su * ty;
    const double ly = target.log_density(y);
    const double wy = su * std::exp(u * ly - log_zu);
    if (wy == 0.0) return 0.0;
    auto inner = [&](double tx) {
      const double x = sv * tx;
      const double lx = target.log_density(x);
      return sv * std::exp(v * lx - log_zv) * accept(lx, ly);
    };
    double e = 0.0;
    const double in = detail::integrate_line(inner, q.tolerance, &e);
    worst_inner = std::max(worst_inner, e);
    return wy * in;
  };
  double err = 0.0;
  const double value = detail::integrate_line(outer, q.tolerance, &err);
  const double total_err = err + worst_inner;
  if (!std::isfinite(value) || total_err > 1e-6) {
    std::ostringstream os;
    os << "mean field quadrature did not converge at u=" << u << ", v=" << v << " (value " << value
       << ", error estimate " << total_err << ")";
    throw RuntimeError(os.str());
  }
  return {std::clamp(value, 0.0, 1.0), total_err};
}

inline double h_tilde(const Target1D& target, double u, double v) {
  MeanFieldQuery q;
  q.u = u;
  q.v = v;
  return h_tilde(target, q).value;
}

struct FixedPoint {
  std::vector<double> rho;        // solved components (prefix)
  std::vector<double> betas;      // ladder implied by rho
  std::vector<double> residuals;  // h~(b_{l+1}, b_l) - alpha* per solved pair
  // Index (0-based) of the first pair without an interior root, if any.
  std::optional<std::size_t> no_root_at;
  bool complete() const { return !no_root_at.has_value(); }
};

/// Temperature parameters at which every adjacent pair has mean swap
/// acceptance alpha*. Solved pair by pair with bisection, using that
/// h~(u, v) increases in u on (0, v).
inline FixedPoint fixed_point_rho(const Target1D& target, std::size_t levels, double alpha_star,
                                  RhoBounds bracket = {}, double tol = 1e-6) {
  if (levels < 2) throw ConfigError("fixed point: levels must be >= 2");
  if (!(alpha_star > 0.0 && alpha_star < 1.0)) throw ConfigError("fixed point: alpha_star must lie in (0, 1)");
  FixedPoint out;
  double log_v = 0.0;
  auto h_at = [&](double rho) {
    const double log_u = log_v - std::exp(rho);
    // Below this the hotter level is numerically flat; h~ is at its limit 0.
    if (log_u < -600.0) return 0.0;
    return h_tilde(target, std::exp(log_u), std::exp(log_v));
  };
  for (std::size_t l = 0; l + 1 < levels; ++l) {
    double lo = bracket.lo, hi = bracket.hi;
    const double g_lo = h_at(lo) - alpha_star;
    const double g_hi = h_at(hi) - alpha_star;
    if (!(g_lo > 0.0 && g_hi < 0.0)) {
      out.no_root_at = l;
      break;
    }
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      if (h_at(mid) - alpha_star > 0.0) lo = mid;
      else hi = mid;
    }
    const double root = 0.5 * (lo + hi);
    out.residuals.push_back(h_at(root) - alpha_star);
    out.rho.push_back(root);
    log_v -= std::exp(root);
  }
  out.betas.push_back(1.0);
  double lb = 0.0;
  for (double r : out.rho) {
    lb -= std::exp(r);
    out.betas.push_back(std::exp(lb));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact swap-kernel check on a finite state space.

struct FiniteKernelCheck {
  std::vector<double> weights;  // unnormalized pi(s) > 0
  std::vector<double> betas;    // strictly decreasing, betas[0] = 1
};

struct SparseRow {
  std::vector<std::size_t> cols;
  std::vector<double> probs;
};

inline constexpr std::size_t kMaxProductStates = 100'000;

/// Transition matrix of the swap kernel on the L-fold product space.
/// Product states are indexed in base |S| with level 1 as the least
/// significant digit.
inline std::vector<SparseRow> swap_transition_matrix(const FiniteKernelCheck& check) {
  const std::size_t S = check.weights.size();
  const std::size_t L = check.betas.size();
  if (S == 0 || L < 2) throw ConfigError("finite kernel: need states and at least two levels");
  double total = 1.0;
  for (std::size_t l = 0; l < L; ++l) total *= static_cast<double>(S);
  if (total > static_cast<double>(kMaxProductStates))
    throw ConfigError("finite kernel: product space too large (" + std::to_string(static_cast<long long>(total)) + " states)");
  const std::size_t N = static_cast<std::size_t>(total);
  std::vector<double> log_w(S);
  for (std::size_t s = 0; s < S; ++s) {
    if (!(check.weights[s] > 0.0)) throw ConfigError("finite kernel: weights must be positive");
    log_w[s] = std::log(check.weights[s]);
  }
  std::vector<std::size_t> power(L, 1);
  for (std::size_t l = 1; l < L; ++l) power[l] = power[l - 1] * S;
  const double share = 1.0 / static_cast<double>(L - 1);
  std::vector<SparseRow> rows(N);
  std::vector<std::size_t> digit(L);
  for (std::size_t x = 0; x < N; ++x) {
    for (std::size_t l = 0, r = x; l < L; ++l, r /= S) digit[l] = r % S;
    double stay = 0.0;
    auto& row = rows[x];
    for (std::size_t j = 0; j + 1 < L; ++j) {
      const double p = swap_acceptance(log_w[digit[j]], log_w[digit[j + 1]], check.betas[j], check.betas[j + 1]);
      const std::size_t y = x - digit[j] * power[j] - digit[j + 1] * power[j + 1] + digit[j + 1] * power[j] +
                            digit[j] * power[j + 1];
      if (y == x) {
        stay += share;
        continue;
      }
      row.cols.push_back(y);
      row.probs.push_back(share * p);
      stay += share * (1.0 - p);
    }
    row.cols.push_back(x);
    row.probs.push_back(stay);
  }
  return rows;
}

/// Product density pi_beta over the product space, normalized per level.
inline std::vector<double> product_density(const FiniteKernelCheck& check) {
  const std::size_t S = check.weights.size();
  const std::size_t L = check.betas.size();
  std::vector<std::vector<double>> level(L, std::vector<double>(S));
  for (std::size_t l = 0; l < L; ++l) {
    double z = 0.0;
    for (std::size_t s = 0; s < S; ++s) z += (level[l][s] = std::pow(check.weights[s], check.betas[l]));
    for (auto& v : level[l]) v /= z;
  }
  std::size_t N = 1;
  for (std::size_t l = 0; l < L; ++l) N *= S;
  std::vector<double> out(N);
  for (std::size_t x = 0; x < N; ++x) {
    double p = 1.0;
    for (std::size_t l = 0, r = x; l < L; ++l, r /= S) p *= level[l][r % S];
    out[x] = p;
  }
  return out;
}

/// max_y |(pi_beta S)(y) - pi_beta(y)|. Throws if a row of S does not sum
/// to one within 1e-12.
inline double exact_swap_invariance(const FiniteKernelCheck& check) {
  const auto rows = swap_transition_matrix(check);
  const auto pi = product_density(check);
  std::vector<double> mu(pi.size(), 0.0);
  for (std::size_t x = 0; x < rows.size(); ++x) {
    double rs = 0.0;
    for (std::size_t k = 0; k < rows[x].cols.size(); ++k) {
      mu[rows[x].cols[k]] += pi[x] * rows[x].probs[k];
      rs += rows[x].probs[k];
    }
    if (std::abs(rs - 1.0) > 1e-12) throw RuntimeError("finite kernel: row " + std::to_string(x) + " does not sum to 1");
  }
  double worst = 0.0;
  for (std::size_t y = 0; y < pi.size(); ++y) worst = std::max(worst, std::abs(mu[y] - pi[y]));
  return worst;
}

// ---------------------------------------------------------------------------
// Detailed balance of the tempered random-walk Metropolis kernel.

/// |log[pi^b(x) a_b(x,y) q(y-x)] - log[pi^b(y) a_b(y,x) q(x-y)]|.
template <ContinuousTarget Target>
double detailed_balance_violation(const Target& target, const ContinuousState& x, const ContinuousState& y,
                                  double beta, const ProposalShape& shape) {
  const double lx = target.log_density(x), ly = target.log_density(y);
  const double forward = beta * lx + log_rwm_acceptance(lx, ly, beta) + shape.log_increment_density(y - x);
  const double backward = beta * ly + log_rwm_acceptance(ly, lx, beta) + shape.log_increment_density(x - y);
  return std::abs(forward - backward);
}

/// Max violation over random pairs: x uniform in [lo, hi]^d, beta and shape
/// drawn from the given lists, y a proposal from x.
template <ContinuousTarget Target>
double detailed_balance_audit(const Target& target, const std::vector<double>& betas,
                              const std::vector<ProposalShape>& shapes, std::size_t samples, StreamRng& rng,
                              double lo = 0.0, double hi = 10.0) {
  if (betas.empty() || shapes.empty()) throw ConfigError("audit: need betas and shapes");
  std::uniform_real_distribution<double> box(lo, hi);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_b(0, betas.size() - 1), pick_s(0, shapes.size() - 1);
  const auto d = static_cast<Eigen::Index>(target.dim());
  double worst = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    ContinuousState x(d), z(d);
    for (Eigen::Index k = 0; k < d; ++k) x[k] = box(rng);
    for (Eigen::Index k = 0; k < d; ++k) z[k] = normal(rng);
    const double b = betas[pick_b(rng)];
    const auto& shape = shapes[pick_s(rng)];
    const ContinuousState y = x + shape.cholesky().triangularView<Eigen::Lower>() * z;
    const double v = detailed_balance_violation(target, x, y, b, shape);
    if (!std::isfinite(v)) throw RuntimeError("audit: non-finite violation");
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace apt::oracle
