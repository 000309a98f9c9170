#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "apt/rng.hpp"
#include "apt/sampler.hpp"
#include "apt/worker_pool.hpp"

namespace apt {

/// Known expectations used to compute RMSE columns.
struct TrueValues {
  std::vector<double> mean;           // E[X_i]
  std::vector<double> second_moment;  // E[X_i^2]
  double sq_norm = std::numeric_limits<double>::quiet_NaN();  // E[|X|^2]
};

inline TrueValues true_values(const GaussianMixtureSpec& spec) {
  TrueValues t;
  const auto m = spec.mean();
  const auto s = spec.second_moment();
  t.mean.assign(m.data(), m.data() + m.size());
  t.second_moment.assign(s.data(), s.data() + s.size());
  t.sq_norm = s.sum();
  return t;
}

struct EstimatorRow {
  std::string name;
  double mean = 0.0;
  double std = 0.0;
  double rmse = std::numeric_limits<double>::quiet_NaN();
};

/// Across-replication statistics.
///
/// Scalar rows report the mean and sample standard deviation of the
/// per-replication estimates and their RMSE against the true value. The
/// vector row "E[X]" reports the norm of the averaged estimate, the square
/// root of the summed per-coordinate variances, and
/// sqrt(mean_r |E_r[X] - E[X]|^2).
struct ReplicationTable {
  std::size_t replications = 0;
  bool single_replication = false;  // std is reported as 0 and undefined
  std::vector<EstimatorRow> rows;
  std::vector<RunSummary> runs;

  const EstimatorRow& row(const std::string& name) const {
    for (const auto& r : rows)
      if (r.name == name) return r;
    throw std::out_of_range("no estimator row named " + name);
  }
};

namespace detail {

inline EstimatorRow scalar_row(std::string name, const std::vector<double>& values, double truth) {
  EstimatorRow row;
  row.name = std::move(name);
  const double R = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  row.mean = sum / R;
  double ss = 0.0, se = 0.0;
  for (double v : values) {
    ss += (v - row.mean) * (v - row.mean);
    se += (v - truth) * (v - truth);
  }
  row.std = values.size() > 1 ? std::sqrt(ss / (R - 1.0)) : 0.0;
  if (!std::isnan(truth)) row.rmse = std::sqrt(se / R);
  return row;
}

}  // namespace detail

/// Build the table from finished runs.
inline ReplicationTable tabulate(std::vector<RunSummary> runs, const std::optional<TrueValues>& truth,
                                 std::size_t max_coordinate_rows = 16) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  ReplicationTable t;
  t.replications = runs.size();
  t.single_replication = runs.size() == 1;
  if (runs.empty()) return t;
  const std::size_t d = runs.front().mean.size();
  auto collect = [&](auto&& get) {
    std::vector<double> v;
    v.reserve(runs.size());
    for (const auto& r : runs) v.push_back(get(r));
    return v;
  };
  if (d <= max_coordinate_rows) {
    for (std::size_t i = 0; i < d; ++i)
      t.rows.push_back(detail::scalar_row("E[X" + std::to_string(i + 1) + "]",
                                          collect([&](const RunSummary& r) { return r.mean[i]; }),
                                          truth && i < truth->mean.size() ? truth->mean[i] : nan));
    for (std::size_t i = 0; i < d; ++i)
      t.rows.push_back(detail::scalar_row("E[X" + std::to_string(i + 1) + "^2]",
                                          collect([&](const RunSummary& r) { return r.second_moment[i]; }),
                                          truth && i < truth->second_moment.size() ? truth->second_moment[i] : nan));
  }
  {
    EstimatorRow row;
    row.name = "E[X]";
    const double R = static_cast<double>(runs.size());
    std::vector<double> avg(d, 0.0);
    for (const auto& r : runs)
      for (std::size_t i = 0; i < d; ++i) avg[i] += r.mean[i] / R;
    double norm2 = 0.0, var = 0.0, se = 0.0;
    for (std::size_t i = 0; i < d; ++i) norm2 += avg[i] * avg[i];
    for (const auto& r : runs)
      for (std::size_t i = 0; i < d; ++i) {
        var += (r.mean[i] - avg[i]) * (r.mean[i] - avg[i]);
        if (truth && truth->mean.size() == d) se += (r.mean[i] - truth->mean[i]) * (r.mean[i] - truth->mean[i]);
      }
    row.mean = std::sqrt(norm2);
    row.std = runs.size() > 1 ? std::sqrt(var / (R - 1.0)) : 0.0;
    if (truth && truth->mean.size() == d) row.rmse = std::sqrt(se / R);
    t.rows.push_back(row);
  }
  t.rows.push_back(detail::scalar_row("E[|X|^2]", collect([](const RunSummary& r) { return r.mean_sq_norm; }),
                                      truth ? truth->sq_norm : nan));
  const std::size_t pairs = runs.front().swap_accept_mean.size();
  for (std::size_t j = 0; j < pairs; ++j)
    t.rows.push_back(detail::scalar_row("swap_accept_" + std::to_string(j + 1),
                                        collect([&](const RunSummary& r) { return r.swap_accept_mean[j]; }), nan));
  for (std::size_t l = 0; l < runs.front().final_betas.size(); ++l)
    t.rows.push_back(detail::scalar_row("beta_" + std::to_string(l + 1),
                                        collect([&](const RunSummary& r) { return r.final_betas[l]; }), nan));
  t.runs = std::move(runs);
  return t;
}

/// R independent runs; replication r uses seed replication_seed(config.seed, r).
/// Runs are distributed over `pool` when given; results do not depend on it.
template <SamplerTarget Target>
ReplicationTable replicate(const Target& target, const SamplerConfig& config, std::size_t replications,
                           WorkerPool* pool = nullptr, const std::optional<TrueValues>& truth = std::nullopt) {
  if (replications < 1) throw ConfigError("replications: must be >= 1");
  config.validate();
  std::vector<RunSummary> runs(replications);
  auto one = [&](std::size_t r) {
    SamplerConfig c = config;
    c.seed = replication_seed(config.seed, r);
    c.record_state = false;
    runs[r] = run(target, c);
  };
  if (pool) {
    pool->parallel_for(replications, one);
  } else {
    for (std::size_t r = 0; r < replications; ++r) one(r);
  }
  return tabulate(std::move(runs), truth);
}

}  // namespace apt
