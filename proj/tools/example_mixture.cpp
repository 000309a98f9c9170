#include <cstdio>

#include "apt/sampler.hpp"
#include "apt/target.hpp"

int main() {
  apt::GaussianMixture target(apt::canonical_mixture());

  apt::SamplerConfig config;
  config.levels = 5;
  config.iterations = 5000;
  config.seed = 7;
  config.adapt.mode = apt::AdaptMode::Ram;

  const auto summary = apt::run(target, config);

  std::printf("E[X1] = %.3f  E[X2] = %.3f  over %zu samples\n", summary.mean[0], summary.mean[1], summary.count);
  for (std::size_t l = 0; l < summary.final_betas.size(); ++l)
    std::printf("beta_%zu = %.4g\n", l + 1, summary.final_betas[l]);
  for (std::size_t l = 0; l < summary.swap_accept_mean.size(); ++l)
    std::printf("swap %zu<->%zu accepted %.3f\n", l + 1, l + 2, summary.swap_accept_mean[l]);
}
