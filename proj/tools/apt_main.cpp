// Command-line front end: single runs, published protocols, and oracle
// tables.
//
//   apt run       --config FILE [overrides]       sample one configuration
//   apt reproduce table1|table2|table3|ising      rerun a published protocol
//   apt oracle    --target normal --levels L      fixed-point temperatures
//
// Exit codes: 0 success, 2 usage or configuration error, 1 runtime error.

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "apt/experiment.hpp"
#include "apt/io.hpp"
#include "apt/oracle.hpp"
#include "apt/replicate.hpp"
#include "apt/sampler.hpp"
#include "apt/worker_pool.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "1.0.0";

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> levels, iters, burnin, thin;
  std::optional<std::string> adaptation;
  std::vector<std::string> set;
};

void apply_overrides(apt::ExperimentConfig& c, const Overrides& o) {
  if (o.seed) c.sampler.seed = *o.seed;
  if (o.levels) c.sampler.levels = *o.levels;
  if (o.iters) c.sampler.iterations = *o.iters;
  if (o.burnin) c.sampler.burn_in = *o.burnin;
  if (o.thin) c.sampler.thin = *o.thin;
  if (o.adaptation) c.sampler.adapt.mode = apt::parse_adapt_mode(*o.adaptation);
  for (const auto& kv : o.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw apt::ConfigError("--set: expected key=value (got '" + kv + "')");
    apt::set_config_value(c, apt::detail::trim(kv.substr(0, eq)), apt::detail::trim(kv.substr(eq + 1)));
  }
}

std::string timestamp() {
  const std::time_t t = std::time(nullptr);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw apt::RuntimeError("cannot write " + p.string());
  return out;
}

std::size_t resolve_workers(std::size_t requested) {
  return requested == 0 ? apt::WorkerPool::default_workers() : requested;
}

// ---------------------------------------------------------------------------
// run

struct RunArgs {
  std::string config;
  std::string out_dir = "apt-out";
  std::size_t workers = 1;
  Overrides over;
};

int cmd_run(const RunArgs& args) {
  apt::ExperimentConfig config;
  if (!args.config.empty()) {
    if (!fs::exists(args.config)) throw apt::ConfigError("config not found: " + args.config);
    config = apt::load_config(args.config);
  }
  apply_overrides(config, args.over);
  apt::validate(config);
  const apt::AnyTarget target = apt::make_target(config);
  const auto truth = apt::known_truth(config);

  const fs::path dir = args.out_dir;
  fs::create_directories(dir);
  const fs::path manifest_path = dir / "manifest.txt", trace_path = dir / "trace.jsonl",
                 summary_path = dir / "summary.csv", betas_path = dir / "betas.csv",
                 scatter_path = dir / "scatter_level1.csv", image_path = dir / "posterior_mean.pgm";
  const bool lattice = config.target == "ising";
  const std::size_t workers = resolve_workers(args.workers);

  {
    auto m = open_out(manifest_path);
    m << "# apt-manifest v1\n";
    m << "# tool_version " << kToolVersion << '\n';
    m << "# started " << timestamp() << '\n';
    m << "# workers " << workers << " (does not affect results)\n";
    m << "# artifacts " << trace_path.filename().string() << ' ' << summary_path.filename().string() << ' '
      << betas_path.filename().string() << ' '
      << (lattice ? image_path.filename().string() : scatter_path.filename().string()) << '\n';
    apt::write_config(m, config);
  }

  auto trace_out = open_out(trace_path);
  auto betas_out = open_out(betas_path);
  std::ofstream scatter_out;
  if (!lattice) scatter_out = open_out(scatter_path);

  const auto start = std::chrono::steady_clock::now();
  apt::WorkerPool pool(workers);
  apt::RunSummary summary = std::visit(
      [&](const auto& t) {
        std::size_t dim = 0;
        if constexpr (std::is_same_v<std::decay_t<decltype(t)>, apt::IsingPosterior>) dim = t.sites();
        else dim = t.dim();
        apt::TraceWriter trace(trace_out, {config.sampler.levels, dim});
        apt::BetaTableWriter betas(betas_out, config.sampler.levels);
        std::optional<apt::ScatterTableWriter> scatter;
        if (!lattice) scatter.emplace(scatter_out, dim);
        auto sink = [&](const apt::IterationRecord& r) {
          trace.write(r);
          betas.write(r);
          if (scatter) scatter->write(r);
        };
        return apt::run(t, config.sampler, sink, &pool);
      },
      target);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const auto table = apt::tabulate({summary}, truth);
  {
    auto s = open_out(summary_path);
    apt::write_summary(s, table);
  }
  if (lattice) {
    const auto& t = std::get<apt::IsingPosterior>(target);
    auto img = open_out(image_path);
    apt::write_graymap(img, t.rows(), t.cols(), summary.mean);
  }
  {
    std::ofstream m(manifest_path, std::ios::app);
    m << "# finished " << timestamp() << " wall_clock_seconds " << apt::format_double(seconds) << '\n';
  }

  std::cout << "wrote " << dir.string() << " (" << summary.iterations << " iterations, " << summary.count
            << " post burn-in samples, " << seconds << " s)\n";
  std::cout << "final betas:";
  for (double b : summary.final_betas) std::cout << ' ' << b;
  std::cout << "\nswap acceptance per pair:";
  for (double a : summary.swap_accept_mean) std::cout << ' ' << a;
  std::cout << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// reproduce

struct ReproduceArgs {
  std::string table;
  std::string out_dir = "apt-reproduce";
  std::size_t replications = 100;
  std::size_t workers = 0;
  std::uint64_t seed = 1;
  std::vector<std::size_t> sizes;
  std::vector<std::string> modes;
};

std::vector<apt::ModeColumn> selected_modes(const std::vector<std::string>& names) {
  if (names.empty()) return {std::begin(apt::kModeColumns), std::end(apt::kModeColumns)};
  std::vector<apt::ModeColumn> out;
  for (const auto& n : names) {
    const auto mode = apt::parse_adapt_mode(n);
    for (const auto& c : apt::kModeColumns)
      if (c.mode == mode) out.push_back(c);
  }
  return out;
}

apt::ReplicationTable replicate_config(const apt::ExperimentConfig& config, std::size_t replications,
                                       apt::WorkerPool& pool) {
  apt::validate(config);
  const auto truth = apt::known_truth(config);
  return std::visit([&](const auto& t) { return apt::replicate(t, config.sampler, replications, &pool, truth); },
                    apt::make_target(config));
}

int cmd_reproduce(const ReproduceArgs& args) {
  if (args.replications < 1) throw apt::ConfigError("replications: must be >= 1");
  const fs::path dir = args.out_dir;
  fs::create_directories(dir);
  apt::WorkerPool pool(resolve_workers(args.workers));
  const auto modes = selected_modes(args.modes);
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream text;

  if (args.table == "table1" || args.table == "table2") {
    const bool one = args.table == "table1";
    std::vector<std::pair<std::string, apt::ReplicationTable>> rows;
    apt::TrueValues truth;
    for (const auto& m : modes) {
      auto c = one ? apt::table1_config(m.mode) : apt::table2_config(m.mode);
      c.sampler.seed = args.seed;
      truth = *apt::known_truth(c);
      rows.emplace_back(m.label, replicate_config(c, args.replications, pool));
    }
    const auto& c0 = one ? apt::table1_config(apt::AdaptMode::Cov) : apt::table2_config(apt::AdaptMode::Cov);
    std::ostringstream title;
    title << "L = " << c0.sampler.levels << " temperature levels, " << c0.sampler.iterations << " iterations and "
          << c0.sampler.effective_burn_in() << " burn-in; mean (std) over " << args.replications << " runs";
    apt::write_moment_table(text, title.str(), rows, truth);
    std::vector<std::pair<std::string, const apt::ReplicationTable*>> csv;
    for (const auto& [l, t] : rows) csv.emplace_back(l, &t);
    auto out = open_out(dir / (args.table + ".csv"));
    apt::write_table_csv(out, csv);
  } else if (args.table == "table3") {
    const auto sizes = args.sizes.empty() ? apt::table3_default_sizes() : args.sizes;
    std::vector<apt::RmseCell> cells;
    for (std::size_t n : sizes)
      for (const auto& m : modes) {
        auto c = apt::table3_config(m.mode, n);
        c.sampler.seed = args.seed;
        cells.push_back({n, m.label, replicate_config(c, args.replications, pool)});
      }
    std::ostringstream title;
    title << "Root mean square errors, variance 0.001, d = 8, L = 8, " << args.replications
          << " runs, first half burn-in";
    apt::write_rmse_table(text, title.str(), cells);
    std::vector<std::string> labels;
    std::vector<std::pair<std::string, const apt::ReplicationTable*>> csv;
    for (const auto& c : cells) labels.push_back(std::string(c.label) + "@" + std::to_string(c.iterations));
    for (std::size_t i = 0; i < cells.size(); ++i) csv.emplace_back(labels[i], &cells[i].table);
    auto out = open_out(dir / "table3.csv");
    apt::write_table_csv(out, csv);
  } else if (args.table == "ising") {
    auto c = apt::ising_config();
    c.sampler.seed = args.seed;
    const auto table = replicate_config(c, args.replications, pool);
    const auto spec = apt::ising_spec(c);
    std::vector<double> mean(spec.observed.pixels().size(), 0.0);
    for (const auto& r : table.runs)
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += r.mean[i] / static_cast<double>(table.runs.size());
    {
      auto img = open_out(dir / "ising_posterior_mean.pgm");
      apt::write_graymap(img, spec.observed.rows(), spec.observed.cols(), mean);
      auto obs = open_out(dir / "ising_observed.pgm");
      std::vector<double> y(spec.observed.pixels().begin(), spec.observed.pixels().end());
      apt::write_graymap(obs, spec.observed.rows(), spec.observed.cols(), y);
    }
    {
      auto out = open_out(dir / "ising_swap_acceptance.csv");
      out << "# apt-table v1\nlabel,estimator,mean,std,rmse\n";
      for (const auto& r : table.rows)
        if (r.name.rfind("swap_accept_", 0) == 0 || r.name.rfind("beta_", 0) == 0)
          out << "ising," << r.name << ',' << apt::format_double(r.mean) << ',' << apt::format_double(r.std)
              << ",nan\n";
    }
    text << "Binary image posterior, " << c.sampler.levels << " levels, " << c.sampler.iterations
         << " iterations, " << args.replications << " runs\n";
    text << "pair  swap acceptance mean (std)\n";
    for (std::size_t j = 1; j < c.sampler.levels; ++j) {
      const auto& r = table.row("swap_accept_" + std::to_string(j));
      text << j << '-' << j + 1 << "   " << apt::detail::fixed3(r.mean) << " (" << apt::detail::fixed3(r.std) << ")\n";
    }
  } else {
    throw apt::ConfigError("table: expected one of table1, table2, table3, ising (got '" + args.table + "')");
  }

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  text << "wall clock " << seconds << " s\n";
  {
    auto out = open_out(dir / (args.table + ".txt"));
    out << text.str();
  }
  std::cout << text.str();
  return 0;
}

// ---------------------------------------------------------------------------
// oracle

struct OracleArgs {
  std::string target = "normal";
  std::size_t levels = 4;
  double alpha_star = 0.234;
  std::size_t grid = 0;
  std::string method = "quadrature";
  std::string out;
};

int cmd_oracle(const OracleArgs& args) {
  const auto target = apt::oracle::target_by_name(args.target);
  if (!target) throw apt::ConfigError("target: unknown oracle target '" + args.target + "' (normal, laplace, bimodal)");
  if (args.levels < 2) throw apt::ConfigError("levels: must be >= 2");
  if (!(args.alpha_star > 0.0 && args.alpha_star < 1.0)) throw apt::ConfigError("alpha_star: must lie in (0, 1)");
  apt::oracle::Integrator method = apt::oracle::Integrator::Quadrature;
  if (args.method == "mc") method = apt::oracle::Integrator::MonteCarlo;
  else if (args.method != "quadrature") throw apt::ConfigError("method: expected quadrature or mc");
  if (method == apt::oracle::Integrator::MonteCarlo && !target->sample_tempered)
    throw apt::ConfigError("method: target '" + args.target + "' has no exact sampler for mc");

  std::ostringstream out;
  out << "# apt-oracle v1 target=" << args.target << " levels=" << args.levels
      << " alpha_star=" << apt::format_double(args.alpha_star) << '\n';
  const auto fp = apt::oracle::fixed_point_rho(*target, args.levels, args.alpha_star);
  out << "pair,rho,beta_upper,beta_lower,residual\n";
  for (std::size_t l = 0; l < fp.rho.size(); ++l)
    out << l + 1 << ',' << apt::format_double(fp.rho[l]) << ',' << apt::format_double(fp.betas[l]) << ','
        << apt::format_double(fp.betas[l + 1]) << ',' << apt::format_double(fp.residuals[l]) << '\n';
  if (fp.no_root_at) out << "# no interior root at level " << *fp.no_root_at + 1 << '\n';

  if (args.grid > 0) {
    out << "u,v,h_tilde,error\n";
    for (std::size_t i = 1; i <= args.grid; ++i) {
      apt::oracle::MeanFieldQuery q;
      q.v = 1.0;
      q.u = static_cast<double>(i) / static_cast<double>(args.grid);
      q.method = method;
      const auto h = apt::oracle::h_tilde(*target, q);
      out << apt::format_double(q.u) << ',' << apt::format_double(q.v) << ',' << apt::format_double(h.value) << ','
          << apt::format_double(h.error) << '\n';
    }
  }
  if (args.out.empty()) {
    std::cout << out.str();
  } else {
    auto f = open_out(args.out);
    f << out.str();
  }
  if (fp.no_root_at) std::cerr << "no interior root at level " << *fp.no_root_at + 1 << '\n';
  return 0;
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--levels", o.levels, "Number of temperature levels");
  cmd->add_option("--iters", o.iters, "Iterations");
  cmd->add_option("--burnin", o.burnin, "Burn-in iterations");
  cmd->add_option("--thin", o.thin, "Trace thinning interval");
  cmd->add_option("--adaptation", o.adaptation, "Random-walk adaptation")
      ->check(CLI::IsMember({"cov", "covg", "ram"}));
  cmd->add_option("--set", o.set, "Any config key as key=value (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive parallel tempering sampler"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Sample one configuration and write trace, summary and plot tables");
  run->add_option("--config", run_args.config, "Config file (key = value lines)");
  run->add_option("--out-dir", run_args.out_dir, "Output directory");
  run->add_option("--workers", run_args.workers, "Worker threads for per-level moves (0 = all cores)");
  add_overrides(run, run_args.over);

  ReproduceArgs rep_args;
  auto* rep = app.add_subcommand("reproduce", "Rerun a published protocol for every adaptation");
  rep->add_option("table", rep_args.table, "table1 | table2 | table3 | ising")->required();
  rep->add_option("--out-dir", rep_args.out_dir, "Output directory");
  rep->add_option("--replications", rep_args.replications, "Independent runs per cell");
  rep->add_option("--workers", rep_args.workers, "Worker threads across replications (0 = all cores)");
  rep->add_option("--seed", rep_args.seed, "Base seed");
  rep->add_option("--sizes", rep_args.sizes, "Iteration counts for table3")->delimiter(',');
  rep->add_option("--modes", rep_args.modes, "Subset of cov,covg,ram")->delimiter(',');

  OracleArgs or_args;
  auto* orc = app.add_subcommand("oracle", "Fixed-point temperatures and mean swap acceptance of a 1-D target");
  orc->add_option("--target", or_args.target, "normal | laplace | bimodal");
  orc->add_option("--levels", or_args.levels, "Number of temperature levels");
  orc->add_option("--alpha-star", or_args.alpha_star, "Target swap acceptance");
  orc->add_option("--grid", or_args.grid, "Also tabulate the mean swap acceptance at u = k/grid, v = 1");
  orc->add_option("--method", or_args.method, "quadrature | mc");
  orc->add_option("--out", or_args.out, "Write CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*rep) return cmd_reproduce(rep_args);
    if (*orc) return cmd_oracle(or_args);
  } catch (const apt::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
