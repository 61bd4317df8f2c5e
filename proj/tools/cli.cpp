#include "cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include "rfimp/ampute.hpp"
#include "rfimp/csv.hpp"
#include "rfimp/error.hpp"
#include "rfimp/mice.hpp"
#include "rfimp/simstudy.hpp"

namespace rfimp::cli {

namespace {

struct GlobalOptions {
  std::uint64_t seed = kDefaultSeed;
  std::size_t threads = 0;
  int verbosity = 0;
  bool quiet = false;
};

ColumnSpec parse_column_spec(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos || colon == 0)
    throw CLI::ValidationError("--col", "expected name:cont or name:cat=a,b,c, got \"" + text + "\"");
  const std::string name = text.substr(0, colon);
  const std::string kind = text.substr(colon + 1);
  if (kind == "cont") return ColumnSpec::continuous(name);
  if (kind.rfind("cat=", 0) == 0) {
    std::vector<std::string> levels;
    std::stringstream ss(kind.substr(4));
    for (std::string level; std::getline(ss, level, ',');) levels.push_back(level);
    try {
      return ColumnSpec::categorical(name, levels);
    } catch (const Error& e) {
      throw CLI::ValidationError("--col", e.what());
    }
  }
  throw CLI::ValidationError("--col", "unknown column kind in \"" + text + "\"");
}

Dataset load(const std::string& path, const std::vector<std::string>& cols, bool infer,
             const std::string& missing_token) {
  std::vector<ColumnSpec> specs;
  for (const auto& c : cols) specs.push_back(parse_column_spec(c));
  if (infer) return read_csv_inferred(std::filesystem::path(path), specs, missing_token);
  return read_csv(std::filesystem::path(path), specs, missing_token);
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err, const GlobalOptions& g) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("rfimp", sink);
  logger->set_pattern("[%l] %v");
  if (g.quiet)
    logger->set_level(spdlog::level::warn);
  else if (g.verbosity > 0)
    logger->set_level(spdlog::level::debug);
  else
    logger->set_level(spdlog::level::info);
  return logger;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiple imputation with chained random forests and OOB error draws", "rfimp"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  std::optional<std::uint64_t> seed_flag;
  app.add_option("--seed", seed_flag, "Master seed (overrides RFIMP_SEED)");
  app.add_option("--threads", g.threads, "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  app.add_flag("-v,--verbose", g.verbosity, "More logging");
  app.add_flag("-q,--quiet", g.quiet, "Only warnings and errors");

  // generate
  auto* gen = app.add_subcommand("generate", "Simulate a complete X, Z, XZ, Y dataset");
  std::size_t gen_n = 2000;
  std::string gen_out;
  gen->add_option("--n", gen_n, "Rows")->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "Output CSV")->required();

  // ampute
  auto* amp = app.add_subcommand("ampute", "Introduce MCAR or right-tailed MAR missingness");
  std::string amp_in, amp_out, amp_mech = "mcar", amp_weight = "Y";
  std::vector<std::string> amp_cols{"X", "XZ"};
  double amp_prop = 0.5;
  amp->add_option("--in", amp_in, "Complete input CSV")->required();
  amp->add_option("--out", amp_out, "Output CSV")->required();
  amp->add_option("--cols", amp_cols, "Columns made missing together")->delimiter(',');
  amp->add_option("--prop", amp_prop, "Proportion of incomplete rows")->check(CLI::Range(0.0, 1.0));
  amp->add_option("--mech", amp_mech, "mcar | mar-right")->check(CLI::IsMember({"mcar", "mar-right"}));
  amp->add_option("--weight", amp_weight, "Column driving MAR missingness");

  // impute
  auto* imp = app.add_subcommand("impute", "Multiple imputation by chained equations");
  std::string imp_in, imp_prefix, imp_method = "empirical", imp_missing = std::string(kDefaultMissingToken);
  std::size_t imp_m = 10, imp_maxit = 10, imp_trees = 10, imp_donors = 5;
  std::vector<std::string> imp_cols;
  bool imp_infer = false;
  imp->add_option("--in", imp_in, "Incomplete input CSV")->required();
  imp->add_option("--out-prefix", imp_prefix, "Writes <prefix>_1.csv ... and <prefix>_trace.csv")->required();
  imp->add_option("--method", imp_method, "empirical | normal | pmm")
      ->check(CLI::IsMember({"empirical", "normal", "pmm", "sample"}));
  imp->add_option("--m", imp_m, "Imputations")->check(CLI::PositiveNumber);
  imp->add_option("--maxit", imp_maxit, "Iterations per chain")->check(CLI::PositiveNumber);
  imp->add_option("--trees", imp_trees, "Trees per forest")->check(CLI::PositiveNumber);
  imp->add_option("--donors", imp_donors, "PMM donors")->check(CLI::PositiveNumber);
  imp->add_option("--col", imp_cols, "Column spec name:cont or name:cat=a,b,c (repeatable)");
  imp->add_flag("--infer", imp_infer, "Infer specs of columns without --col");
  imp->add_option("--missing-token", imp_missing, "Token read and written for missing cells");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run the amputation/imputation/analysis study");
  ScenarioConfig scfg;
  std::string sim_mech = "mcar", sim_out = "report", sim_patterns = "joint";
  std::vector<std::string> sim_methods{"empirical", "normal", "pmm"};
  sim->add_option("--mech", sim_mech, "mcar | mar-right")->check(CLI::IsMember({"mcar", "mar-right"}));
  sim->add_option("--reps", scfg.n_reps, "Replications")->check(CLI::PositiveNumber);
  sim->add_option("--n", scfg.n_obs, "Rows per dataset")->check(CLI::Range(std::size_t{10}, std::size_t{100000000}));
  sim->add_option("--m", scfg.n_imputations, "Imputations")->check(CLI::PositiveNumber);
  sim->add_option("--maxit", scfg.n_iterations, "Iterations per chain")->check(CLI::PositiveNumber);
  sim->add_option("--trees", scfg.n_trees, "Trees per forest")->check(CLI::PositiveNumber);
  sim->add_option("--prop", scfg.prop, "Proportion of incomplete rows")->check(CLI::Range(0.0, 1.0));
  sim->add_option("--methods", sim_methods, "Comma-separated methods")
      ->delimiter(',')
      ->check(CLI::IsMember({"empirical", "normal", "pmm", "sample"}));
  sim->add_option("--out", sim_out, "Report directory");
  sim->add_option("--patterns", sim_patterns, "joint | mixed missingness patterns for X and XZ")
      ->check(CLI::IsMember({"joint", "mixed"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  if (seed_flag) {
    g.seed = *seed_flag;
  } else if (const char* env = std::getenv("RFIMP_SEED"); env && *env) {
    try {
      std::size_t pos = 0;
      g.seed = std::stoull(env, &pos);
      if (env[pos] != '\0') throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      err << "error: RFIMP_SEED is not an unsigned integer: " << env << "\n";
      return kUsage;
    }
  }
  auto log = make_logger(err, g);

  try {
    if (*gen) {
      ScenarioConfig cfg;
      cfg.n_obs = gen_n;
      Rng rng(derive_seed(g.seed, {0}));
      write_csv(generate(cfg, rng), std::filesystem::path(gen_out));
      log->info("generate: wrote {} rows to {}", gen_n, gen_out);
    } else if (*amp) {
      const Dataset ds = read_csv_inferred(std::filesystem::path(amp_in));
      AmputeConfig cfg;
      cfg.pattern_columns = amp_cols;
      cfg.prop = amp_prop;
      cfg.mechanism = parse_mechanism(amp_mech);
      cfg.weight_column = amp_weight;
      cfg.rng_seed = g.seed;
      const Dataset out_ds = ampute(ds, cfg);
      write_csv(out_ds, std::filesystem::path(amp_out));
      std::size_t incomplete = 0;
      const auto& first = out_ds.column(amp_cols.front());
      for (std::size_t r = 0; r < out_ds.n_rows(); ++r) incomplete += first.is_missing(r) ? 1 : 0;
      log->info("ampute: {} of {} rows incomplete", incomplete, out_ds.n_rows());
    } else if (*imp) {
      const Dataset ds = load(imp_in, imp_cols, imp_infer, imp_missing);
      const Method method = parse_method(imp_method);
      ImputationConfig cfg = ImputationConfig::uniform(ds, method);
      for (auto& [name, m] : cfg.methods) {
        if (m == Method::PMM && ds.column(name).kind() == ColumnKind::Categorical) {
          m = Method::EmpiricalRF;
          log->info("impute: categorical column {} uses forest class draws instead of PMM", name);
        }
      }
      cfg.n_imputations = imp_m;
      cfg.n_iterations = imp_maxit;
      cfg.forest.n_trees = imp_trees;
      cfg.pmm_donors = imp_donors;
      cfg.rng_seed = g.seed;
      cfg.threads = g.threads;
      const auto t0 = std::chrono::steady_clock::now();
      const ImputationResult result = rfimp::run(ds, cfg);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      for (std::size_t k = 0; k < result.completed.size(); ++k)
        write_csv(result.completed[k], std::filesystem::path(imp_prefix + "_" + std::to_string(k + 1) + ".csv"),
                  imp_missing);
      std::ofstream trace(imp_prefix + "_trace.csv", std::ios::binary);
      if (!trace) throw Error("cli", "cannot write " + imp_prefix + "_trace.csv");
      trace << "imputation,iteration,column,mean\n";
      for (const auto& t : result.chain_means)
        trace << t.imputation + 1 << ',' << t.iteration + 1 << ',' << t.column << ','
              << format_double(t.mean) << '\n';
      log->info("impute: {} imputations x {} iterations in {:.2f}s", imp_m, imp_maxit, secs);
      if (result.fallback_count())
        log->warn("impute: {} steps had an empty OOB pool and used the in-bag residual variance",
                  result.fallback_count());
      if (result.ridge_count()) log->warn("impute: {} PMM steps needed a ridge term", result.ridge_count());
    } else if (*sim) {
      scfg.mechanism = parse_mechanism(sim_mech);
      scfg.patterns = parse_pattern_design(sim_patterns);
      scfg.methods.clear();
      for (const auto& m : sim_methods) scfg.methods.push_back(parse_method(m));
      scfg.rng_seed = g.seed;
      scfg.threads = g.threads;
      const std::size_t every = std::max<std::size_t>(1, scfg.n_reps / 10);
      const auto result = run_study(scfg, [&](std::size_t done) {
        if (done % every == 0 || done == scfg.n_reps) log->debug("simulate: {}/{} reps", done, scfg.n_reps);
      });
      write_report(result, std::filesystem::path(sim_out));
      for (const auto& row : result.summary)
        log->info("{:>9} {:>2}  bias {:+.4f}  width {:.4f}  coverage {:.3f}", row.arm, row.coefficient,
                  row.median_relative_bias, row.median_ci_width, row.coverage);
      for (const auto& [arm, s] : result.seconds) log->info("time {:>9} {:.2f}s", arm, s);
      if (result.oob.steps)
        log->info("OOB exclusion: mean {:.4f}, max {:.4f} over {} RF steps", result.oob.mean_fraction,
                  result.oob.max_fraction, result.oob.steps);
      if (result.n_failed) {
        log->warn("simulate: {} reps failed", result.n_failed);
        for (const auto& f : result.failures) log->warn("  {}", f);
      }
    }
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}

}  // namespace rfimp::cli
