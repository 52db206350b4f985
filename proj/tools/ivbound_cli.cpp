#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "cli_commands.hpp"
#include "ivbound/errors.hpp"

using namespace ivbound;
using namespace ivbound::cli;

namespace {

void add_gibbs_flags(CLI::App* cmd, GibbsConfig& gibbs) {
  cmd->add_option("--gibbs-concentration", gibbs.prior_concentration,
                  "Dirichlet prior concentration per stratum");
  cmd->add_option("--gibbs-burn-in", gibbs.burn_in, "Burn-in sweeps per chain");
  cmd->add_option("--gibbs-samples", gibbs.n_samples, "Total posterior samples across chains");
  cmd->add_option("--gibbs-thinning", gibbs.thinning, "Keep every k-th sweep");
  cmd->add_option("--gibbs-chains", gibbs.n_chains, "Number of merged chains");
  cmd->add_option("--gibbs-bins", gibbs.histogram_bins, "Histogram bins over [-1, 1]");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial-identification toolkit for binary instrumental variables"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file (INI); command-line flags win");

  RunContext ctx;
  const char* env_out = std::getenv("IVBOUND_OUT_DIR");
  ctx.out_dir = env_out ? env_out : ".";
  bool dump_config = false;
  app.add_flag("--dump-config", dump_config,
               "Print the resolved configuration as an INI file and exit");
  app.add_option("--seed", ctx.seed, "Global seed; every task derives its own stream")
      ->capture_default_str();
  app.add_option("--out", ctx.out_dir, "Output directory (env IVBOUND_OUT_DIR)")
      ->capture_default_str();
  app.add_option("--jobs", ctx.jobs, "Worker pool size for whole-task parallelism")
      ->capture_default_str();
  app.add_option("--format", ctx.format, "Report format: json or csv")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();

  // ---- gen --------------------------------------------------------------
  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate benchmark datasets");
  gen_cmd->add_option("target", gen.target, "prior | binary | calib | covfree")->required();
  gen_cmd->add_option("--count", gen.count, "Datasets to generate")->capture_default_str();
  gen_cmd->add_option("--n", gen.n, "Rows per dataset")->capture_default_str();
  gen_cmd->add_option("--d-min", gen.d_min)->capture_default_str();
  gen_cmd->add_option("--d-max", gen.d_max)->capture_default_str();
  gen_cmd->add_option("--gamma", gen.gamma, "Dirichlet recentering concentration")
      ->capture_default_str();
  gen_cmd->add_flag("--no-recenter", gen.no_recenter, "Disable the recentering shift");
  gen_cmd->add_option("--family", gen.family, "calib family: linear | poly | deepnl")
      ->capture_default_str();
  gen_cmd->add_option("--d", gen.d, "Covariate dimension (calib)")->capture_default_str();
  gen_cmd->add_option("--alpha", gen.alpha, "Dirichlet alpha (covfree)")->capture_default_str();
  gen_cmd->add_option("--min-set-width", gen.min_set_width)->capture_default_str();
  double complier_mass = -1.0;
  gen_cmd->add_option("--complier-mass", complier_mass, "Strong-instrument regime (covfree)");
  gen_cmd->add_flag("!--no-strata-sidecar", gen.with_strata,
                    "Drop per-row strata probabilities from the sidecar");

  // ---- convert ------------------------------------------------------------
  ConvertOptions convert;
  auto* convert_cmd = app.add_subcommand("convert", "Convert an RCT table into an IV benchmark");
  convert_cmd->require_subcommand(1);
  auto* rct_cmd = convert_cmd->add_subcommand("rct", "Accept-reject conversion of an RCT CSV");
  rct_cmd->add_option("--in", convert.input, "Input CSV")->required();
  rct_cmd->add_option("--preset", convert.preset, "jobs | star | custom")->capture_default_str();
  rct_cmd->add_option("--conversion-config", convert.config_path,
                      "ConversionConfig JSON (preset custom)");
  rct_cmd->add_option("--beta", convert.beta, "Instrument strength")->capture_default_str();
  rct_cmd->add_option("--beta-sweep", convert.beta_sweep, "One output per beta")->delimiter(',');
  rct_cmd->add_option("--star-contrast", convert.star_contrast, "small | aide")
      ->capture_default_str();
  rct_cmd->add_option("--star-outcome", convert.star_outcome, "reading | math")
      ->capture_default_str();

  // ---- bounds -------------------------------------------------------------
  BoundsOptions bounds;
  auto* bounds_cmd =
      app.add_subcommand("bounds", "Closed-form or LP-oracle bounds for a dataset");
  bounds_cmd->add_option("--in", bounds.input, "Dataset CSV")->required();
  bounds_cmd->add_option("--method", bounds.method, "closed | lp")
      ->check(CLI::IsMember({"closed", "lp"}))
      ->capture_default_str();
  bounds_cmd->add_option("--model", bounds.model, "pooled | stratified | mnl")
      ->capture_default_str();
  bounds_cmd->add_option("--report", bounds.report_path, "Report path");

  // ---- estimate -------------------------------------------------------------
  EstimateOptions estimate;
  auto* estimate_cmd = app.add_subcommand("estimate", "Interval estimators");
  estimate_cmd->add_option("--in", estimate.input, "Dataset CSV")->required();
  estimate_cmd->add_option("--method", estimate.method, "plugin | bayes")
      ->check(CLI::IsMember({"plugin", "bayes"}))
      ->capture_default_str();
  estimate_cmd->add_option("--model", estimate.model, "plugin model kind")->capture_default_str();
  estimate_cmd->add_option("--strat", estimate.strat_spec, "Stratification col:bins[,col:bins]");
  estimate_cmd->add_option("--binarize", estimate.binarize,
                           "Continuous outcomes: median | threshold:V | grid:J");
  estimate_cmd->add_option("--alpha", estimate.alpha, "Quantile interval level")
      ->capture_default_str();
  estimate_cmd->add_flag("--emit-histogram", estimate.emit_histogram,
                         "Include the posterior histogram in the report");
  estimate_cmd->add_option("--report", estimate.report_path, "Report path");
  add_gibbs_flags(estimate_cmd, estimate.gibbs);

  // ---- eval -------------------------------------------------------------
  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Validity / width / time evaluation");
  eval_cmd->add_option("--benchmark", eval.benchmark,
                       "binary | covfree | prior | calib-linear | calib-poly | calib-deepnl")
      ->capture_default_str();
  eval_cmd->add_option("--methods", eval.methods, "Methods to evaluate")->delimiter(',');
  eval_cmd->add_option("--seeds", eval.seeds, "Seeds per method")->capture_default_str();
  eval_cmd->add_option("--n", eval.n, "Rows per dataset")->capture_default_str();
  eval_cmd->add_option("--d", eval.d, "Covariate dimension (calib)")->capture_default_str();
  eval_cmd->add_option("--model", eval.model, "plugin model kind")->capture_default_str();
  eval_cmd->add_option("--strat", eval.strat_spec, "Stratification col:bins[,col:bins]");
  eval_cmd->add_option("--alpha-bayes", eval.alpha_bayes)->capture_default_str();
  eval_cmd->add_option("--report", eval.report_path, "Report path");
  add_gibbs_flags(eval_cmd, eval.gibbs);

  // ---- sweep -------------------------------------------------------------
  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Strength / sensitivity / calibration sweeps");
  sweep_cmd->add_option("kind", sweep.kind, "strength | sensitivity | calibration")->required();
  sweep_cmd->add_option("--betas", sweep.betas, "Instrument-strength grid")->delimiter(',');
  sweep_cmd->add_option("--table-n", sweep.table_n, "Synthetic RCT size (strength)")
      ->capture_default_str();
  sweep_cmd->add_option("--axis", sweep.axis, "n | d (sensitivity)")->capture_default_str();
  sweep_cmd->add_option("--grid", sweep.grid, "Axis grid")->delimiter(',');
  sweep_cmd->add_option("--family", sweep.family, "covfree | linear | poly | deepnl")
      ->capture_default_str();
  sweep_cmd->add_option("--levels", sweep.levels, "Calibration levels")->capture_default_str();
  sweep_cmd->add_option("--k", sweep.k_datasets, "Calibration datasets")->capture_default_str();
  sweep_cmd->add_option("--n", sweep.n, "Rows per dataset")->capture_default_str();
  sweep_cmd->add_option("--d", sweep.d, "Covariate dimension")->capture_default_str();
  sweep_cmd->add_option("--seeds", sweep.seeds, "Seeds per cell")->capture_default_str();
  sweep_cmd->add_option("--alpha", sweep.alpha, "Nominal level for sensitivity intervals")
      ->capture_default_str();
  sweep_cmd->add_option("--thresholds", sweep.thresholds,
                        "Threshold-grid size for continuous outcomes")
      ->capture_default_str();
  sweep_cmd->add_option("--report", sweep.report_path, "Report path");
  add_gibbs_flags(sweep_cmd, sweep.gibbs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // flag/usage problems are config errors
  }

  if (dump_config) {
    std::cout << app.config_to_str(true, false);
    return 0;
  }

  try {
    if (gen_cmd->parsed()) {
      if (complier_mass >= 0.0) gen.complier_mass = complier_mass;
      return run_gen(ctx, gen);
    }
    if (convert_cmd->parsed()) return run_convert(ctx, convert);
    if (bounds_cmd->parsed()) return run_bounds(ctx, bounds);
    if (estimate_cmd->parsed()) return run_estimate(ctx, estimate);
    if (eval_cmd->parsed()) return run_eval(ctx, eval);
    if (sweep_cmd->parsed()) return run_sweep(ctx, sweep);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
