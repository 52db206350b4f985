#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ivbound/estimators.hpp"

namespace ivbound::cli {

// Shared run context resolved from global flags and the environment.
struct RunContext {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;  // from --out or IVBOUND_OUT_DIR, default "."
  int jobs = 1;
  std::string format = "json";  // json | csv for report emitters
};

struct GenOptions {
  std::string target;  // prior | binary | calib | covfree
  int count = 1;
  std::size_t n = 2048;
  int d_min = 5;
  int d_max = 10;
  double gamma = 0.1;
  bool no_recenter = false;
  std::string family = "linear";
  std::size_t d = 5;
  double alpha = 1.0;
  double min_set_width = 0.0;
  std::optional<double> complier_mass;
  bool with_strata = true;
};

struct ConvertOptions {
  std::filesystem::path input;
  std::string preset = "jobs";  // jobs | star | custom
  std::filesystem::path config_path;
  double beta = 1.0;
  std::vector<double> beta_sweep;
  std::string star_contrast = "small";  // small | aide
  std::string star_outcome = "reading";
};

struct BoundsOptions {
  std::filesystem::path input;
  std::string method = "closed";  // closed | lp
  std::string model = "pooled";
  std::filesystem::path report_path;
};

struct EstimateOptions {
  std::filesystem::path input;
  std::string method = "plugin";  // plugin | bayes
  std::string model = "pooled";
  std::string strat_spec;  // "col:bins[,col:bins]"
  std::string binarize;    // "", "median", "threshold:V", "grid:J"
  double alpha = 0.01;
  GibbsConfig gibbs;
  bool emit_histogram = false;
  std::filesystem::path report_path;
};

struct EvalOptions {
  std::string benchmark = "binary";  // binary | covfree | prior | calib-<family>
  std::vector<std::string> methods = {"plugin", "bayes"};
  int seeds = 10;
  std::size_t n = 2048;
  std::size_t d = 5;
  std::string model = "pooled";
  std::string strat_spec;
  double alpha_plugin = 0.1;
  double alpha_bayes = 0.01;
  GibbsConfig gibbs;
  std::filesystem::path report_path;
};

struct SweepOptions {
  std::string kind;  // strength | sensitivity | calibration
  // strength
  std::vector<double> betas = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  std::size_t table_n = 2000;
  // sensitivity
  std::string axis = "n";  // n | d
  std::vector<double> grid;
  // calibration
  std::string family = "linear";
  int levels = 18;
  int k_datasets = 100;
  std::size_t n = 1024;
  std::size_t d = 5;
  int seeds = 30;
  double alpha = 0.1;
  int thresholds = 8;
  GibbsConfig gibbs;
  std::filesystem::path report_path;
};

int run_gen(const RunContext& ctx, const GenOptions& opt);
int run_convert(const RunContext& ctx, const ConvertOptions& opt);
int run_bounds(const RunContext& ctx, const BoundsOptions& opt);
int run_estimate(const RunContext& ctx, const EstimateOptions& opt);
int run_eval(const RunContext& ctx, const EvalOptions& opt);
int run_sweep(const RunContext& ctx, const SweepOptions& opt);

Stratification parse_strat_spec(const std::string& spec);

}  // namespace ivbound::cli
