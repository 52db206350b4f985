#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ivbound/core.hpp"
#include "ivbound/dataset_io.hpp"

namespace ivbound {

/// An RCT table: covariate columns by name, the randomized arm, the outcome.
struct RctTable {
  std::vector<std::string> columns;
  std::vector<double> x;           // n x columns.size(), row-major
  std::vector<std::uint8_t> t_rct;
  std::vector<double> y;
  std::size_t n = 0;

  double at(std::size_t row, std::size_t col) const { return x[row * columns.size() + col]; }
  std::size_t require_column(const std::string& name) const;  // throws DataError with the name
};

/// One term of the propensity score mini-language. Terms act on z-scored
/// columns (statistics taken on the input table).
struct PropensityTerm {
  enum class Kind { linear, square, product, tanh_linear };
  Kind kind = Kind::linear;
  std::string col_a;
  std::string col_b;  // product only
  double coef = 0.0;
};

struct PropensitySpec {
  std::vector<PropensityTerm> terms;
  double intercept = 0.0;
  double clip_lo = 0.05;
  double clip_hi = 0.95;
};

struct ConversionConfig {
  std::vector<std::string> observed_cols;
  std::vector<std::string> hidden_cols;
  PropensitySpec pz;  // observed columns only
  PropensitySpec pt;  // observed + hidden columns
  double beta = 1.0;  // instrument coefficient inside the treatment propensity
  std::uint64_t seed = 0;
  std::optional<double> target_mean_z;  // intercept calibrated by bisection; default 0.5
  std::optional<double> target_mean_t;
};

ConversionConfig conversion_config_from_json(const std::string& text);
std::string conversion_config_to_json(const ConversionConfig& cfg);

struct PropensityBucket {
  double mean_pt = 0.0;
  double empirical_t1 = 0.0;
  std::size_t count = 0;
};

struct ConversionReport {
  std::size_t n_input = 0;
  std::size_t n_accepted = 0;
  double acceptance_rate = 0.0;
  double rho_zt = 0.0;
  double pate_label = 0.0;        // RCT difference-in-means, raw outcome units
  double preservation_gap = 0.0;  // |IPW effect on accepted - pate_label|, raw units
  double b_z = 0.0;               // calibrated intercepts actually used
  double b_t = 0.0;
  std::vector<PropensityBucket> propensity_buckets;
};

struct ConversionResult {
  IvDataset dataset;  // observed covariates only; y rescaled to [0,1]
  ConversionReport report;
  std::vector<double> accepted_p_t;  // diagnostics for preservation checks
  std::vector<std::uint8_t> accepted_t;
};

/// Uniformly subsamples the larger arm so both arms match. Deterministic in seed.
RctTable balance_arms(const RctTable& table, std::uint64_t seed);

/// The accept-reject conversion: z ~ Bern(p_z(o)), t_synth ~ Bern(p_t(o,u,z)),
/// keep rows with t_synth = t_rct. The RCT difference-in-means is stored as the
/// causal-effect label.
ConversionResult convert(const RctTable& table, const ConversionConfig& cfg);

/// Buckets rows by p_t decile and compares empirical P(T=1) per bucket with
/// the bucket-mean propensity.
std::vector<PropensityBucket> propensity_preservation_check(
    const std::vector<double>& p_t, const std::vector<std::uint8_t>& t, int n_buckets = 10);

/// Exact accepted-population cell probabilities p_{yt.z} of a conversion
/// applied to a fixed table, with the outcome binarized at `threshold`.
/// Marginalizes the per-row instrument and treatment draws analytically.
CondProbs analytic_converted_condprobs(const RctTable& table, const ConversionConfig& cfg,
                                       double threshold);

// ---- Preset pipelines -------------------------------------------------------

ConversionConfig jobs_preset(double beta, std::uint64_t seed);

/// NSW schema ingestion: validates columns, applies log1p to re74/re75 and to
/// the outcome re78, balances the arms. Shared by the pipeline and the
/// instrument-strength sweep.
RctTable jobs_rct_table(const CsvTable& csv, std::uint64_t seed);

/// NSW schema: age, education, black, hispanic, married, nodegree, re74, re75,
/// re78, treat. Applies log1p to re74/re75 and to the outcome re78.
ConversionResult jobs_pipeline(const CsvTable& csv, double beta, std::uint64_t seed);

enum class StarContrast { small_vs_regular, aide_vs_regular };
enum class StarOutcome { math, reading };

ConversionConfig star_preset(double beta, std::uint64_t seed);

/// Entry-grade snapshot of a long-format STAR table: per student, the earliest
/// grade with an observed class type; rows filtered to the contrast arms; the
/// chosen score standardized within entry grade. No balancing.
RctTable star_rct_table(const CsvTable& csv, StarContrast contrast, StarOutcome outcome);

/// Long-format STAR schema (one row per student-grade): student_id, grade,
/// class_type (1=small, 2=regular, 3=regular+aide), reading, math, gender,
/// birth_quarter, ethnicity, teacher_degree, career_ladder, school_type,
/// free_lunch, teacher_ethnicity, teacher_experience. Missing scores are NaN.
/// Snapshot, balance, convert.
ConversionResult star_pipeline(const CsvTable& csv, StarContrast contrast, StarOutcome outcome,
                               double beta, std::uint64_t seed);

// ---- Synthetic fixtures (tests and sweeps; no real data bundled) ------------

/// Balanced synthetic RCT with known potential outcomes.
struct SyntheticRct {
  RctTable table;
  std::vector<double> y0;
  std::vector<double> y1;
};

SyntheticRct make_synthetic_rct(std::size_t n, std::uint64_t seed);

/// NSW-shaped table (same schema as jobs_pipeline expects).
CsvTable make_synthetic_nsw_csv(std::size_t n, std::uint64_t seed);

/// STAR-shaped long-format table.
CsvTable make_synthetic_star_csv(std::size_t n_students, std::uint64_t seed);

}  // namespace ivbound
