#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ivbound/core.hpp"
#include "ivbound/estimators.hpp"
#include "ivbound/rct2iv.hpp"

namespace ivbound {

/// One evaluated (method, seed) pair.
struct EvalRecord {
  std::string method;
  std::uint64_t seed = 0;
  int validity = 0;
  std::string validity_kind;  // "true-bounds" or "label"
  double norm_width = 0.0;
  double time_per_1k_s = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct MetricSummary {
  double mean = 0.0;
  double ste = 0.0;    // sample sd / sqrt(n); NaN for a single seed
};

struct AggregateRow {
  std::string method;
  std::size_t n_seeds = 0;
  MetricSummary validity;
  MetricSummary width;
  MetricSummary time_per_1k;
};

int validity_true_bounds(const Interval& est, const Interval& truth);
int validity_label(const Interval& est, double label);
double norm_width(const Interval& est, double y_min, double y_max);

MetricSummary summarize(std::span<const double> values);

/// Median wall seconds of `reps` runs, scaled per 1,000 rows. The callback
/// should exclude I/O and include model fitting.
double timed_seconds_per_1k(const std::function<void()>& run, std::size_t n_rows, int reps = 3);

/// Mean and ste per metric, grouped by method, method names sorted.
std::vector<AggregateRow> aggregate(std::span<const EvalRecord> records);

/// Trend over grid means with one combined-ste of slack per adjacent pair.
bool monotone_trend(std::span<const double> means, std::span<const double> stes,
                    bool non_increasing);

// ---- Sweeps ------------------------------------------------------------------

/// Produces a labeled dataset for one seed.
using DgpSampler = std::function<IvDataset(std::uint64_t seed)>;
/// Produces a labeled dataset for one (axis value, seed) pair.
using SizedDgpSampler = std::function<IvDataset(double axis_value, std::uint64_t seed)>;
using HistogramEstimator = std::function<PosteriorHistogram(const IvDataset&, std::uint64_t seed)>;
using IntervalEstimator = std::function<Interval(const IvDataset&, std::uint64_t seed)>;

struct CoveragePoint {
  double level = 0.0;     // nominal 1 - alpha
  double coverage = 0.0;  // fraction of datasets whose label falls inside
};

/// Empirical coverage of the quantile interval at each nominal level over
/// k_datasets independent draws; one histogram evaluation per dataset.
std::vector<CoveragePoint> calibration_curve(const HistogramEstimator& estimator,
                                             const DgpSampler& sampler,
                                             std::span<const double> levels, int k_datasets,
                                             std::uint64_t seed);

struct SensitivityCell {
  double axis_value = 0.0;
  double coverage = 0.0;
  MetricSummary width;
};

/// Coverage and mean normalized width per grid cell, K seeds per cell.
std::vector<SensitivityCell> sensitivity_sweep(const IntervalEstimator& estimator,
                                               const SizedDgpSampler& sampler,
                                               std::span<const double> grid, int n_seeds,
                                               std::uint64_t seed);

struct StrengthPoint {
  double beta = 0.0;
  double rho_zt_mean = 0.0;
  MetricSummary analytic_width;   // closed-form width of the conversion DGP
  MetricSummary estimator_width;  // zero summary when no estimator given
};

/// Instrument-strength sweep over an RCT conversion: per beta, the measured
/// rho(Z,T), the analytic bound width of the converted DGP (outcome binarized
/// at its median), and optionally an estimator's interval width.
std::vector<StrengthPoint> strength_sweep(
    const std::function<RctTable(std::uint64_t seed)>& table_provider,
    const std::function<ConversionConfig(double beta, std::uint64_t seed)>& config_builder,
    std::span<const double> betas, int n_seeds, std::uint64_t seed,
    const IntervalEstimator* estimator = nullptr);

}  // namespace ivbound
