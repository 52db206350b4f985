#include "ivbound/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "ivbound/bounds.hpp"
#include "ivbound/rng.hpp"

namespace ivbound {

int validity_true_bounds(const Interval& est, const Interval& truth) {
  return est.lower() <= truth.lower() && est.upper() >= truth.upper() ? 1 : 0;
}

int validity_label(const Interval& est, double label) { return est.contains(label) ? 1 : 0; }

double norm_width(const Interval& est, double y_min, double y_max) {
  const double w = manski_width(y_min, y_max);
  if (w <= 0.0) throw std::invalid_argument("norm_width: zero-range outcome");
  return est.width() / w;
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  if (values.size() < 2) {
    s.ste = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  var /= (n - 1.0);
  s.ste = std::sqrt(var / n);
  return s;
}

double timed_seconds_per_1k(const std::function<void()>& run, std::size_t n_rows, int reps) {
  if (n_rows == 0) throw std::invalid_argument("timed_seconds_per_1k: empty dataset");
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    run();
    const auto end = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(end - start).count());
  }
  std::sort(times.begin(), times.end());
  const double median = times[times.size() / 2];
  return median * 1000.0 / static_cast<double>(n_rows);
}

std::vector<AggregateRow> aggregate(std::span<const EvalRecord> records) {
  std::map<std::string, std::vector<const EvalRecord*>> by_method;
  for (const auto& r : records) by_method[r.method].push_back(&r);

  std::vector<AggregateRow> rows;
  for (const auto& [method, recs] : by_method) {
    AggregateRow row;
    row.method = method;
    row.n_seeds = recs.size();
    std::vector<double> validity, width, time;
    for (const auto* r : recs) {
      validity.push_back(r->validity);
      width.push_back(r->norm_width);
      time.push_back(r->time_per_1k_s);
    }
    row.validity = summarize(validity);
    row.width = summarize(width);
    row.time_per_1k = summarize(time);
    rows.push_back(std::move(row));
  }
  return rows;
}

bool monotone_trend(std::span<const double> means, std::span<const double> stes,
                    bool non_increasing) {
  if (means.size() != stes.size() || means.size() < 2)
    throw std::invalid_argument("monotone_trend: need matching grids of size >= 2");
  for (std::size_t i = 0; i + 1 < means.size(); ++i) {
    const double slack = std::sqrt(stes[i] * stes[i] + stes[i + 1] * stes[i + 1]);
    const double delta = means[i + 1] - means[i];
    if (non_increasing ? delta > slack : delta < -slack) return false;
  }
  return true;
}

std::vector<CoveragePoint> calibration_curve(const HistogramEstimator& estimator,
                                             const DgpSampler& sampler,
                                             std::span<const double> levels, int k_datasets,
                                             std::uint64_t seed) {
  if (levels.empty() || k_datasets < 1) throw std::invalid_argument("calibration_curve: empty setup");
  std::vector<double> hits(levels.size(), 0.0);
  for (int k = 0; k < k_datasets; ++k) {
    const std::uint64_t ds_seed = stream_seed(seed, "calibration", static_cast<std::uint64_t>(k), "dgp");
    const IvDataset dataset = sampler(ds_seed);
    if (!dataset.labels) throw std::invalid_argument("calibration_curve: sampler must label datasets");
    const PosteriorHistogram hist =
        estimator(dataset, stream_seed(seed, "calibration", static_cast<std::uint64_t>(k), "estimator"));
    for (std::size_t i = 0; i < levels.size(); ++i) {
      const double alpha = 1.0 - levels[i];
      const Interval interval = quantile_interval(hist, alpha);
      hits[i] += validity_label(interval, dataset.labels->sate);
    }
  }
  std::vector<CoveragePoint> out;
  for (std::size_t i = 0; i < levels.size(); ++i)
    out.push_back({levels[i], hits[i] / static_cast<double>(k_datasets)});
  return out;
}

std::vector<SensitivityCell> sensitivity_sweep(const IntervalEstimator& estimator,
                                               const SizedDgpSampler& sampler,
                                               std::span<const double> grid, int n_seeds,
                                               std::uint64_t seed) {
  if (grid.empty() || n_seeds < 1) throw std::invalid_argument("sensitivity_sweep: empty setup");
  std::vector<SensitivityCell> cells;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    SensitivityCell cell;
    cell.axis_value = grid[g];
    std::vector<double> widths;
    double hits = 0.0;
    for (int k = 0; k < n_seeds; ++k) {
      // DGP seeds are paired across grid cells so the trend over the axis is
      // not swamped by cross-cell DGP variation.
      const std::uint64_t kk = static_cast<std::uint64_t>(k);
      const IvDataset dataset = sampler(grid[g], stream_seed(seed, "sensitivity", kk, "dgp"));
      if (!dataset.labels) throw std::invalid_argument("sensitivity_sweep: sampler must label datasets");
      const Interval interval = estimator(dataset, stream_seed(seed, "sensitivity", kk, "estimator"));
      hits += validity_label(interval, dataset.labels->sate);
      widths.push_back(norm_width(interval, 0.0, 1.0));
    }
    cell.coverage = hits / static_cast<double>(n_seeds);
    cell.width = summarize(widths);
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::vector<StrengthPoint> strength_sweep(
    const std::function<RctTable(std::uint64_t seed)>& table_provider,
    const std::function<ConversionConfig(double beta, std::uint64_t seed)>& config_builder,
    std::span<const double> betas, int n_seeds, std::uint64_t seed,
    const IntervalEstimator* estimator) {
  if (betas.empty() || n_seeds < 1) throw std::invalid_argument("strength_sweep: empty setup");
  std::vector<StrengthPoint> points;
  for (std::size_t b = 0; b < betas.size(); ++b) {
    StrengthPoint point;
    point.beta = betas[b];
    std::vector<double> rhos, widths, est_widths;
    for (int k = 0; k < n_seeds; ++k) {
      const std::uint64_t idx = static_cast<std::uint64_t>(b) * 1000003ULL + static_cast<std::uint64_t>(k);
      const RctTable table = table_provider(stream_seed(seed, "strength", idx, "table"));
      ConversionConfig cfg = config_builder(betas[b], stream_seed(seed, "strength", idx, "convert"));

      const ConversionResult result = convert(table, cfg);
      rhos.push_back(result.report.rho_zt);

      std::vector<double> ys(table.y);
      std::nth_element(ys.begin(), ys.begin() + static_cast<std::ptrdiff_t>(ys.size() / 2), ys.end());
      const double median = ys[ys.size() / 2];
      const CondProbs p = analytic_converted_condprobs(table, cfg, median);
      const CellBounds cb = conditional_bounds(p);
      widths.push_back(cb.crossed ? 2.0 : cb.upper - cb.lower);

      if (estimator) {
        const Interval interval = (*estimator)(
            result.dataset, stream_seed(seed, "strength", idx, "estimator"));
        est_widths.push_back(interval.width());
      }
    }
    point.rho_zt_mean = summarize(rhos).mean;
    point.analytic_width = summarize(widths);
    point.estimator_width = summarize(est_widths);
    points.push_back(std::move(point));
  }
  return points;
}

}  // namespace ivbound
