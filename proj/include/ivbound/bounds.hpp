#pragma once

#include <array>
#include <functional>
#include <memory>
#include <span>

#include "ivbound/core.hpp"

namespace ivbound {

enum class PhiSide { lower, upper };

/// The eight linear expressions for one side of the sharp conditional bounds.
/// Indexing is 1-based to match the published listing.
struct PhiVector {
  std::array<double, 8> values{};
  PhiSide side = PhiSide::lower;

  double phi(int j) const { return values[static_cast<std::size_t>(j - 1)]; }
  double max() const;
  double min() const;
};

PhiVector phi_lower(const CondProbs& p);
PhiVector phi_upper(const CondProbs& p);

/// Conditional sharp bounds at one covariate point. `crossed` marks a p that
/// is incompatible with every IV-consistent strata distribution (possible for
/// estimated p); lower/upper then carry the raw crossed endpoints.
struct CellBounds {
  double lower = 0.0;
  double upper = 0.0;
  bool crossed = false;

  Interval interval() const { return Interval(lower, upper); }
};

CellBounds conditional_bounds(const CondProbs& p);

/// Anything able to score a covariate row to conditional probabilities.
class CondProbScorer {
 public:
  virtual ~CondProbScorer() = default;
  virtual CondProbs score(std::span<const double> x) const = 0;
  /// True when score() ignores x; lets callers evaluate one cell only.
  virtual bool covariate_free() const { return false; }
};

struct SateBounds {
  Interval interval;
  std::size_t crossed_rows = 0;
};

/// Dataset-level bounds: the mean over rows of the conditional bounds, with
/// crossed rows clipped to the trivial [-1, 1] range and counted.
SateBounds sate_bounds(const IvDataset& dataset, const CondProbScorer& model);

double manski_width(double y_min, double y_max);

/// Fits a scorer on a (binarized) dataset; used by the threshold-grid path.
using CondProbModelFactory =
    std::function<std::unique_ptr<CondProbScorer>(const IvDataset&)>;

/// Bounds for bounded continuous outcomes via a uniform threshold grid over
/// (0, 1): binarize y at each threshold midpoint, bound the per-threshold
/// effect, and average the endpoints. Valid, possibly conservative.
SateBounds continuous_outcome_bounds(const IvDataset& dataset,
                                     const CondProbModelFactory& factory,
                                     int num_thresholds = 64);

/// y binarized at threshold s: y' = 1{y >= s}. Labels are dropped.
IvDataset binarize_at(const IvDataset& dataset, double threshold);

}  // namespace ivbound
