#include "ivbound/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ivbound {

namespace {

// Shorthand for the eight cells; digits follow p_{yt.z}.
struct Cells {
  double p000, p010, p100, p110;  // z = 0
  double p001, p011, p101, p111;  // z = 1

  explicit Cells(const CondProbs& p)
      : p000(p.at(0, 0, 0)),
        p010(p.at(0, 1, 0)),
        p100(p.at(1, 0, 0)),
        p110(p.at(1, 1, 0)),
        p001(p.at(0, 0, 1)),
        p011(p.at(0, 1, 1)),
        p101(p.at(1, 0, 1)),
        p111(p.at(1, 1, 1)) {}
};

}  // namespace

double PhiVector::max() const { return *std::max_element(values.begin(), values.end()); }
double PhiVector::min() const { return *std::min_element(values.begin(), values.end()); }

PhiVector phi_lower(const CondProbs& p) {
  const Cells c(p);
  PhiVector out;
  out.side = PhiSide::lower;
  out.values = {
      c.p111 + c.p000 - 1.0,
      c.p110 + c.p001 - 1.0,
      -c.p011 - c.p101,
      -c.p010 - c.p100,
      c.p110 - c.p111 - c.p101 - c.p010 - c.p100,
      c.p111 - c.p110 - c.p100 - c.p011 - c.p101,
      c.p001 - c.p011 - c.p101 - c.p010 - c.p000,
      c.p000 - c.p010 - c.p100 - c.p011 - c.p001,
  };
  return out;
}

PhiVector phi_upper(const CondProbs& p) {
  const Cells c(p);
  PhiVector out;
  out.side = PhiSide::upper;
  out.values = {
      1.0 - c.p011 - c.p100,
      1.0 - c.p010 - c.p101,
      c.p111 + c.p001,
      c.p110 + c.p000,
      -c.p010 + c.p011 + c.p001 + c.p110 + c.p000,
      -c.p011 + c.p111 + c.p001 + c.p010 + c.p000,
      -c.p101 + c.p111 + c.p001 + c.p110 + c.p100,
      -c.p100 + c.p110 + c.p000 + c.p111 + c.p101,
  };
  return out;
}

// Exact-arithmetic noise on degenerate intervals can order the endpoints the
// wrong way by an ulp; only a gap beyond this counts as crossed.
constexpr double kCrossedTol = 1e-12;

CellBounds conditional_bounds(const CondProbs& p) {
  CellBounds out;
  out.lower = phi_lower(p).max();
  out.upper = phi_upper(p).min();
  out.crossed = out.lower > out.upper + kCrossedTol;
  if (!out.crossed && out.lower > out.upper) {
    const double mid = 0.5 * (out.lower + out.upper);
    out.lower = out.upper = mid;
  }
  return out;
}

SateBounds sate_bounds(const IvDataset& dataset, const CondProbScorer& model) {
  if (dataset.n == 0) throw std::invalid_argument("sate_bounds: empty dataset");
  SateBounds result{Interval(0.0, 0.0), 0};
  if (model.covariate_free()) {
    const CellBounds cb = conditional_bounds(model.score(dataset.row(0)));
    if (cb.crossed) {
      result.crossed_rows = dataset.n;
      result.interval = Interval(-1.0, 1.0);
    } else {
      result.interval = cb.interval();
    }
    return result;
  }
  double lo = 0.0;
  double hi = 0.0;
  for (std::size_t i = 0; i < dataset.n; ++i) {
    const CellBounds cb = conditional_bounds(model.score(dataset.row(i)));
    if (cb.crossed) {
      ++result.crossed_rows;
      lo += -1.0;
      hi += 1.0;
    } else {
      lo += cb.lower;
      hi += cb.upper;
    }
  }
  const double n = static_cast<double>(dataset.n);
  result.interval = Interval(lo / n, hi / n);
  return result;
}

double manski_width(double y_min, double y_max) {
  if (y_min > y_max) throw std::invalid_argument("manski_width: y_min > y_max");
  return y_max - y_min;
}

IvDataset binarize_at(const IvDataset& dataset, double threshold) {
  IvDataset out = dataset;
  out.labels.reset();
  for (double& v : out.y) v = v >= threshold ? 1.0 : 0.0;
  return out;
}

SateBounds continuous_outcome_bounds(const IvDataset& dataset,
                                     const CondProbModelFactory& factory,
                                     int num_thresholds) {
  if (num_thresholds < 2)
    throw std::invalid_argument("continuous_outcome_bounds: need at least 2 thresholds");
  double lo = 0.0;
  double hi = 0.0;
  std::size_t crossed = 0;
  for (int j = 0; j < num_thresholds; ++j) {
    const double s = (j + 0.5) / num_thresholds;  // grid midpoints in (0, 1)
    const IvDataset binarized = binarize_at(dataset, s);
    const auto model = factory(binarized);
    const SateBounds b = sate_bounds(binarized, *model);
    lo += b.interval.lower();
    hi += b.interval.upper();
    crossed += b.crossed_rows;
  }
  return SateBounds{Interval(lo / num_thresholds, hi / num_thresholds), crossed};
}

}  // namespace ivbound
