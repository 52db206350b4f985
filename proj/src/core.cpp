#include "ivbound/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ivbound {

StratumIndex stratum_index(int t0, int t1, int y0, int y1) {
  for (int b : {t0, t1, y0, y1}) {
    if (b != 0 && b != 1) throw std::invalid_argument("stratum_index: bits must be 0 or 1");
  }
  return StratumIndex(8 * t0 + 4 * t1 + 2 * y0 + 1 * y1);
}

int stratum_effect(StratumIndex s) { return s.effect(); }

StrataDist::StrataDist(std::span<const double> q, double tol) {
  if (q.size() != kNumStrata) throw std::invalid_argument("StrataDist: expected 16 entries");
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] < -tol) throw std::invalid_argument("StrataDist: negative entry");
    q_[i] = std::max(q[i], 0.0);
    total += q_[i];
  }
  if (std::abs(total - 1.0) > tol) throw std::invalid_argument("StrataDist: entries must sum to 1");
}

StrataDist StrataDist::normalized(std::span<const double> weights) {
  if (weights.size() != kNumStrata) throw std::invalid_argument("StrataDist: expected 16 entries");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("StrataDist: negative weight");
    total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("StrataDist: zero total weight");
  std::vector<double> q(weights.begin(), weights.end());
  for (double& v : q) v /= total;
  return StrataDist(q);
}

StrataDist StrataDist::uniform() {
  std::vector<double> q(kNumStrata, 1.0 / kNumStrata);
  return StrataDist(q);
}

StrataDist StrataDist::point_mass(StratumIndex s) {
  std::vector<double> q(kNumStrata, 0.0);
  q[static_cast<std::size_t>(s.value())] = 1.0;
  return StrataDist(q);
}

CondProbs::CondProbs(std::span<const double> p, double tol) {
  if (p.size() != 8) throw std::invalid_argument("CondProbs: expected 8 entries");
  std::copy(p.begin(), p.end(), p_.begin());
  if (!valid(tol)) throw std::invalid_argument("CondProbs: invalid probabilities");
}

CondProbs CondProbs::from_cells(std::span<const double> p, double tol) {
  return CondProbs(p, tol);
}

double CondProbs::slice_sum(int z) const {
  double s = 0.0;
  for (int y = 0; y < 2; ++y)
    for (int t = 0; t < 2; ++t) s += at(y, t, z);
  return s;
}

CondProbs CondProbs::renormalized() const {
  CondProbs out = *this;
  for (int z = 0; z < 2; ++z) {
    const double s = slice_sum(z);
    if (s <= 0.0) throw std::invalid_argument("CondProbs: z-slice has zero mass");
    for (int y = 0; y < 2; ++y)
      for (int t = 0; t < 2; ++t) out.set(y, t, z, std::max(at(y, t, z), 0.0) / s);
  }
  return out;
}

bool CondProbs::valid(double tol) const {
  for (double v : p_) {
    if (!(v >= -tol && v <= 1.0 + tol)) return false;
  }
  for (int z = 0; z < 2; ++z) {
    if (std::abs(slice_sum(z) - 1.0) > tol) return false;
  }
  return true;
}

CondProbs strata_to_condprobs(const StrataDist& q) {
  std::array<double, 8> p{};
  for (int s = 0; s < kNumStrata; ++s) {
    const StratumIndex stratum(s);
    for (int z = 0; z < 2; ++z) {
      const int t = stratum.potential_treatment(z);
      const int y = stratum.potential_outcome(t);
      p[CondProbs::flat_index(y, t, z)] += q[s];
    }
  }
  return CondProbs(p, kExactSumTol * 16);
}

double sate_of_strata(const StrataDist& q) {
  double v = 0.0;
  for (int s = 0; s < kNumStrata; ++s) v += q[s] * StratumIndex(s).effect();
  return v;
}

Interval::Interval(double lower, double upper) : lower_(lower), upper_(upper) {
  if (!(lower <= upper)) throw std::invalid_argument("Interval: lower > upper");
}

void IvDataset::validate() const {
  if (x.size() != n * d) throw std::invalid_argument("IvDataset: covariate shape mismatch");
  if (z.size() != n || t.size() != n || y.size() != n)
    throw std::invalid_argument("IvDataset: column length mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (z[i] > 1 || t[i] > 1) throw std::invalid_argument("IvDataset: z and t must be binary");
    if (!(y[i] >= 0.0 && y[i] <= 1.0))
      throw std::invalid_argument("IvDataset: outcome outside [0, 1]; rescale at ingestion");
  }
  if (labels && labels->lower && labels->upper) {
    if (!(*labels->lower <= labels->sate && labels->sate <= *labels->upper))
      throw std::invalid_argument("IvDataset: labels must satisfy lower <= sate <= upper");
  }
}

void IvDataset::rescale_outcome_to_unit() {
  if (y.empty()) return;
  const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
  if (*mn >= 0.0 && *mx <= 1.0) return;
  const double lo = *mn;
  const double hi = *mx;
  if (hi == lo) {
    for (double& v : y) v = 0.5;
    y_scale = {lo - 0.5, lo + 0.5};
    return;
  }
  for (double& v : y) v = (v - lo) / (hi - lo);
  y_scale = {lo, hi};
}

CondProbs IvDataset::empirical_condprobs() const {
  std::array<double, 8> counts{};
  std::array<double, 2> arm{};
  for (std::size_t i = 0; i < n; ++i) {
    const int yi = y[i] >= 0.5 ? 1 : 0;
    counts[CondProbs::flat_index(yi, t[i], z[i])] += 1.0;
    arm[z[i]] += 1.0;
  }
  if (arm[0] == 0.0 || arm[1] == 0.0)
    throw std::invalid_argument("empirical_condprobs: empty instrument arm");
  std::array<double, 8> p{};
  for (int zv = 0; zv < 2; ++zv)
    for (int yv = 0; yv < 2; ++yv)
      for (int tv = 0; tv < 2; ++tv) {
        const auto k = CondProbs::flat_index(yv, tv, zv);
        p[k] = counts[k] / arm[zv];
      }
  return CondProbs(p, kEstimatedSumTol);
}

bool IvDataset::binary_outcome() const {
  return std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("pearson: size mismatch");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace ivbound
