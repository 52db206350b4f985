#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ivbound {

inline constexpr int kNumStrata = 16;
inline constexpr double kExactSumTol = 1e-12;      // arithmetic constructions
inline constexpr double kEstimatedSumTol = 1e-9;   // data-estimated probabilities

/// One of the 16 principal strata: the joint configuration of the potential
/// treatments (T(0), T(1)) and potential outcomes (Y(0), Y(1)).
/// Encoding: index = 8*T(0) + 4*T(1) + 2*Y(0) + 1*Y(1).
class StratumIndex {
 public:
  constexpr explicit StratumIndex(int index) : index_(index) {}

  constexpr int value() const { return index_; }
  constexpr int t0() const { return (index_ >> 3) & 1; }
  constexpr int t1() const { return (index_ >> 2) & 1; }
  constexpr int y0() const { return (index_ >> 1) & 1; }
  constexpr int y1() const { return index_ & 1; }

  constexpr int potential_treatment(int z) const { return z == 0 ? t0() : t1(); }
  constexpr int potential_outcome(int t) const { return t == 0 ? y0() : y1(); }

  /// Y(1) - Y(0) for this stratum: +1, 0 or -1.
  constexpr int effect() const { return y1() - y0(); }

 private:
  int index_;
};

StratumIndex stratum_index(int t0, int t1, int y0, int y1);
int stratum_effect(StratumIndex s);

/// Probability vector over the 16 principal strata.
class StrataDist {
 public:
  // Validates non-negativity and a total of 1 within `tol`.
  explicit StrataDist(std::span<const double> q, double tol = kExactSumTol);

  static StrataDist normalized(std::span<const double> weights);
  static StrataDist uniform();
  static StrataDist point_mass(StratumIndex s);

  double operator[](int s) const { return q_[static_cast<std::size_t>(s)]; }
  const std::array<double, kNumStrata>& values() const { return q_; }

 private:
  std::array<double, kNumStrata> q_{};
};

/// The eight observational probabilities p_{yt.z} = P(Y=y, T=t | Z=z).
class CondProbs {
 public:
  CondProbs() = default;
  // Validates entries in [0,1] and each z-slice summing to 1 within `tol`.
  explicit CondProbs(std::span<const double> p, double tol = kEstimatedSumTol);

  static CondProbs from_cells(std::span<const double> p, double tol = kEstimatedSumTol);

  double at(int y, int t, int z) const { return p_[flat_index(y, t, z)]; }
  void set(int y, int t, int z, double v) { p_[flat_index(y, t, z)] = v; }
  const std::array<double, 8>& values() const { return p_; }

  double slice_sum(int z) const;
  // Rescales each z-slice to sum to exactly 1 (estimated inputs).
  CondProbs renormalized() const;
  bool valid(double tol) const;

  static std::size_t flat_index(int y, int t, int z) {
    return static_cast<std::size_t>((z << 2) | (y << 1) | t);
  }

 private:
  std::array<double, 8> p_{};
};

/// Exact map from a strata distribution to the observational probabilities:
/// p_{yt.z} = sum over strata s with T(z)(s) = t and Y(t)(s) = y of q_s.
CondProbs strata_to_condprobs(const StrataDist& q);

/// E[Y(1) - Y(0)] under q; always in [-1, 1].
double sate_of_strata(const StrataDist& q);

/// A (lower, upper) interval with lower <= upper enforced at construction.
class Interval {
 public:
  Interval(double lower, double upper);

  double lower() const { return lower_; }
  double upper() const { return upper_; }
  double width() const { return upper_ - lower_; }
  bool contains(double v) const { return lower_ <= v && v <= upper_; }
  bool contains(const Interval& other) const {
    return lower_ <= other.lower_ && other.upper_ <= upper_;
  }

 private:
  double lower_;
  double upper_;
};

/// Ground-truth labels attached to a generated dataset.
struct DatasetLabels {
  double sate = 0.0;
  std::optional<double> lower;
  std::optional<double> upper;
};

/// Affine map applied to the outcome at ingestion so y lands in [0, 1].
struct OutcomeScale {
  double min = 0.0;
  double max = 1.0;

  double to_unit(double y_raw) const { return (y_raw - min) / (max - min); }
  double from_unit(double y) const { return min + y * (max - min); }
  double range() const { return max - min; }
};

/// Rows of (covariates x, instrument z, treatment t, outcome y) plus optional
/// ground-truth labels. Covariates are stored row-major.
struct IvDataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> x;        // n * d, row-major
  std::vector<std::uint8_t> z;  // n
  std::vector<std::uint8_t> t;  // n
  std::vector<double> y;        // n, in [0, 1] after ingestion
  std::optional<DatasetLabels> labels;
  OutcomeScale y_scale;
  std::uint64_t seed = 0;
  std::string provenance;

  std::span<const double> row(std::size_t i) const { return {x.data() + i * d, d}; }

  // Throws std::invalid_argument on shape/range violations.
  void validate() const;

  // Min-max rescales y into [0, 1] when it falls outside, recording the scale.
  void rescale_outcome_to_unit();

  /// Empirical P(Y=y, T=t | Z=z) cell frequencies (no smoothing). Throws if an
  /// instrument arm is empty.
  CondProbs empirical_condprobs() const;
  bool binary_outcome() const;
};

/// Pearson correlation of two binary (or general) sequences.
double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace ivbound
