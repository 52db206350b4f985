#pragma once

#include <array>
#include <optional>
#include <utility>

#include "ivbound/core.hpp"

namespace ivbound {

/// The strata linear program: min/max of sum_s q_s * effect(s) subject to the
/// observational equality constraints and the simplex constraint.
struct StrataLp {
  std::array<double, kNumStrata> objective{};                    // effect per stratum
  std::array<std::array<double, kNumStrata>, 8> eq_constraints{};  // 0/1 incidence, row = flat (y,t,z)
  std::array<double, 8> rhs{};                                   // the renormalized cell probabilities
};

enum class LpStatus { optimal, infeasible };

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  double value = 0.0;
  std::optional<StrataDist> witness;
};

/// Incidence row for cell (y,t,z) selects the 4 strata with T(z)=t, Y(t)=y.
StrataLp build_lp(const CondProbs& p);

/// (min, max) of the ATE functional over the feasible polytope. Estimated p is
/// renormalized per z-slice before solving. Deterministic (Bland pivot rule).
std::pair<LpSolution, LpSolution> solve_min_max(const CondProbs& p);

struct SharpnessReport {
  double lower_gap = 0.0;  // |lp_min - max_j phi_lower_j|
  double upper_gap = 0.0;  // |lp_max - min_j phi_upper_j|
  bool ok = false;
};

/// Checks the closed-form endpoints against the LP on a feasible p.
/// Throws std::runtime_error when either gap exceeds tol.
SharpnessReport check_sharpness(const CondProbs& p, double tol);

namespace detail {

/// Dense two-phase simplex for min c.x s.t. Ax = b, x >= 0. Bland's rule.
struct SimplexOutcome {
  bool feasible = false;
  double value = 0.0;
  std::vector<double> x;
};

SimplexOutcome simplex_min(const std::vector<std::vector<double>>& a,
                           const std::vector<double>& b, const std::vector<double>& c,
                           double feas_tol = 1e-9);

}  // namespace detail

}  // namespace ivbound
