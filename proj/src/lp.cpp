#include "ivbound/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ivbound/bounds.hpp"

namespace ivbound {

namespace detail {

namespace {
constexpr double kPivotEps = 1e-11;

// Bland's rule: entering = smallest allowed index with negative reduced cost;
// leaving = min-ratio row, ties broken by smallest basic variable index.
bool run_pivots(std::vector<std::vector<double>>& tab, std::vector<double>& cost,
                std::vector<int>& basis, int allowed_cols) {
  const int m = static_cast<int>(tab.size());
  const int rhs = static_cast<int>(cost.size()) - 1;
  for (;;) {
    int enter = -1;
    for (int j = 0; j < allowed_cols; ++j) {
      if (cost[static_cast<std::size_t>(j)] < -kPivotEps) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return true;  // optimal

    int leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      const double a = tab[static_cast<std::size_t>(i)][static_cast<std::size_t>(enter)];
      if (a > kPivotEps) {
        const double ratio = tab[static_cast<std::size_t>(i)][static_cast<std::size_t>(rhs)] / a;
        if (ratio < best_ratio - kPivotEps ||
            (ratio < best_ratio + kPivotEps && (leave < 0 || basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)]))) {
          best_ratio = ratio;
          leave = i;
        }
      }
    }
    if (leave < 0) return false;  // unbounded

    auto& prow = tab[static_cast<std::size_t>(leave)];
    const double pivot = prow[static_cast<std::size_t>(enter)];
    for (double& v : prow) v /= pivot;
    for (int i = 0; i < m; ++i) {
      if (i == leave) continue;
      auto& row = tab[static_cast<std::size_t>(i)];
      const double f = row[static_cast<std::size_t>(enter)];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < row.size(); ++j) row[j] -= f * prow[j];
    }
    {
      const double f = cost[static_cast<std::size_t>(enter)];
      if (f != 0.0) {
        for (std::size_t j = 0; j < cost.size(); ++j) cost[j] -= f * prow[j];
      }
    }
    basis[static_cast<std::size_t>(leave)] = enter;
  }
}

}  // namespace

SimplexOutcome simplex_min(const std::vector<std::vector<double>>& a,
                           const std::vector<double>& b, const std::vector<double>& c,
                           double feas_tol) {
  const int m = static_cast<int>(a.size());
  const int n = static_cast<int>(c.size());
  const int total = n + m;  // originals + artificials
  const int rhs = total;

  std::vector<std::vector<double>> tab(static_cast<std::size_t>(m),
                                       std::vector<double>(static_cast<std::size_t>(total + 1), 0.0));
  std::vector<int> basis(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const double sign = b[static_cast<std::size_t>(i)] < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j)
      tab[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = sign * a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    tab[static_cast<std::size_t>(i)][static_cast<std::size_t>(n + i)] = 1.0;
    tab[static_cast<std::size_t>(i)][static_cast<std::size_t>(rhs)] = sign * b[static_cast<std::size_t>(i)];
    basis[static_cast<std::size_t>(i)] = n + i;
  }

  // Phase 1: minimize the sum of artificials.
  std::vector<double> cost(static_cast<std::size_t>(total + 1), 0.0);
  for (int i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < cost.size(); ++j) cost[j] -= tab[static_cast<std::size_t>(i)][j];
    cost[static_cast<std::size_t>(n + i)] += 1.0;  // artificial cost 1, eliminated below anyway
  }
  // Artificial columns start basic with unit coefficient; their reduced cost is 0.
  for (int i = 0; i < m; ++i) cost[static_cast<std::size_t>(n + i)] = 0.0;

  if (!run_pivots(tab, cost, basis, total)) return {};
  const double phase1 = -cost[static_cast<std::size_t>(rhs)];
  if (phase1 > feas_tol) return {};

  // Drive remaining artificials out of the basis; all-zero rows are redundant.
  std::vector<bool> keep_row(static_cast<std::size_t>(m), true);
  for (int i = 0; i < m; ++i) {
    if (basis[static_cast<std::size_t>(i)] < n) continue;
    int j_pivot = -1;
    for (int j = 0; j < n; ++j) {
      if (std::abs(tab[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) > kPivotEps) {
        j_pivot = j;
        break;
      }
    }
    if (j_pivot < 0) {
      keep_row[static_cast<std::size_t>(i)] = false;
      continue;
    }
    auto& prow = tab[static_cast<std::size_t>(i)];
    const double pivot = prow[static_cast<std::size_t>(j_pivot)];
    for (double& v : prow) v /= pivot;
    for (int k = 0; k < m; ++k) {
      if (k == i) continue;
      auto& row = tab[static_cast<std::size_t>(k)];
      const double f = row[static_cast<std::size_t>(j_pivot)];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < row.size(); ++j) row[j] -= f * prow[j];
    }
    basis[static_cast<std::size_t>(i)] = j_pivot;
  }

  std::vector<std::vector<double>> tab2;
  std::vector<int> basis2;
  for (int i = 0; i < m; ++i) {
    if (!keep_row[static_cast<std::size_t>(i)]) continue;
    tab2.push_back(tab[static_cast<std::size_t>(i)]);
    basis2.push_back(basis[static_cast<std::size_t>(i)]);
  }

  // Phase 2 over the original columns only.
  std::vector<double> cost2(static_cast<std::size_t>(total + 1), 0.0);
  for (int j = 0; j < n; ++j) cost2[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j)];
  for (std::size_t i = 0; i < tab2.size(); ++i) {
    const double f = c[static_cast<std::size_t>(basis2[i])];
    if (f == 0.0) continue;
    for (std::size_t j = 0; j < cost2.size(); ++j) cost2[j] -= f * tab2[i][j];
  }
  if (!run_pivots(tab2, cost2, basis2, n)) return {};

  SimplexOutcome out;
  out.feasible = true;
  out.x.assign(static_cast<std::size_t>(n), 0.0);
  for (std::size_t i = 0; i < tab2.size(); ++i) {
    if (basis2[i] < n) out.x[static_cast<std::size_t>(basis2[i])] = tab2[i][static_cast<std::size_t>(rhs)];
  }
  double value = 0.0;
  for (int j = 0; j < n; ++j) value += c[static_cast<std::size_t>(j)] * out.x[static_cast<std::size_t>(j)];
  out.value = value;
  return out;
}

}  // namespace detail

StrataLp build_lp(const CondProbs& p) {
  StrataLp lp;
  const CondProbs pr = p.renormalized();
  for (int s = 0; s < kNumStrata; ++s) {
    const StratumIndex stratum(s);
    lp.objective[static_cast<std::size_t>(s)] = stratum.effect();
    for (int z = 0; z < 2; ++z) {
      const int t = stratum.potential_treatment(z);
      const int y = stratum.potential_outcome(t);
      lp.eq_constraints[CondProbs::flat_index(y, t, z)][static_cast<std::size_t>(s)] = 1.0;
    }
  }
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int t = 0; t < 2; ++t)
        lp.rhs[CondProbs::flat_index(y, t, z)] = pr.at(y, t, z);
  return lp;
}

namespace {

LpSolution make_solution(const detail::SimplexOutcome& out, double sign) {
  LpSolution sol;
  if (!out.feasible) return sol;
  sol.status = LpStatus::optimal;
  sol.value = sign * out.value;
  std::vector<double> q(out.x);
  double total = 0.0;
  for (double& v : q) {
    v = std::max(v, 0.0);
    total += v;
  }
  for (double& v : q) v /= total;
  sol.witness = StrataDist(q, kEstimatedSumTol);
  return sol;
}

}  // namespace

std::pair<LpSolution, LpSolution> solve_min_max(const CondProbs& p) {
  const StrataLp lp = build_lp(p);

  // One cell row per z-slice is implied by the others plus the simplex row;
  // drop the (y=1, t=1) rows to get a full-rank 7x16 system.
  std::vector<std::vector<double>> a;
  std::vector<double> b;
  for (int z = 0; z < 2; ++z) {
    for (int y = 0; y < 2; ++y) {
      for (int t = 0; t < 2; ++t) {
        if (y == 1 && t == 1) continue;
        const auto k = CondProbs::flat_index(y, t, z);
        a.emplace_back(lp.eq_constraints[k].begin(), lp.eq_constraints[k].end());
        b.push_back(lp.rhs[k]);
      }
    }
  }
  a.emplace_back(kNumStrata, 1.0);
  b.push_back(1.0);

  std::vector<double> c_min(lp.objective.begin(), lp.objective.end());
  std::vector<double> c_max(c_min);
  for (double& v : c_max) v = -v;

  const auto out_min = detail::simplex_min(a, b, c_min);
  const auto out_max = detail::simplex_min(a, b, c_max);
  return {make_solution(out_min, 1.0), make_solution(out_max, -1.0)};
}

SharpnessReport check_sharpness(const CondProbs& p, double tol) {
  const auto [lo, hi] = solve_min_max(p);
  if (lo.status != LpStatus::optimal || hi.status != LpStatus::optimal)
    throw std::runtime_error("check_sharpness: LP infeasible; expected a strata-induced p");
  SharpnessReport report;
  report.lower_gap = std::abs(lo.value - phi_lower(p).max());
  report.upper_gap = std::abs(hi.value - phi_upper(p).min());
  report.ok = report.lower_gap <= tol && report.upper_gap <= tol;
  if (!report.ok) {
    std::ostringstream msg;
    msg << "check_sharpness: gap exceeds tolerance (lower " << report.lower_gap << ", upper "
        << report.upper_gap << ", tol " << tol << ")";
    throw std::runtime_error(msg.str());
  }
  return report;
}

}  // namespace ivbound
