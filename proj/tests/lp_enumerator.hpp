// Test-only cross-check of the simplex oracle: exhaustively enumerates basic
// feasible solutions of the strata linear program and takes the min/max of the
// objective over them. Independent of the production pivoting code.
#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "ivbound/core.hpp"
#include "ivbound/lp.hpp"

namespace ivbound::testing {

struct EnumeratedOptima {
  bool feasible = false;
  double min_value = 0.0;
  double max_value = 0.0;
};

inline EnumeratedOptima enumerate_min_max(const CondProbs& p, double feas_tol = 1e-9) {
  const StrataLp lp = build_lp(p);

  // Same reduced system as the solver: drop the (1,1) cell per z-slice, add
  // the simplex row.
  std::vector<std::array<double, kNumStrata>> rows;
  std::vector<double> rhs;
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int t = 0; t < 2; ++t) {
        if (y == 1 && t == 1) continue;
        rows.push_back(lp.eq_constraints[CondProbs::flat_index(y, t, z)]);
        rhs.push_back(lp.rhs[CondProbs::flat_index(y, t, z)]);
      }
  std::array<double, kNumStrata> ones{};
  ones.fill(1.0);
  rows.push_back(ones);
  rhs.push_back(1.0);
  const int m = static_cast<int>(rows.size());  // 7

  EnumeratedOptima out;
  std::array<int, 7> basis{};
  // All 7-subsets of the 16 columns.
  const auto solve_basis = [&](const std::array<int, 7>& cols) -> std::optional<double> {
    double a[7][8];
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) a[i][j] = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(cols[static_cast<std::size_t>(j)])];
      a[i][7] = rhs[static_cast<std::size_t>(i)];
    }
    for (int col = 0; col < m; ++col) {
      int piv = -1;
      double best = 1e-10;
      for (int r = col; r < m; ++r) {
        if (std::abs(a[r][col]) > best) {
          best = std::abs(a[r][col]);
          piv = r;
        }
      }
      if (piv < 0) return std::nullopt;  // singular basis
      for (int c = 0; c <= m; ++c) std::swap(a[col][c], a[piv][c]);
      for (int r = 0; r < m; ++r) {
        if (r == col) continue;
        const double f = a[r][col] / a[col][col];
        if (f == 0.0) continue;
        for (int c = 0; c <= m; ++c) a[r][c] -= f * a[col][c];
      }
    }
    double value = 0.0;
    for (int j = 0; j < m; ++j) {
      const double qj = a[j][7] / a[j][j];
      if (qj < -feas_tol) return std::nullopt;
      value += qj * lp.objective[static_cast<std::size_t>(cols[static_cast<std::size_t>(j)])];
    }
    return value;
  };

  const auto recurse = [&](auto&& self, int start, int depth) -> void {
    if (depth == m) {
      if (const auto value = solve_basis(basis)) {
        if (!out.feasible) {
          out.feasible = true;
          out.min_value = out.max_value = *value;
        } else {
          out.min_value = std::min(out.min_value, *value);
          out.max_value = std::max(out.max_value, *value);
        }
      }
      return;
    }
    for (int c = start; c <= kNumStrata - (m - depth); ++c) {
      basis[static_cast<std::size_t>(depth)] = c;
      self(self, c + 1, depth + 1);
    }
  };
  recurse(recurse, 0, 0);
  return out;
}

}  // namespace ivbound::testing
