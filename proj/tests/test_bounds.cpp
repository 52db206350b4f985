#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memory>
#include <vector>

#include "ivbound/bounds.hpp"
#include "ivbound/core.hpp"
#include "ivbound/estimators.hpp"
#include "ivbound/rng.hpp"

using namespace ivbound;

namespace {

CondProbs cell_probs(std::initializer_list<std::pair<std::array<int, 3>, double>> entries,
                     double tol = 1e-6) {
  std::vector<double> cells(8, 0.0);
  for (const auto& [ytz, v] : entries)
    cells[CondProbs::flat_index(ytz[0], ytz[1], ytz[2])] = v;
  return CondProbs(cells, tol);
}

}  // namespace

TEST_CASE("phi expressions at the complier-effective point mass") {
  // p_{11.1} = p_{00.0} = 1
  const auto p = cell_probs({{{1, 1, 1}, 1.0}, {{0, 0, 0}, 1.0}});
  CHECK(phi_lower(p).phi(1) == doctest::Approx(1.0));
  CHECK(phi_lower(p).max() == doctest::Approx(1.0));
  CHECK(phi_upper(p).phi(3) == doctest::Approx(1.0));
  CHECK(phi_upper(p).min() == doctest::Approx(1.0));
}

TEST_CASE("phi expressions on the uniform cells") {
  std::vector<double> cells(8, 0.25);
  const CondProbs p(cells);
  const auto lo = phi_lower(p);
  const auto hi = phi_upper(p);
  CHECK(lo.phi(1) == doctest::Approx(-0.5));
  CHECK(lo.phi(3) == doctest::Approx(-0.5));
  CHECK(lo.phi(5) == doctest::Approx(-0.75));
  CHECK(lo.max() == doctest::Approx(-0.5));
  CHECK(hi.phi(1) == doctest::Approx(0.5));
  CHECK(hi.phi(5) == doctest::Approx(0.75));
  CHECK(hi.min() == doctest::Approx(0.5));
  for (int j = 1; j <= 8; ++j) {
    CHECK(lo.phi(j) >= -3.0);
    CHECK(hi.phi(j) <= 3.0);
  }
}

TEST_CASE("conditional bounds") {
  SUBCASE("degenerate interval at a point mass") {
    const auto p = strata_to_condprobs(StrataDist::point_mass(stratum_index(0, 1, 0, 1)));
    const auto cb = conditional_bounds(p);
    CHECK_FALSE(cb.crossed);
    CHECK(cb.lower == doctest::Approx(1.0));
    CHECK(cb.upper == doctest::Approx(1.0));
  }
  SUBCASE("uniform strata") {
    const auto cb = conditional_bounds(strata_to_condprobs(StrataDist::uniform()));
    CHECK(cb.lower == doctest::Approx(-0.5));
    CHECK(cb.upper == doctest::Approx(0.5));
  }
  SUBCASE("infeasible cells cross") {
    const auto p = cell_probs({{{1, 1, 0}, 1.0}, {{0, 1, 1}, 1.0}});
    const auto cb = conditional_bounds(p);
    CHECK(cb.crossed);
    CHECK(cb.lower == doctest::Approx(1.0));
    CHECK(cb.upper == doctest::Approx(-1.0));
  }
}

TEST_CASE("containment: the strata SATE always lies inside the closed-form bounds") {
  RandomStream s(2025);
  for (int rep = 0; rep < 10000; ++rep) {
    const StrataDist q(s.dirichlet(1.0, 16));
    const auto cb = conditional_bounds(strata_to_condprobs(q));
    REQUIRE_FALSE(cb.crossed);
    const double sate = sate_of_strata(q);
    CHECK(sate >= cb.lower - 1e-12);
    CHECK(sate <= cb.upper + 1e-12);
  }
}

TEST_CASE("point-mass strata: width 0 when both potential outcomes are revealed") {
  // Complier and defier point masses expose Y(0) and Y(1) across the two
  // instrument arms, so the set degenerates to the stratum effect. Always-
  // and never-taker point masses hide one potential outcome entirely and the
  // sharp set has width exactly 1.
  for (int s = 0; s < kNumStrata; ++s) {
    const StratumIndex idx(s);
    const auto cb = conditional_bounds(strata_to_condprobs(StrataDist::point_mass(idx)));
    REQUIRE_FALSE(cb.crossed);
    if (idx.t0() != idx.t1()) {
      CHECK(cb.upper - cb.lower == doctest::Approx(0.0));
      CHECK(cb.lower == doctest::Approx(idx.effect()));
    } else {
      CHECK(cb.upper - cb.lower == doctest::Approx(1.0));
      CHECK(cb.lower <= idx.effect());
      CHECK(idx.effect() <= cb.upper);
    }
  }
}

TEST_CASE("manski width") {
  CHECK(manski_width(0.0, 1.0) == doctest::Approx(1.0));
  CHECK(manski_width(3.25, 3.25) == doctest::Approx(0.0));
  CHECK(manski_width(2.5, 10.1) == doctest::Approx(7.6));
  CHECK_THROWS_AS(manski_width(1.0, 0.0), std::invalid_argument);
}

namespace {

class FixedScorer : public CondProbScorer {
 public:
  explicit FixedScorer(CondProbs p) : p_(std::move(p)) {}
  CondProbs score(std::span<const double>) const override { return p_; }
  bool covariate_free() const override { return true; }

 private:
  CondProbs p_;
};

// Scores by the sign of x_0: two covariate cells with fixed probabilities.
class TwoCellScorer : public CondProbScorer {
 public:
  TwoCellScorer(CondProbs neg, CondProbs pos) : neg_(std::move(neg)), pos_(std::move(pos)) {}
  CondProbs score(std::span<const double> x) const override { return x[0] < 0 ? neg_ : pos_; }

 private:
  CondProbs neg_;
  CondProbs pos_;
};

IvDataset dataset_with_x(std::vector<double> xs) {
  IvDataset ds;
  ds.n = xs.size();
  ds.d = 1;
  ds.x = std::move(xs);
  ds.z.assign(ds.n, 0);
  ds.t.assign(ds.n, 0);
  ds.y.assign(ds.n, 0.0);
  return ds;
}

}  // namespace

TEST_CASE("sate_bounds averages conditional bounds over rows") {
  SUBCASE("covariate-free model reproduces the conditional interval") {
    const auto ds = dataset_with_x({0.0, 1.0, 2.0});
    FixedScorer model(strata_to_condprobs(StrataDist::uniform()));
    const auto sb = sate_bounds(ds, model);
    CHECK(sb.interval.lower() == doctest::Approx(-0.5));
    CHECK(sb.interval.upper() == doctest::Approx(0.5));
    CHECK(sb.crossed_rows == 0);
  }
  SUBCASE("two equal-weight cells with bounds [0,1] and [-1,0] average to [-0.5, 0.5]") {
    // Always-taker point masses hide Y(0): effective gives [0, 1], harmful
    // gives [-1, 0].
    const auto p_pos = strata_to_condprobs(StrataDist::point_mass(stratum_index(1, 1, 0, 1)));
    const auto p_neg = strata_to_condprobs(StrataDist::point_mass(stratum_index(1, 1, 1, 0)));
    const auto cb_pos = conditional_bounds(p_pos);
    const auto cb_neg = conditional_bounds(p_neg);
    REQUIRE(cb_pos.lower == doctest::Approx(0.0));
    REQUIRE(cb_pos.upper == doctest::Approx(1.0));
    REQUIRE(cb_neg.lower == doctest::Approx(-1.0));
    REQUIRE(cb_neg.upper == doctest::Approx(0.0));

    const auto ds = dataset_with_x({-1.0, 1.0});
    TwoCellScorer model(p_neg, p_pos);
    const auto sb = sate_bounds(ds, model);
    CHECK(sb.interval.lower() == doctest::Approx(-0.5));
    CHECK(sb.interval.upper() == doctest::Approx(0.5));
  }
  SUBCASE("degenerate [0.3, 0.3] cells average to [0.3, 0.3]") {
    // A complier-only mixture identifies both potential-outcome marginals, so
    // the effect is a point: P(Y(1)=1) - P(Y(0)=1) = 1.0 - 0.7.
    std::vector<double> q(kNumStrata, 0.0);
    q[static_cast<std::size_t>(stratum_index(0, 1, 0, 1).value())] = 0.3;
    q[static_cast<std::size_t>(stratum_index(0, 1, 1, 1).value())] = 0.7;
    const auto p = strata_to_condprobs(StrataDist(q));
    const auto cb = conditional_bounds(p);
    REQUIRE(cb.upper - cb.lower == doctest::Approx(0.0));
    REQUIRE(cb.lower == doctest::Approx(0.3));
    const auto ds = dataset_with_x({0.0, 1.0, -1.0});
    FixedScorer model(p);
    const auto sb = sate_bounds(ds, model);
    CHECK(sb.interval.lower() == doctest::Approx(0.3));
    CHECK(sb.interval.upper() == doctest::Approx(0.3));
  }
  SUBCASE("crossed rows clip to the trivial range and are counted") {
    const auto crossed = cell_probs({{{1, 1, 0}, 1.0}, {{0, 1, 1}, 1.0}});
    const auto ds = dataset_with_x({-1.0, 1.0});
    TwoCellScorer model(crossed, strata_to_condprobs(StrataDist::point_mass(stratum_index(0, 1, 0, 1))));
    const auto sb = sate_bounds(ds, model);
    CHECK(sb.crossed_rows == 1);
    CHECK(sb.interval.lower() == doctest::Approx(0.5 * (-1.0 + 1.0)));
    CHECK(sb.interval.upper() == doctest::Approx(0.5 * (1.0 + 1.0)));
  }
}

TEST_CASE("continuous outcome bounds") {
  RandomStream s(5);
  const auto pooled_factory = [](const IvDataset& binarized) {
    return fit_condprob_model(binarized, CondProbModelKind::pooled);
  };

  SUBCASE("on a binary outcome any grid equals the direct bounds exactly") {
    IvDataset ds;
    ds.n = 400;
    ds.d = 1;
    RandomStream r(9);
    for (std::size_t i = 0; i < ds.n; ++i) {
      ds.x.push_back(r.normal());
      ds.z.push_back(r.bernoulli(0.5));
      ds.t.push_back(r.bernoulli(0.3 + 0.4 * ds.z.back()));
      ds.y.push_back(r.bernoulli(0.2 + 0.5 * ds.t.back()) ? 1.0 : 0.0);
    }
    const auto direct = plugin_bounds(ds, CondProbModelKind::pooled);
    // Every threshold in (0,1) binarizes a binary outcome to itself. The
    // two-point average is exact in floating point; longer averages of equal
    // endpoints pick up one-ulp rounding.
    const auto two = continuous_outcome_bounds(ds, pooled_factory, 2);
    CHECK(two.interval.lower() == direct.interval.lower());
    CHECK(two.interval.upper() == direct.interval.upper());
    for (int grid : {16, 64}) {
      const auto via_grid = continuous_outcome_bounds(ds, pooled_factory, grid);
      CHECK(via_grid.interval.lower() ==
            doctest::Approx(direct.interval.lower()).epsilon(1e-14));
      CHECK(via_grid.interval.upper() ==
            doctest::Approx(direct.interval.upper()).epsilon(1e-14));
    }
  }

  SUBCASE("y equal to t pins the interval next to 1") {
    IvDataset ds;
    ds.n = 500;
    ds.d = 1;
    RandomStream r(11);
    for (std::size_t i = 0; i < ds.n; ++i) {
      ds.x.push_back(0.0);
      ds.z.push_back(r.bernoulli(0.5));
      ds.t.push_back(ds.z.back());
      ds.y.push_back(ds.t.back());
    }
    const auto sb = continuous_outcome_bounds(ds, pooled_factory, 16);
    // The unsmoothed cells put the effect exactly at 1; add-0.5 smoothing
    // shifts the interval below 1 by O(1/n).
    CHECK(sb.interval.upper() >= 0.98);
    CHECK(sb.interval.lower() >= 0.9);
    CHECK(sb.interval.upper() <= 1.0);
  }

  SUBCASE("grid refinement: J=64 and J=256 agree within 2/J") {
    IvDataset ds;
    ds.n = 600;
    ds.d = 1;
    RandomStream r(13);
    for (std::size_t i = 0; i < ds.n; ++i) {
      ds.x.push_back(0.0);
      ds.z.push_back(r.bernoulli(0.5));
      ds.t.push_back(r.bernoulli(0.2 + 0.6 * ds.z.back()));
      const double u = r.normal();
      ds.y.push_back(std::clamp(0.4 + 0.2 * ds.t.back() + 0.15 * u, 0.0, 1.0));
    }
    const auto coarse = continuous_outcome_bounds(ds, pooled_factory, 64);
    const auto fine = continuous_outcome_bounds(ds, pooled_factory, 256);
    CHECK(std::abs(coarse.interval.lower() - fine.interval.lower()) <= 2.0 / 64);
    CHECK(std::abs(coarse.interval.upper() - fine.interval.upper()) <= 2.0 / 64);
  }
  (void)s;
}
