#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <thread>
#include <vector>

#include "ivbound/benchmarks.hpp"
#include "ivbound/estimators.hpp"
#include "ivbound/eval.hpp"

using namespace ivbound;

TEST_CASE("validity against true bounds") {
  CHECK(validity_true_bounds(Interval(-0.2, 0.4), Interval(-0.1, 0.3)) == 1);
  CHECK(validity_true_bounds(Interval(-0.1, 0.3), Interval(-0.1, 0.3)) == 1);
  CHECK(validity_true_bounds(Interval(-0.05, 0.4), Interval(-0.1, 0.3)) == 0);
}

TEST_CASE("validity against a scalar label") {
  CHECK(validity_label(Interval(-0.2, 0.4), 0.0) == 1);
  CHECK(validity_label(Interval(-0.2, 0.4), 0.5) == 0);
  CHECK(validity_label(Interval(0.3, 0.3), 0.3) == 1);
}

TEST_CASE("containing the true interval implies containing every label in it") {
  const Interval est(-0.3, 0.6);
  const Interval truth(-0.2, 0.5);
  REQUIRE(validity_true_bounds(est, truth) == 1);
  for (double lambda = truth.lower(); lambda <= truth.upper(); lambda += 0.05)
    CHECK(validity_label(est, lambda) == 1);
}

TEST_CASE("normalized width") {
  CHECK(norm_width(Interval(-0.5, 0.5), 0.0, 1.0) == doctest::Approx(1.0));
  CHECK(norm_width(Interval(0.1, 0.2), 0.0, 1.0) == doctest::Approx(0.1));
  CHECK(norm_width(Interval(0.4, 0.4), 0.0, 1.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(norm_width(Interval(0.0, 1.0), 0.3, 0.3), std::invalid_argument);

  SUBCASE("scale equivariance under joint affine rescaling") {
    const double w = norm_width(Interval(0.2, 0.6), 0.0, 2.0);
    const double scaled = norm_width(Interval(0.2 * 3.0, 0.6 * 3.0), 0.0, 6.0);
    CHECK(w == doctest::Approx(scaled));
  }
}

TEST_CASE("metric summaries") {
  SUBCASE("all-ones validity") {
    const std::vector<double> v = {1, 1, 1, 1};
    const auto s = summarize(v);
    CHECK(s.mean == doctest::Approx(1.0));
    CHECK(s.ste == doctest::Approx(0.0));
  }
  SUBCASE("two widths: 0.5 +- 0.1") {
    const std::vector<double> v = {0.4, 0.6};
    const auto s = summarize(v);
    CHECK(s.mean == doctest::Approx(0.5));
    CHECK(s.ste == doctest::Approx(0.1));
  }
  SUBCASE("single value has no ste") {
    const std::vector<double> v = {0.7};
    const auto s = summarize(v);
    CHECK(s.mean == doctest::Approx(0.7));
    CHECK(std::isnan(s.ste));
  }
}

TEST_CASE("aggregate groups by method and is permutation invariant") {
  std::vector<EvalRecord> records;
  for (int seed = 0; seed < 4; ++seed) {
    EvalRecord r;
    r.method = seed % 2 == 0 ? "plugin" : "bayes";
    r.seed = static_cast<std::uint64_t>(seed);
    r.validity = 1;
    r.norm_width = 0.4 + 0.1 * seed;
    r.time_per_1k_s = 0.5;
    records.push_back(r);
  }
  auto rows = aggregate(records);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].method == "bayes");
  CHECK(rows[1].method == "plugin");

  std::swap(records[0], records[3]);
  std::swap(records[1], records[2]);
  const auto rows2 = aggregate(records);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].method == rows2[i].method);
    CHECK(rows[i].width.mean == doctest::Approx(rows2[i].width.mean));
    CHECK(rows[i].width.ste == doctest::Approx(rows2[i].width.ste));
  }
}

TEST_CASE("timed run scales wall time per thousand rows") {
  const auto sleep_2ms = [] { std::this_thread::sleep_for(std::chrono::milliseconds(2)); };
  const double t4000 = timed_seconds_per_1k(sleep_2ms, 4000);
  CHECK(t4000 == doctest::Approx(0.002 * 1000.0 / 4000.0).epsilon(0.5));
  const double t1000 = timed_seconds_per_1k(sleep_2ms, 1000);
  CHECK(t1000 == doctest::Approx(0.002).epsilon(0.5));
}

TEST_CASE("monotone trend checker") {
  const std::vector<double> stes = {0.01, 0.01, 0.01};
  CHECK(monotone_trend(std::vector<double>{0.5, 0.45, 0.41}, stes, true));
  CHECK(monotone_trend(std::vector<double>{0.5, 0.505, 0.49}, stes, true));  // within slack
  CHECK_FALSE(monotone_trend(std::vector<double>{0.5, 0.6, 0.4}, stes, true));
  CHECK(monotone_trend(std::vector<double>{0.4, 0.45, 0.5}, stes, false));
  CHECK_FALSE(monotone_trend(std::vector<double>{0.5, 0.4, 0.6}, stes, false));
}

TEST_CASE("calibration curve") {
  const auto sampler = [](std::uint64_t seed) {
    CovfreeBenchConfig cfg;
    cfg.n = 256;
    cfg.seed = seed;
    return gen_covfree_benchmark(cfg).data;
  };

  SUBCASE("a full-range degenerate estimator covers at every level") {
    const auto degenerate = [](const IvDataset&, std::uint64_t) {
      PosteriorHistogram hist;
      hist.bin_mass.assign(1024, 1.0 / 1024.0);
      hist.n_samples = 1;
      return hist;
    };
    const std::vector<double> levels = {0.5, 0.9, 0.99};
    const auto points = calibration_curve(degenerate, sampler, levels, 10, 3);
    for (const auto& p : points) CHECK(p.coverage == doctest::Approx(1.0));
  }

  SUBCASE("gibbs coverage is monotone in the nominal level") {
    const auto estimator = [](const IvDataset& ds, std::uint64_t seed) {
      GibbsConfig cfg;
      cfg.seed = seed;
      cfg.n_samples = 1000;
      cfg.n_chains = 8;
      return gibbs_posterior(ds, cfg);
    };
    const std::vector<double> levels = {0.01, 0.5, 0.995};
    const auto points = calibration_curve(estimator, sampler, levels, 20, 7);
    CHECK(points[2].coverage >= points[1].coverage);
    CHECK(points[1].coverage >= points[0].coverage);
    CHECK(points[2].coverage >= 0.9);
  }
}

TEST_CASE("sensitivity sweep produces one cell per grid value") {
  const auto estimator = [](const IvDataset& ds, std::uint64_t seed) {
    GibbsConfig cfg;
    cfg.seed = seed;
    cfg.n_samples = 500;
    cfg.n_chains = 4;
    return quantile_interval(gibbs_posterior(ds, cfg), 0.1);
  };
  const auto sampler = [](double n, std::uint64_t seed) {
    CovfreeBenchConfig cfg;
    cfg.n = static_cast<std::size_t>(n);
    cfg.seed = seed;
    return gen_covfree_benchmark(cfg).data;
  };
  const std::vector<double> grid = {128, 256};
  const auto cells = sensitivity_sweep(estimator, sampler, grid, 4, 17);
  REQUIRE(cells.size() == 2);
  CHECK(cells[0].axis_value == 128);
  CHECK(cells[1].axis_value == 256);
  for (const auto& c : cells) {
    CHECK(c.coverage >= 0.0);
    CHECK(c.coverage <= 1.0);
    CHECK(c.width.mean > 0.0);
  }
}

TEST_CASE("strength sweep reports rho and analytic width per beta") {
  const auto provider = [](std::uint64_t seed) {
    return jobs_rct_table(make_synthetic_nsw_csv(800, seed), seed);
  };
  const auto builder = [](double beta, std::uint64_t seed) { return jobs_preset(beta, seed); };
  const std::vector<double> betas = {0.5, 4.0};
  const auto points = strength_sweep(provider, builder, betas, 3, 23);
  REQUIRE(points.size() == 2);
  CHECK(points[0].rho_zt_mean < points[1].rho_zt_mean);
  CHECK(points[0].analytic_width.mean > points[1].analytic_width.mean);
}
