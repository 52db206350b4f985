#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ivbound/benchmarks.hpp"
#include "ivbound/bounds.hpp"
#include "ivbound/core.hpp"
#include "ivbound/errors.hpp"
#include "ivbound/estimators.hpp"
#include "ivbound/prior_gen.hpp"
#include "ivbound/rng.hpp"
#include "gibbs_enumerator.hpp"

using namespace ivbound;

namespace {

IvDataset sample_covfree(const StrataDist& q, std::size_t n, std::uint64_t seed,
                         double propensity = 0.5) {
  RandomStream s(seed);
  IvDataset ds;
  ds.n = n;
  ds.d = 1;
  ds.x.resize(n);
  std::vector<double> probs(q.values().begin(), q.values().end());
  for (std::size_t i = 0; i < n; ++i) {
    ds.x[i] = s.normal();
    const int stratum = s.categorical(probs);
    const int z = s.bernoulli(propensity) ? 1 : 0;
    const auto [t, y] = realize_observables(StratumIndex(stratum), z);
    ds.z.push_back(static_cast<std::uint8_t>(z));
    ds.t.push_back(static_cast<std::uint8_t>(t));
    ds.y.push_back(static_cast<double>(y));
  }
  return ds;
}

}  // namespace

TEST_CASE("pooled model") {
  SUBCASE("degenerate data pins the smoothed frequencies") {
    IvDataset ds;
    ds.n = 200;
    ds.d = 1;
    RandomStream s(1);
    for (std::size_t i = 0; i < ds.n; ++i) {
      const int z = s.bernoulli(0.5);
      ds.x.push_back(0.0);
      ds.z.push_back(z);
      ds.t.push_back(z);
      ds.y.push_back(z);
    }
    const auto model = fit_condprob_model(ds, CondProbModelKind::pooled);
    const auto p = model->score(ds.row(0));
    CHECK(p.at(1, 1, 1) > 0.97);
    CHECK(p.at(0, 0, 0) > 0.97);
    CHECK(model->covariate_free());
  }
  SUBCASE("z-slices always sum to one exactly") {
    const auto ds = sample_covfree(StrataDist::uniform(), 97, 3);
    const auto model = fit_condprob_model(ds, CondProbModelKind::pooled);
    const auto p = model->score(ds.row(0));
    CHECK(p.slice_sum(0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p.slice_sum(1) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("empty instrument arm is an error") {
    IvDataset ds;
    ds.n = 10;
    ds.d = 1;
    ds.x.assign(10, 0.0);
    ds.z.assign(10, 1);
    ds.t.assign(10, 0);
    ds.y.assign(10, 0.0);
    CHECK_THROWS_AS(fit_condprob_model(ds, CondProbModelKind::pooled), DataError);
  }
  SUBCASE("continuous outcome is rejected") {
    IvDataset ds;
    ds.n = 4;
    ds.d = 1;
    ds.x.assign(4, 0.0);
    ds.z = {0, 1, 0, 1};
    ds.t = {0, 1, 0, 1};
    ds.y = {0.2, 0.8, 0.3, 0.7};
    CHECK_THROWS_AS(fit_condprob_model(ds, CondProbModelKind::pooled), DataError);
  }
}

TEST_CASE("stratified model falls back to pooled when a cell misses an instrument arm") {
  auto ds = sample_covfree(StrataDist::uniform(), 400, 5);
  // Give the low-x cell a single instrument arm; quantile bins keep every
  // cell populated, so the missing-arm path is the fallback that matters.
  std::sort(ds.x.begin(), ds.x.end());
  for (std::size_t i = 0; i < ds.n / 4; ++i) ds.z[i] = 1;
  Stratification strat;
  strat.columns = {{0, 4}};
  const auto model = fit_condprob_model(ds, CondProbModelKind::stratified, strat);
  const auto pooled = fit_condprob_model(ds, CondProbModelKind::pooled);
  const auto p_left = model->score(ds.row(0));
  const auto p_pool = pooled->score(ds.row(0));
  for (std::size_t k = 0; k < 8; ++k)
    CHECK(p_left.values()[k] == doctest::Approx(p_pool.values()[k]).epsilon(1e-12));
  // A fully populated cell differs from the pooled fit.
  const auto p_right = model->score(ds.row(ds.n - 1));
  bool differs = false;
  for (std::size_t k = 0; k < 8; ++k)
    differs = differs || std::abs(p_right.values()[k] - p_pool.values()[k]) > 1e-12;
  CHECK(differs);
}

TEST_CASE("multinomial logistic with zero covariates reduces to pooled") {
  IvDataset ds = sample_covfree(StrataDist::uniform(), 600, 7);
  ds.d = 0;
  ds.x.clear();
  const auto pooled = fit_condprob_model(ds, CondProbModelKind::pooled);
  const auto mnl = fit_condprob_model(ds, CondProbModelKind::multinomial_logistic);
  const auto pp = pooled->score({});
  const auto pm = mnl->score({});
  for (std::size_t k = 0; k < 8; ++k)
    CHECK(std::abs(pp.values()[k] - pm.values()[k]) <= 1e-6);
}

TEST_CASE("multinomial logistic recovers covariate-dependent cells") {
  // Strata depend on the sign of x: the model should separate the two regimes.
  RandomStream s(9);
  IvDataset ds;
  ds.n = 4000;
  ds.d = 1;
  const auto q_pos = StrataDist::point_mass(stratum_index(0, 1, 0, 1));
  const auto q_neg = StrataDist::point_mass(stratum_index(0, 0, 0, 0));
  for (std::size_t i = 0; i < ds.n; ++i) {
    const double x = s.normal();
    ds.x.push_back(x);
    const auto& q = x >= 0 ? q_pos : q_neg;
    std::vector<double> probs(q.values().begin(), q.values().end());
    const int stratum = s.categorical(probs);
    const int z = s.bernoulli(0.5) ? 1 : 0;
    const auto [t, y] = realize_observables(StratumIndex(stratum), z);
    ds.z.push_back(static_cast<std::uint8_t>(z));
    ds.t.push_back(static_cast<std::uint8_t>(t));
    ds.y.push_back(static_cast<double>(y));
  }
  const auto mnl = fit_condprob_model(ds, CondProbModelKind::multinomial_logistic);
  std::vector<double> far_pos{2.5};
  std::vector<double> far_neg{-2.5};
  CHECK(mnl->score(far_pos).at(1, 1, 1) > 0.9);   // complier-effective regime
  CHECK(mnl->score(far_neg).at(0, 0, 1) > 0.9);   // never-taker always-bad regime
}

TEST_CASE("plugin bounds") {
  SUBCASE("point-identified DGP at n = 5000") {
    const auto ds = sample_covfree(StrataDist::point_mass(stratum_index(0, 1, 0, 1)), 5000, 21);
    const auto sb = plugin_bounds(ds, CondProbModelKind::pooled);
    CHECK(std::abs(sb.interval.lower() - 1.0) <= 0.05);
    CHECK(std::abs(sb.interval.upper() - 1.0) <= 0.05);
  }
  SUBCASE("uniform strata at n = 20000, two seeds") {
    for (std::uint64_t seed : {1ULL, 2ULL}) {
      const auto ds = sample_covfree(StrataDist::uniform(), 20000, seed);
      const auto sb = plugin_bounds(ds, CondProbModelKind::pooled);
      CHECK(std::abs(sb.interval.lower() - (-0.5)) <= 0.03);
      CHECK(std::abs(sb.interval.upper() - 0.5) <= 0.03);
    }
  }
  SUBCASE("eight rows still produce a finite interval") {
    IvDataset ds;
    ds.n = 8;
    ds.d = 1;
    ds.x.assign(8, 0.0);
    ds.z = {0, 0, 0, 0, 1, 1, 1, 1};
    ds.t = {0, 1, 0, 1, 0, 1, 0, 1};
    ds.y = {0, 1, 1, 0, 0, 1, 1, 0};
    const auto sb = plugin_bounds(ds, CondProbModelKind::pooled);
    CHECK(sb.interval.lower() >= -1.0);
    CHECK(sb.interval.upper() <= 1.0);
  }
}

TEST_CASE("posterior histogram mechanics") {
  SUBCASE("bin index convention") {
    CHECK(PosteriorHistogram::bin_index(-1.0, 1024) == 0);
    CHECK(PosteriorHistogram::bin_index(1.0, 1024) == 1023);  // clipped to K-1
    CHECK(PosteriorHistogram::bin_index(0.0, 1024) == 512);
  }
  SUBCASE("quantile interval of a one-bin histogram is degenerate") {
    PosteriorHistogram hist;
    hist.bin_mass.assign(1024, 0.0);
    hist.bin_mass[700] = 1.0;
    hist.n_samples = 10;
    const auto iv = quantile_interval(hist, 0.1);
    CHECK(iv.width() == doctest::Approx(0.0));
    CHECK(iv.lower() == doctest::Approx(hist.bin_center(700)));
  }
  SUBCASE("uniform histogram quantiles") {
    PosteriorHistogram hist;
    hist.bin_mass.assign(1024, 1.0 / 1024.0);
    hist.n_samples = 1024;
    const auto iv = quantile_interval(hist, 0.1);
    CHECK(iv.lower() == doctest::Approx(-0.9).epsilon(0.01));
    CHECK(iv.upper() == doctest::Approx(0.9).epsilon(0.01));
  }
  SUBCASE("nested quantile intervals in alpha") {
    RandomStream s(3);
    PosteriorHistogram hist;
    hist.bin_mass.assign(1024, 0.0);
    for (int i = 0; i < 500; ++i)
      hist.bin_mass[static_cast<std::size_t>(
          PosteriorHistogram::bin_index(s.normal(0.1, 0.2), 1024))] += 1.0 / 500;
    hist.n_samples = 500;
    const auto wide = quantile_interval(hist, 0.01);
    const auto narrow = quantile_interval(hist, 0.1);
    CHECK(wide.contains(narrow));
  }
  CHECK_THROWS_AS(quantile_interval(PosteriorHistogram{{0.5, 0.5}, 2}, 1.5), ConfigError);
}

TEST_CASE("gibbs posterior on the empty dataset is the prior pushforward") {
  IvDataset ds;
  ds.d = 1;
  GibbsConfig cfg;
  cfg.prior_concentration = 1.0;
  cfg.seed = 5;
  const auto hist = gibbs_posterior(ds, cfg);
  CHECK(std::abs(hist.mean()) <= 0.02);
  const auto iv = quantile_interval(hist, 0.1);
  CHECK(iv.width() > 0.3);  // spread across the range, not collapsed
  CHECK(hist.n_samples == 4000);
}

TEST_CASE("gibbs matches the exhaustively enumerated posterior on tiny data") {
  const std::vector<std::array<int, 3>> obs = {{1, 1, 1}, {0, 0, 0}, {1, 0, 1}};
  IvDataset ds;
  ds.n = 3;
  ds.d = 1;
  ds.x.assign(3, 0.0);
  for (const auto& o : obs) {
    ds.y.push_back(o[0]);
    ds.t.push_back(static_cast<std::uint8_t>(o[1]));
    ds.z.push_back(static_cast<std::uint8_t>(o[2]));
  }
  for (double conc : {1.0, 0.1}) {
    GibbsConfig cfg;
    cfg.prior_concentration = conc;
    cfg.n_samples = 40000;
    cfg.seed = 17;
    const auto hist = gibbs_posterior(ds, cfg);
    const double exact = testing::enumerated_posterior_mean(obs, conc);
    CHECK(std::abs(hist.mean() - exact) <= 0.01);
  }
}

TEST_CASE("gibbs posterior spreads over the identified set") {
  SUBCASE("uniform strata at n = 4000") {
    const auto ds = sample_covfree(StrataDist::uniform(), 4000, 7);
    GibbsConfig cfg;
    cfg.seed = 11;
    const auto iv = quantile_interval(gibbs_posterior(ds, cfg), 0.01);
    CHECK(iv.contains(0.0));
    CHECK(iv.width() >= 0.6);              // at least 0.6 x the set width of 1.0
    CHECK(iv.lower() >= -0.55);
    CHECK(iv.upper() <= 0.55);
    CHECK(std::abs(iv.upper() - 0.5) <= 0.25);
    CHECK(std::abs(iv.lower() - (-0.5)) <= 0.25);
  }
  SUBCASE("point-mass complier-effective concentrates near one") {
    const auto ds = sample_covfree(StrataDist::point_mass(stratum_index(0, 1, 0, 1)), 4000, 3);
    GibbsConfig cfg;
    cfg.seed = 5;
    const auto iv = quantile_interval(gibbs_posterior(ds, cfg), 0.01);
    CHECK(iv.width() <= 0.1);
    CHECK(iv.upper() >= 0.95);
  }
}

TEST_CASE("gibbs is deterministic in the seed") {
  const auto ds = sample_covfree(StrataDist::uniform(), 500, 2);
  GibbsConfig cfg;
  cfg.n_samples = 500;
  cfg.seed = 9;
  const auto a = gibbs_posterior(ds, cfg);
  const auto b = gibbs_posterior(ds, cfg);
  CHECK(a.bin_mass == b.bin_mass);
  cfg.seed = 10;
  const auto c = gibbs_posterior(ds, cfg);
  CHECK(a.bin_mass != c.bin_mass);
}

TEST_CASE("gibbs with stratification weights cells by row share") {
  // Two cells with opposite point-identified effects, 3:1 row split.
  RandomStream s(13);
  IvDataset ds;
  ds.n = 2000;
  ds.d = 1;
  const auto q_pos = StrataDist::point_mass(stratum_index(0, 1, 0, 1));   // effect +1
  const auto q_neg = StrataDist::point_mass(stratum_index(0, 1, 1, 0));   // effect -1
  for (std::size_t i = 0; i < ds.n; ++i) {
    const bool pos = i % 4 != 0;  // 75% mass on the positive cell
    ds.x.push_back(pos ? 1.0 : -1.0);
    const auto& q = pos ? q_pos : q_neg;
    std::vector<double> probs(q.values().begin(), q.values().end());
    const int stratum = s.categorical(probs);
    const int z = s.bernoulli(0.5) ? 1 : 0;
    const auto [t, y] = realize_observables(StratumIndex(stratum), z);
    ds.z.push_back(static_cast<std::uint8_t>(z));
    ds.t.push_back(static_cast<std::uint8_t>(t));
    ds.y.push_back(static_cast<double>(y));
  }
  GibbsConfig cfg;
  cfg.seed = 3;
  Stratification strat;
  strat.columns = {{0, 2}};
  const auto hist = gibbs_posterior(ds, cfg, strat);
  CHECK(hist.mean() == doctest::Approx(0.75 * 1.0 + 0.25 * (-1.0)).epsilon(0.1));
}

TEST_CASE("threshold-grid gibbs interval on a continuous outcome") {
  RandomStream s(19);
  IvDataset ds;
  ds.n = 800;
  ds.d = 1;
  for (std::size_t i = 0; i < ds.n; ++i) {
    ds.x.push_back(0.0);
    const int z = s.bernoulli(0.5);
    const int t = s.bernoulli(0.15 + 0.7 * z) ? 1 : 0;
    ds.z.push_back(static_cast<std::uint8_t>(z));
    ds.t.push_back(static_cast<std::uint8_t>(t));
    ds.y.push_back(std::clamp(0.35 + 0.25 * t + 0.1 * s.normal(), 0.0, 1.0));
  }
  GibbsConfig cfg;
  cfg.seed = 23;
  cfg.n_samples = 1000;
  const auto iv = gibbs_threshold_interval(ds, cfg, 0.1, 8);
  CHECK(iv.lower() >= -1.0);
  CHECK(iv.upper() <= 1.0);
  CHECK(iv.contains(0.25));  // the true effect on the unit scale
}

TEST_CASE("stratification map cell bookkeeping") {
  IvDataset ds;
  ds.n = 100;
  ds.d = 2;
  RandomStream s(4);
  for (std::size_t i = 0; i < ds.n; ++i) {
    ds.x.push_back(s.normal());
    ds.x.push_back(s.uniform());
    ds.z.push_back(0);
    ds.t.push_back(0);
    ds.y.push_back(0.0);
  }
  Stratification strat;
  strat.columns = {{0, 4}, {1, 2}};
  const StratificationMap map(strat, ds);
  CHECK(map.n_cells() == 8);
  std::vector<std::size_t> counts(map.n_cells(), 0);
  for (std::size_t i = 0; i < ds.n; ++i) ++counts[map.cell_of(ds.row(i))];
  for (std::size_t c : counts) CHECK(c > 0);

  SUBCASE("column index out of range is a config error") {
    Stratification bad;
    bad.columns = {{5, 2}};
    CHECK_THROWS_AS(StratificationMap(bad, ds), ConfigError);
  }
}
