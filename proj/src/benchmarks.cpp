#include "ivbound/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ivbound/bounds.hpp"
#include "ivbound/errors.hpp"
#include "ivbound/prior_gen.hpp"
#include "ivbound/rng.hpp"

namespace ivbound {

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void standardize_inplace(std::vector<double>& col) {
  const double n = static_cast<double>(col.size());
  double mean = 0.0;
  for (double v : col) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : col) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  for (double& v : col) v = sd == 0.0 ? 0.0 : (v - mean) / sd;
}

}  // namespace

StoredDataset gen_binary_benchmark(const BinaryBenchConfig& cfg) {
  if (cfg.n == 0 || cfg.d_min < 1 || cfg.d_max < cfg.d_min)
    throw std::invalid_argument("gen_binary_benchmark: invalid config");
  RandomStream root(cfg.seed);

  RandomStream dims = root.split("dims");
  const std::size_t d = static_cast<std::size_t>(dims.uniform_int(cfg.d_min, cfg.d_max));
  const std::size_t n = cfg.n;

  // Covariates: each column Normal(5,1) or Uniform(-10,5).
  std::vector<double> x(n * d);
  {
    RandomStream s = root.split("covariates");
    for (std::size_t j = 0; j < d; ++j) {
      const bool gaussian = s.bernoulli(0.5);
      for (std::size_t i = 0; i < n; ++i)
        x[i * d + j] = gaussian ? s.normal(5.0, 1.0) : s.uniform(-10.0, 5.0);
    }
  }

  // Instrument: standardized noisy linear logits, then a Bernoulli draw.
  std::vector<double> pz(n);
  std::vector<std::uint8_t> z(n);
  {
    RandomStream s = root.split("instrument");
    const bool gaussian_w = s.bernoulli(0.5);
    const bool gaussian_noise = s.bernoulli(0.5);
    std::vector<double> w(d);
    for (double& v : w) v = gaussian_w ? s.normal(1.0, 2.0) : s.uniform(-2.0, 2.0);
    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += x[i * d + j] * w[j];
      acc += gaussian_noise ? s.normal(0.0, 1.0) : s.laplace(0.0, 1.0);
      logits[i] = acc;
    }
    standardize_inplace(logits);
    for (std::size_t i = 0; i < n; ++i) {
      pz[i] = sigmoid(logits[i]);
      z[i] = s.bernoulli(pz[i]) ? 1 : 0;
    }
  }

  // Strata probabilities: noisy linear logits per stratum column, standardized
  // per column (the weight scale is otherwise unconstrained) and row-softmaxed.
  std::vector<std::array<double, kNumStrata>> probs(n);
  {
    RandomStream s = root.split("strata");
    const bool gaussian_w = s.bernoulli(0.5);
    const bool gaussian_noise = s.bernoulli(0.5);
    std::vector<double> w(d * kNumStrata);
    for (double& v : w) v = gaussian_w ? s.normal(1.0, 2.0) : s.uniform(-2.0, 2.0);
    std::vector<double> logits(n * kNumStrata);
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < kNumStrata; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += x[i * d + j] * w[j * kNumStrata + static_cast<std::size_t>(k)];
        acc += gaussian_noise ? s.normal(0.0, 1.0) : s.laplace(0.0, 1.0);
        logits[i * kNumStrata + static_cast<std::size_t>(k)] = acc;
      }
    }
    for (int k = 0; k < kNumStrata; ++k) {
      std::vector<double> col(n);
      for (std::size_t i = 0; i < n; ++i) col[i] = logits[i * kNumStrata + static_cast<std::size_t>(k)];
      standardize_inplace(col);
      for (std::size_t i = 0; i < n; ++i) logits[i * kNumStrata + static_cast<std::size_t>(k)] = col[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::array<double, kNumStrata> row{};
      for (int k = 0; k < kNumStrata; ++k)
        row[static_cast<std::size_t>(k)] = logits[i * kNumStrata + static_cast<std::size_t>(k)];
      probs[i] = softmax_row(row);
    }
  }

  // Observables and exact labels.
  StoredDataset stored;
  IvDataset& ds = stored.data;
  ds.n = n;
  ds.d = d;
  ds.x = std::move(x);
  ds.z = std::move(z);
  ds.t.resize(n);
  ds.y.resize(n);
  ds.seed = cfg.seed;
  ds.provenance = "binary-benchmark";

  RandomStream draw = root.split("observables");
  double lower = 0.0;
  double upper = 0.0;
  double sate = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int s = draw.categorical(std::span<const double>(probs[i].data(), probs[i].size()));
    const auto [t, y] = realize_observables(StratumIndex(s), ds.z[i]);
    ds.t[i] = static_cast<std::uint8_t>(t);
    ds.y[i] = static_cast<double>(y);

    const StrataDist q(std::span<const double>(probs[i].data(), probs[i].size()), kEstimatedSumTol);
    const CellBounds cb = conditional_bounds(strata_to_condprobs(q));
    lower += cb.lower;
    upper += cb.upper;
    sate += sate_of_strata(q);
  }

  DatasetLabels labels;
  labels.sate = sate / static_cast<double>(n);
  labels.lower = lower / static_cast<double>(n);
  labels.upper = upper / static_cast<double>(n);
  ds.labels = labels;
  stored.strata_probs = std::move(probs);
  return stored;
}

StoredDataset gen_covfree_benchmark(const CovfreeBenchConfig& cfg) {
  if (cfg.n == 0) throw std::invalid_argument("gen_covfree_benchmark: n must be positive");
  if (cfg.min_set_width >= 2.0)
    throw std::invalid_argument("gen_covfree_benchmark: unreachable set width");
  RandomStream root(cfg.seed);

  RandomStream qs = root.split("strata");
  std::vector<double> q;
  CellBounds cb;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    if (cfg.complier_mass) {
      const double cm = *cfg.complier_mass;
      if (!(cm > 0.0 && cm < 1.0))
        throw std::invalid_argument("gen_covfree_benchmark: complier_mass must be in (0,1)");
      const auto co = qs.dirichlet(1.0, 4);   // complier strata (T(0)=0, T(1)=1)
      const auto rest = qs.dirichlet(1.0, 12);
      q.assign(kNumStrata, 0.0);
      std::size_t r = 0;
      for (int s = 0; s < kNumStrata; ++s) {
        const StratumIndex stratum(s);
        if (stratum.t0() == 0 && stratum.t1() == 1) {
          q[static_cast<std::size_t>(s)] = cm * co[static_cast<std::size_t>(2 * stratum.y0() + stratum.y1())];
        } else {
          q[static_cast<std::size_t>(s)] = (1.0 - cm) * rest[r++];
        }
      }
    } else {
      q = qs.dirichlet(cfg.alpha, kNumStrata);
    }
    cb = conditional_bounds(strata_to_condprobs(StrataDist(q, kEstimatedSumTol)));
    if (cb.upper - cb.lower >= cfg.min_set_width) break;
  }
  const StrataDist dist(q, kEstimatedSumTol);

  StoredDataset stored;
  IvDataset& ds = stored.data;
  ds.n = cfg.n;
  ds.d = 1;
  ds.x.resize(cfg.n);
  ds.z.resize(cfg.n);
  ds.t.resize(cfg.n);
  ds.y.resize(cfg.n);
  ds.seed = cfg.seed;
  ds.provenance = "covfree-benchmark";

  RandomStream s = root.split("rows");
  for (std::size_t i = 0; i < cfg.n; ++i) {
    ds.x[i] = s.normal();
    const int stratum = s.categorical(std::span<const double>(q.data(), q.size()));
    const int z = s.bernoulli(0.5) ? 1 : 0;
    const auto [t, y] = realize_observables(StratumIndex(stratum), z);
    ds.z[i] = static_cast<std::uint8_t>(z);
    ds.t[i] = static_cast<std::uint8_t>(t);
    ds.y[i] = static_cast<double>(y);
  }

  DatasetLabels labels;
  labels.sate = sate_of_strata(dist);
  labels.lower = cb.lower;
  labels.upper = cb.upper;
  ds.labels = labels;

  std::array<double, kNumStrata> row{};
  std::copy(q.begin(), q.end(), row.begin());
  stored.strata_probs = std::vector<std::array<double, kNumStrata>>(cfg.n, row);
  return stored;
}

StoredDataset gen_mixed_compliance_benchmark(const MixedComplianceConfig& cfg) {
  if (cfg.n == 0 || cfg.d == 0)
    throw std::invalid_argument("gen_mixed_compliance_benchmark: invalid shape");
  RandomStream root(cfg.seed);

  // One outcome-type distribution per compliance block, fixed per dataset.
  RandomStream blocks = root.split("blocks");
  const auto complier_w = blocks.dirichlet(1.0, 4);  // over (y0, y1) pairs
  const auto defier_w = blocks.dirichlet(1.0, 4);

  StoredDataset stored;
  IvDataset& ds = stored.data;
  ds.n = cfg.n;
  ds.d = cfg.d;
  ds.x.resize(cfg.n * cfg.d);
  ds.z.resize(cfg.n);
  ds.t.resize(cfg.n);
  ds.y.resize(cfg.n);
  ds.seed = cfg.seed;
  ds.provenance = "mixed-compliance";
  stored.strata_probs.emplace(cfg.n);

  RandomStream s = root.split("rows");
  const double unit = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  double lower = 0.0;
  double upper = 0.0;
  double sate = 0.0;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    double index = 0.0;
    for (std::size_t j = 0; j < cfg.d; ++j) {
      const double v = s.normal();
      ds.x[i * cfg.d + j] = v;
      index += unit * v;
    }
    const double p_complier = sigmoid(cfg.sharpness * index);

    std::array<double, kNumStrata> probs{};
    for (int y0 = 0; y0 < 2; ++y0)
      for (int y1 = 0; y1 < 2; ++y1) {
        const auto w = static_cast<std::size_t>(2 * y0 + y1);
        probs[static_cast<std::size_t>(stratum_index(0, 1, y0, y1).value())] =
            p_complier * complier_w[w];
        probs[static_cast<std::size_t>(stratum_index(1, 0, y0, y1).value())] =
            (1.0 - p_complier) * defier_w[w];
      }
    (*stored.strata_probs)[i] = probs;

    const int stratum = s.categorical(std::span<const double>(probs.data(), probs.size()));
    const int z = s.bernoulli(0.5) ? 1 : 0;
    const auto [t, y] = realize_observables(StratumIndex(stratum), z);
    ds.z[i] = static_cast<std::uint8_t>(z);
    ds.t[i] = static_cast<std::uint8_t>(t);
    ds.y[i] = static_cast<double>(y);

    const StrataDist q(std::span<const double>(probs.data(), probs.size()), kEstimatedSumTol);
    const CellBounds cb = conditional_bounds(strata_to_condprobs(q));
    lower += cb.lower;
    upper += cb.upper;
    sate += sate_of_strata(q);
  }

  DatasetLabels labels;
  labels.sate = sate / static_cast<double>(cfg.n);
  labels.lower = lower / static_cast<double>(cfg.n);
  labels.upper = upper / static_cast<double>(cfg.n);
  ds.labels = labels;
  return stored;
}

CalibFamily calib_family_from_string(const std::string& name) {
  if (name == "linear") return CalibFamily::linear;
  if (name == "poly" || name == "polynomial") return CalibFamily::polynomial;
  if (name == "deepnl" || name == "deep-nonlinear") return CalibFamily::deep_nonlinear;
  throw ConfigError("unknown calibration family: " + name);
}

std::string to_string(CalibFamily family) {
  switch (family) {
    case CalibFamily::linear: return "linear";
    case CalibFamily::polynomial: return "polynomial";
    case CalibFamily::deep_nonlinear: return "deepnl";
  }
  return "?";
}

namespace {

std::function<double(std::span<const double>)> make_mlp(std::size_t d, RandomStream& s) {
  constexpr std::size_t hidden = 16;
  auto w1 = std::make_shared<std::vector<double>>(hidden * d);
  auto w2 = std::make_shared<std::vector<double>>(hidden);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& v : *w1) v = s.normal(0.0, s1);
  for (double& v : *w2) v = s.normal(0.0, s2);
  return [w1, w2, d](std::span<const double> x) {
    constexpr std::size_t h_width = 16;
    double out = 0.0;
    for (std::size_t h = 0; h < h_width; ++h) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += (*w1)[h * d + j] * x[j];
      out += (*w2)[h] * std::tanh(acc);
    }
    return out;
  };
}

}  // namespace

FamilyLinks family_links(CalibFamily family, std::size_t d, std::uint64_t seed) {
  if (d == 0) throw std::invalid_argument("family_links: d must be positive");
  RandomStream s(seed);
  FamilyLinks links;
  const double wsd = 1.0 / std::sqrt(static_cast<double>(d));

  switch (family) {
    case CalibFamily::linear: {
      auto w_t = std::make_shared<std::vector<double>>(d);
      auto w_y = std::make_shared<std::vector<double>>(d);
      for (double& v : *w_t) v = s.normal(0.0, wsd);
      for (double& v : *w_y) v = s.normal(0.0, wsd);
      const double beta = s.uniform(0.5, 2.0) * (s.bernoulli(0.5) ? 1.0 : -1.0);
      links.h_t = [w_t, d](std::span<const double> x) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += (*w_t)[j] * x[j];
        return acc;
      };
      links.mu0 = [w_y, d](std::span<const double> x) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += (*w_y)[j] * x[j];
        return acc;
      };
      links.mu1 = [mu0 = links.mu0, beta](std::span<const double> x) { return mu0(x) + beta; };
      break;
    }
    case CalibFamily::polynomial: {
      auto w_t = std::make_shared<std::vector<double>>(d);
      auto w_y = std::make_shared<std::vector<double>>(d);
      for (double& v : *w_t) v = s.normal(0.0, wsd);
      for (double& v : *w_y) v = s.normal(0.0, wsd);
      const double quad_t = s.normal(0.0, wsd);
      const double beta = s.uniform(0.5, 1.5) * (s.bernoulli(0.5) ? 1.0 : -1.0);
      const double kappa = s.uniform(0.3, 0.8) * (s.bernoulli(0.5) ? 1.0 : -1.0);
      // E[X^2] = 4/3 for X ~ Uniform(-2, 2); centering keeps the terms mean-zero.
      links.h_t = [w_t, d, quad_t](std::span<const double> x) {
        double acc = quad_t * (x[0] * x[0] - 4.0 / 3.0);
        for (std::size_t j = 0; j < d; ++j) acc += (*w_t)[j] * x[j];
        return acc;
      };
      links.mu0 = [w_y, d](std::span<const double> x) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += (*w_y)[j] * x[j];
        return std::sin(acc);
      };
      links.mu1 = [mu0 = links.mu0, beta, kappa](std::span<const double> x) {
        return mu0(x) + beta + kappa * (x[0] * x[0] - 4.0 / 3.0);
      };
      break;
    }
    case CalibFamily::deep_nonlinear: {
      RandomStream st = s.split("h_t");
      RandomStream s0 = s.split("mu0");
      RandomStream s1 = s.split("mu1");
      links.h_t = make_mlp(d, st);
      links.mu0 = make_mlp(d, s0);
      links.mu1 = make_mlp(d, s1);
      break;
    }
  }
  return links;
}

double calib_outcome(const FamilyLinks& links, std::span<const double> x, int t, double u,
                     double eta, const CalibDgpConfig& cfg) {
  const double mu = t == 1 ? links.mu1(x) : links.mu0(x);
  return mu + cfg.gamma_y * u + cfg.sigma_y * eta;
}

CalibOutput gen_calib_dgp(const CalibDgpConfig& cfg) {
  if (cfg.n == 0 || cfg.d == 0) throw std::invalid_argument("gen_calib_dgp: invalid shape");
  if (!(cfg.clip_lo > 0.0 && cfg.clip_lo < 0.5 && cfg.clip_hi > 0.5 && cfg.clip_hi < 1.0))
    throw std::invalid_argument("gen_calib_dgp: clip bounds must satisfy 0 < lo < 0.5 < hi < 1");
  RandomStream root(cfg.seed);
  const FamilyLinks links = family_links(cfg.family, cfg.d, root.split("links").seed());
  RandomStream s = root.split("rows");

  CalibOutput out;
  IvDataset& ds = out.data;
  ds.n = cfg.n;
  ds.d = cfg.d;
  ds.x.resize(cfg.n * cfg.d);
  ds.z.resize(cfg.n);
  ds.t.resize(cfg.n);
  ds.y.resize(cfg.n);
  ds.seed = cfg.seed;
  ds.provenance = "calib-" + to_string(cfg.family);
  out.p_t.resize(cfg.n);

  double sate_raw = 0.0;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    for (std::size_t j = 0; j < cfg.d; ++j) ds.x[i * cfg.d + j] = s.uniform(-2.0, 2.0);
    const auto xi = ds.row(i);
    const int z = s.bernoulli(0.5) ? 1 : 0;
    const double u = s.normal();
    const double z_std = (z - 0.5) / std::sqrt(0.25);
    double p_t = sigmoid(cfg.instrument_strength * z_std + links.h_t(xi) + cfg.gamma_t * u);
    p_t = std::clamp(p_t, cfg.clip_lo, cfg.clip_hi);
    const int t = s.bernoulli(p_t) ? 1 : 0;
    const double eta = s.normal();
    ds.z[i] = static_cast<std::uint8_t>(z);
    ds.t[i] = static_cast<std::uint8_t>(t);
    ds.y[i] = calib_outcome(links, xi, t, u, eta, cfg);
    out.p_t[i] = p_t;
    sate_raw += links.mu1(xi) - links.mu0(xi);
  }
  out.sate_raw = sate_raw / static_cast<double>(cfg.n);

  ds.rescale_outcome_to_unit();
  DatasetLabels labels;
  labels.sate = out.sate_raw / ds.y_scale.range();
  ds.labels = labels;
  return out;
}

}  // namespace ivbound
