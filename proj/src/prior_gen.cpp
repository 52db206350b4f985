#include "ivbound/prior_gen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ivbound/bounds.hpp"

namespace ivbound {

namespace {

constexpr double kSoftmaxFloor = 1e-12;

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Column families for the base table.
enum ColumnFamily : int { kGaussian = 0, kUniform = 1, kTanhNet = 2 };

void standardize(std::vector<double>& col) {
  const double n = static_cast<double>(col.size());
  double mean = 0.0;
  for (double v : col) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : col) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (sd == 0.0) {
    for (double& v : col) v = 0.0;
    return;
  }
  for (double& v : col) v = (v - mean) / sd;
}

}  // namespace

std::vector<double> sample_base_table(std::uint64_t seed, std::size_t n, std::size_t d,
                                      std::vector<int>* families) {
  if (n == 0 || d == 0) throw std::invalid_argument("sample_base_table: n and d must be positive");
  RandomStream root(seed);
  std::vector<double> table(n * d);
  if (families) families->assign(d, 0);

  // Shared latent noise for the tanh-net family; 2d-dimensional per row.
  const std::size_t latent_dim = 2 * d;
  std::vector<double> latent(n * latent_dim);
  {
    RandomStream s = root.split("latent");
    for (double& v : latent) v = s.normal();
  }

  for (std::size_t j = 0; j < d; ++j) {
    RandomStream s = root.split("column", j);
    const int family = s.uniform_int(0, 2);
    if (families) (*families)[j] = family;
    switch (family) {
      case kGaussian: {
        const double mu = s.uniform(-2.0, 2.0);
        const double sd = std::exp(s.uniform(std::log(0.5), std::log(2.0)));
        for (std::size_t i = 0; i < n; ++i) table[i * d + j] = s.normal(mu, sd);
        break;
      }
      case kUniform: {
        const double a = s.uniform(-3.0, 0.0);
        const double b = s.uniform(0.0, 3.0);
        for (std::size_t i = 0; i < n; ++i) table[i * d + j] = s.uniform(a, b);
        break;
      }
      default: {
        // Two-layer tanh transform of the latent noise, hidden width 8.
        constexpr std::size_t hidden = 8;
        std::vector<double> w1(hidden * latent_dim);
        std::vector<double> w2(hidden);
        const double scale1 = 1.0 / std::sqrt(static_cast<double>(latent_dim));
        for (double& v : w1) v = s.normal(0.0, scale1);
        for (double& v : w2) v = s.normal(0.0, 1.0 / std::sqrt(static_cast<double>(hidden)));
        for (std::size_t i = 0; i < n; ++i) {
          double out = 0.0;
          for (std::size_t h = 0; h < hidden; ++h) {
            double acc = 0.0;
            for (std::size_t k = 0; k < latent_dim; ++k)
              acc += w1[h * latent_dim + k] * latent[i * latent_dim + k];
            out += w2[h] * std::tanh(acc);
          }
          table[i * d + j] = out;
        }
        break;
      }
    }
  }
  return table;
}

std::vector<double> instrument_propensity(const std::vector<double>& covariates, std::size_t n,
                                          std::size_t d, std::uint64_t seed) {
  if (covariates.size() != n * d)
    throw std::invalid_argument("instrument_propensity: covariate shape mismatch");
  RandomStream s(seed);

  // Work on z-scored columns so the logit scale is comparable across tables.
  std::vector<double> cols(covariates);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = covariates[i * d + j];
    standardize(col);
    for (std::size_t i = 0; i < n; ++i) cols[i * d + j] = col[i];
  }

  std::vector<double> w(d);
  const double wsd = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& v : w) v = s.normal(0.0, wsd);
  const double scale = std::exp(s.uniform(std::log(0.25), std::log(4.0)));
  const bool perturb = s.bernoulli(0.5);

  constexpr std::size_t hidden = 8;
  std::vector<double> w1;
  std::vector<double> w2;
  if (perturb) {
    w1.resize(hidden * d);
    w2.resize(hidden);
    for (double& v : w1) v = s.normal(0.0, wsd);
    for (double& v : w2) v = s.normal(0.0, 1.0 / std::sqrt(static_cast<double>(hidden)));
  }

  std::vector<double> propensity(n);
  for (std::size_t i = 0; i < n; ++i) {
    double f = 0.0;
    for (std::size_t j = 0; j < d; ++j) f += w[j] * cols[i * d + j];
    if (perturb) {
      double pert = 0.0;
      for (std::size_t h = 0; h < hidden; ++h) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += w1[h * d + j] * cols[i * d + j];
        pert += w2[h] * std::tanh(acc);
      }
      f += 0.5 * pert;
    }
    propensity[i] = std::clamp(sigmoid(scale * f), 1e-9, 1.0 - 1e-9);
  }
  return propensity;
}

std::array<double, kNumStrata> softmax_row(const std::array<double, kNumStrata>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::array<double, kNumStrata> out{};
  double total = 0.0;
  for (int s = 0; s < kNumStrata; ++s) {
    out[static_cast<std::size_t>(s)] = std::exp(logits[static_cast<std::size_t>(s)] - m);
    total += out[static_cast<std::size_t>(s)];
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<std::array<double, kNumStrata>> recenter_logits(
    const std::vector<std::array<double, kNumStrata>>& logits, const RecenterSpec& spec,
    RandomStream& stream) {
  if (logits.empty()) throw std::invalid_argument("recenter_logits: empty input");
  if (spec.gamma <= 0.0) throw std::invalid_argument("recenter_logits: gamma must be positive");

  std::array<double, kNumStrata> mean{};
  for (const auto& row : logits) {
    const auto p = softmax_row(row);
    for (int s = 0; s < kNumStrata; ++s)
      mean[static_cast<std::size_t>(s)] += std::max(p[static_cast<std::size_t>(s)], kSoftmaxFloor);
  }
  for (double& v : mean) v /= static_cast<double>(logits.size());

  std::array<double, kNumStrata> target{};
  if (spec.target) {
    target = *spec.target;
  } else {
    const auto draw = stream.dirichlet(spec.gamma, kNumStrata);
    std::copy(draw.begin(), draw.end(), target.begin());
  }

  std::array<double, kNumStrata> shift{};
  for (int s = 0; s < kNumStrata; ++s) {
    const auto i = static_cast<std::size_t>(s);
    if (mean[i] <= 0.0) throw std::invalid_argument("recenter_logits: zero mean component");
    shift[i] = std::log(std::max(target[i], kSoftmaxFloor)) - std::log(mean[i]);
  }

  std::vector<std::array<double, kNumStrata>> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    for (int s = 0; s < kNumStrata; ++s) {
      const auto k = static_cast<std::size_t>(s);
      out[i][k] = logits[i][k] + shift[k];
    }
  }
  return out;
}

PriorDgp draw_dgp(std::uint64_t seed, const PriorDgpConfig& config) {
  if (config.n == 0 || config.d_min < 1 || config.d_max < config.d_min)
    throw std::invalid_argument("draw_dgp: invalid config");
  RandomStream root(seed);

  PriorDgp dgp;
  dgp.seed = seed;
  dgp.n = config.n;
  {
    RandomStream s = root.split("dims");
    dgp.d = static_cast<std::size_t>(s.uniform_int(config.d_min, config.d_max));
  }
  dgp.covariates = sample_base_table(root.split("covariates").seed(), dgp.n, dgp.d);

  // 16 raw logit columns from the same family generator, standardized so the
  // un-recentered baseline stays well away from the simplex corners.
  const std::vector<double> raw =
      sample_base_table(root.split("strata-logits").seed(), dgp.n, kNumStrata);
  std::vector<std::array<double, kNumStrata>> logits(dgp.n);
  for (int s = 0; s < kNumStrata; ++s) {
    std::vector<double> col(dgp.n);
    for (std::size_t i = 0; i < dgp.n; ++i) col[i] = raw[i * kNumStrata + static_cast<std::size_t>(s)];
    standardize(col);
    for (std::size_t i = 0; i < dgp.n; ++i) logits[i][static_cast<std::size_t>(s)] = col[i];
  }

  if (config.recenter.enabled) {
    RandomStream s = root.split("recenter-target");
    logits = recenter_logits(logits, config.recenter, s);
  }

  dgp.strata_probs.resize(dgp.n);
  for (std::size_t i = 0; i < dgp.n; ++i) dgp.strata_probs[i] = softmax_row(logits[i]);

  dgp.instrument_propensity =
      instrument_propensity(dgp.covariates, dgp.n, dgp.d, root.split("instrument").seed());

  double sate = 0.0;
  for (std::size_t i = 0; i < dgp.n; ++i) {
    for (int s = 0; s < kNumStrata; ++s)
      sate += dgp.strata_probs[i][static_cast<std::size_t>(s)] * StratumIndex(s).effect();
  }
  dgp.sate = sate / static_cast<double>(dgp.n);
  return dgp;
}

std::pair<int, int> realize_observables(StratumIndex s, int z) {
  const int t = s.potential_treatment(z);
  const int y = s.potential_outcome(t);
  return {t, y};
}

StoredDataset sample_dataset(const PriorDgp& dgp, std::uint64_t seed) {
  RandomStream stream(seed);
  StoredDataset stored;
  IvDataset& ds = stored.data;
  ds.n = dgp.n;
  ds.d = dgp.d;
  ds.x = dgp.covariates;
  ds.z.resize(dgp.n);
  ds.t.resize(dgp.n);
  ds.y.resize(dgp.n);
  ds.seed = seed;
  ds.provenance = "prior-gen";

  double lower = 0.0;
  double upper = 0.0;
  for (std::size_t i = 0; i < dgp.n; ++i) {
    const auto& probs = dgp.strata_probs[i];
    const int s = stream.categorical(std::span<const double>(probs.data(), probs.size()));
    const int z = stream.bernoulli(dgp.instrument_propensity[i]) ? 1 : 0;
    const auto [t, y] = realize_observables(StratumIndex(s), z);
    ds.z[i] = static_cast<std::uint8_t>(z);
    ds.t[i] = static_cast<std::uint8_t>(t);
    ds.y[i] = static_cast<double>(y);

    const StrataDist q(std::span<const double>(probs.data(), probs.size()), kEstimatedSumTol);
    const CellBounds cb = conditional_bounds(strata_to_condprobs(q));
    lower += cb.lower;
    upper += cb.upper;
  }

  DatasetLabels labels;
  labels.sate = dgp.sate;
  labels.lower = lower / static_cast<double>(dgp.n);
  labels.upper = upper / static_cast<double>(dgp.n);
  ds.labels = labels;
  stored.strata_probs = dgp.strata_probs;
  return stored;
}

}  // namespace ivbound
