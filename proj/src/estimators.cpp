#include "ivbound/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ivbound/errors.hpp"
#include "ivbound/rng.hpp"

namespace ivbound {

CondProbModelKind condprob_kind_from_string(const std::string& name) {
  if (name == "pooled") return CondProbModelKind::pooled;
  if (name == "stratified") return CondProbModelKind::stratified;
  if (name == "mnl" || name == "multinomial-logistic") return CondProbModelKind::multinomial_logistic;
  throw ConfigError("unknown conditional-probability model kind: " + name);
}

StratificationMap::StratificationMap(const Stratification& spec, const IvDataset& reference) {
  for (const auto& col : spec.columns) {
    if (col.index >= reference.d) throw ConfigError("stratification column index out of range");
    if (col.bins < 1) throw ConfigError("stratification bins must be >= 1");
    ColumnEdges ce;
    ce.index = col.index;
    if (reference.n > 0 && col.bins > 1) {
      std::vector<double> values(reference.n);
      for (std::size_t i = 0; i < reference.n; ++i) values[i] = reference.x[i * reference.d + col.index];
      std::sort(values.begin(), values.end());
      for (int b = 1; b < col.bins; ++b) {
        const std::size_t idx = std::min(values.size() - 1, values.size() * static_cast<std::size_t>(b) /
                                                                static_cast<std::size_t>(col.bins));
        ce.edges.push_back(values[idx]);
      }
      ce.edges.erase(std::unique(ce.edges.begin(), ce.edges.end()), ce.edges.end());
    }
    n_cells_ *= ce.edges.size() + 1;
    if (n_cells_ > 65536) throw ConfigError("stratification produces too many cells");
    columns_.push_back(std::move(ce));
  }
}

std::size_t StratificationMap::cell_of(std::span<const double> x) const {
  std::size_t cell = 0;
  for (const auto& col : columns_) {
    const double v = x[col.index];
    const std::size_t bin = static_cast<std::size_t>(
        std::upper_bound(col.edges.begin(), col.edges.end(), v) - col.edges.begin());
    cell = cell * (col.edges.size() + 1) + bin;
  }
  return cell;
}

namespace {

std::array<double, 8> smoothed_cell_probs(const std::array<double, 8>& counts,
                                          const std::array<double, 2>& arm) {
  std::array<double, 8> p{};
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int t = 0; t < 2; ++t) {
        const auto k = CondProbs::flat_index(y, t, z);
        p[k] = (counts[k] + 0.5) / (arm[static_cast<std::size_t>(z)] + 2.0);
      }
  return p;
}

class PooledModel : public CondProbScorer {
 public:
  explicit PooledModel(CondProbs p) : p_(std::move(p)) {}
  CondProbs score(std::span<const double>) const override { return p_; }
  bool covariate_free() const override { return true; }

 private:
  CondProbs p_;
};

CondProbs fit_pooled(const IvDataset& dataset) {
  std::array<double, 8> counts{};
  std::array<double, 2> arm{};
  for (std::size_t i = 0; i < dataset.n; ++i) {
    const int y = dataset.y[i] >= 0.5 ? 1 : 0;
    counts[CondProbs::flat_index(y, dataset.t[i], dataset.z[i])] += 1.0;
    arm[dataset.z[i]] += 1.0;
  }
  if (arm[0] == 0.0 || arm[1] == 0.0) throw DataError("fit_condprob_model: empty instrument arm");
  return CondProbs(smoothed_cell_probs(counts, arm), kEstimatedSumTol);
}

class StratifiedModel : public CondProbScorer {
 public:
  StratifiedModel(StratificationMap map, std::vector<CondProbs> cells)
      : map_(std::move(map)), cells_(std::move(cells)) {}
  CondProbs score(std::span<const double> x) const override { return cells_[map_.cell_of(x)]; }

 private:
  StratificationMap map_;
  std::vector<CondProbs> cells_;
};

std::unique_ptr<CondProbScorer> fit_stratified(const IvDataset& dataset,
                                               const Stratification& strat) {
  StratificationMap map(strat, dataset);
  const CondProbs pooled = fit_pooled(dataset);
  std::vector<std::array<double, 8>> counts(map.n_cells());
  std::vector<std::array<double, 2>> arms(map.n_cells());
  for (std::size_t i = 0; i < dataset.n; ++i) {
    const std::size_t c = map.cell_of(dataset.row(i));
    const int y = dataset.y[i] >= 0.5 ? 1 : 0;
    counts[c][CondProbs::flat_index(y, dataset.t[i], dataset.z[i])] += 1.0;
    arms[c][dataset.z[i]] += 1.0;
  }
  std::vector<CondProbs> cells;
  cells.reserve(map.n_cells());
  for (std::size_t c = 0; c < map.n_cells(); ++c) {
    if (arms[c][0] == 0.0 || arms[c][1] == 0.0) {
      cells.push_back(pooled);  // sparse cell falls back to the pooled fit
    } else {
      cells.push_back(CondProbs(smoothed_cell_probs(counts[c], arms[c]), kEstimatedSumTol));
    }
  }
  return std::make_unique<StratifiedModel>(std::move(map), std::move(cells));
}

// ---- Multinomial logistic over the four (y, t) cells, fit per z arm ---------

struct MnlArm {
  std::size_t d = 0;
  std::vector<double> theta;  // 3 x (d+1), class 0 is the reference

  std::array<double, 4> probs(std::span<const double> x) const {
    std::array<double, 4> logits{0.0, 0.0, 0.0, 0.0};
    for (int c = 1; c < 4; ++c) {
      const double* row = theta.data() + static_cast<std::size_t>(c - 1) * (d + 1);
      double acc = row[0];
      for (std::size_t j = 0; j < d; ++j) acc += row[j + 1] * x[j];
      logits[static_cast<std::size_t>(c)] = acc;
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    std::array<double, 4> p{};
    double total = 0.0;
    for (int c = 0; c < 4; ++c) {
      p[static_cast<std::size_t>(c)] = std::exp(logits[static_cast<std::size_t>(c)] - m);
      total += p[static_cast<std::size_t>(c)];
    }
    for (double& v : p) v /= total;
    return p;
  }
};

bool cholesky_solve(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
  // In-place LL^T; returns false when not positive definite.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) sum -= a[i * n + k] * a[j * n + k];
      if (i == j) {
        if (sum <= 0.0) return false;
        a[i * n + i] = std::sqrt(sum);
      } else {
        a[i * n + j] = sum / a[j * n + j];
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double sum = b[i];
    for (std::size_t k = 0; k < i; ++k) sum -= a[i * n + k] * b[k];
    b[i] = sum / a[i * n + i];
  }
  for (std::size_t ii = n; ii > 0; --ii) {
    const std::size_t i = ii - 1;
    double sum = b[i];
    for (std::size_t k = i + 1; k < n; ++k) sum -= a[k * n + i] * b[k];
    b[i] = sum / a[i * n + i];
  }
  return true;
}

struct MnlRow {
  std::vector<double> phi;  // [1, x]
  int cls = 0;
  double weight = 1.0;
};

double mnl_objective(const MnlArm& arm, const std::vector<MnlRow>& rows, double ridge) {
  double nll = 0.0;
  for (const auto& row : rows) {
    const auto p = arm.probs(std::span<const double>(row.phi.data() + 1, arm.d));
    nll -= row.weight * std::log(std::max(p[static_cast<std::size_t>(row.cls)], 1e-300));
  }
  for (int c = 0; c < 3; ++c) {
    const double* w = arm.theta.data() + static_cast<std::size_t>(c) * (arm.d + 1);
    for (std::size_t j = 1; j <= arm.d; ++j) nll += 0.5 * ridge * w[j] * w[j];
  }
  return nll;
}

MnlArm fit_mnl_arm(const IvDataset& dataset, int z_arm, double ridge) {
  MnlArm arm;
  arm.d = dataset.d;
  const std::size_t p_dim = 3 * (arm.d + 1);
  arm.theta.assign(p_dim, 0.0);

  std::vector<MnlRow> rows;
  std::vector<double> mean_x(arm.d, 0.0);
  std::size_t n_arm = 0;
  for (std::size_t i = 0; i < dataset.n; ++i) {
    if (dataset.z[i] != z_arm) continue;
    MnlRow row;
    row.phi.resize(arm.d + 1);
    row.phi[0] = 1.0;
    for (std::size_t j = 0; j < arm.d; ++j) {
      row.phi[j + 1] = dataset.x[i * dataset.d + j];
      mean_x[j] += dataset.x[i * dataset.d + j];
    }
    const int y = dataset.y[i] >= 0.5 ? 1 : 0;
    row.cls = 2 * y + dataset.t[i];
    rows.push_back(std::move(row));
    ++n_arm;
  }
  if (n_arm == 0) throw DataError("fit_condprob_model: empty instrument arm");
  for (double& v : mean_x) v /= static_cast<double>(n_arm);

  // Half-count pseudo-observations at the covariate mean, one per class; with
  // zero covariates this reproduces the pooled add-0.5 smoothing exactly.
  for (int c = 0; c < 4; ++c) {
    MnlRow row;
    row.phi.resize(arm.d + 1);
    row.phi[0] = 1.0;
    for (std::size_t j = 0; j < arm.d; ++j) row.phi[j + 1] = mean_x[j];
    row.cls = c;
    row.weight = 0.5;
    rows.push_back(std::move(row));
  }

  double obj = mnl_objective(arm, rows, ridge);
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<double> grad(p_dim, 0.0);
    std::vector<double> hess(p_dim * p_dim, 0.0);
    for (const auto& row : rows) {
      const auto p = arm.probs(std::span<const double>(row.phi.data() + 1, arm.d));
      for (int c = 1; c < 4; ++c) {
        const double resid = p[static_cast<std::size_t>(c)] - (row.cls == c ? 1.0 : 0.0);
        const std::size_t base_c = static_cast<std::size_t>(c - 1) * (arm.d + 1);
        for (std::size_t j = 0; j <= arm.d; ++j)
          grad[base_c + j] += row.weight * resid * row.phi[j];
        for (int l = 1; l < 4; ++l) {
          const double w = p[static_cast<std::size_t>(c)] *
                           ((c == l ? 1.0 : 0.0) - p[static_cast<std::size_t>(l)]);
          const std::size_t base_l = static_cast<std::size_t>(l - 1) * (arm.d + 1);
          for (std::size_t j = 0; j <= arm.d; ++j)
            for (std::size_t m = 0; m <= arm.d; ++m)
              hess[(base_c + j) * p_dim + (base_l + m)] +=
                  row.weight * w * row.phi[j] * row.phi[m];
        }
      }
    }
    for (int c = 0; c < 3; ++c) {
      const std::size_t base = static_cast<std::size_t>(c) * (arm.d + 1);
      for (std::size_t j = 1; j <= arm.d; ++j) {
        grad[base + j] += ridge * arm.theta[base + j];
        hess[(base + j) * p_dim + (base + j)] += ridge;
      }
    }

    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    if (gmax < 1e-10) break;

    std::vector<double> step = grad;
    std::vector<double> h = hess;
    double jitter = 1e-10;
    while (!cholesky_solve(h, step, p_dim)) {
      h = hess;
      step = grad;
      for (std::size_t j = 0; j < p_dim; ++j) h[j * p_dim + j] += jitter;
      jitter *= 10.0;
      if (jitter > 1e3) throw NumericError("fit_condprob_model: singular Hessian");
    }

    // Damped Newton; halve until the objective improves.
    double scale = 1.0;
    const std::vector<double> theta0 = arm.theta;
    for (int half = 0; half < 30; ++half) {
      for (std::size_t j = 0; j < p_dim; ++j) arm.theta[j] = theta0[j] - scale * step[j];
      const double new_obj = mnl_objective(arm, rows, ridge);
      if (new_obj <= obj + 1e-12) {
        obj = new_obj;
        break;
      }
      scale *= 0.5;
      if (half == 29) arm.theta = theta0;
    }
  }
  return arm;
}

class MnlModel : public CondProbScorer {
 public:
  MnlModel(MnlArm arm0, MnlArm arm1) : arm0_(std::move(arm0)), arm1_(std::move(arm1)) {}

  CondProbs score(std::span<const double> x) const override {
    const auto p0 = arm0_.probs(x);
    const auto p1 = arm1_.probs(x);
    std::array<double, 8> p{};
    for (int y = 0; y < 2; ++y)
      for (int t = 0; t < 2; ++t) {
        p[CondProbs::flat_index(y, t, 0)] = p0[static_cast<std::size_t>(2 * y + t)];
        p[CondProbs::flat_index(y, t, 1)] = p1[static_cast<std::size_t>(2 * y + t)];
      }
    return CondProbs(p, kEstimatedSumTol);
  }

 private:
  MnlArm arm0_;
  MnlArm arm1_;
};

}  // namespace

std::unique_ptr<CondProbScorer> fit_condprob_model(const IvDataset& dataset, CondProbModelKind kind,
                                                   const Stratification& strat) {
  if (!dataset.binary_outcome())
    throw DataError("fit_condprob_model: outcome is not binary; binarize or use the threshold grid");
  switch (kind) {
    case CondProbModelKind::pooled:
      return std::make_unique<PooledModel>(fit_pooled(dataset));
    case CondProbModelKind::stratified:
      return fit_stratified(dataset, strat);
    case CondProbModelKind::multinomial_logistic: {
      constexpr double kRidge = 1e-3;
      return std::make_unique<MnlModel>(fit_mnl_arm(dataset, 0, kRidge),
                                        fit_mnl_arm(dataset, 1, kRidge));
    }
  }
  throw ConfigError("fit_condprob_model: unknown kind");
}

SateBounds plugin_bounds(const IvDataset& dataset, CondProbModelKind kind,
                         const Stratification& strat) {
  const auto model = fit_condprob_model(dataset, kind, strat);
  return sate_bounds(dataset, *model);
}

int PosteriorHistogram::bin_index(double w, int k) {
  int idx = static_cast<int>(std::floor(static_cast<double>(k) * (w + 1.0) / 2.0));
  return std::clamp(idx, 0, k - 1);
}

double PosteriorHistogram::mean() const {
  double m = 0.0;
  for (int k = 0; k < bins(); ++k) m += bin_mass[static_cast<std::size_t>(k)] * bin_center(k);
  return m;
}

std::array<int, 4> compatible_strata(int y, int t, int z) {
  std::array<int, 4> out{};
  int k = 0;
  for (int s = 0; s < kNumStrata; ++s) {
    const StratumIndex stratum(s);
    if (stratum.potential_treatment(z) == t && stratum.potential_outcome(t) == y)
      out[static_cast<std::size_t>(k++)] = s;
  }
  return out;
}

namespace {

struct GibbsData {
  std::vector<std::array<std::uint32_t, 8>> counts;
  std::vector<double> weights;
};

void run_chain(const GibbsData& data, const GibbsConfig& cfg, int chain_samples,
               RandomStream stream, PosteriorHistogram& hist) {
  static const auto strata_of_cell = [] {
    std::array<std::array<int, 4>, 8> table{};
    for (int z = 0; z < 2; ++z)
      for (int y = 0; y < 2; ++y)
        for (int t = 0; t < 2; ++t)
          table[CondProbs::flat_index(y, t, z)] = compatible_strata(y, t, z);
    return table;
  }();

  const std::size_t n_cells = data.counts.size();
  std::vector<std::array<double, kNumStrata>> q(n_cells);
  for (auto& qc : q) {
    const auto draw = stream.dirichlet(cfg.prior_concentration, kNumStrata);
    std::copy(draw.begin(), draw.end(), qc.begin());
  }

  std::array<double, kNumStrata> alpha{};
  std::array<double, kNumStrata> latent{};
  const int total_sweeps = cfg.burn_in + chain_samples * cfg.thinning;
  for (int sweep = 0; sweep < total_sweeps; ++sweep) {
    for (std::size_t c = 0; c < n_cells; ++c) {
      latent.fill(0.0);
      for (int cell = 0; cell < 8; ++cell) {
        std::uint32_t m = data.counts[c][static_cast<std::size_t>(cell)];
        if (m == 0) continue;
        const auto& strata = strata_of_cell[static_cast<std::size_t>(cell)];
        double remaining_mass = 0.0;
        for (int j = 0; j < 4; ++j)
          remaining_mass += q[c][static_cast<std::size_t>(strata[static_cast<std::size_t>(j)])];
        // Sequential conditional binomials realize the multinomial split.
        for (int j = 0; j < 3 && m > 0; ++j) {
          const double pj = q[c][static_cast<std::size_t>(strata[static_cast<std::size_t>(j)])];
          const double frac = remaining_mass > 0.0 ? pj / remaining_mass : 1.0 / (4.0 - j);
          const std::uint32_t k = static_cast<std::uint32_t>(stream.binomial(m, frac));
          latent[static_cast<std::size_t>(strata[static_cast<std::size_t>(j)])] += k;
          m -= k;
          remaining_mass -= pj;
        }
        latent[static_cast<std::size_t>(strata[3])] += m;
      }
      for (int s = 0; s < kNumStrata; ++s)
        alpha[static_cast<std::size_t>(s)] =
            cfg.prior_concentration + latent[static_cast<std::size_t>(s)];
      const auto draw = stream.dirichlet(std::span<const double>(alpha.data(), alpha.size()));
      std::copy(draw.begin(), draw.end(), q[c].begin());
    }

    if (sweep >= cfg.burn_in && (sweep - cfg.burn_in) % cfg.thinning == 0) {
      double sate = 0.0;
      for (std::size_t c = 0; c < n_cells; ++c) {
        double cell_effect = 0.0;
        for (int s = 0; s < kNumStrata; ++s) {
          const int e = StratumIndex(s).effect();
          if (e != 0) cell_effect += q[c][static_cast<std::size_t>(s)] * e;
        }
        sate += data.weights[c] * cell_effect;
      }
      ++hist.bin_mass[static_cast<std::size_t>(
          PosteriorHistogram::bin_index(sate, cfg.histogram_bins))];
      ++hist.n_samples;
    }
  }
}

}  // namespace

PosteriorHistogram gibbs_posterior(const IvDataset& dataset, const GibbsConfig& cfg,
                                   const Stratification& strat) {
  if (cfg.prior_concentration <= 0.0) throw ConfigError("gibbs: prior concentration must be > 0");
  if (cfg.n_samples < 1 || cfg.burn_in < 0 || cfg.thinning < 1 || cfg.n_chains < 1)
    throw ConfigError("gibbs: invalid chain settings");
  if (dataset.n > 0 && !dataset.binary_outcome())
    throw DataError("gibbs: outcome is not binary; binarize or use the threshold grid");

  const StratificationMap map =
      dataset.n > 0 ? StratificationMap(strat, dataset) : StratificationMap();

  GibbsData data;
  data.counts.assign(map.n_cells(), {});
  data.weights.assign(map.n_cells(), 0.0);
  for (std::size_t i = 0; i < dataset.n; ++i) {
    const std::size_t c = map.cell_of(dataset.row(i));
    const int y = dataset.y[i] >= 0.5 ? 1 : 0;
    ++data.counts[c][CondProbs::flat_index(y, dataset.t[i], dataset.z[i])];
    data.weights[c] += 1.0;
  }
  if (dataset.n > 0) {
    for (double& w : data.weights) w /= static_cast<double>(dataset.n);
  } else {
    data.weights.assign(map.n_cells(), 1.0 / static_cast<double>(map.n_cells()));
  }

  PosteriorHistogram hist;
  hist.bin_mass.assign(static_cast<std::size_t>(cfg.histogram_bins), 0.0);

  RandomStream root(cfg.seed);
  const int base = cfg.n_samples / cfg.n_chains;
  const int extra = cfg.n_samples % cfg.n_chains;
  for (int chain = 0; chain < cfg.n_chains; ++chain) {
    const int chain_samples = base + (chain < extra ? 1 : 0);
    if (chain_samples == 0) continue;
    run_chain(data, cfg, chain_samples, root.split("chain", static_cast<std::uint64_t>(chain)),
              hist);
  }

  for (double& v : hist.bin_mass) v /= static_cast<double>(hist.n_samples);
  return hist;
}

Interval quantile_interval(const PosteriorHistogram& hist, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("quantile_interval: alpha must be in (0,1)");
  const auto quantile = [&](double target) {
    double cum = 0.0;
    for (int k = 0; k < hist.bins(); ++k) {
      cum += hist.bin_mass[static_cast<std::size_t>(k)];
      if (cum >= target - 1e-12) return hist.bin_center(k);
    }
    return hist.bin_center(hist.bins() - 1);
  };
  return Interval(quantile(alpha / 2.0), quantile(1.0 - alpha / 2.0));
}

Interval gibbs_threshold_interval(const IvDataset& dataset, const GibbsConfig& cfg, double alpha,
                                  int num_thresholds, const Stratification& strat) {
  if (num_thresholds < 2) throw ConfigError("gibbs_threshold_interval: need >= 2 thresholds");
  RandomStream root(cfg.seed);
  double lo = 0.0;
  double hi = 0.0;
  for (int j = 0; j < num_thresholds; ++j) {
    const double s = (j + 0.5) / num_thresholds;
    const IvDataset binarized = binarize_at(dataset, s);
    GibbsConfig sub = cfg;
    sub.seed = root.split("threshold", static_cast<std::uint64_t>(j)).seed();
    const Interval interval = quantile_interval(gibbs_posterior(binarized, sub, strat), alpha);
    lo += interval.lower();
    hi += interval.upper();
  }
  return Interval(lo / num_thresholds, hi / num_thresholds);
}

PosteriorHistogram gibbs_threshold_histogram(const IvDataset& dataset, const GibbsConfig& cfg,
                                             int num_thresholds, const Stratification& strat) {
  if (num_thresholds < 2) throw ConfigError("gibbs_threshold_histogram: need >= 2 thresholds");
  RandomStream root(cfg.seed);
  PosteriorHistogram merged;
  merged.bin_mass.assign(static_cast<std::size_t>(cfg.histogram_bins), 0.0);
  for (int j = 0; j < num_thresholds; ++j) {
    const double s = (j + 0.5) / num_thresholds;
    const IvDataset binarized = binarize_at(dataset, s);
    GibbsConfig sub = cfg;
    sub.seed = root.split("threshold", static_cast<std::uint64_t>(j)).seed();
    const PosteriorHistogram hist = gibbs_posterior(binarized, sub, strat);
    for (std::size_t k = 0; k < merged.bin_mass.size(); ++k)
      merged.bin_mass[k] += hist.bin_mass[k] / num_thresholds;
    merged.n_samples += hist.n_samples;
  }
  return merged;
}

}  // namespace ivbound
