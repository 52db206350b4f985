#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ivbound/bounds.hpp"
#include "ivbound/core.hpp"

namespace ivbound {

enum class CondProbModelKind { pooled, stratified, multinomial_logistic };

CondProbModelKind condprob_kind_from_string(const std::string& name);

/// Discrete stratification by quantile-binned covariate columns. Continuous
/// covariates must be binned explicitly; an empty column list means one cell.
struct Stratification {
  struct Column {
    std::size_t index = 0;
    int bins = 2;
  };
  std::vector<Column> columns;
};

/// Maps covariate rows to stratification cells using quantile edges computed
/// on a reference dataset.
class StratificationMap {
 public:
  StratificationMap() = default;  // single cell
  StratificationMap(const Stratification& spec, const IvDataset& reference);

  std::size_t n_cells() const { return n_cells_; }
  std::size_t cell_of(std::span<const double> x) const;

 private:
  struct ColumnEdges {
    std::size_t index = 0;
    std::vector<double> edges;
  };
  std::vector<ColumnEdges> columns_;
  std::size_t n_cells_ = 1;
};

/// Fits a conditional-probability model of the requested kind:
///   pooled                per-z cell frequencies with add-0.5 smoothing
///   stratified            pooled per stratification cell (empty cell -> pooled)
///   multinomial-logistic  per-z linear softmax over the 4 (y,t) cells, ridge
///                         1e-3, deterministic Newton optimizer
std::unique_ptr<CondProbScorer> fit_condprob_model(const IvDataset& dataset,
                                                   CondProbModelKind kind,
                                                   const Stratification& strat = {});

/// The plug-in estimator: fit, score every row, average conditional bounds.
SateBounds plugin_bounds(const IvDataset& dataset, CondProbModelKind kind,
                         const Stratification& strat = {});

/// K-bin discretized distribution over SATE values in [-1, 1].
struct PosteriorHistogram {
  std::vector<double> bin_mass;
  std::size_t n_samples = 0;

  int bins() const { return static_cast<int>(bin_mass.size()); }
  static int bin_index(double w, int k);
  double bin_center(int k) const { return -1.0 + (k + 0.5) * 2.0 / bins(); }
  double mean() const;
};

struct GibbsConfig {
  // Sparse by default: the flat Dirichlet concentrates the posterior in the
  // interior of the identified set, while small concentrations put mass near
  // its extreme points.
  double prior_concentration = 0.1;
  int burn_in = 400;     // per chain
  int n_samples = 4000;  // total across chains
  int thinning = 1;
  int n_chains = 16;     // overdispersed prior-drawn initializations, merged
  int histogram_bins = 1024;
  std::uint64_t seed = 0;
};

/// Conjugate Gibbs sampler for the marginal posterior of the SATE on a
/// binary-outcome dataset: alternates latent stratum counts per observed
/// (y,t,z) cell with Dirichlet draws of the per-cell strata distribution,
/// independently per stratification cell. Each sweep's SATE is the
/// covariate-weighted mean of the per-cell effects. Under sparse priors the
/// restricted posterior is multimodal, so several chains with prior-drawn
/// starts run on independent streams and their histograms are merged.
PosteriorHistogram gibbs_posterior(const IvDataset& dataset, const GibbsConfig& cfg,
                                   const Stratification& strat = {});

/// [Q_{alpha/2}, Q_{1-alpha/2}] on the discrete histogram; a quantile is the
/// smallest bin center whose cumulative mass reaches the target.
Interval quantile_interval(const PosteriorHistogram& hist, double alpha);

/// Bayesian interval for a bounded continuous outcome via the threshold grid:
/// run the chain per binarized threshold and average the interval endpoints.
Interval gibbs_threshold_interval(const IvDataset& dataset, const GibbsConfig& cfg, double alpha,
                                  int num_thresholds = 16, const Stratification& strat = {});

/// Bin-wise average of the per-threshold histograms. Its quantiles are more
/// conservative than the endpoint-averaged interval; used where a histogram
/// interface is required (calibration curves).
PosteriorHistogram gibbs_threshold_histogram(const IvDataset& dataset, const GibbsConfig& cfg,
                                             int num_thresholds = 16,
                                             const Stratification& strat = {});

/// The 4 strata compatible with an observed (y, t, z) cell.
std::array<int, 4> compatible_strata(int y, int t, int z);

}  // namespace ivbound
