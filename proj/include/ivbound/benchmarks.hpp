#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ivbound/core.hpp"
#include "ivbound/dataset_io.hpp"

namespace ivbound {

/// Synthetic binary-outcome benchmark with exact ground-truth bounds.
struct BinaryBenchConfig {
  std::size_t n = 2048;
  int d_min = 5;
  int d_max = 10;
  std::uint64_t seed = 0;
};

/// Covariates from {Normal(5,1), Uniform(-10,5)} per column; instrument logits
/// from random weights plus noise, standardized; strata probabilities from
/// row-softmaxed standardized logit columns; labels computed analytically from
/// the per-row strata probabilities.
StoredDataset gen_binary_benchmark(const BinaryBenchConfig& cfg);

/// Covariate-free benchmark: a single strata distribution q ~ Dirichlet(alpha)
/// shared by every row, instrument propensity 1/2, one standard-normal
/// distractor covariate, exact labels. Rows are drawn row-major so datasets of
/// different sizes under one seed share a prefix. Setting `complier_mass`
/// switches to a strong-instrument regime: that much mass on the complier
/// strata (narrow identified set), the rest spread over the other twelve.
struct CovfreeBenchConfig {
  std::size_t n = 4096;
  double alpha = 1.0;
  double min_set_width = 0.0;  // redraw q until the identified set is this wide
  std::optional<double> complier_mass;
  std::uint64_t seed = 0;
};

StoredDataset gen_covfree_benchmark(const CovfreeBenchConfig& cfg);

/// Dimensionality-sweep benchmark: compliance flips with the sign of a latent
/// index spread evenly across the covariates, so any fixed stratification
/// captures a 1/d share of the compliance signal. Cells that mix compliers
/// with defiers lose the instrument-treatment association and their
/// identified sets widen.
struct MixedComplianceConfig {
  std::size_t n = 1024;
  std::size_t d = 5;
  double sharpness = 3.0;  // slope of the compliance switch in the index
  std::uint64_t seed = 0;
};

StoredDataset gen_mixed_compliance_benchmark(const MixedComplianceConfig& cfg);

enum class CalibFamily { linear, polynomial, deep_nonlinear };

CalibFamily calib_family_from_string(const std::string& name);
std::string to_string(CalibFamily family);

/// Continuous-outcome calibration/sensitivity DGP.
struct CalibDgpConfig {
  CalibFamily family = CalibFamily::linear;
  std::size_t n = 1024;
  std::size_t d = 5;
  double instrument_strength = 2.0;  // a
  double gamma_t = 1.0;
  double gamma_y = 1.0;
  double sigma_y = 0.5;
  double clip_lo = 0.05;
  double clip_hi = 0.95;
  std::uint64_t seed = 0;
};

/// The structural link functions (h_T, mu_0, mu_1) of one drawn DGP.
struct FamilyLinks {
  std::function<double(std::span<const double>)> h_t;
  std::function<double(std::span<const double>)> mu0;
  std::function<double(std::span<const double>)> mu1;
};

FamilyLinks family_links(CalibFamily family, std::size_t d, std::uint64_t seed);

struct CalibOutput {
  IvDataset data;            // y rescaled to [0,1]; labels.sate in rescaled units
  std::vector<double> p_t;   // realized clipped treatment propensities
  double sate_raw = 0.0;     // label in raw outcome units
};

/// Y = mu_T(x) + gamma_y*U + sigma_y*eta given T from the clipped propensity.
double calib_outcome(const FamilyLinks& links, std::span<const double> x, int t, double u,
                     double eta, const CalibDgpConfig& cfg);

CalibOutput gen_calib_dgp(const CalibDgpConfig& cfg);

}  // namespace ivbound
