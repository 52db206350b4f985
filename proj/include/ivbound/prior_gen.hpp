#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "ivbound/core.hpp"
#include "ivbound/dataset_io.hpp"
#include "ivbound/rng.hpp"

namespace ivbound {

/// Target-mean recentering of the strata logits. A Dirichlet(gamma) draw is
/// used as the target unless one is fixed explicitly.
struct RecenterSpec {
  double gamma = 0.1;
  std::optional<std::array<double, kNumStrata>> target;
  bool enabled = true;
};

struct PriorDgpConfig {
  std::size_t n = 2048;
  int d_min = 5;
  int d_max = 10;
  RecenterSpec recenter;
};

/// A fully specified IV-consistent data-generating process with known SATE.
struct PriorDgp {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> covariates;                        // n x d, row-major
  std::vector<double> instrument_propensity;             // n, in (0, 1)
  std::vector<std::array<double, kNumStrata>> strata_probs;  // n rows on the simplex
  double sate = 0.0;
  std::uint64_t seed = 0;
};

/// Random table whose columns come from a per-slot family choice among
/// Gaussian, uniform, and a two-layer tanh transform of latent noise.
/// Deterministic in seed. Returns the family id per column via `families`.
std::vector<double> sample_base_table(std::uint64_t seed, std::size_t n, std::size_t d,
                                      std::vector<int>* families = nullptr);

/// P(Z=1 | x) = sigmoid(f(x)) for a seeded random f of the covariates alone;
/// the signature cannot see strata, which is what enforces instrument
/// unconfoundedness by construction.
std::vector<double> instrument_propensity(const std::vector<double>& covariates, std::size_t n,
                                          std::size_t d, std::uint64_t seed);

/// Adds the constant log-domain shift c = log(target) - log(mean of softmax
/// rows) to every row of logits. Softmax outputs are floored at 1e-12 before
/// the log so the shift is always finite.
std::vector<std::array<double, kNumStrata>> recenter_logits(
    const std::vector<std::array<double, kNumStrata>>& logits, const RecenterSpec& spec,
    RandomStream& stream);

std::array<double, kNumStrata> softmax_row(const std::array<double, kNumStrata>& logits);

PriorDgp draw_dgp(std::uint64_t seed, const PriorDgpConfig& config);

/// Observables via consistency: s ~ Cat(strata_probs[i]), z ~ Bern(propensity[i]),
/// t = T(z)(s), y = Y(t)(s). Labels carry the exact SATE and the averaged
/// per-row conditional bounds.
StoredDataset sample_dataset(const PriorDgp& dgp, std::uint64_t seed);

/// (t, y) observed for stratum s under instrument value z.
std::pair<int, int> realize_observables(StratumIndex s, int z);

}  // namespace ivbound
