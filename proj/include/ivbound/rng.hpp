#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace ivbound {

// SplitMix64 finalizer; used for stream derivation.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v);
std::uint64_t hash_combine(std::uint64_t h, std::string_view s);

// Stream seed = mix of (global seed, command, index, label). Documented in the
// README so external tools can predict which stream a task receives.
std::uint64_t stream_seed(std::uint64_t global_seed, std::string_view command,
                          std::uint64_t index, std::string_view label);

/// Deterministic random stream. Distributions are implemented by hand on top
/// of mt19937_64 so the byte stream does not depend on the standard library.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  // Derived stream, independent of this one and deterministic in (seed, label, index).
  RandomStream split(std::string_view label, std::uint64_t index = 0) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();

  double uniform();  // [0, 1), 53-bit
  double uniform(double a, double b);
  int uniform_int(int lo, int hi);  // inclusive bounds
  bool bernoulli(double p);
  double normal();
  double normal(double mean, double sd);
  double laplace(double mu, double scale);
  double exponential();
  double gamma(double shape);  // unit scale
  std::vector<double> dirichlet(std::span<const double> alpha);
  std::vector<double> dirichlet(double alpha, std::size_t k);
  int categorical(std::span<const double> probs);
  std::uint64_t binomial(std::uint64_t n, double p);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform() * static_cast<double>(i));
      if (j >= i) j = i - 1;
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from {0..n-1}, sorted.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ivbound
