#include "ivbound/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ivbound {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

std::uint64_t hash_combine(std::uint64_t h, std::string_view s) {
  // FNV-1a over the bytes, then mixed into the running hash.
  std::uint64_t f = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    f ^= c;
    f *= 0x100000001b3ULL;
  }
  return hash_combine(h, f);
}

std::uint64_t stream_seed(std::uint64_t global_seed, std::string_view command,
                          std::uint64_t index, std::string_view label) {
  std::uint64_t h = mix64(global_seed);
  h = hash_combine(h, command);
  h = hash_combine(h, index);
  h = hash_combine(h, label);
  return h;
}

RandomStream::RandomStream(std::uint64_t seed) : engine_(mix64(seed)), seed_(seed) {}

RandomStream RandomStream::split(std::string_view label, std::uint64_t index) const {
  return RandomStream(hash_combine(hash_combine(seed_, label), index));
}

std::uint64_t RandomStream::next_u64() { return engine_(); }

double RandomStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double a, double b) { return a + (b - a) * uniform(); }

int RandomStream::uniform_int(int lo, int hi) {
  if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(next_u64() % span);
}

bool RandomStream::bernoulli(double p) { return uniform() < p; }

double RandomStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  // Box-Muller; u1 kept away from zero.
  double u1 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_normal_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double RandomStream::normal(double mean, double sd) { return mean + sd * normal(); }

double RandomStream::laplace(double mu, double scale) {
  const double u = uniform() - 0.5;
  return mu - scale * std::copysign(std::log1p(-2.0 * std::abs(u)), u);
}

double RandomStream::exponential() {
  double u = uniform();
  if (u <= 0.0) u = 0x1.0p-53;
  return -std::log(u);
}

double RandomStream::gamma(double shape) {
  if (shape <= 0.0) throw std::invalid_argument("gamma: shape must be positive");
  if (shape < 1.0) {
    // Boost to shape+1, then scale back.
    double u = uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> RandomStream::dirichlet(std::span<const double> alpha) {
  std::vector<double> out(alpha.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    out[i] = gamma(alpha[i]);
    total += out[i];
  }
  if (total <= 0.0) {
    // All components underflowed (tiny concentration); fall back to a single atom.
    const std::size_t j = static_cast<std::size_t>(uniform() * static_cast<double>(out.size()));
    std::fill(out.begin(), out.end(), 0.0);
    out[std::min(j, out.size() - 1)] = 1.0;
    return out;
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> RandomStream::dirichlet(double alpha, std::size_t k) {
  std::vector<double> a(k, alpha);
  return dirichlet(a);
}

int RandomStream::categorical(std::span<const double> probs) {
  double total = 0.0;
  for (double p : probs) total += p;
  double u = uniform() * total;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    u -= probs[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

std::uint64_t RandomStream::binomial(std::uint64_t n, double p) {
  std::uint64_t k = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    if (uniform() < p) ++k;
  }
  return k;
}

std::vector<std::size_t> RandomStream::sample_without_replacement(std::size_t n, std::size_t k) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  // Floyd's algorithm, then sort for stable downstream iteration.
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  for (std::size_t j = n - k; j < n; ++j) {
    std::size_t t = static_cast<std::size_t>(uniform() * static_cast<double>(j + 1));
    if (t > j) t = j;
    if (std::find(chosen.begin(), chosen.end(), t) != chosen.end()) {
      chosen.push_back(j);
    } else {
      chosen.push_back(t);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace ivbound
