#pragma once

// Distance statistics of composite noise vectors [z'; c] and the closed-form
// amplification of the one-hot code.
//
// For two independent z' ~ N(0, I_L), the intra-class distance ||z'1 - z'2||
// is sqrt(2) * chi_L. Between classes the code adds 2 h^2 to the squared
// distance, h = A - b. Moments use a second-order expansion of sqrt around
// E[w]; the amplitude equates (mean - delta std) between classes with
// (mean + delta std) within a class.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vcgan/errors.hpp"

namespace vcgan {

namespace detail {
inline void require_dimension(long long L) {
  if (L < 1) throw ConfigError("continuous noise dimension L must be >= 1, got " +
                               std::to_string(L));
}
inline void require_nonneg(double x, const char* what) {
  if (!(x >= 0.0)) throw ConfigError(std::string(what) + " must be >= 0");
}
}  // namespace detail

[[nodiscard]] inline double intra_mean(long long L) {
  detail::require_dimension(L);
  const double l = static_cast<double>(L);
  return std::sqrt(2.0) * (std::sqrt(l) - 1.0 / (4.0 * std::sqrt(l)));
}

[[nodiscard]] inline double intra_std(long long L) {
  detail::require_dimension(L);
  return std::sqrt(1.0 - 1.0 / (8.0 * static_cast<double>(L)));
}

[[nodiscard]] inline double intra_max(long long L, double delta) {
  detail::require_nonneg(delta, "delta");
  return intra_mean(L) + delta * intra_std(L);
}

[[nodiscard]] inline double inter_mean(long long L, double h) {
  detail::require_dimension(L);
  detail::require_nonneg(h, "h");
  const double s = static_cast<double>(L) + h * h;
  return std::sqrt(2.0) * (std::sqrt(s) - static_cast<double>(L) / (4.0 * std::pow(s, 1.5)));
}

[[nodiscard]] inline double inter_std(long long L, double h) {
  detail::require_dimension(L);
  detail::require_nonneg(h, "h");
  const double l = static_cast<double>(L);
  return std::sqrt(l) / std::sqrt(l + h * h);
}

/// Simplified form used by the amplification solver: the L / (4 (L+h^2)^1.5)
/// correction of the mean is dropped.
[[nodiscard]] inline double inter_min(long long L, double h, double delta) {
  detail::require_nonneg(delta, "delta");
  detail::require_dimension(L);
  detail::require_nonneg(h, "h");
  const double s = static_cast<double>(L) + h * h;
  return std::sqrt(2.0) * std::sqrt(s) - delta * inter_std(L, h);
}

/// inter_mean - delta * inter_std, keeping the mean's correction term.
[[nodiscard]] inline double inter_min_unsimplified(long long L, double h, double delta) {
  detail::require_nonneg(delta, "delta");
  return inter_mean(L, h) - delta * inter_std(L, h);
}

/// Exact E[chi_L] = sqrt(2) Gamma((L+1)/2) / Gamma(L/2), in the log domain.
[[nodiscard]] inline double exact_chi_mean(long long L) {
  detail::require_dimension(L);
  const double l = static_cast<double>(L);
  return std::sqrt(2.0) * std::exp(std::lgamma((l + 1.0) / 2.0) - std::lgamma(l / 2.0));
}

struct AmplificationParams {
  std::size_t N{1};
  std::size_t L{1};
  double delta{0.0};
  double A{0.0};
  double b{0.0};
  double h{0.0};
  double v{0.0};
  /// Unamplified one-hot (A = 1, b = 0).
  bool raw{false};

  /// Code of path j (0-based): b everywhere, A at position j.
  [[nodiscard]] std::vector<double> code(std::size_t j) const {
    if (j >= N) {
      throw ConfigError("path index " + std::to_string(j) + " out of range for N = " +
                        std::to_string(N));
    }
    std::vector<double> c(N, b);
    c[j] = A;
    return c;
  }

  /// Plain one-hot code, A = 1, b = 0.
  static AmplificationParams unamplified(std::size_t N, std::size_t L) {
    if (N < 1) throw ConfigError("N must be >= 1");
    detail::require_dimension(static_cast<long long>(L));
    AmplificationParams p;
    p.N = N;
    p.L = L;
    p.A = 1.0;
    p.b = 0.0;
    p.h = 1.0;
    p.raw = true;
    return p;
  }

  /// A single path carries no class information: its one-coordinate code is 0.
  static AmplificationParams single_path(std::size_t L, double delta) {
    detail::require_dimension(static_cast<long long>(L));
    AmplificationParams p;
    p.N = 1;
    p.L = L;
    p.delta = delta;
    return p;
  }
};

/// Closed-form solution of the balance equation under the zero-sum constraint
/// (N - 1) b + A = 0.
[[nodiscard]] inline AmplificationParams amplification(std::size_t N, std::size_t L, double delta) {
  if (N < 2) throw ConfigError("amplification needs N >= 2 paths, got " + std::to_string(N));
  detail::require_dimension(static_cast<long long>(L));
  // delta = 0 is not rejected up front: it fails on the radicand below.
  if (!(delta >= 0.0)) throw ConfigError("delta must be > 0");
  const double l = static_cast<double>(L);
  const double v = std::sqrt(2.0 * l) + delta * std::sqrt(1.0 - 1.0 / (8.0 * l)) -
                   1.0 / std::sqrt(8.0 * l);
  const double root = std::sqrt(v * v + delta * std::sqrt(32.0 * l)) + v;
  const double radicand = 0.125 * root * root - l;
  if (!(radicand >= 0.0)) {
    throw ConfigError("no real amplitude: radicand " + std::to_string(radicand) +
                      " < 0 for N=" + std::to_string(N) + " L=" + std::to_string(L) +
                      " delta=" + std::to_string(delta) + " (delta must be > 0)");
  }
  AmplificationParams p;
  p.N = N;
  p.L = L;
  p.delta = delta;
  p.v = v;
  p.b = -std::sqrt(radicand) / static_cast<double>(N);
  p.A = (1.0 - static_cast<double>(N)) * p.b;
  // Stored as the rounded A - b so that h is exactly the gap the codes carry.
  p.h = p.A - p.b;
  return p;
}

enum class DistanceKind { kIntra, kInter };

struct DistanceStats {
  double mean{0.0};
  double std{0.0};
  DistanceKind kind{DistanceKind::kIntra};
  std::size_t L{0};
  double h{0.0};
};

struct DistanceSamples {
  std::vector<double> intra;
  std::vector<double> inter;
};

inline constexpr std::size_t kMinMonteCarloSamples = 10000;

/// Raw Monte Carlo distances: intra = ||u - w||, inter = sqrt(||u - w||^2 + 2 h^2),
/// u, w ~ N(0, I_L) drawn from a generator seeded with `seed`.
[[nodiscard]] inline DistanceSamples monte_carlo_distances(std::size_t L, double h,
                                                           std::size_t samples,
                                                           std::uint64_t seed) {
  detail::require_dimension(static_cast<long long>(L));
  detail::require_nonneg(h, "h");
  if (samples < kMinMonteCarloSamples) {
    throw ConfigError("Monte Carlo needs at least 10000 samples");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  DistanceSamples out;
  out.intra.reserve(samples);
  out.inter.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    double sq = 0.0;
    for (std::size_t k = 0; k < L; ++k) {
      const double d = normal(rng) - normal(rng);
      sq += d * d;
    }
    out.intra.push_back(std::sqrt(sq));
    out.inter.push_back(std::sqrt(sq + 2.0 * h * h));
  }
  return out;
}

namespace detail {
inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - m) * (x - m);
  var /= static_cast<double>(xs.size() - 1);
  return {m, std::sqrt(var)};
}
}  // namespace detail

/// Empirical (intra, inter) statistics.
[[nodiscard]] inline std::pair<DistanceStats, DistanceStats> monte_carlo_distance_stats(
    std::size_t L, double h, std::size_t samples, std::uint64_t seed) {
  const DistanceSamples d = monte_carlo_distances(L, h, samples, seed);
  const auto [mi, si] = detail::mean_std(d.intra);
  const auto [me, se] = detail::mean_std(d.inter);
  return {DistanceStats{mi, si, DistanceKind::kIntra, L, 0.0},
          DistanceStats{me, se, DistanceKind::kInter, L, h}};
}

}  // namespace vcgan
