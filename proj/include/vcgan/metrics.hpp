#pragma once

// Sample-cloud evaluation against a known mixture: mode coverage, share of
// high-quality samples, per-path specialization and recovery of the mixture
// weights by the learned path probabilities.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "vcgan/errors.hpp"
#include "vcgan/generator.hpp"
#include "vcgan/synth_data.hpp"

namespace vcgan {

inline constexpr std::size_t kJunk = std::numeric_limits<std::size_t>::max();

struct MetricOptions {
  double radius_multiplier{3.0};
  std::size_t coverage_threshold{20};
};

/// Nearest center if within radius_multiplier * sigma, else kJunk. Ties go to
/// the lowest center index.
[[nodiscard]] inline std::vector<std::size_t> assign_modes(std::span<const Point2> samples,
                                                           const MixtureSpec& spec,
                                                           double radius_multiplier = 3.0) {
  if (!(radius_multiplier > 0.0)) throw ConfigError("radius multiplier must be > 0");
  const double radius = radius_multiplier * spec.sigma;
  std::vector<std::size_t> out(samples.size(), kJunk);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < spec.centers.size(); ++k) {
      const double dx = samples[i][0] - spec.centers[k][0];
      const double dy = samples[i][1] - spec.centers[k][1];
      const double d = std::hypot(dx, dy);
      if (d < best) {
        best = d;
        arg = k;
      }
    }
    if (best <= radius) out[i] = arg;
  }
  return out;
}

struct Coverage {
  std::size_t modes_covered{0};
  double high_quality_fraction{0.0};
  std::vector<std::size_t> per_mode;
};

inline constexpr std::size_t kMinCoverageSamples = 1000;

[[nodiscard]] inline Coverage coverage_and_quality(std::span<const Point2> samples,
                                                   const MixtureSpec& spec,
                                                   const MetricOptions& opt = {}) {
  if (samples.size() < kMinCoverageSamples) {
    throw ConfigError("coverage needs at least 1000 samples");
  }
  const auto modes = assign_modes(samples, spec, opt.radius_multiplier);
  Coverage c;
  c.per_mode.assign(spec.size(), 0);
  std::size_t good = 0;
  for (std::size_t m : modes) {
    if (m == kJunk) continue;
    ++c.per_mode[m];
    ++good;
  }
  for (std::size_t n : c.per_mode) c.modes_covered += n >= opt.coverage_threshold ? 1 : 0;
  c.high_quality_fraction = static_cast<double>(good) / static_cast<double>(samples.size());
  return c;
}

/// Largest mode's share among the non-junk assignments; 0 when all are junk.
[[nodiscard]] inline double purity_of(std::span<const std::size_t> mode_counts) {
  const std::size_t total = std::accumulate(mode_counts.begin(), mode_counts.end(), std::size_t{0});
  if (total == 0) return 0.0;
  return static_cast<double>(*std::max_element(mode_counts.begin(), mode_counts.end())) /
         static_cast<double>(total);
}

struct PurityReport {
  std::vector<double> per_path;
  double mean{0.0};
  /// histogram[j][k]: conditional samples of path j assigned to mode k.
  std::vector<std::vector<std::size_t>> histogram;
};

/// Mean weighted by `weights` (path usage).
[[nodiscard]] inline PurityReport purity_from_histogram(std::vector<std::vector<std::size_t>> hist,
                                                        std::span<const double> weights) {
  if (hist.size() != weights.size()) throw ShapeError("purity: weights do not match paths");
  PurityReport r;
  r.histogram = std::move(hist);
  for (std::size_t j = 0; j < r.histogram.size(); ++j) {
    r.per_path.push_back(purity_of(r.histogram[j]));
    r.mean += weights[j] * r.per_path.back();
  }
  return r;
}

inline constexpr std::size_t kMinPerPathSamples = 200;

[[nodiscard]] inline PurityReport path_purity(const GeneratorParams& g, const MixtureSpec& spec,
                                              std::size_t per_path_count, std::uint64_t seed,
                                              const MetricOptions& opt = {}) {
  if (per_path_count < kMinPerPathSamples) {
    throw ConfigError("path purity needs at least 200 samples per path");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> hist(g.layout.N, std::vector<std::size_t>(spec.size(), 0));
  for (std::size_t j = 0; j < g.layout.N; ++j) {
    const auto pts = conditional_batch(j, per_path_count, g, rng);
    for (std::size_t m : assign_modes(pts, spec, opt.radius_multiplier)) {
      if (m != kJunk) ++hist[j][m];
    }
  }
  return purity_from_histogram(std::move(hist), g.head.probs());
}

struct RecoveryResult {
  double l1_error{0.0};
  /// Two paths majored the same mode (or a path had no assigned samples), so
  /// the matching fell back to greedy reassignment.
  bool degenerate{false};
  /// mode matched to each path (kJunk when unmatched).
  std::vector<std::size_t> path_to_mode;
};

/// L1 distance between path probabilities and mixture weights after matching
/// each path to its majority mode, greedily in order of majority count.
[[nodiscard]] inline RecoveryResult p_recovery_error(
    std::span<const double> probs, const std::vector<std::vector<std::size_t>>& histogram,
    std::span<const double> weights) {
  const std::size_t n = probs.size();
  const std::size_t k = weights.size();
  if (histogram.size() != n) throw ShapeError("p_recovery_error: histogram rows != paths");
  for (const auto& row : histogram) {
    if (row.size() != k) throw ShapeError("p_recovery_error: histogram columns != modes");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto major = [&](std::size_t j) {
    return *std::max_element(histogram[j].begin(), histogram[j].end());
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return major(a) > major(b); });

  RecoveryResult r;
  r.path_to_mode.assign(n, kJunk);
  std::vector<bool> taken(k, false);
  for (std::size_t j : order) {
    const auto& row = histogram[j];
    std::size_t best = kJunk;
    for (std::size_t m = 0; m < k; ++m) {
      if (taken[m]) continue;
      if (best == kJunk || row[m] > row[best]) best = m;
    }
    const std::size_t majority =
        static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (major(j) == 0 || best != majority) r.degenerate = true;
    if (best == kJunk) continue;
    taken[best] = true;
    r.path_to_mode[j] = best;
  }
  std::vector<double> matched(k, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (r.path_to_mode[j] == kJunk) {
      r.l1_error += probs[j];
    } else {
      matched[r.path_to_mode[j]] += probs[j];
    }
  }
  for (std::size_t m = 0; m < k; ++m) r.l1_error += std::abs(matched[m] - weights[m]);
  return r;
}

struct EvalOptions {
  MetricOptions metric{};
  std::size_t samples{10000};
  std::size_t per_path{1000};
  std::uint64_t seed{12345};
};

struct EvalReport {
  std::size_t components{0};
  std::size_t paths{0};
  std::size_t modes_covered{0};
  double high_quality_fraction{0.0};
  std::vector<double> path_purity;
  double mean_purity{0.0};
  double p_error_l1{0.0};
  bool degenerate_matching{false};
  std::vector<double> probs;
  std::vector<std::vector<std::size_t>> histogram;
};

[[nodiscard]] inline EvalReport evaluate(const GeneratorParams& g, const MixtureSpec& spec,
                                         const EvalOptions& opt = {}) {
  std::mt19937_64 rng(opt.seed);
  const auto [pts, paths] = sample_generator(opt.samples, g, rng);
  const Coverage cov = coverage_and_quality(pts, spec, opt.metric);
  const PurityReport pur = path_purity(g, spec, opt.per_path, rng(), opt.metric);
  EvalReport r;
  r.components = spec.size();
  r.paths = g.layout.N;
  r.modes_covered = cov.modes_covered;
  r.high_quality_fraction = cov.high_quality_fraction;
  r.path_purity = pur.per_path;
  r.mean_purity = pur.mean;
  r.probs = g.head.probs();
  const RecoveryResult rec = p_recovery_error(r.probs, pur.histogram, spec.weights);
  r.p_error_l1 = rec.l1_error;
  r.degenerate_matching = rec.degenerate;
  r.histogram = pur.histogram;
  return r;
}

}  // namespace vcgan
