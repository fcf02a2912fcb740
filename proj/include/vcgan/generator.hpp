#pragma once

// Multi-path generator: z = [z'; z''], the ADC turns z'' into a path k, the
// k-th noise transformer appends the fixed code c_k to z', and the shared
// decoder renders [z'; c_k]. Paths are 0-based in this API.

#include <Eigen/Dense>

#include <cstddef>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vcgan/adc.hpp"
#include "vcgan/diff_engine.hpp"
#include "vcgan/errors.hpp"
#include "vcgan/mlp.hpp"
#include "vcgan/onehot_geometry.hpp"
#include "vcgan/synth_data.hpp"

namespace vcgan {

/// M = L + N: continuous slice z' of length L, discrete slice z'' of length N.
struct NoiseLayout {
  std::size_t M{1};
  std::size_t L{0};
  std::size_t N{1};

  NoiseLayout() = default;
  NoiseLayout(std::size_t m, std::size_t l, std::size_t n) : M(m), L(l), N(n) {
    if (M != L + N) {
      throw ConfigError("layout requires M = L + N, got M=" + std::to_string(M) +
                        " L=" + std::to_string(L) + " N=" + std::to_string(N));
    }
    if (L < 1) throw ConfigError("layout requires L = M - N >= 1, got L=" + std::to_string(L));
    if (N < 1) throw ConfigError("layout requires N >= 1");
  }

  static NoiseLayout from_total(std::size_t m, std::size_t n) {
    if (n >= m) {
      throw ConfigError("layout requires L = M - N >= 1, got M=" + std::to_string(m) +
                        " N=" + std::to_string(n));
    }
    return {m, m - n, n};
  }

  friend bool operator==(const NoiseLayout&, const NoiseLayout&) = default;
};

struct NoiseSlices {
  std::vector<double> continuous;  // z'
  std::vector<double> discrete;    // z''
};

[[nodiscard]] inline NoiseSlices split_noise(std::span<const double> z, const NoiseLayout& layout) {
  if (z.size() != layout.M) {
    throw ShapeError("noise has length " + std::to_string(z.size()) + ", layout expects " +
                     std::to_string(layout.M));
  }
  return {{z.begin(), z.begin() + static_cast<std::ptrdiff_t>(layout.L)},
          {z.begin() + static_cast<std::ptrdiff_t>(layout.L), z.end()}};
}

[[nodiscard]] inline std::vector<double> join_noise(const NoiseSlices& s) {
  std::vector<double> z(s.continuous);
  z.insert(z.end(), s.discrete.begin(), s.discrete.end());
  return z;
}

/// [z'; c_j].
[[nodiscard]] inline std::vector<double> noise_transformer(std::span<const double> z_continuous,
                                                           std::size_t j,
                                                           const AmplificationParams& amp) {
  const std::vector<double> code = amp.code(j);
  std::vector<double> out(z_continuous.begin(), z_continuous.end());
  out.insert(out.end(), code.begin(), code.end());
  return out;
}

/// Selects a column by matrix-vector product with a one-hot vector.
/// `columns` is column-length x N.
[[nodiscard]] inline std::vector<double> mux(const Eigen::MatrixXd& columns,
                                             std::span<const double> one_hot) {
  if (static_cast<std::size_t>(columns.cols()) != one_hot.size()) {
    throw ShapeError("mux: " + std::to_string(columns.cols()) + " columns for a selector of " +
                     std::to_string(one_hot.size()));
  }
  std::size_t ones = 0;
  for (double c : one_hot) {
    if (c == 1.0) {
      ++ones;
    } else if (c != 0.0) {
      throw ConfigError("mux: selector is not one-hot");
    }
  }
  if (ones != 1) throw ConfigError("mux: selector is not one-hot");
  const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(
      one_hot.data(), static_cast<Eigen::Index>(one_hot.size()));
  const Eigen::VectorXd out = columns * c;
  return {out.data(), out.data() + out.size()};
}

inline constexpr std::size_t kSampleDim = 2;

struct GeneratorParams {
  NoiseLayout layout;
  AmplificationParams amp;
  CategoricalHead head;
  Mlp decoder;

  [[nodiscard]] std::size_t paths() const noexcept { return layout.N; }

  /// Trainable scalars: the decoder, plus N logits when the head learns.
  [[nodiscard]] std::size_t trainable_parameter_count() const {
    return decoder.params().scalar_count() + (head.learnable() ? head.size() : 0);
  }

  [[nodiscard]] GeneratorParams clone() const {
    return {layout, amp, head.clone(), decoder.clone()};
  }
};

/// Codes for the layout: solved amplitude for N >= 2, zero code for a single
/// path, plain one-hot when `raw`.
[[nodiscard]] inline AmplificationParams amplification_for(const NoiseLayout& layout, double delta,
                                                           bool raw) {
  if (raw) return AmplificationParams::unamplified(layout.N, layout.L);
  if (layout.N == 1) {
    if (!(delta > 0.0)) throw ConfigError("delta must be > 0");
    return AmplificationParams::single_path(layout.L, delta);
  }
  return amplification(layout.N, layout.L, delta);
}

/// Decoder (L+N) -> hidden -> hidden -> 2 with fresh weights from `rng`.
[[nodiscard]] inline GeneratorParams make_generator(const NoiseLayout& layout,
                                                    const AmplificationParams& amp,
                                                    bool learnable_head, std::size_t hidden,
                                                    std::mt19937_64& rng) {
  if (amp.N != layout.N || amp.L != layout.L) {
    throw ConfigError("amplification parameters do not match the noise layout");
  }
  return {layout, amp, CategoricalHead(layout.N, learnable_head),
          Mlp({layout.L + layout.N, hidden, hidden, kSampleDim}, ad::kDefaultLeakySlope, rng)};
}

/// Rows of standard-normal noise, rows x cols, row-major. Box-Muller over
/// whole arrays: the first half of the output takes the cosine branch, the
/// rest the sine branch of the same uniform pairs.
[[nodiscard]] inline std::vector<double> draw_normal(std::size_t rows, std::size_t cols,
                                                     std::mt19937_64& rng) {
  const std::size_t n = rows * cols;
  const std::size_t half = (n + 1) / 2;
  Eigen::ArrayXd u1(static_cast<Eigen::Index>(half));
  Eigen::ArrayXd u2(static_cast<Eigen::Index>(half));
  // Uniforms in (0, 1) with 53 random bits.
  auto uniform = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  for (Eigen::Index i = 0; i < u1.size(); ++i) {
    u1[i] = uniform();
    u2[i] = uniform();
  }
  const Eigen::ArrayXd r = (-2.0 * u1.log()).sqrt();
  const Eigen::ArrayXd theta = (2.0 * std::numbers::pi) * u2;
  std::vector<double> out(n);
  Eigen::Map<Eigen::ArrayXd>(out.data(), static_cast<Eigen::Index>(half)) = r * theta.cos();
  Eigen::Map<Eigen::ArrayXd>(out.data() + half, static_cast<Eigen::Index>(n - half)) =
      (r * theta.sin()).head(static_cast<Eigen::Index>(n - half));
  return out;
}

/// Decoder input rows [z'_i; c_{path_i}] as a constant.
/// `z_continuous` is rows x L row-major.
[[nodiscard]] inline ad::DiffValue transformer_batch(std::span<const double> z_continuous,
                                                     std::span<const std::size_t> paths,
                                                     const GeneratorParams& g) {
  const std::size_t L = g.layout.L;
  const std::size_t N = g.layout.N;
  const std::size_t rows = paths.size();
  if (z_continuous.size() != rows * L) {
    throw ShapeError("transformer_batch: continuous noise has " +
                     std::to_string(z_continuous.size()) + " values for " +
                     std::to_string(rows) + " rows of length " + std::to_string(L));
  }
  std::vector<std::vector<double>> codes;
  for (std::size_t j = 0; j < N; ++j) codes.push_back(g.amp.code(j));
  std::vector<double> data(rows * (L + N));
  for (std::size_t r = 0; r < rows; ++r) {
    if (paths[r] >= N) throw ConfigError("path index out of range");
    double* row = data.data() + r * (L + N);
    std::copy_n(z_continuous.data() + r * L, L, row);
    std::copy(codes[paths[r]].begin(), codes[paths[r]].end(), row + L);
  }
  return ad::DiffValue::constant({rows, L + N}, std::move(data));
}

struct GeneratedBatch {
  ad::DiffValue samples;             // rows x 2, differentiable w.r.t. the decoder
  std::vector<std::size_t> paths;    // ADC choice per row
  std::vector<double> continuous;    // z' rows, rows x L
};

struct RoutedNoise {
  std::vector<double> continuous;  // z' rows, rows x L
  std::vector<std::size_t> paths;  // ADC choice per row
};

/// Splits rows of noise (rows x M, row-major) and runs the ADC on each z''.
[[nodiscard]] inline RoutedNoise route_noise(std::span<const double> z, const GeneratorParams& g) {
  const std::size_t M = g.layout.M;
  const std::size_t L = g.layout.L;
  if (z.size() % M != 0) throw ShapeError("noise is not a whole number of rows");
  const std::size_t rows = z.size() / M;
  const auto log_p = g.head.log_probs();
  RoutedNoise out;
  out.paths.resize(rows);
  out.continuous.resize(rows * L);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = z.subspan(r * M, M);
    std::copy_n(row.begin(), L, out.continuous.begin() + static_cast<std::ptrdiff_t>(r * L));
    out.paths[r] = adc_select_index(row.subspan(L), log_p);
  }
  return out;
}

/// Full generator on rows of noise (rows x M, row-major).
[[nodiscard]] inline GeneratedBatch generate_batch(std::span<const double> z,
                                                   const GeneratorParams& g) {
  RoutedNoise routed = route_noise(z, g);
  GeneratedBatch out;
  out.samples = g.decoder.forward(transformer_batch(routed.continuous, routed.paths, g));
  out.paths = std::move(routed.paths);
  out.continuous = std::move(routed.continuous);
  return out;
}

[[nodiscard]] inline Point2 generate(std::span<const double> z, const GeneratorParams& g) {
  const NoiseSlices s = split_noise(z, g.layout);
  const VirtualLabel label = adc_select(s.discrete, g.head);
  const std::vector<double> input = noise_transformer(s.continuous, label.k, g.amp);
  const auto x = g.decoder.forward(ad::DiffValue::constant({1, input.size()}, input));
  return {x.at(0, 0), x.at(0, 1)};
}

/// The ADC is bypassed: renders [z'; c_k] for the chosen path k (0-based).
[[nodiscard]] inline Point2 conditional_sample(std::size_t k, std::span<const double> z_continuous,
                                               const GeneratorParams& g) {
  if (k >= g.layout.N) {
    throw ConfigError("path " + std::to_string(k) + " out of range for N = " +
                      std::to_string(g.layout.N));
  }
  if (z_continuous.size() != g.layout.L) {
    throw ShapeError("continuous noise has length " + std::to_string(z_continuous.size()) +
                     ", layout expects " + std::to_string(g.layout.L));
  }
  const std::vector<double> input = noise_transformer(z_continuous, k, g.amp);
  const auto x = g.decoder.forward(ad::DiffValue::constant({1, input.size()}, input));
  return {x.at(0, 0), x.at(0, 1)};
}

/// `count` conditional samples of path k from fresh z' drawn from `rng`.
[[nodiscard]] inline std::vector<Point2> conditional_batch(std::size_t k, std::size_t count,
                                                           const GeneratorParams& g,
                                                           std::mt19937_64& rng) {
  if (k >= g.layout.N) {
    throw ConfigError("path " + std::to_string(k) + " out of range for N = " +
                      std::to_string(g.layout.N));
  }
  const std::vector<double> zc = draw_normal(count, g.layout.L, rng);
  const std::vector<std::size_t> paths(count, k);
  const auto x = g.decoder.forward(transformer_batch(zc, paths, g));
  std::vector<Point2> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = {x.at(i, 0), x.at(i, 1)};
  return out;
}

/// `count` unconditional samples; also reports the path of each.
[[nodiscard]] inline std::pair<std::vector<Point2>, std::vector<std::size_t>> sample_generator(
    std::size_t count, const GeneratorParams& g, std::mt19937_64& rng) {
  const std::vector<double> z = draw_normal(count, g.layout.M, rng);
  const GeneratedBatch b = generate_batch(z, g);
  std::vector<Point2> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = {b.samples.at(i, 0), b.samples.at(i, 1)};
  return {std::move(out), b.paths};
}

}  // namespace vcgan
