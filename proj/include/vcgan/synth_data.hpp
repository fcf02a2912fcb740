#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "vcgan/errors.hpp"

namespace vcgan {

using Point2 = std::array<double, 2>;

/// Isotropic 2-D Gaussian mixture.
struct MixtureSpec {
  std::string name;
  std::vector<Point2> centers;
  std::vector<double> weights;
  double sigma{0.05};

  [[nodiscard]] std::size_t size() const noexcept { return centers.size(); }

  void validate() const {
    if (centers.empty() || centers.size() != weights.size()) {
      throw ConfigError("mixture needs matching non-empty centers and weights");
    }
    double total = 0.0;
    for (double w : weights) {
      if (!(w > 0.0)) throw ConfigError("mixture weights must be positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("mixture weights must sum to 1");
    if (!(sigma > 0.0)) throw ConfigError("mixture sigma must be positive");
    for (std::size_t i = 0; i < centers.size(); ++i) {
      for (std::size_t j = i + 1; j < centers.size(); ++j) {
        if (centers[i] == centers[j]) throw ConfigError("mixture centers must be distinct");
      }
    }
  }
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"ring8", "grid25", "imbalanced2-73",
                                              "imbalanced2-82"};
  return names;
}

[[nodiscard]] inline MixtureSpec preset(const std::string& name) {
  MixtureSpec spec;
  spec.name = name;
  if (name == "ring8") {
    for (int j = 0; j < 8; ++j) {
      const double a = 2.0 * std::numbers::pi * j / 8.0;
      spec.centers.push_back({2.0 * std::cos(a), 2.0 * std::sin(a)});
    }
    spec.weights.assign(8, 1.0 / 8.0);
    spec.sigma = 0.02;
  } else if (name == "grid25") {
    for (int i = -2; i <= 2; ++i) {
      for (int j = -2; j <= 2; ++j) spec.centers.push_back({double(i), double(j)});
    }
    spec.weights.assign(25, 1.0 / 25.0);
    spec.sigma = 0.05;
  } else if (name == "imbalanced2-73" || name == "imbalanced2-82") {
    spec.centers = {Point2{2.0, 0.0}, Point2{-2.0, 0.0}};
    spec.weights = name == "imbalanced2-73" ? std::vector<double>{0.7, 0.3}
                                            : std::vector<double>{0.8, 0.2};
    spec.sigma = 0.05;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  spec.validate();
  return spec;
}

/// Points plus the 0-based component of each; labels are ground truth for
/// evaluation only.
struct LabeledBatch {
  std::vector<Point2> points;
  std::vector<std::size_t> labels;
};

/// Draws from an existing stream; the trainer uses this form.
[[nodiscard]] inline LabeledBatch sample_batch(const MixtureSpec& spec, std::size_t count,
                                                std::mt19937_64& rng) {
  if (count < 1) throw ConfigError("sample count must be >= 1");
  std::discrete_distribution<std::size_t> component(spec.weights.begin(), spec.weights.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledBatch out;
  out.points.reserve(count);
  out.labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = component(rng);
    const Point2& c = spec.centers[k];
    const double x = c[0] + spec.sigma * normal(rng);
    const double y = c[1] + spec.sigma * normal(rng);
    out.points.push_back({x, y});
    out.labels.push_back(k);
  }
  return out;
}

[[nodiscard]] inline LabeledBatch sample_batch(const MixtureSpec& spec, std::size_t count,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_batch(spec, count, rng);
}

}  // namespace vcgan
