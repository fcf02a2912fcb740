#pragma once

// Analog-to-digital converter: turns a Gaussian noise slice into a discrete
// virtual label with the Gumbel-Max trick. Each z_i is mapped to Uniform(0,1)
// through the normal CDF (inverse transform sampling), then to a standard
// Gumbel variate, and shifted by log p_i.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "vcgan/diff_engine.hpp"
#include "vcgan/errors.hpp"

namespace vcgan {

inline constexpr double kCdfFloor = 1e-300;
inline constexpr double kCdfCeil = 1.0 - 1e-16;
inline constexpr double kLogProbFloor = -1e30;

/// Standard normal CDF, clamped to [1e-300, 1 - 1e-16].
[[nodiscard]] inline double normal_cdf(double x) {
  const double p = 0.5 * std::erfc(-x / std::numbers::sqrt2);
  return std::clamp(p, kCdfFloor, kCdfCeil);
}

/// -log(-log(Phi(z))). Standard Gumbel distributed when z ~ N(0, 1).
[[nodiscard]] inline double gumbel_from_gaussian(double z) {
  // -log(Phi(z)) is computed through the upper tail for z > 0 so that the map
  // stays strictly increasing well past the point where Phi(z) rounds to 1.
  double neg_log_u = 0.0;
  if (z > 0.0) {
    const double upper = 0.5 * std::erfc(z / std::numbers::sqrt2);
    neg_log_u = -std::log1p(-upper);
  } else {
    neg_log_u = -std::log(normal_cdf(z));
  }
  neg_log_u = std::max(neg_log_u, 1e-16);
  return -std::log(neg_log_u);
}

/// Virtual label: index k (0-based) and its one-hot vector.
struct VirtualLabel {
  std::size_t k{0};
  std::vector<double> one_hot;

  static VirtualLabel of(std::size_t k, std::size_t n) {
    if (k >= n) throw ConfigError("label " + std::to_string(k) + " out of range for " +
                                  std::to_string(n) + " categories");
    VirtualLabel v{k, std::vector<double>(n, 0.0)};
    v.one_hot[k] = 1.0;
    return v;
  }
};

/// Categorical distribution of the ADC, p = softmax(q). q starts at zero (uniform).
class CategoricalHead {
 public:
  CategoricalHead() : CategoricalHead(1, false) {}

  CategoricalHead(std::size_t n, bool learnable) : n_(n), learnable_(learnable) {
    if (n == 0) throw ConfigError("CategoricalHead needs at least one category");
    params_.add("q", {1, n}, std::vector<double>(n, 0.0));
  }

  CategoricalHead(std::vector<double> logits, bool learnable)
      : CategoricalHead(logits.size(), learnable) {
    std::copy(logits.begin(), logits.end(), params_.get("q").mutable_data().begin());
  }

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] bool learnable() const noexcept { return learnable_; }

  [[nodiscard]] const ad::DiffValue& logits() const { return params_.get("q"); }
  [[nodiscard]] ad::DiffValue& logits() { return params_.get("q"); }
  [[nodiscard]] ad::ParamSet& params() noexcept { return params_; }
  [[nodiscard]] const ad::ParamSet& params() const noexcept { return params_; }

  /// Differentiable p = softmax(q).
  [[nodiscard]] ad::DiffValue probs_value() const { return ad::softmax(logits()); }

  [[nodiscard]] std::vector<double> probs() const {
    const ad::DiffValue p = probs_value();
    return {p.data().begin(), p.data().end()};
  }

  [[nodiscard]] std::vector<double> log_probs() const {
    std::vector<double> lp = probs();
    for (double& v : lp) v = v > 0.0 ? std::log(v) : kLogProbFloor;
    return lp;
  }

  [[nodiscard]] CategoricalHead clone() const {
    const auto q = logits().data();
    return CategoricalHead(std::vector<double>(q.begin(), q.end()), learnable_);
  }

 private:
  std::size_t n_{1};
  bool learnable_{false};
  ad::ParamSet params_;
};

/// argmax_i [log p_i + gumbel(z_i)]; ties go to the lowest index.
[[nodiscard]] inline std::size_t adc_select_index(std::span<const double> z_discrete,
                                                  std::span<const double> log_p) {
  if (z_discrete.size() != log_p.size()) {
    throw ShapeError("adc_select: noise slice has " + std::to_string(z_discrete.size()) +
                     " entries for " + std::to_string(log_p.size()) + " categories");
  }
  if (z_discrete.empty()) throw ShapeError("adc_select: empty noise slice");
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < z_discrete.size(); ++i) {
    const double score = std::max(log_p[i], kLogProbFloor) + gumbel_from_gaussian(z_discrete[i]);
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

[[nodiscard]] inline VirtualLabel adc_select(std::span<const double> z_discrete,
                                             const CategoricalHead& head) {
  const auto lp = head.log_probs();
  return VirtualLabel::of(adc_select_index(z_discrete, lp), head.size());
}

[[nodiscard]] inline std::vector<double> probs(const CategoricalHead& head) { return head.probs(); }

}  // namespace vcgan
