#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "vcgan/diff_engine.hpp"
#include "vcgan/errors.hpp"

namespace vcgan {

/// Fully connected network: leaky-rectifier hidden layers, linear output.
/// Parameters are named "l<i>.weight" (in x out) and "l<i>.bias" (1 x out).
class Mlp {
 public:
  Mlp() = default;

  Mlp(std::vector<std::size_t> widths, double slope, std::mt19937_64& rng)
      : widths_(std::move(widths)), slope_(slope) {
    if (widths_.size() < 2) throw ConfigError("Mlp needs at least input and output widths");
    for (std::size_t w : widths_) {
      if (w == 0) throw ConfigError("Mlp layer width must be positive");
    }
    for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
      const std::size_t in = widths_[i];
      const std::size_t out = widths_[i + 1];
      // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      std::uniform_real_distribution<double> init(-bound, bound);
      std::vector<double> w(in * out);
      for (double& x : w) x = init(rng);
      std::vector<double> b(out);
      for (double& x : b) x = init(rng);
      params_.add(weight_name(i), {in, out}, std::move(w));
      params_.add(bias_name(i), {1, out}, std::move(b));
    }
  }

  /// Rebuilds from stored parameters (model loading).
  Mlp(std::vector<std::size_t> widths, double slope, ad::ParamSet params)
      : widths_(std::move(widths)), slope_(slope), params_(std::move(params)) {
    for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
      const ad::Shape ws{widths_[i], widths_[i + 1]};
      const ad::Shape bs{1, widths_[i + 1]};
      if (!params_.contains(weight_name(i)) || params_.get(weight_name(i)).shape() != ws ||
          !params_.contains(bias_name(i)) || params_.get(bias_name(i)).shape() != bs) {
        throw ConfigError("Mlp: parameters do not match layer " + std::to_string(i));
      }
    }
  }

  [[nodiscard]] ad::DiffValue forward(const ad::DiffValue& x) const {
    if (x.cols() != widths_.front()) {
      throw ShapeError("Mlp input has " + std::to_string(x.cols()) + " features, expected " +
                       std::to_string(widths_.front()));
    }
    ad::DiffValue h = x;
    const std::size_t layers = widths_.size() - 1;
    for (std::size_t i = 0; i < layers; ++i) {
      h = ad::linear(h, params_.get(weight_name(i)), params_.get(bias_name(i)));
      if (i + 1 < layers) h = ad::leaky_relu(h, slope_);
    }
    return h;
  }

  [[nodiscard]] const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  [[nodiscard]] double slope() const noexcept { return slope_; }
  [[nodiscard]] ad::ParamSet& params() noexcept { return params_; }
  [[nodiscard]] const ad::ParamSet& params() const noexcept { return params_; }

  [[nodiscard]] Mlp clone() const { return Mlp(widths_, slope_, params_.clone()); }

  static std::string weight_name(std::size_t i) { return "l" + std::to_string(i) + ".weight"; }
  static std::string bias_name(std::size_t i) { return "l" + std::to_string(i) + ".bias"; }

 private:
  std::vector<std::size_t> widths_;
  double slope_{ad::kDefaultLeakySlope};
  ad::ParamSet params_;
};

}  // namespace vcgan
