#pragma once

// Adversarial training of the multi-path generator.
//
// Each iteration runs n_critic critic updates on fresh real/fake batches, then
// one generator update on the per-path reweighted loss
//
//   loss_G = sum_j p_j * (1/B_j) * sum_{i in class j} phi(D(R([z'_i; c_j])))
//
// with p = softmax(q) and phi(d) = -d (Wasserstein) or softplus(-d)
// (non-saturating). The ADC argmax carries no gradient, so q only learns
// through the p_j factors. q starts to move after `q_warmup` generator updates.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vcgan/diff_engine.hpp"
#include "vcgan/errors.hpp"
#include "vcgan/generator.hpp"
#include "vcgan/mlp.hpp"
#include "vcgan/synth_data.hpp"

namespace vcgan {

enum class LossKind { kWassersteinClipped, kNonSaturating };

[[nodiscard]] inline std::string to_string(LossKind k) {
  return k == LossKind::kWassersteinClipped ? "wasserstein-clipped" : "non-saturating";
}

[[nodiscard]] inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "wasserstein-clipped") return LossKind::kWassersteinClipped;
  if (s == "non-saturating") return LossKind::kNonSaturating;
  throw ConfigError("loss: unknown kind '" + s + "'");
}

enum class LrSchedule { kConstant, kLinear };

[[nodiscard]] inline std::string to_string(LrSchedule k) {
  return k == LrSchedule::kConstant ? "constant" : "linear";
}

[[nodiscard]] inline LrSchedule lr_schedule_from_string(const std::string& s) {
  if (s == "constant") return LrSchedule::kConstant;
  if (s == "linear") return LrSchedule::kLinear;
  throw ConfigError("unknown lr schedule '" + s + "' (expected constant | linear)");
}

struct TrainConfig {
  std::size_t batch_size{256};
  std::size_t n_critic{5};
  std::size_t iterations{15000};
  double lr_critic{1e-4};
  double lr_generator{1e-4};
  double lr_logits{1e-3};
  double beta1{0.5};
  double beta2{0.9};
  double clip{0.05};
  /// Generator updates before the logits start training.
  std::size_t q_warmup{2000};
  std::uint64_t seed{0};
  LossKind loss{LossKind::kWassersteinClipped};
  /// kLinear scales every learning rate by 1 - t / iterations at generator step t.
  LrSchedule lr_decay{LrSchedule::kConstant};
  std::size_t hidden{64};
  /// Record a trace row every this many iterations.
  std::size_t trace_every{10};

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (n_critic < 1) throw ConfigError("n_critic must be >= 1");
    if (loss == LossKind::kWassersteinClipped && !(clip > 0.0)) {
      throw ConfigError("clip must be > 0 for wasserstein-clipped loss");
    }
    if (!(lr_critic > 0.0) || !(lr_generator > 0.0) || !(lr_logits > 0.0)) {
      throw ConfigError("learning rates must be > 0");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw ConfigError("beta1 and beta2 must lie in [0, 1)");
    }
    if (hidden < 1) throw ConfigError("hidden must be >= 1");
    if (trace_every < 1) throw ConfigError("trace_every must be >= 1");
  }
};

/// Row indices of a batch grouped by ADC label.
struct BatchPartition {
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::size_t> counts;

  [[nodiscard]] std::size_t total() const {
    std::size_t t = 0;
    for (std::size_t c : counts) t += c;
    return t;
  }
};

/// `labels` are 0-based path indices.
[[nodiscard]] inline BatchPartition partition_batch(std::span<const std::size_t> labels,
                                                    std::size_t n) {
  BatchPartition p;
  p.members.resize(n);
  p.counts.assign(n, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n) {
      throw ConfigError("label " + std::to_string(labels[i]) + " out of range for N = " +
                        std::to_string(n));
    }
    p.members[labels[i]].push_back(i);
    ++p.counts[labels[i]];
  }
  return p;
}

[[nodiscard]] inline ad::DiffValue points_value(std::span<const Point2> pts) {
  std::vector<double> data;
  data.reserve(pts.size() * 2);
  for (const auto& p : pts) {
    data.push_back(p[0]);
    data.push_back(p[1]);
  }
  return ad::DiffValue::constant({pts.size(), 2}, std::move(data));
}

namespace detail {
inline void require_finite(const ad::DiffValue& v, const char* what) {
  for (double x : v.data()) {
    if (!std::isfinite(x)) throw NumericalError(std::string("non-finite value in ") + what);
  }
}
}  // namespace detail

/// Wasserstein: mean D(fake) - mean D(real). Non-saturating: binary
/// cross-entropy on critic logits, real labelled 1.
[[nodiscard]] inline ad::DiffValue critic_loss(const ad::DiffValue& real, const ad::DiffValue& fake,
                                               const Mlp& critic, LossKind kind) {
  if (real.rows() == 0 || fake.rows() == 0) throw ConfigError("critic_loss: empty batch");
  const ad::DiffValue d_real = critic.forward(real);
  const ad::DiffValue d_fake = critic.forward(fake);
  ad::DiffValue loss;
  if (kind == LossKind::kWassersteinClipped) {
    loss = ad::mean(d_fake) - ad::mean(d_real);
  } else {
    loss = ad::mean(ad::softplus(d_fake)) + ad::mean(ad::softplus(-d_real));
  }
  detail::require_finite(loss, "critic loss");
  return loss;
}

struct GeneratorLossOptions {
  /// Treat p as a constant (no gradient reaches q).
  bool detach_weights{false};
};

/// Per-path softmax-weighted generator loss. Paths with B_j = 0 are skipped.
/// `z_continuous` is batch x L; the partition must come from the same batch.
[[nodiscard]] inline ad::DiffValue generator_loss(std::span<const double> z_continuous,
                                                  const BatchPartition& partition,
                                                  const GeneratorParams& g, const Mlp& critic,
                                                  LossKind kind,
                                                  GeneratorLossOptions options = {}) {
  const std::size_t rows = partition.total();
  std::vector<std::size_t> paths(rows);
  for (std::size_t j = 0; j < partition.members.size(); ++j) {
    for (std::size_t i : partition.members[j]) {
      if (i >= rows) throw ConfigError("generator_loss: partition is not a batch partition");
      paths[i] = j;
    }
  }
  const ad::DiffValue x = g.decoder.forward(transformer_batch(z_continuous, paths, g));
  const ad::DiffValue d = critic.forward(x);
  const ad::DiffValue per_sample =
      kind == LossKind::kWassersteinClipped ? -d : ad::softplus(-d);

  std::vector<ad::DiffValue> class_means;
  std::vector<std::size_t> used;
  for (std::size_t j = 0; j < partition.members.size(); ++j) {
    if (partition.counts[j] == 0) continue;
    class_means.push_back(ad::mean(ad::select_rows(per_sample, partition.members[j])));
    used.push_back(j);
  }
  ad::DiffValue p = g.head.probs_value();
  if (options.detach_weights) p = ad::detach(p);
  const ad::DiffValue loss =
      ad::sum(ad::select_elements(p, std::move(used)) * ad::concat_cols(class_means));
  detail::require_finite(loss, "generator loss");
  return loss;
}

/// Generator, critic and everything an uninterrupted run needs to continue.
struct TrainState {
  GeneratorParams generator;
  Mlp critic;
  ad::Adam critic_opt;
  ad::Adam decoder_opt;
  ad::Adam logits_opt;
  std::mt19937_64 rng;
  std::size_t generator_steps{0};
};

[[nodiscard]] inline TrainState init_state(const TrainConfig& config, const NoiseLayout& layout,
                                           const AmplificationParams& amp, bool learnable_head) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  GeneratorParams gen = make_generator(layout, amp, learnable_head, config.hidden, rng);
  Mlp critic({kSampleDim, config.hidden, config.hidden, 1}, ad::kDefaultLeakySlope, rng);
  return TrainState{std::move(gen),
                    std::move(critic),
                    ad::Adam({config.lr_critic, config.beta1, config.beta2, 1e-8}),
                    ad::Adam({config.lr_generator, config.beta1, config.beta2, 1e-8}),
                    ad::Adam({config.lr_logits, config.beta1, config.beta2, 1e-8}),
                    std::move(rng),
                    0};
}

struct StepDiagnostics {
  double critic_loss{0.0};
  double generator_loss{0.0};
  std::vector<double> probs;
};

inline void clip_parameters(ad::ParamSet& params, double bound) {
  for (auto& [name, leaf] : params) {
    for (double& w : leaf.mutable_data()) w = std::clamp(w, -bound, bound);
  }
}

/// One iteration. Non-finite values raise NumericalError naming the iteration.
inline StepDiagnostics train_step(TrainState& s, const TrainConfig& config,
                                  const MixtureSpec& data) {
  const std::size_t B = config.batch_size;
  const std::size_t M = s.generator.layout.M;
  StepDiagnostics diag;
  if (config.lr_decay == LrSchedule::kLinear) {
    const double f = 1.0 - std::min(1.0, static_cast<double>(s.generator_steps) /
                                             static_cast<double>(std::max<std::size_t>(config.iterations, 1)));
    s.critic_opt.set_learning_rate(config.lr_critic * f);
    s.decoder_opt.set_learning_rate(config.lr_generator * f);
    s.logits_opt.set_learning_rate(config.lr_logits * f);
  }
  try {
    for (std::size_t c = 0; c < config.n_critic; ++c) {
      const LabeledBatch real = sample_batch(data, B, s.rng);
      const std::vector<double> z = draw_normal(B, M, s.rng);
      const ad::DiffValue fake = ad::detach(generate_batch(z, s.generator).samples);
      s.critic.params().zero_grad();
      const ad::DiffValue loss = critic_loss(points_value(real.points), fake, s.critic, config.loss);
      ad::backward(loss);
      s.critic_opt.step(s.critic.params());
      if (config.loss == LossKind::kWassersteinClipped) clip_parameters(s.critic.params(), config.clip);
      diag.critic_loss = loss.item();
    }

    const std::vector<double> z = draw_normal(B, M, s.rng);
    const RoutedNoise routed = route_noise(z, s.generator);
    const BatchPartition partition = partition_batch(routed.paths, s.generator.layout.N);
    s.generator.decoder.params().zero_grad();
    s.generator.head.params().zero_grad();
    const ad::DiffValue loss =
        generator_loss(routed.continuous, partition, s.generator, s.critic, config.loss);
    ad::backward(loss);
    s.decoder_opt.step(s.generator.decoder.params());
    if (s.generator.head.learnable() && s.generator_steps >= config.q_warmup) {
      s.logits_opt.step(s.generator.head.params());
    }
    ++s.generator_steps;
    diag.generator_loss = loss.item();
  } catch (const NumericalError& e) {
    throw NumericalError("iteration " + std::to_string(s.generator_steps) + ": " + e.what());
  }
  diag.probs = s.generator.head.probs();
  return diag;
}

struct TraceRow {
  std::size_t iteration{0};
  double critic_loss{0.0};
  double generator_loss{0.0};
  std::vector<double> probs;
};

struct TrainResult {
  TrainState state;
  std::vector<TraceRow> trace;
};

/// Called after iteration `i` (1-based count of completed iterations).
using SnapshotFn = std::function<void(std::size_t, const TrainState&)>;

[[nodiscard]] inline TrainResult train_loop(const TrainConfig& config, const MixtureSpec& data,
                                            const NoiseLayout& layout,
                                            const AmplificationParams& amp, bool learnable_head,
                                            const SnapshotFn& on_snapshot = {},
                                            std::size_t snapshot_every = 0) {
  data.validate();
  TrainResult result{init_state(config, layout, amp, learnable_head), {}};
  for (std::size_t it = 0; it < config.iterations; ++it) {
    StepDiagnostics d = train_step(result.state, config, data);
    const std::size_t done = it + 1;
    if (done % config.trace_every == 0) {
      result.trace.push_back({done, d.critic_loss, d.generator_loss, std::move(d.probs)});
    }
    if (on_snapshot && snapshot_every > 0 && done % snapshot_every == 0) {
      on_snapshot(done, result.state);
    }
  }
  return result;
}

}  // namespace vcgan
