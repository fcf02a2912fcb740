#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "vcgan/metrics.hpp"

using namespace vcgan;

namespace {

GeneratorParams tiny_generator(std::size_t N, std::uint64_t seed) {
  const NoiseLayout layout = NoiseLayout::from_total(N + 4, N);
  std::mt19937_64 rng(seed);
  return make_generator(layout, amplification_for(layout, 2.0, false), false, 8, rng);
}

}  // namespace

TEST(AssignModes, CenterFarAndTies) {
  const MixtureSpec ring = preset("ring8");
  const std::vector<Point2> at{ring.centers[3], {0.0, 0.0}, {2.0 + 10.0 * 0.02, 0.0}};
  EXPECT_EQ(assign_modes(at, ring), (std::vector<std::size_t>{3, kJunk, kJunk}));

  MixtureSpec pair = preset("imbalanced2-73");
  pair.sigma = 2.0;
  // Origin is equidistant from (2, 0) and (-2, 0).
  EXPECT_EQ(assign_modes(std::vector<Point2>{{0.0, 0.0}}, pair), std::vector<std::size_t>{0});
  EXPECT_THROW((void)assign_modes(at, ring, 0.0), ConfigError);
}

TEST(AssignModes, RadiusIsInclusiveMultipleOfSigma) {
  const MixtureSpec ring = preset("ring8");
  const std::vector<Point2> pts{{2.0 + 0.059, 0.0}, {2.0 + 0.061, 0.0}};
  EXPECT_EQ(assign_modes(pts, ring), (std::vector<std::size_t>{0, kJunk}));
  EXPECT_EQ(assign_modes(pts, ring, 4.0), (std::vector<std::size_t>{0, 0}));
}

TEST(Coverage, SamplerOutputIsFullyCovered) {
  // A 2D isotropic Gaussian puts 1 - exp(-r^2 / 2) of its mass within r sigma.
  const double inside = 1.0 - std::exp(-4.5);
  const double se = std::sqrt(inside * (1.0 - inside) / 10000.0);
  std::uint64_t seed = 100;
  for (const auto& name : preset_names()) {
    const MixtureSpec s = preset(name);
    const LabeledBatch b = sample_batch(s, 10000, seed++);
    const Coverage c = coverage_and_quality(b.points, s);
    EXPECT_EQ(c.modes_covered, s.size()) << name;
    EXPECT_NEAR(c.high_quality_fraction, inside, 4.0 * se) << name;
    MetricOptions wide;
    wide.radius_multiplier = 3.5;
    EXPECT_GE(coverage_and_quality(b.points, s, wide).high_quality_fraction, 0.99) << name;
  }
}

TEST(Coverage, DegenerateClouds) {
  const MixtureSpec ring = preset("ring8");
  const std::vector<Point2> origin(1000, Point2{0.0, 0.0});
  const Coverage none = coverage_and_quality(origin, ring);
  EXPECT_EQ(none.modes_covered, 0u);
  EXPECT_EQ(none.high_quality_fraction, 0.0);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.01);
  std::vector<Point2> one(1000);
  for (auto& p : one) p = {ring.centers[1][0] + n(rng), ring.centers[1][1] + n(rng)};
  const Coverage c = coverage_and_quality(one, ring);
  EXPECT_EQ(c.modes_covered, 1u);
  EXPECT_GT(c.per_mode[1], 900u);
}

TEST(Coverage, ThresholdAndMinimumSamples) {
  const MixtureSpec ring = preset("ring8");
  std::vector<Point2> pts(1000, Point2{0.0, 0.0});
  for (int i = 0; i < 19; ++i) pts[i] = ring.centers[0];
  for (int i = 19; i < 39; ++i) pts[i] = ring.centers[5];
  const Coverage c = coverage_and_quality(pts, ring);
  EXPECT_EQ(c.modes_covered, 1u);
  EXPECT_DOUBLE_EQ(c.high_quality_fraction, 39.0 / 1000.0);
  MetricOptions loose;
  loose.coverage_threshold = 19;
  EXPECT_EQ(coverage_and_quality(pts, ring, loose).modes_covered, 2u);
  EXPECT_THROW((void)coverage_and_quality(std::span<const Point2>(pts.data(), 999), ring),
               ConfigError);
}

TEST(Purity, SingleModeHalfSplitAndJunk) {
  EXPECT_EQ(purity_of(std::vector<std::size_t>{0, 0, 0, 250, 0}), 1.0);
  EXPECT_EQ(purity_of(std::vector<std::size_t>{100, 100, 0}), 0.5);
  EXPECT_EQ(purity_of(std::vector<std::size_t>{0, 0, 0}), 0.0);
  const PurityReport r =
      purity_from_histogram({{0, 300}, {150, 150}, {0, 0}}, std::vector<double>{0.5, 0.3, 0.2});
  EXPECT_EQ(r.per_path, (std::vector<double>{1.0, 0.5, 0.0}));
  EXPECT_DOUBLE_EQ(r.mean, 0.5 * 1.0 + 0.3 * 0.5);
  EXPECT_THROW((void)purity_from_histogram({{1, 2}}, std::vector<double>{0.5, 0.5}), ShapeError);
}

TEST(Purity, InvariantUnderPathRelabeling) {
  const std::vector<std::vector<std::size_t>> hist{{10, 90, 0}, {40, 40, 20}, {0, 5, 200}};
  const std::vector<double> w{0.2, 0.5, 0.3};
  const PurityReport a = purity_from_histogram(hist, w);
  const PurityReport b =
      purity_from_histogram({hist[2], hist[0], hist[1]}, std::vector<double>{w[2], w[0], w[1]});
  EXPECT_DOUBLE_EQ(a.mean, b.mean);
  EXPECT_EQ(a.per_path[0], b.per_path[1]);
  EXPECT_EQ(a.per_path[2], b.per_path[0]);
}

TEST(Purity, PathPurityDeterministicAndBounded) {
  const GeneratorParams g = tiny_generator(3, 5);
  const MixtureSpec ring = preset("ring8");
  const PurityReport a = path_purity(g, ring, 300, 9, {10.0, 20});
  const PurityReport b = path_purity(g, ring, 300, 9, {10.0, 20});
  EXPECT_EQ(a.per_path, b.per_path);
  EXPECT_EQ(a.histogram, b.histogram);
  ASSERT_EQ(a.histogram.size(), 3u);
  for (double p : a.per_path) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
  EXPECT_THROW((void)path_purity(g, ring, 199, 9), ConfigError);
}

TEST(Recovery, IdentityAndL1Arithmetic) {
  const std::vector<double> w{0.7, 0.3};
  const RecoveryResult exact = p_recovery_error(w, {{500, 3}, {2, 400}}, w);
  EXPECT_NEAR(exact.l1_error, 0.0, 1e-15);
  EXPECT_FALSE(exact.degenerate);
  EXPECT_EQ(exact.path_to_mode, (std::vector<std::size_t>{0, 1}));

  const RecoveryResult off = p_recovery_error(std::vector<double>{1.0, 0.0}, {{500, 3}, {2, 400}}, w);
  EXPECT_NEAR(off.l1_error, 0.6, 1e-15);
}

TEST(Recovery, SwappedPathsAreMatched) {
  const std::vector<double> w{0.7, 0.3};
  const RecoveryResult r =
      p_recovery_error(std::vector<double>{0.3, 0.7}, {{0, 200}, {300, 0}}, w);
  EXPECT_NEAR(r.l1_error, 0.0, 1e-15);
  EXPECT_EQ(r.path_to_mode, (std::vector<std::size_t>{1, 0}));
}

TEST(Recovery, SharedMajorityIsFlagged) {
  const std::vector<double> w{0.7, 0.3};
  const RecoveryResult r =
      p_recovery_error(std::vector<double>{0.5, 0.5}, {{400, 10}, {300, 20}}, w);
  EXPECT_TRUE(r.degenerate);
  // Path 0 majors mode 0; path 1 falls back to mode 1.
  EXPECT_EQ(r.path_to_mode, (std::vector<std::size_t>{0, 1}));
  EXPECT_NEAR(r.l1_error, 0.2 + 0.2, 1e-15);
  EXPECT_THROW((void)p_recovery_error(w, {{1, 2}}, w), ShapeError);
}

TEST(Evaluate, DeterministicReport) {
  const GeneratorParams g = tiny_generator(2, 6);
  const MixtureSpec s = preset("imbalanced2-73");
  EvalOptions opt;
  opt.samples = 2000;
  opt.per_path = 200;
  opt.metric.radius_multiplier = 40.0;
  const EvalReport a = evaluate(g, s, opt);
  const EvalReport b = evaluate(g, s, opt);
  EXPECT_EQ(a.modes_covered, b.modes_covered);
  EXPECT_EQ(a.high_quality_fraction, b.high_quality_fraction);
  EXPECT_EQ(a.histogram, b.histogram);
  EXPECT_EQ(a.p_error_l1, b.p_error_l1);
  EXPECT_LE(a.modes_covered, s.size());
  EXPECT_GE(a.high_quality_fraction, 0.0);
  EXPECT_LE(a.high_quality_fraction, 1.0);
  EXPECT_EQ(a.probs, (std::vector<double>{0.5, 0.5}));
}
