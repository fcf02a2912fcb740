#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "vcgan/onehot_geometry.hpp"

using namespace vcgan;

namespace {

const std::vector<std::size_t> kGridN{2, 10, 64};
const std::vector<std::size_t> kGridL{16, 118, 512};
const std::vector<double> kGridDelta{0.5, 1.0, 2.0, 3.0};

// Root of sqrt(2) sqrt(L + h^2) - delta sqrt(L / (L + h^2)) = intra_max(L, delta),
// found by bisection; the closed-form amplitude should hit it.
double bisect_gap(std::size_t L, double delta) {
  const double l = static_cast<double>(L);
  const double target = std::sqrt(2.0) * (std::sqrt(l) - 1.0 / (4.0 * std::sqrt(l))) +
                        delta * std::sqrt(1.0 - 1.0 / (8.0 * l));
  auto f = [&](double h) {
    const double s = l + h * h;
    return std::sqrt(2.0) * std::sqrt(s) - delta * std::sqrt(l / s) - target;
  };
  double lo = 0.0;
  double hi = 1000.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double quantile(std::vector<double> xs, double q) {
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  return i + 1 < xs.size() ? xs[i] * (1.0 - frac) + xs[i + 1] * frac : xs[i];
}

}  // namespace

TEST(IntraMoments, KnownValues) {
  EXPECT_NEAR(intra_mean(1), 3.0 * std::sqrt(2.0) / 4.0, 1e-15);
  EXPECT_NEAR(intra_mean(1), 1.06066, 1e-5);
  EXPECT_NEAR(intra_mean(118), 15.32974, 1e-5);
  EXPECT_NEAR(intra_mean(16), 5.56847, 1e-5);
  EXPECT_NEAR(intra_std(1), std::sqrt(7.0 / 8.0), 1e-15);
  EXPECT_NEAR(intra_std(118), 0.99947, 1e-5);
  EXPECT_NEAR(intra_max(118, 2.0), 17.32868, 1e-5);
}

TEST(IntraMoments, LimitsAndLinearity) {
  double prev = 0.0;
  for (long long L = 1; L <= 4096; L *= 2) {
    EXPECT_GT(intra_std(L), prev);
    EXPECT_LT(intra_std(L), 1.0);
    prev = intra_std(L);
    EXPECT_EQ(intra_max(L, 0.0), intra_mean(L));
    EXPECT_NEAR(intra_max(L, 2.0) - intra_max(L, 1.0), intra_std(L), 1e-12);
  }
  EXPECT_NEAR(intra_std(100000000), 1.0, 1e-8);
}

TEST(IntraMoments, InvalidArgumentsRejected) {
  EXPECT_THROW((void)intra_mean(0), ConfigError);
  EXPECT_THROW((void)intra_std(0), ConfigError);
  EXPECT_THROW((void)intra_max(16, -0.1), ConfigError);
  EXPECT_THROW((void)inter_mean(16, -1.0), ConfigError);
}

TEST(InterMoments, ReduceToIntraAtZeroGap) {
  for (long long L : {1LL, 16LL, 118LL, 512LL}) {
    EXPECT_NEAR(inter_mean(L, 0.0), intra_mean(L), 1e-12);
    EXPECT_EQ(inter_std(L, 0.0), 1.0);
    EXPECT_NEAR(inter_min(L, 0.0, 0.0), std::sqrt(2.0) * std::sqrt(static_cast<double>(L)), 1e-12);
  }
}

TEST(InterMoments, MonotoneInGapAndDelta) {
  double prev_mean = 0.0;
  double prev_std = 2.0;
  for (double h = 0.0; h < 50.0; h += 0.25) {
    EXPECT_GT(inter_mean(118, h), prev_mean);
    EXPECT_LT(inter_std(118, h), prev_std);
    prev_mean = inter_mean(118, h);
    prev_std = inter_std(118, h);
  }
  EXPECT_LT(inter_std(118, 1e6), 1e-4);
  for (double d = 0.0; d < 5.0; d += 0.5) {
    EXPECT_GT(inter_min(118, 7.8, d), inter_min(118, 7.8, d + 0.5));
  }
}

TEST(InterMoments, DefaultLayoutValues) {
  const double h = 7.845499065416316;
  EXPECT_NEAR(inter_std(118, h), 0.81067, 1e-5);
  EXPECT_NEAR(inter_std(118, h), 0.8100, 1e-3);
  EXPECT_NEAR(inter_mean(118, h), 18.9327, 1e-4);
  EXPECT_NEAR(inter_min(118, h, 2.0), 17.328685, 1e-6);
  EXPECT_NEAR(inter_min(118, h, 2.0), intra_max(118, 2.0), 0.02 * intra_max(118, 2.0));
  EXPECT_NEAR(inter_min_unsimplified(118, h, 2.0),
              inter_mean(118, h) - 2.0 * inter_std(118, h), 1e-12);
}

TEST(ExactChiMean, KnownValues) {
  EXPECT_NEAR(exact_chi_mean(1), std::sqrt(2.0 / std::numbers::pi), 1e-14);
  EXPECT_NEAR(exact_chi_mean(2), std::sqrt(std::numbers::pi / 2.0), 1e-14);
  EXPECT_NEAR(std::sqrt(2.0) * exact_chi_mean(16), 5.569209, 1e-6);
  EXPECT_TRUE(std::isfinite(exact_chi_mean(10000000)));
  EXPECT_THROW((void)exact_chi_mean(0), ConfigError);
}

TEST(ExactChiMean, TaylorExpansionAccuracy) {
  const double rel16 = std::abs(std::sqrt(2.0) * exact_chi_mean(16) - intra_mean(16)) /
                       (std::sqrt(2.0) * exact_chi_mean(16));
  EXPECT_LT(rel16, 1.4e-4);
  for (long long L : {16LL, 17LL, 32LL, 64LL, 118LL, 512LL, 4096LL}) {
    const double exact = std::sqrt(2.0) * exact_chi_mean(L);
    EXPECT_LT(std::abs(exact - intra_mean(L)) / exact, 1e-3) << L;
  }
}

TEST(Amplification, DefaultLayoutValues) {
  const AmplificationParams p = amplification(10, 118, 2.0);
  EXPECT_NEAR(p.h, 7.845499065416316, 1e-12);
  EXPECT_NEAR(p.b, -0.78455, 1e-5);
  EXPECT_NEAR(p.A, 7.060949, 1e-6);
  EXPECT_FALSE(p.raw);
}

TEST(Amplification, IdentitiesHoldExactlyOnGrid) {
  for (std::size_t N : kGridN) {
    for (std::size_t L : kGridL) {
      for (double d : kGridDelta) {
        const AmplificationParams p = amplification(N, L, d);
        EXPECT_EQ(static_cast<double>(N - 1) * p.b + p.A, 0.0) << N << " " << L << " " << d;
        EXPECT_EQ(p.A - p.b, p.h) << N << " " << L << " " << d;
        EXPECT_GT(p.A, 0.0);
        EXPECT_LT(p.b, 0.0);
      }
    }
  }
}

TEST(Amplification, MatchesBisectionOfBalanceEquation) {
  for (std::size_t L : kGridL) {
    for (double d : kGridDelta) {
      EXPECT_NEAR(amplification(10, L, d).h, bisect_gap(L, d), 1e-9) << L << " " << d;
    }
  }
}

TEST(Amplification, ZeroDeltaHasNoRealAmplitude) {
  for (std::size_t L : kGridL) {
    try {
      (void)amplification(10, L, 0.0);
      FAIL() << "expected an error for L = " << L;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find("no real amplitude"), std::string::npos);
    }
  }
  // h^2 = -1/2 + 1/(16 L) at delta = 0.
  try {
    (void)amplification(10, 118, 0.0);
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("-0.4994"), std::string::npos) << e.what();
  }
}

TEST(Amplification, InvalidInputsRejected) {
  EXPECT_THROW((void)amplification(1, 118, 2.0), ConfigError);
  EXPECT_THROW((void)amplification(10, 0, 2.0), ConfigError);
  EXPECT_THROW((void)amplification(10, 118, -1.0), ConfigError);
  EXPECT_THROW((void)amplification(10, 118, std::nan("")), ConfigError);
}

TEST(Amplification, PureAndReproducible) {
  const AmplificationParams a = amplification(7, 33, 1.5);
  const AmplificationParams b = amplification(7, 33, 1.5);
  EXPECT_EQ(a.A, b.A);
  EXPECT_EQ(a.b, b.b);
  EXPECT_EQ(a.h, b.h);
  EXPECT_EQ(a.v, b.v);
}

TEST(Amplification, CodeLayout) {
  const AmplificationParams p = amplification(4, 16, 2.0);
  const auto c = p.code(2);
  EXPECT_EQ(c, (std::vector<double>{p.b, p.b, p.A, p.b}));
  EXPECT_THROW((void)p.code(4), ConfigError);
  const AmplificationParams raw = AmplificationParams::unamplified(3, 16);
  EXPECT_EQ(raw.code(0), (std::vector<double>{1, 0, 0}));
  EXPECT_TRUE(raw.raw);
  const AmplificationParams single = AmplificationParams::single_path(16, 2.0);
  EXPECT_EQ(single.code(0), std::vector<double>{0.0});
}

TEST(Balance, ClosedFormWithinTwoPercentOnGrid) {
  for (std::size_t N : kGridN) {
    for (std::size_t L : kGridL) {
      for (double d : kGridDelta) {
        const auto l = static_cast<long long>(L);
        const double h = amplification(N, L, d).h;
        EXPECT_LE(std::abs(inter_min(l, h, d) - intra_max(l, d)), 0.02 * intra_mean(l));
      }
    }
  }
}

TEST(MonteCarlo, ZeroGapGivesIdenticalLaws) {
  const auto [intra, inter] = monte_carlo_distance_stats(32, 0.0, 20000, 3);
  EXPECT_EQ(intra.mean, inter.mean);
  EXPECT_EQ(intra.std, inter.std);
  EXPECT_GT(intra.mean, 0.0);
  EXPECT_GT(intra.std, 0.0);
}

TEST(MonteCarlo, IntraMeanAtDefaultLength) {
  const auto [intra, inter] = monte_carlo_distance_stats(118, 0.0, 200000, 17);
  EXPECT_NEAR(intra.mean, intra_mean(118), 0.005 * intra_mean(118));
  EXPECT_EQ(intra.kind, DistanceKind::kIntra);
  EXPECT_EQ(inter.kind, DistanceKind::kInter);
}

TEST(MonteCarlo, InterAtSolvedGap) {
  const double h = amplification(10, 118, 2.0).h;
  const auto [intra, inter] = monte_carlo_distance_stats(118, h, 50000, 5);
  EXPECT_NEAR(inter.mean, 19.0, 0.5);
  EXPECT_NEAR(inter.std, inter_std(118, h), 0.02);
  EXPECT_GE(inter.mean, intra.mean);
}

TEST(MonteCarlo, InterNeverBelowIntra) {
  const DistanceSamples d = monte_carlo_distances(16, 0.3, 10000, 9);
  for (std::size_t i = 0; i < d.intra.size(); ++i) ASSERT_GE(d.inter[i], d.intra[i]);
  EXPECT_THROW((void)monte_carlo_distances(16, 0.3, 9999, 9), ConfigError);
}

TEST(MonteCarlo, SeparationQuantilesAtDeltaTwo) {
  for (std::size_t L : kGridL) {
    const double h = amplification(10, L, 2.0).h;
    const DistanceSamples d = monte_carlo_distances(L, h, 50000, 100 + L);
    EXPECT_GE(quantile(d.inter, 0.025), 0.98 * quantile(d.intra, 0.975)) << L;
  }
}
