#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nss3dqa/nss.hpp"

using namespace nss3dqa;

namespace {

template <class Dist>
std::vector<double> draw(Dist dist, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

std::vector<double> laplace(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = e(rng) - e(rng);
  return v;
}

std::vector<double> gaussian(std::size_t n, std::uint64_t seed) {
  return draw(std::normal_distribution<double>(0, 1), n, seed);
}

}  // namespace

TEST(Normalize, Examples) {
  const std::vector<double> x{1, 2, 3};
  const auto n = normalize(x);
  const double s = std::sqrt(2.0 / 3.0) + 1e-6;
  EXPECT_NEAR(n[0], -1 / s, 1e-15);
  EXPECT_EQ(n[1], 0.0);
  EXPECT_NEAR(n[2], 1 / s, 1e-15);
  EXPECT_NEAR(n[2], 1.22474, 1e-5);
  for (double v : normalize(std::vector<double>{5, 5, 5})) EXPECT_EQ(v, 0.0);
}

TEST(Entropy, Examples) {
  EXPECT_EQ(entropy(std::vector<double>(10, 3.0)), 0.0);
  std::vector<double> centers;
  for (int rep = 0; rep < 3; ++rep)
    for (int i = 0; i < 256; ++i) centers.push_back((i + 0.5) / 256.0);
  EXPECT_NEAR(entropy(centers, 256), 8.0, 1e-12);
  EXPECT_NEAR(entropy(std::vector<double>{0, 1, 0, 1, 1, 0}), 1.0, 1e-15);
  EXPECT_THROW(entropy(centers, 1), Error);
}

TEST(Entropy, QuantizationLowersEntropy) {
  auto x = draw(std::uniform_real_distribution<double>(0, 1), 20000, 3);
  auto quantize = [](std::vector<double> v, int q) {
    for (auto& a : v) a = std::min(std::floor(a * q), q - 1.0);
    return v;
  };
  const double raw = entropy(x), h16 = entropy(quantize(x, 16)), h4 = entropy(quantize(x, 4));
  EXPECT_LE(h4, h16);
  EXPECT_LE(h16, raw);
}

TEST(GgdRatio, GridInversion) {
  // Gaussian: r(2) = 2/pi; Laplace: r(1) = 1/2
  EXPECT_NEAR(invert_ggd_ratio(2.0 / std::acos(-1.0)), 2.0, 1e-3);
  EXPECT_NEAR(invert_ggd_ratio(0.5), 1.0, 1e-3);
  EXPECT_EQ(invert_ggd_ratio(0.0), 0.2);
  EXPECT_EQ(invert_ggd_ratio(1.0), 10.0);
}

TEST(FitGgd, RecoversShapes) {
  const auto g = fit_ggd(gaussian(100000, 1));
  EXPECT_NEAR(g.alpha, 2.0, 0.1);
  EXPECT_NEAR(g.variance, 1.0, 0.05);
  EXPECT_NEAR(fit_ggd(laplace(100000, 2)).alpha, 1.0, 0.1);
  EXPECT_GE(fit_ggd(draw(std::uniform_real_distribution<double>(-1, 1), 100000, 3)).alpha, 4.0);
}

TEST(FitGgd, DegenerateInputs) {
  EXPECT_THROW(fit_ggd(std::vector<double>(100, 2.0)), DegenerateDistributionError);
  EXPECT_THROW(fit_ggd(std::vector<double>{1, 2, 3}), DegenerateDistributionError);
}

TEST(FitAggd, GaussianIsSymmetric) {
  const auto a = fit_aggd(gaussian(100000, 4));
  EXPECT_LT(std::abs(a.eta), 0.05);
  EXPECT_GE(a.nu, 1.9);
  EXPECT_LE(a.nu, 2.1);
  EXPECT_GE(a.left_variance / a.right_variance, 0.9);
  EXPECT_LE(a.left_variance / a.right_variance, 1.1);
}

TEST(FitAggd, ReducesToGgdOnSymmetricSamples) {
  for (std::uint64_t seed = 10; seed < 13; ++seed) {
    const auto x = laplace(50000, seed);
    const auto a = fit_aggd(x);
    const auto g = fit_ggd(x);
    EXPECT_LT(std::abs(a.left_variance - a.right_variance) / a.right_variance, 0.1);
    EXPECT_NEAR(a.nu, g.alpha, 0.1);
  }
}

TEST(FitAggd, MirrorSymmetry) {
  auto x = draw(std::gamma_distribution<double>(2.0, 1.0), 5000, 5);
  for (auto& v : x) v -= 1.7;
  std::vector<double> m(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) m[i] = -x[i];
  const auto a = fit_aggd(x), b = fit_aggd(m);
  EXPECT_NEAR(a.eta, -b.eta, 1e-12);
  EXPECT_EQ(a.nu, b.nu);
  EXPECT_NEAR(a.left_variance, b.right_variance, 1e-12);
  EXPECT_NEAR(a.right_variance, b.left_variance, 1e-12);
}

TEST(FitAggd, RightSkew) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0, 1);
  std::vector<double> x(100000);
  for (auto& v : x) v = std::abs(g(rng)) - 0.3 * std::abs(g(rng));
  const auto a = fit_aggd(x);
  EXPECT_GT(a.right_variance, a.left_variance);
  EXPECT_GT(a.eta, 0.0);
}

TEST(FitAggd, OneSidedIsFlagged) {
  const auto x = draw(std::exponential_distribution<double>(1.0), 1000, 7);
  const auto fit = fit_aggd_detailed(x);
  EXPECT_TRUE(fit.one_sided);
  EXPECT_EQ(fit.params.left_variance, 0.0);
  EXPECT_THROW(fit_aggd(std::vector<double>(50, 0.0)), DegenerateDistributionError);
}

TEST(FitGamma, RecoversShapeRate) {
  const auto x = draw(std::gamma_distribution<double>(2.0, 1.0 / 3.0), 100000, 8);
  const auto p = fit_gamma(x);
  EXPECT_GE(p.alpha, 1.9);
  EXPECT_LE(p.alpha, 2.1);
  EXPECT_GE(p.beta, 2.85);
  EXPECT_LE(p.beta, 3.15);
  const auto e = fit_gamma(draw(std::exponential_distribution<double>(1.0), 100000, 9));
  EXPECT_GE(e.alpha, 0.95);
  EXPECT_LE(e.alpha, 1.05);
  EXPECT_THROW(fit_gamma(std::vector<double>(40, 1.0)), DegenerateDistributionError);
}

TEST(FitGamma, ShiftMakesSampleStartNearZero) {
  // Shifting by a constant does not change the fit: min is moved to 1e-6 either way.
  auto x = draw(std::gamma_distribution<double>(3.0, 1.0), 2000, 10);
  auto y = x;
  for (auto& v : y) v += 42.0;
  const auto a = fit_gamma(x), b = fit_gamma(y);
  EXPECT_NEAR(a.alpha, b.alpha, 1e-9 * a.alpha);
  EXPECT_NEAR(a.beta, b.beta, 1e-9 * a.beta);
}

TEST(EstimatorConsistency, ErrorShrinksWithSampleSize) {
  auto err = [](std::size_t n) {
    double e = 0;
    for (std::uint64_t s = 0; s < 20; ++s) e += std::abs(fit_ggd(laplace(n, 100 + s)).alpha - 1.0);
    return e / 20;
  };
  const double e3 = err(1000), e5 = err(100000);
  EXPECT_LT(e5, e3);
  EXPECT_LT(e5, 0.05);
}

TEST(SummarizeDomain, Gaussian) {
  const auto s = summarize_domain(gaussian(100000, 11));
  EXPECT_NEAR(s.mean, 0.0, 0.02);
  EXPECT_NEAR(s.std, 1.0, 0.02);
  EXPECT_NEAR(s.ggd.alpha, 2.0, 0.1);
  EXPECT_LT(std::abs(s.aggd.eta), 0.05);
  EXPECT_EQ(s.flags, 0u);
  EXPECT_GT(s.entropy, 5.0);
}

TEST(SummarizeDomain, ConstantDomainFlagsFits) {
  const auto s = summarize_domain(std::vector<double>(100, 4.5));
  EXPECT_EQ(s.mean, 4.5);
  EXPECT_EQ(s.std, 0.0);
  EXPECT_EQ(s.entropy, 0.0);
  EXPECT_TRUE(s.flags & kGgdDegenerate);
  EXPECT_TRUE(s.flags & kAggdDegenerate);
  EXPECT_TRUE(s.flags & kGammaDegenerate);
  EXPECT_EQ(s.ggd.alpha, 0.0);
  EXPECT_EQ(s.gamma.beta, 0.0);
}

TEST(SummarizeDomain, RejectsNonFinite) {
  std::vector<double> x(20, 1.0);
  x[3] = std::nan("");
  EXPECT_THROW(summarize_domain(x), Error);
}
