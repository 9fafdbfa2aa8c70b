#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>

#include "nss3dqa/pc_features.hpp"
#include "nss3dqa/synth.hpp"
#include "test_util.hpp"

using namespace nss3dqa;
using testutil::brute_knn;
using testutil::random_points;

namespace {

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

/// Eigenvalues of the population covariance via Eigen's iterative solver.
std::array<double, 3> oracle_eigen(const std::vector<Vec3>& pts) {
  Eigen::MatrixXd m(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(i) << pts[i].x, pts[i].y, pts[i].z;
  const Eigen::RowVector3d mu = m.colwise().mean();
  const Eigen::MatrixXd c = m.rowwise() - mu;
  const Eigen::Matrix3d cov = (c.transpose() * c) / static_cast<double>(pts.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const auto ev = es.eigenvalues();
  return {ev(2), ev(1), ev(0)};
}

}  // namespace

TEST(Knn, CollinearMiddle) {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  const NeighborhoodIndex idx(pts, 2);
  auto nb = knn_query(idx, 1);
  std::sort(nb.begin(), nb.end());
  EXPECT_EQ(nb, (std::vector<std::uint32_t>{0, 2}));
}

TEST(Knn, GridMatchesBruteForceWithTies) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) pts.push_back({double(i), double(j), 0});
  for (std::size_t k : {1, 3, 4, 8, 15}) {
    const NeighborhoodIndex idx(pts, k);
    for (std::uint32_t q = 0; q < pts.size(); ++q) EXPECT_EQ(knn_query(idx, q), brute_knn(pts, q, k));
  }
}

TEST(Knn, ClampsToAvailablePoints) {
  const auto pts = random_points(5, 1);
  const NeighborhoodIndex idx(pts, 10);
  EXPECT_EQ(knn_query(idx, 0).size(), 4u);
}

TEST(Knn, SinglePointRejected) {
  const std::vector<Vec3> pts{{0, 0, 0}};
  EXPECT_THROW(NeighborhoodIndex(pts, 1), InsufficientPointsError);
}

TEST(Knn, RandomCloudsMatchBruteForce) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    auto pts = random_points(n, 100 + trial);
    if (trial % 5 == 0)  // duplicate points force distance ties
      for (std::size_t i = 1; i < n; i += 3) pts[i] = pts[i - 1];
    for (std::size_t k : {1, 5, 10}) {
      const NeighborhoodIndex idx(pts, k);
      for (std::uint32_t q = 0; q < n; ++q) ASSERT_EQ(knn_query(idx, q), brute_knn(pts, q, k)) << "n=" << n;
    }
  }
}

TEST(Knn, SmallLeafSizeAgrees) {
  const auto pts = random_points(300, 3);
  const KdTree tree(pts, 1);
  for (std::uint32_t q = 0; q < pts.size(); q += 7) EXPECT_EQ(tree.nearest_indices(q, 12), brute_knn(pts, q, 12));
}

TEST(CovarianceEigen, PlaneHasZeroSmallest) {
  auto pts = random_points(200, 5);
  for (auto& p : pts) p.z = 0;
  const auto l = covariance_eigen(pts);
  EXPECT_NEAR(l.l3, 0.0, 1e-12);
  EXPECT_GT(l.l2, 0.1);
}

TEST(CovarianceEigen, IdenticalPointsAreZero) {
  const std::vector<Vec3> pts(8, Vec3{1.5, -2, 3});
  const auto l = covariance_eigen(pts);
  EXPECT_EQ(l.l1, 0.0);
  EXPECT_EQ(l.l2, 0.0);
  EXPECT_EQ(l.l3, 0.0);
  const auto f = eigenfeatures(l);
  EXPECT_EQ(f.curvature, 0.0);
  EXPECT_EQ(f.sphericity, 0.0);
}

TEST(CovarianceEigen, MatchesIterativeOracle) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 3 + rng() % 30;
    std::vector<Vec3> pts(n);
    const double sx = std::exp(g(rng)), sy = std::exp(g(rng)), sz = trial % 7 == 0 ? 0.0 : std::exp(g(rng));
    for (auto& p : pts) {
      const double x = sx * g(rng), y = sy * g(rng), z = sz * g(rng);
      p = {x + 0.3 * y, y - 0.2 * z, z + 0.1 * x};
    }
    const auto l = covariance_eigen(pts);
    const auto o = oracle_eigen(pts);
    const double scale = std::max(1.0, o[0]);
    EXPECT_NEAR(l.l1, o[0], 1e-10 * scale);
    EXPECT_NEAR(l.l2, o[1], 1e-10 * scale);
    EXPECT_NEAR(l.l3, std::max(0.0, o[2]), 1e-10 * scale);
    EXPECT_GE(l.l1, l.l2);
    EXPECT_GE(l.l2, l.l3);
    EXPECT_GE(l.l3, 0.0);
  }
}

TEST(CovarianceEigen, RepeatedEigenvalues) {
  // regular octahedron vertices: isotropic covariance
  const std::vector<Vec3> pts{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  const auto l = covariance_eigen(pts);
  EXPECT_NEAR(l.l1, 1.0 / 3, 1e-15);
  EXPECT_NEAR(l.l3, 1.0 / 3, 1e-15);
}

// The isotropic-Gaussian example bounds the sample condition ratio. With
// 1000 samples the ratio concentrates near 1.2-1.3, so the check asserts the
// median over seeds against that concentration and reports the fraction of
// seeds under 1.2 instead of claiming the bound.
TEST(CovarianceEigen, IsotropicGaussianSampleIsNearlyIsotropic) {
  std::vector<double> ratios;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0, 1);
    std::vector<Vec3> pts(1000);
    for (auto& p : pts) {
      const double x = g(rng), y = g(rng), z = g(rng);
      p = {x, y, z};
    }
    const auto l = covariance_eigen(pts);
    const auto o = oracle_eigen(pts);
    EXPECT_NEAR(l.l1 / l.l3, o[0] / o[2], 1e-9);
    ratios.push_back(l.l1 / l.l3);
  }
  const double med = median(ratios);
  EXPECT_LT(med, 1.35);
  EXPECT_GT(med, 1.05);
  const auto under = std::count_if(ratios.begin(), ratios.end(), [](double r) { return r < 1.2; });
  RecordProperty("fraction_under_1_2", std::to_string(double(under) / ratios.size()));
}

TEST(Eigenfeatures, CanonicalCases) {
  auto f = eigenfeatures({1, 1, 1});
  EXPECT_DOUBLE_EQ(f.curvature, 1.0 / 3);
  EXPECT_EQ(f.anisotropy, 0.0);
  EXPECT_EQ(f.linearity, 0.0);
  EXPECT_EQ(f.planarity, 0.0);
  EXPECT_EQ(f.sphericity, 1.0);

  f = eigenfeatures({1, 1, 0});
  EXPECT_EQ(f.curvature, 0.0);
  EXPECT_EQ(f.anisotropy, 1.0);
  EXPECT_EQ(f.linearity, 0.0);
  EXPECT_EQ(f.planarity, 1.0);
  EXPECT_EQ(f.sphericity, 0.0);

  f = eigenfeatures({1, 0, 0});
  EXPECT_EQ(f.curvature, 0.0);
  EXPECT_EQ(f.anisotropy, 1.0);
  EXPECT_EQ(f.linearity, 1.0);
  EXPECT_EQ(f.planarity, 0.0);
  EXPECT_EQ(f.sphericity, 0.0);
}

TEST(Eigenfeatures, IdentitiesOnRandomTriples) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 1000; ++i) {
    double a[3] = {u(rng), u(rng), u(rng)};
    std::sort(a, a + 3, std::greater<>());
    const auto f = eigenfeatures({a[0], a[1], a[2]});
    EXPECT_NEAR(f.linearity + f.planarity, f.anisotropy, 1e-12);
    EXPECT_NEAR(f.sphericity + f.anisotropy, 1.0, 1e-12);
    EXPECT_GE(f.curvature, 0.0);
    EXPECT_LE(f.curvature, 1.0 / 3 + 1e-15);
  }
}

TEST(Eigenfeatures, GuardZeroes) {
  const auto f = eigenfeatures({1e-13, 0, 0});
  EXPECT_EQ(f.anisotropy, 0.0);
  EXPECT_EQ(f.sphericity, 0.0);
}

TEST(ProjectPcGeometry, PlaneAndLine) {
  const auto plane = std::get<ColoredPointCloud>(generate({SynthShape::plane, 10000, ColorPattern::uniform, 1}));
  const auto dp = project_pc_geometry(plane);
  // flat neighborhoods: lambda3 = 0, so Sph = Cur = 0 and Lin + Pla = Ani = 1
  for (std::size_t i = 0; i < plane.size(); ++i) {
    EXPECT_LT(dp.sphericity[i], 1e-9);
    EXPECT_LT(dp.curvature[i], 1e-9);
    EXPECT_NEAR(dp.linearity[i] + dp.planarity[i], 1.0, 1e-9);
  }

  const auto line = std::get<ColoredPointCloud>(generate({SynthShape::line, 10000, ColorPattern::uniform, 1}));
  EXPECT_GT(median(project_pc_geometry(line).linearity), 0.9);
}

TEST(ProjectPcGeometry, DeterministicAcrossThreads) {
  const auto c = testutil::random_cloud(5000, 4);
  const auto a = project_pc_geometry(c, {10, false, 1});
  const auto b = project_pc_geometry(c, {10, false, 4});
  EXPECT_EQ(a.curvature, b.curvature);
  EXPECT_EQ(a.planarity, b.planarity);
  EXPECT_EQ(project_pc_geometry(c).linearity, a.linearity);
}

TEST(ProjectPcGeometry, RigidMotionInvariance) {
  const auto c = testutil::random_cloud(2000, 8);
  auto moved = c;
  const double th = 0.7, ph = -0.4;
  for (auto& p : moved.positions) {
    Vec3 q{std::cos(th) * p.x - std::sin(th) * p.y, std::sin(th) * p.x + std::cos(th) * p.y, p.z};
    q = {q.x, std::cos(ph) * q.y - std::sin(ph) * q.z, std::sin(ph) * q.y + std::cos(ph) * q.z};
    p = q + Vec3{3, -1, 2};
  }
  const auto a = project_pc_geometry(c), b = project_pc_geometry(moved);
  for (std::size_t i = 0; i < c.size(); ++i) {
    ASSERT_NEAR(a.curvature[i], b.curvature[i], 1e-9);
    ASSERT_NEAR(a.anisotropy[i], b.anisotropy[i], 1e-9);
    ASSERT_NEAR(a.linearity[i], b.linearity[i], 1e-9);
    ASSERT_NEAR(a.planarity[i], b.planarity[i], 1e-9);
    ASSERT_NEAR(a.sphericity[i], b.sphericity[i], 1e-9);
  }
}

TEST(ProjectPcGeometry, IncludeSelfUsesKPoints) {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 5, 5}};
  ColoredPointCloud c{pts, std::vector<Rgb>(4, Rgb{0, 0, 0})};
  // k=3 with self: point 0 plus its 2 nearest (1, 2) span a plane, so Sph = 0
  const auto with_self = project_pc_geometry(c, {3, true, 1});
  EXPECT_NEAR(with_self.sphericity[0], 0.0, 1e-12);
  std::vector<Vec3> hood{pts[0], pts[1], pts[2]};
  const auto f = eigenfeatures(covariance_eigen(hood));
  EXPECT_DOUBLE_EQ(with_self.planarity[0], f.planarity);
  // without self the 3 neighbours of point 0 are 1, 2 and 3
  std::vector<Vec3> hood2{pts[1], pts[2], pts[3]};
  EXPECT_DOUBLE_EQ(project_pc_geometry(c, {3, false, 1}).planarity[0],
                   eigenfeatures(covariance_eigen(hood2)).planarity);
}

TEST(ProjectPcGeometry, DuplicatePointsGiveZeros) {
  ColoredPointCloud c{std::vector<Vec3>(20, Vec3{1, 1, 1}), std::vector<Rgb>(20, Rgb{1, 2, 3})};
  const auto d = project_pc_geometry(c);
  for (double v : d.curvature) EXPECT_EQ(v, 0.0);
  for (double v : d.anisotropy) EXPECT_FALSE(std::isnan(v));
}
