#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nss3dqa/mesh_features.hpp"
#include "nss3dqa/synth.hpp"
#include "test_util.hpp"

using namespace nss3dqa;
using std::numbers::pi;
using testutil::with_white;

namespace {

ColoredMesh icosahedron(std::size_t min_vertices = 12, double r = 1.0) {
  return std::get<ColoredMesh>(generate({SynthShape::icosahedron, std::max<std::size_t>(min_vertices, 10),
                                         ColorPattern::uniform, 0, r}));
}

ColoredMesh grid(std::size_t n) {
  return std::get<ColoredMesh>(generate({SynthShape::grid_mesh, n, ColorPattern::uniform, 0}));
}

void transform(ColoredMesh& m, auto&& fn) {
  for (auto& v : m.vertices) v = fn(v);
}

}  // namespace

TEST(Dihedral, CoplanarPairIsZero) {
  const auto m = with_white({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}}, {{0, 1, 2}, {1, 3, 2}});
  const auto d = dihedral_angles(m);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NEAR(d[0], 0.0, 1e-9);
}

TEST(Dihedral, RightAngleFold) {
  // face 0 lies in z=0 with normal +z; face 1 lies in y=0 with normal +y.
  // The normals face each other (a concave fold), and the sign works out to +.
  const auto m = with_white({{0, 0, 0}, {1, 0, 0}, {0.5, 1, 0}, {0.5, 0, 1}}, {{0, 1, 2}, {1, 0, 3}});
  const auto d = dihedral_angles(m);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NEAR(d[0], pi / 2, 1e-12);

  // folding the other way makes the edge convex and flips the sign
  const auto m2 = with_white({{0, 0, 0}, {1, 0, 0}, {0.5, 1, 0}, {0.5, 0, -1}}, {{0, 1, 2}, {1, 0, 3}});
  EXPECT_NEAR(dihedral_angles(m2)[0], -pi / 2, 1e-12);
}

TEST(Dihedral, NonManifoldEdgeNamed) {
  const auto m = with_white({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}},
                            {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}});
  try {
    dihedral_angles(m);
    FAIL();
  } catch (const NonManifoldEdgeError& e) {
    EXPECT_NE(std::string(e.what()).find("0"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(Dihedral, IcosahedronConvexEdges) {
  const auto m = icosahedron();
  const auto d = dihedral_angles(m);
  ASSERT_EQ(d.size(), 30u);
  // supplement of the icosahedron's interior dihedral angle acos(-sqrt5/3)
  const double expected = pi - std::acos(-std::sqrt(5.0) / 3.0);
  for (double x : d) EXPECT_NEAR(x, -expected, 1e-12);
}

TEST(Dihedral, ReflectionNegatesRotationPreserves) {
  auto m = icosahedron(162);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 0.03);
  transform(m, [&](Vec3 v) { return v + Vec3{g(rng), g(rng), g(rng)}; });
  const auto d = dihedral_angles(m);

  auto reflected = m;
  transform(reflected, [](Vec3 v) { return Vec3{v.x, v.y, -v.z}; });
  const auto dr = dihedral_angles(reflected);

  auto rotated = m;
  const double c = std::cos(1.1), s = std::sin(1.1);
  transform(rotated, [&](Vec3 v) { return Vec3{c * v.x - s * v.z, v.y + 2, s * v.x + c * v.z}; });
  const auto dt = dihedral_angles(rotated);

  ASSERT_EQ(d.size(), dr.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_NEAR(dr[i], -d[i], 1e-9);
    EXPECT_NEAR(dt[i], d[i], 1e-9);
  }
}

TEST(FaceAreaAngles, RightTriangle) {
  const auto r = face_area_angles(with_white({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}}));
  ASSERT_EQ(r.areas.size(), 1u);
  EXPECT_DOUBLE_EQ(r.areas[0], 0.5);
  ASSERT_EQ(r.angles.size(), 3u);
  EXPECT_NEAR(r.angles[0], pi / 2, 1e-15);
  EXPECT_NEAR(r.angles[1], pi / 4, 1e-15);
  EXPECT_NEAR(r.angles[2], pi / 4, 1e-15);
}

TEST(FaceAreaAngles, Equilateral) {
  const auto r = face_area_angles(with_white({{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3.0) / 2, 0}}, {{0, 1, 2}}));
  EXPECT_NEAR(r.areas[0], std::sqrt(3.0) / 4, 1e-15);
  for (double a : r.angles) EXPECT_NEAR(a, pi / 3, 1e-15);
}

TEST(FaceAreaAngles, CollinearIsDegenerate) {
  const auto r = face_area_angles(with_white({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}, {{0, 1, 2}}));
  EXPECT_EQ(r.areas, (std::vector<double>{0.0}));
  EXPECT_TRUE(r.angles.empty());
  EXPECT_EQ(r.degenerate_faces, 1u);
}

TEST(FaceAreaAngles, AngleSumsAndShoelace) {
  auto m = icosahedron(642);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 0.02);
  transform(m, [&](Vec3 v) { return v + Vec3{g(rng), g(rng), g(rng)}; });
  const auto r = face_area_angles(m);
  ASSERT_EQ(r.angles.size(), 3 * m.faces.size());
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    EXPECT_NEAR(r.angles[3 * f] + r.angles[3 * f + 1] + r.angles[3 * f + 2], pi, 1e-9);
    // Heron's formula as an independent area oracle
    const auto& t = m.faces[f];
    const double a = norm(m.vertices[t[0]] - m.vertices[t[1]]), b = norm(m.vertices[t[1]] - m.vertices[t[2]]),
                 c = norm(m.vertices[t[2]] - m.vertices[t[0]]);
    const double s = 0.5 * (a + b + c);
    EXPECT_NEAR(r.areas[f], std::sqrt(s * (s - a) * (s - b) * (s - c)), 1e-12);
  }
}

TEST(BallClipping, SegmentLength) {
  EXPECT_DOUBLE_EQ(segment_ball_length({-2, 0, 0}, {2, 0, 0}, {0, 0, 0}, 1), 2.0);
  EXPECT_DOUBLE_EQ(segment_ball_length({0, 0, 0}, {2, 0, 0}, {0, 0, 0}, 1), 1.0);
  EXPECT_DOUBLE_EQ(segment_ball_length({0, 2, 0}, {2, 2, 0}, {0, 0, 0}, 1), 0.0);
  EXPECT_NEAR(segment_ball_length({-1, 0.6, 0}, {1, 0.6, 0}, {0, 0, 0}, 1), 1.6, 1e-15);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)}, c{u(rng), u(rng), u(rng)};
    const double r = std::abs(u(rng));
    const double len = segment_ball_length(a, b, c, r);
    EXPECT_GE(len, 0.0);
    EXPECT_LE(len, norm(b - a) + 1e-12);
    EXPECT_LE(len, 2 * r + 1e-12);
  }
}

TEST(BallClipping, TriangleAreaMatchesGridIntegration) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 8; ++trial) {
    const Vec3 a{u(rng), u(rng), 0}, b{u(rng), u(rng), 0}, c{u(rng), u(rng), 0};
    const Vec3 center{u(rng) * 0.5, u(rng) * 0.5, 0.3 * u(rng)};
    const double radius = 0.4 + 0.5 * std::abs(u(rng));
    // the ball meets the z=0 plane in a disk of radius sqrt(R^2 - z^2)
    const double rd = std::sqrt(radius * radius - center.z * center.z);
    const int n = 1500;
    const double h = 2.0 / n;
    std::size_t inside = 0;
    auto edge = [](Vec3 p, Vec3 q, double x, double y) { return (q.x - p.x) * (y - p.y) - (q.y - p.y) * (x - p.x); };
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double x = -1 + (i + 0.5) * h, y = -1 + (j + 0.5) * h;
        const double e0 = edge(a, b, x, y), e1 = edge(b, c, x, y), e2 = edge(c, a, x, y);
        const bool in_tri = (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
        if (in_tri && (x - center.x) * (x - center.x) + (y - center.y) * (y - center.y) <= rd * rd) ++inside;
      }
    const double approx = inside * h * h;
    EXPECT_NEAR(triangle_ball_area(a, b, c, center, radius), approx, 4e-3) << "trial " << trial;
  }
}

TEST(BallClipping, TriangleFullyInsideAndOutside) {
  EXPECT_NEAR(triangle_ball_area({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 0}, 10), 0.5, 1e-14);
  EXPECT_EQ(triangle_ball_area({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 5, 0}, 1), 0.0);
  EXPECT_EQ(triangle_ball_area({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0.2, 0.2, 3}, 1), 0.0);
  // sector of a quarter disk at the right-angle corner
  EXPECT_NEAR(triangle_ball_area({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 0}, 0.5), pi * 0.25 / 4, 1e-14);
}

TEST(Curvature, FlatGridIsZero) {
  const auto m = grid(400);
  const auto d = project_mesh_geometry(m);
  for (double c : d.curvature) EXPECT_EQ(c, 0.0);
  for (double x : d.dihedral) EXPECT_NEAR(x, 0.0, 1e-12);
  EXPECT_EQ(d.dihedral.size(), 19u * 19 * 3 - 2 * 19u);  // interior edges of a 20x20 vertex grid
}

TEST(Curvature, IcosahedronSymmetricPositiveAndExact) {
  const auto m = icosahedron();
  const auto res = weighted_average_curvature(m);
  Aabb box;
  for (const auto& v : m.vertices) box.extend(v);
  const double r = 0.01 * box.diagonal();
  // The ball around a vertex cuts 5 sectors of angle pi/3 and 5 edges of
  // length r, so Cur = 5 C r / (5 pi r^2 / 6).
  const double c_edge = pi - std::acos(-std::sqrt(5.0) / 3.0);
  const double expected = 6.0 * c_edge / (pi * r);
  ASSERT_EQ(res.curvature.size(), 12u);
  for (double c : res.curvature) {
    EXPECT_GT(c, 0.0);
    EXPECT_NEAR(c, expected, 1e-9 * expected);
  }
}

TEST(Curvature, ScalesInversely) {
  auto m = icosahedron(642);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0, 0.01);
  transform(m, [&](Vec3 v) { return v + Vec3{g(rng), g(rng), g(rng)}; });
  const auto base = weighted_average_curvature(m).curvature;
  for (double s : {0.1, 3.0, 250.0}) {
    auto scaled = m;
    transform(scaled, [&](Vec3 v) { return s * v; });
    const auto c = weighted_average_curvature(scaled).curvature;
    double mb = 0, ms = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      mb += base[i];
      ms += c[i];
    }
    EXPECT_NEAR(ms / mb, 1.0 / s, 0.05 / s);
  }
}

TEST(Curvature, IsolatedVertexCounted) {
  auto m = icosahedron();
  m.vertices.push_back({5, 5, 5});
  m.vertex_colors.push_back({0, 0, 0});
  const auto d = project_mesh_geometry(m);
  EXPECT_EQ(d.isolated_vertices, 1u);
  EXPECT_EQ(d.curvature.back(), 0.0);
}

TEST(Curvature, BoundaryEdgesContributeNothing) {
  // a single triangle: every edge is a boundary edge
  const auto m = with_white({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
  for (double c : weighted_average_curvature(m, {0.3, 1}).curvature) EXPECT_EQ(c, 0.0);
}

TEST(ProjectMeshGeometry, IcosahedronCounts) {
  const auto d = project_mesh_geometry(icosahedron());
  EXPECT_EQ(d.dihedral.size(), 30u);
  EXPECT_EQ(d.face_area.size(), 20u);
  EXPECT_EQ(d.face_angle.size(), 60u);
  EXPECT_EQ(d.curvature.size(), 12u);
}

TEST(ProjectMeshGeometry, DeterministicAcrossThreads) {
  auto m = icosahedron(2562);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 0.01);
  transform(m, [&](Vec3 v) { return v + Vec3{g(rng), g(rng), g(rng)}; });
  const auto a = project_mesh_geometry(m, {0.05, 1});
  const auto b = project_mesh_geometry(m, {0.05, 4});
  EXPECT_EQ(a.curvature, b.curvature);
  EXPECT_EQ(a.dihedral, b.dihedral);
  EXPECT_EQ(project_mesh_geometry(m, {0.05, 1}).face_angle, a.face_angle);
}

TEST(ProjectMeshGeometry, ConvexClosedMeshHasOneDihedralSign) {
  const auto d = project_mesh_geometry(icosahedron(642));
  for (double x : d.dihedral) EXPECT_LT(x, 0.0);
}
