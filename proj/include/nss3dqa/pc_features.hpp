#pragma once

// Point-cloud geometry domains: per-point eigenfeatures of the local
// covariance over a k-nearest-neighbour neighbourhood.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "error.hpp"
#include "kdtree.hpp"
#include "model.hpp"
#include "parallel.hpp"

namespace nss3dqa {

/// Eigenvalues of a local covariance, sorted l1 >= l2 >= l3 >= 0.
struct EigenTriple {
  double l1 = 0, l2 = 0, l3 = 0;
  double sum() const { return l1 + l2 + l3; }
};

struct Eigenfeatures {
  double curvature = 0, anisotropy = 0, linearity = 0, planarity = 0, sphericity = 0;
};

struct PcGeometryDomains {
  std::vector<double> curvature, anisotropy, linearity, planarity, sphericity;
};

struct PcFeatureOptions {
  std::size_t k = 10;
  /// Count the query point as one of its own k neighbours.
  bool include_self = false;
  unsigned threads = 1;
};

inline constexpr double kEigenGuard = 1e-12;

/// kNN index with a fixed neighbourhood size.
class NeighborhoodIndex {
 public:
  NeighborhoodIndex(std::span<const Vec3> points, std::size_t k) : tree_(points), k_(k) {
    if (points.size() < 2) throw InsufficientPointsError("kNN needs at least 2 points, got " + std::to_string(points.size()));
    if (k == 0) throw Error("neighbourhood size k must be positive");
  }

  std::size_t k() const { return k_; }
  const KdTree& tree() const { return tree_; }

  /// min(k, N-1) neighbours of point i, self excluded, ascending distance then index.
  std::vector<std::uint32_t> query(std::uint32_t i) const { return tree_.nearest_indices(i, k_); }

 private:
  KdTree tree_;
  std::size_t k_;
};

inline std::vector<std::uint32_t> knn_query(const NeighborhoodIndex& index, std::uint32_t i) { return index.query(i); }

/// Population covariance (1/K) of a set of points.
inline SymMat3 covariance(std::span<const Vec3> pts) {
  SymMat3 c;
  if (pts.empty()) return c;
  Vec3 mean;
  for (const auto& p : pts) mean += p;
  mean = mean / static_cast<double>(pts.size());
  for (const auto& p : pts) {
    const Vec3 d = p - mean;
    c.xx += d.x * d.x;
    c.xy += d.x * d.y;
    c.xz += d.x * d.z;
    c.yy += d.y * d.y;
    c.yz += d.y * d.z;
    c.zz += d.z * d.z;
  }
  const double inv = 1.0 / static_cast<double>(pts.size());
  c.xx *= inv, c.xy *= inv, c.xz *= inv, c.yy *= inv, c.yz *= inv, c.zz *= inv;
  return c;
}

/// Closed-form eigenvalues of a symmetric 3x3 matrix (trigonometric solution
/// of the characteristic cubic). Tiny negative roots are clamped to zero.
inline EigenTriple symmetric_eigenvalues(const SymMat3& a) {
  const double p1 = a.xy * a.xy + a.xz * a.xz + a.yz * a.yz;
  const double q = a.trace() / 3.0;
  std::array<double, 3> e{};
  if (p1 == 0) {
    e = {a.xx, a.yy, a.zz};
  } else {
    const double dxx = a.xx - q, dyy = a.yy - q, dzz = a.zz - q;
    const double p2 = dxx * dxx + dyy * dyy + dzz * dzz + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    // B = (A - qI) / p; r = det(B) / 2
    const double bxx = dxx / p, byy = dyy / p, bzz = dzz / p;
    const double bxy = a.xy / p, bxz = a.xz / p, byz = a.yz / p;
    const double det = bxx * (byy * bzz - byz * byz) - bxy * (bxy * bzz - byz * bxz) + bxz * (bxy * byz - byy * bxz);
    const double r = std::clamp(det / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double hi = q + 2.0 * p * std::cos(phi);
    const double lo = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
    e = {hi, 3.0 * q - hi - lo, lo};
  }
  std::sort(e.begin(), e.end(), std::greater<>());
  for (auto& v : e) v = std::max(v, 0.0);
  return {e[0], e[1], e[2]};
}

inline EigenTriple covariance_eigen(std::span<const Vec3> neighborhood) {
  return symmetric_eigenvalues(covariance(neighborhood));
}

/// Curvature, anisotropy, linearity, planarity and sphericity of one
/// neighbourhood. Degenerate spectra (sum or l1 below 1e-12) give all zeros.
inline Eigenfeatures eigenfeatures(const EigenTriple& l) {
  const double s = l.sum();
  if (s < kEigenGuard || l.l1 < kEigenGuard) return {};
  Eigenfeatures f;
  f.curvature = l.l3 / s;
  f.anisotropy = (l.l1 - l.l3) / l.l1;
  f.linearity = (l.l1 - l.l2) / l.l1;
  f.planarity = (l.l2 - l.l3) / l.l1;
  f.sphericity = l.l3 / l.l1;
  return f;
}

inline PcGeometryDomains project_pc_geometry(const ColoredPointCloud& cloud, const PcFeatureOptions& opt = {}) {
  const auto n = cloud.size();
  if (n < 2) throw InsufficientPointsError("point cloud needs at least 2 points, got " + std::to_string(n));
  const auto& pts = cloud.positions;
  // With include_self the query point fills one of the k slots.
  const std::size_t others = opt.include_self ? std::max<std::size_t>(opt.k, 1) - 1 : opt.k;
  const NeighborhoodIndex index(pts, std::max<std::size_t>(others, 1));

  PcGeometryDomains d;
  for (auto* v : {&d.curvature, &d.anisotropy, &d.linearity, &d.planarity, &d.sphericity}) v->assign(n, 0.0);

  const unsigned workers = std::max(1u, opt.threads);
  const std::size_t chunk = 1024;
  const std::size_t chunks = (n + chunk - 1) / chunk;
  parallel_for(chunks, workers, [&](std::size_t c) {
    std::vector<Neighbor> nb;
    std::vector<Vec3> hood;
    const std::size_t end = std::min(n, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      hood.clear();
      if (opt.include_self) hood.push_back(pts[i]);
      if (others > 0) {
        index.tree().nearest(pts[i], others, nb, static_cast<std::uint32_t>(i));
        for (const auto& x : nb) hood.push_back(pts[x.index]);
      }
      const auto f = eigenfeatures(covariance_eigen(hood));
      d.curvature[i] = f.curvature;
      d.anisotropy[i] = f.anisotropy;
      d.linearity[i] = f.linearity;
      d.planarity[i] = f.planarity;
      d.sphericity[i] = f.sphericity;
    }
  });
  return d;
}

}  // namespace nss3dqa
