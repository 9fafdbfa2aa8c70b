#pragma once

// Mesh geometry domains: weighted average curvature per vertex, oriented
// dihedral angle per interior edge, area per face and angle per face corner.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "model.hpp"
#include "parallel.hpp"

namespace nss3dqa {

struct MeshGeometryDomains {
  std::vector<double> curvature;  // per vertex
  std::vector<double> dihedral;   // per interior edge, radians in [-pi, pi]
  std::vector<double> face_area;  // per face
  std::vector<double> face_angle; // per corner of each non-degenerate face
  std::size_t isolated_vertices = 0;
  std::size_t degenerate_faces = 0;
};

struct MeshFeatureOptions {
  /// Curvature ball radius as a fraction of the bounding-box diagonal.
  double curvature_radius_frac = 0.01;
  unsigned threads = 1;
};

/// Undirected edge with its one or two incident faces. For each incident face
/// the apex is the face vertex not on the edge.
struct MeshEdge {
  std::uint32_t v0 = 0, v1 = 0;  // v0 < v1
  std::array<std::uint32_t, 2> faces{};
  std::array<std::uint32_t, 2> apex{};
  std::uint8_t face_count = 0;
  bool interior() const { return face_count == 2; }
};

/// Edge adjacency of a triangle mesh. Edges are sorted by (v0, v1).
class MeshTopology {
 public:
  explicit MeshTopology(const ColoredMesh& mesh) {
    struct Entry {
      std::uint32_t lo, hi, face, apex;
    };
    std::vector<Entry> entries;
    entries.reserve(mesh.faces.size() * 3);
    for (std::uint32_t f = 0; f < mesh.faces.size(); ++f) {
      const auto& t = mesh.faces[f];
      for (int c = 0; c < 3; ++c) {
        const auto a = t[c], b = t[(c + 1) % 3], apex = t[(c + 2) % 3];
        entries.push_back({std::min(a, b), std::max(a, b), f, apex});
      }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
      return std::tie(x.lo, x.hi, x.face) < std::tie(y.lo, y.hi, y.face);
    });
    face_edges_.assign(mesh.faces.size(), {});
    for (std::size_t i = 0; i < entries.size();) {
      std::size_t j = i;
      while (j < entries.size() && entries[j].lo == entries[i].lo && entries[j].hi == entries[i].hi) ++j;
      if (j - i > 2) throw NonManifoldEdgeError(entries[i].lo, entries[i].hi, j - i);
      MeshEdge e;
      e.v0 = entries[i].lo;
      e.v1 = entries[i].hi;
      const auto id = static_cast<std::uint32_t>(edges_.size());
      for (std::size_t k = i; k < j; ++k) {
        e.faces[e.face_count] = entries[k].face;
        e.apex[e.face_count] = entries[k].apex;
        ++e.face_count;
        auto& slots = face_edges_[entries[k].face];
        // Slot c holds the edge opposite corner c+2, i.e. edge (t[c], t[c+1]).
        const auto& t = mesh.faces[entries[k].face];
        for (int c = 0; c < 3; ++c)
          if (t[(c + 2) % 3] == entries[k].apex) slots[c] = id;
      }
      edges_.push_back(e);
      i = j;
    }
    incident_.assign(mesh.vertices.size(), 0);
    for (const auto& t : mesh.faces)
      for (auto v : t) ++incident_[v];
  }

  const std::vector<MeshEdge>& edges() const { return edges_; }
  const std::array<std::uint32_t, 3>& face_edges(std::uint32_t f) const { return face_edges_[f]; }
  std::uint32_t incident_faces(std::uint32_t v) const { return incident_[v]; }

 private:
  std::vector<MeshEdge> edges_;
  std::vector<std::array<std::uint32_t, 3>> face_edges_;
  std::vector<std::uint32_t> incident_;
};

namespace detail::mesh {

inline std::optional<Vec3> unit_normal(const ColoredMesh& m, std::uint32_t f) {
  const auto& t = m.faces[f];
  const Vec3 n = cross(m.vertices[t[1]] - m.vertices[t[0]], m.vertices[t[2]] - m.vertices[t[0]]);
  const double len = norm(n);
  if (!(len > 0)) return std::nullopt;
  return n / len;
}

inline double sgn(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

/// Signed area of (disk of radius R at the origin) ∩ (triangle O, a, b).
inline double disk_wedge_area(double ax, double ay, double bx, double by, double R) {
  const double dx = bx - ax, dy = by - ay;
  const double A = dx * dx + dy * dy;
  if (A == 0) return 0;
  const double B = ax * dx + ay * dy;
  const double C = ax * ax + ay * ay - R * R;
  const double disc = B * B - A * C;
  std::array<double, 4> ts{0.0, 1.0, 1.0, 1.0};
  int nt = 1;
  if (disc > 0) {
    const double s = std::sqrt(disc);
    for (double t : {(-B - s) / A, (-B + s) / A})
      if (t > 0 && t < 1) ts[nt++] = t;
  }
  ts[nt++] = 1.0;
  double area = 0;
  for (int i = 0; i + 1 < nt; ++i) {
    const double t0 = ts[i], t1 = ts[i + 1];
    if (t1 <= t0) continue;
    const double px = ax + t0 * dx, py = ay + t0 * dy;
    const double qx = ax + t1 * dx, qy = ay + t1 * dy;
    const double tm = 0.5 * (t0 + t1);
    const double mx = ax + tm * dx, my = ay + tm * dy;
    const double crs = px * qy - py * qx;
    if (mx * mx + my * my <= R * R) {
      area += 0.5 * crs;
    } else {
      area += 0.5 * R * R * std::atan2(crs, px * qx + py * qy);
    }
  }
  return area;
}

}  // namespace detail::mesh

/// Area of the part of triangle (a, b, c) inside the ball (center, radius).
inline double triangle_ball_area(Vec3 a, Vec3 b, Vec3 c, Vec3 center, double radius) {
  const Vec3 n = cross(b - a, c - a);
  const double len = norm(n);
  if (!(len > 0)) return 0.0;
  const Vec3 un = n / len;
  const double d = dot(center - a, un);
  if (std::abs(d) >= radius) return 0.0;
  const double rho = std::sqrt(radius * radius - d * d);
  const Vec3 origin = center - d * un;
  const Vec3 u = (b - a) / norm(b - a);
  const Vec3 w = cross(un, u);
  auto to2d = [&](Vec3 p) { return std::array<double, 2>{dot(p - origin, u), dot(p - origin, w)}; };
  const auto pa = to2d(a), pb = to2d(b), pc = to2d(c);
  using detail::mesh::disk_wedge_area;
  const double s = disk_wedge_area(pa[0], pa[1], pb[0], pb[1], rho) + disk_wedge_area(pb[0], pb[1], pc[0], pc[1], rho) +
                   disk_wedge_area(pc[0], pc[1], pa[0], pa[1], rho);
  return std::abs(s);
}

/// Length of segment [p0, p1] inside the ball; always in [0, |p1 - p0|].
inline double segment_ball_length(Vec3 p0, Vec3 p1, Vec3 center, double radius) {
  const Vec3 d = p1 - p0;
  const double a = squared_norm(d);
  if (a == 0) return 0.0;
  const Vec3 m = p0 - center;
  const double b = dot(d, m);
  const double c = squared_norm(m) - radius * radius;
  const double disc = b * b - a * c;
  if (disc <= 0) return 0.0;
  const double s = std::sqrt(disc);
  const double t0 = std::max(0.0, (-b - s) / a);
  const double t1 = std::min(1.0, (-b + s) / a);
  if (t1 <= t0) return 0.0;
  return (t1 - t0) * std::sqrt(a);
}

/// Oriented dihedral angle per edge; nullopt for boundary edges.
///
/// For an interior edge with faces f1 < f2 and apexes v1, v2:
/// acos(n1 . n2) * sgn(n1 . (v2 - v1)). Convex edges of an outward-oriented
/// closed surface come out negative.
inline std::vector<std::optional<double>> edge_dihedrals(const ColoredMesh& mesh, const MeshTopology& topo) {
  std::vector<std::optional<double>> out(topo.edges().size());
  for (std::size_t i = 0; i < topo.edges().size(); ++i) {
    const auto& e = topo.edges()[i];
    if (!e.interior()) continue;
    const auto n1 = detail::mesh::unit_normal(mesh, e.faces[0]);
    const auto n2 = detail::mesh::unit_normal(mesh, e.faces[1]);
    if (!n1 || !n2) {
      out[i] = 0.0;
      continue;
    }
    const double c = std::clamp(dot(*n1, *n2), -1.0, 1.0);
    const Vec3 span = mesh.vertices[e.apex[1]] - mesh.vertices[e.apex[0]];
    out[i] = std::acos(c) * detail::mesh::sgn(dot(*n1, span));
  }
  return out;
}

inline std::vector<double> dihedral_angles(const ColoredMesh& mesh) {
  const MeshTopology topo(mesh);
  std::vector<double> out;
  for (const auto& d : edge_dihedrals(mesh, topo))
    if (d) out.push_back(*d);
  return out;
}

struct FaceAreaAngles {
  std::vector<double> areas;   // one per face
  std::vector<double> angles;  // three per non-degenerate face
  std::size_t degenerate_faces = 0;
};

inline FaceAreaAngles face_area_angles(const ColoredMesh& mesh) {
  FaceAreaAngles r;
  r.areas.reserve(mesh.faces.size());
  r.angles.reserve(mesh.faces.size() * 3);
  for (const auto& t : mesh.faces) {
    const Vec3 p[3] = {mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]};
    const Vec3 n = cross(p[1] - p[0], p[2] - p[0]);
    const double twice_area = norm(n);
    const double l01 = norm(p[1] - p[0]), l02 = norm(p[2] - p[0]), l12 = norm(p[2] - p[1]);
    const double scale = std::max({l01 * l02, l01 * l12, l02 * l12});
    if (!(twice_area > 1e-12 * scale) || scale == 0) {
      r.areas.push_back(0.0);
      ++r.degenerate_faces;
      continue;
    }
    r.areas.push_back(0.5 * twice_area);
    for (int c = 0; c < 3; ++c) {
      const Vec3 u = p[(c + 1) % 3] - p[c];
      const Vec3 v = p[(c + 2) % 3] - p[c];
      // atan2 form of acos(u.v / |u||v|); better conditioned near 0 and pi.
      r.angles.push_back(std::atan2(norm(cross(u, v)), dot(u, v)));
    }
  }
  return r;
}

namespace detail::mesh {

/// Bounding-volume hierarchy over faces for ball queries.
class FaceBvh {
 public:
  explicit FaceBvh(const ColoredMesh& m) {
    const auto nf = m.faces.size();
    order_.resize(nf);
    boxes_.resize(nf);
    std::vector<Vec3> centroid(nf);
    for (std::uint32_t f = 0; f < nf; ++f) {
      order_[f] = f;
      for (auto v : m.faces[f]) boxes_[f].extend(m.vertices[v]);
      centroid[f] = boxes_[f].center();
    }
    if (nf > 0) build(0, static_cast<std::uint32_t>(nf), centroid);
  }

  template <class Fn>
  void for_each_near(Vec3 c, double r, Fn&& fn) const {
    if (nodes_.empty()) return;
    std::vector<std::uint32_t> stack{0};
    const double r2 = r * r;
    while (!stack.empty()) {
      const auto& n = nodes_[stack.back()];
      stack.pop_back();
      if (n.box.squared_distance_to(c) > r2) continue;
      if (n.left == 0 && n.right == 0) {
        for (auto i = n.begin; i < n.end; ++i)
          if (boxes_[order_[i]].squared_distance_to(c) <= r2) fn(order_[i]);
      } else {
        stack.push_back(n.left);
        stack.push_back(n.right);
      }
    }
  }

 private:
  struct Node {
    Aabb box;
    std::uint32_t begin = 0, end = 0, left = 0, right = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end, const std::vector<Vec3>& centroid) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({});
    Aabb box, cbox;
    for (auto i = begin; i < end; ++i) {
      box.extend(boxes_[order_[i]]);
      cbox.extend(centroid[order_[i]]);
    }
    nodes_[id].box = box;
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    if (end - begin <= 8) return id;
    const Vec3 ext = cbox.hi - cbox.lo;
    int axis = 0;
    if (ext.y > ext[axis]) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    if (ext[axis] <= 0) return id;
    const auto mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return centroid[a][axis] < centroid[b][axis] ||
                              (centroid[a][axis] == centroid[b][axis] && a < b);
                     });
    const auto l = build(begin, mid, centroid);
    const auto r = build(mid, end, centroid);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::vector<std::uint32_t> order_;
  std::vector<Aabb> boxes_;
  std::vector<Node> nodes_;
};

}  // namespace detail::mesh

/// Per-vertex weighted average curvature over the ball B(v, r):
/// sum over edges e meeting B of C(e) |e ∩ B|, divided by the surface area
/// inside B. C(e) is the angle between the normals of the two faces at e,
/// positive on convex edges (the negated oriented dihedral) and 0 on
/// boundary edges.
struct CurvatureResult {
  std::vector<double> curvature;
  std::size_t isolated_vertices = 0;
};

inline CurvatureResult weighted_average_curvature(const ColoredMesh& mesh, const MeshTopology& topo,
                                                  std::span<const std::optional<double>> dihedral,
                                                  const MeshFeatureOptions& opt = {}) {
  Aabb bbox;
  for (const auto& v : mesh.vertices) bbox.extend(v);
  const double radius = opt.curvature_radius_frac * bbox.diagonal();
  const auto nv = mesh.vertices.size();
  CurvatureResult res;
  res.curvature.assign(nv, 0.0);
  for (std::uint32_t v = 0; v < nv; ++v)
    if (topo.incident_faces(v) == 0) ++res.isolated_vertices;
  if (!(radius > 0)) return res;

  const detail::mesh::FaceBvh bvh(mesh);
  const std::size_t chunk = 512;
  const std::size_t chunks = (nv + chunk - 1) / chunk;
  parallel_for(chunks, std::max(1u, opt.threads), [&](std::size_t ci) {
    std::vector<std::uint32_t> near_edges;
    const std::size_t end = std::min(nv, (ci + 1) * chunk);
    for (std::size_t vi = ci * chunk; vi < end; ++vi) {
      const auto v = static_cast<std::uint32_t>(vi);
      if (topo.incident_faces(v) == 0) continue;
      const Vec3 c = mesh.vertices[v];
      double area = 0, weighted = 0;
      near_edges.clear();
      bvh.for_each_near(c, radius, [&](std::uint32_t f) {
        const auto& t = mesh.faces[f];
        area += triangle_ball_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]], c, radius);
        for (auto eid : topo.face_edges(f)) near_edges.push_back(eid);
      });
      std::sort(near_edges.begin(), near_edges.end());
      near_edges.erase(std::unique(near_edges.begin(), near_edges.end()), near_edges.end());
      for (auto eid : near_edges) {
        if (!dihedral[eid]) continue;
        const auto& e = topo.edges()[eid];
        weighted += -*dihedral[eid] * segment_ball_length(mesh.vertices[e.v0], mesh.vertices[e.v1], c, radius);
      }
      res.curvature[v] = area > 0 ? weighted / area : 0.0;
    }
  });
  return res;
}

inline CurvatureResult weighted_average_curvature(const ColoredMesh& mesh, const MeshFeatureOptions& opt = {}) {
  const MeshTopology topo(mesh);
  const auto dih = edge_dihedrals(mesh, topo);
  return weighted_average_curvature(mesh, topo, dih, opt);
}

inline MeshGeometryDomains project_mesh_geometry(const ColoredMesh& mesh, const MeshFeatureOptions& opt = {}) {
  validate(mesh);
  if (mesh.faces.empty()) throw Error("mesh has no faces");
  const MeshTopology topo(mesh);
  const auto dih = edge_dihedrals(mesh, topo);

  MeshGeometryDomains d;
  auto curv = weighted_average_curvature(mesh, topo, dih, opt);
  d.curvature = std::move(curv.curvature);
  d.isolated_vertices = curv.isolated_vertices;
  for (const auto& x : dih)
    if (x) d.dihedral.push_back(*x);
  auto fa = face_area_angles(mesh);
  d.face_area = std::move(fa.areas);
  d.face_angle = std::move(fa.angles);
  d.degenerate_faces = fa.degenerate_faces;
  return d;
}

}  // namespace nss3dqa
