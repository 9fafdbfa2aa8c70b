#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"

namespace nss3dqa {

using Rgb = std::array<std::uint8_t, 3>;
using Face = std::array<std::uint32_t, 3>;

struct ColoredPointCloud {
  std::vector<Vec3> positions;
  std::vector<Rgb> colors;

  std::size_t size() const { return positions.size(); }
  friend bool operator==(const ColoredPointCloud&, const ColoredPointCloud&) = default;
};

struct ColoredMesh {
  std::vector<Vec3> vertices;
  std::vector<Rgb> vertex_colors;
  std::vector<Face> faces;

  friend bool operator==(const ColoredMesh&, const ColoredMesh&) = default;
};

using ModelHandle = std::variant<ColoredPointCloud, ColoredMesh>;

enum class ModelKind { point_cloud, mesh };

inline ModelKind kind_of(const ModelHandle& m) {
  return std::holds_alternative<ColoredPointCloud>(m) ? ModelKind::point_cloud : ModelKind::mesh;
}

inline const char* to_string(ModelKind k) { return k == ModelKind::point_cloud ? "point_cloud" : "mesh"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "point_cloud") return ModelKind::point_cloud;
  if (s == "mesh") return ModelKind::mesh;
  throw Error("unknown model kind '" + s + "'");
}

/// Throws Error if the cloud breaks its structural invariants.
inline void validate(const ColoredPointCloud& c) {
  if (c.positions.empty()) throw Error("point cloud has no points");
  if (c.positions.size() != c.colors.size())
    throw Error("point cloud has " + std::to_string(c.positions.size()) + " positions but " +
                std::to_string(c.colors.size()) + " colors");
  for (std::size_t i = 0; i < c.positions.size(); ++i)
    if (!is_finite(c.positions[i])) throw Error("point " + std::to_string(i) + " has a non-finite coordinate");
}

inline void validate(const ColoredMesh& m) {
  if (m.vertices.empty()) throw Error("mesh has no vertices");
  if (m.vertices.size() != m.vertex_colors.size())
    throw Error("mesh has " + std::to_string(m.vertices.size()) + " vertices but " +
                std::to_string(m.vertex_colors.size()) + " colors");
  for (std::size_t i = 0; i < m.vertices.size(); ++i)
    if (!is_finite(m.vertices[i])) throw Error("vertex " + std::to_string(i) + " has a non-finite coordinate");
  const auto n = m.vertices.size();
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    const auto& t = m.faces[f];
    for (auto i : t)
      if (i >= n) throw Error("face " + std::to_string(f) + " references vertex " + std::to_string(i));
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw Error("face " + std::to_string(f) + " repeats a vertex index");
  }
}

inline void validate(const ModelHandle& m) {
  std::visit([](const auto& x) { validate(x); }, m);
}

inline const std::vector<Rgb>& colors_of(const ModelHandle& m) {
  if (const auto* c = std::get_if<ColoredPointCloud>(&m)) return c->colors;
  return std::get<ColoredMesh>(m).vertex_colors;
}

inline const std::vector<Vec3>& positions_of(const ModelHandle& m) {
  if (const auto* c = std::get_if<ColoredPointCloud>(&m)) return c->positions;
  return std::get<ColoredMesh>(m).vertices;
}

}  // namespace nss3dqa
