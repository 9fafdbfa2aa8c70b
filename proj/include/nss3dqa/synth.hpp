#pragma once

// Seeded generators of canonical shapes and reproducible distortions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "model.hpp"

namespace nss3dqa {

enum class SynthShape { plane, line, sphere, grid_mesh, icosahedron };
enum class ColorPattern { uniform, gradient, random };

struct SynthSpec {
  SynthShape shape = SynthShape::sphere;
  std::size_t count = 1000;
  ColorPattern colors = ColorPattern::random;
  std::uint64_t seed = 0;
  double radius = 1.0;  // sphere / icosahedron radius, half-extent of plane, line and grid
};

namespace detail::synth {

inline std::vector<Rgb> paint(const std::vector<Vec3>& pts, ColorPattern pattern, std::mt19937_64& rng) {
  std::vector<Rgb> out(pts.size());
  if (pattern == ColorPattern::uniform) {
    std::fill(out.begin(), out.end(), Rgb{200, 120, 60});
  } else if (pattern == ColorPattern::random) {
    std::uniform_int_distribution<int> ch(0, 255);
    for (auto& c : out) c = {static_cast<std::uint8_t>(ch(rng)), static_cast<std::uint8_t>(ch(rng)),
                             static_cast<std::uint8_t>(ch(rng))};
  } else {
    Aabb box;
    for (const auto& p : pts) box.extend(p);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (int k = 0; k < 3; ++k) {
        const double ext = box.hi[k] - box.lo[k];
        const double t = ext > 0 ? (pts[i][k] - box.lo[k]) / ext : 0.5;
        out[i][k] = static_cast<std::uint8_t>(std::lround(255.0 * t));
      }
    }
  }
  return out;
}

inline ColoredMesh icosphere(std::size_t min_vertices, double radius) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v{{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<Face> f{{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (auto& p : v) p = p / norm(p);
  while (v.size() < min_vertices) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      const Vec3 m = 0.5 * (v[a] + v[b]);
      v.push_back(m / norm(m));
      const auto id = static_cast<std::uint32_t>(v.size() - 1);
      mid.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const auto a = midpoint(tri[0], tri[1]), b = midpoint(tri[1], tri[2]), c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  for (auto& p : v) p = radius * p;
  ColoredMesh m;
  m.vertices = std::move(v);
  m.faces = std::move(f);
  return m;
}

}  // namespace detail::synth

/// Deterministic model for a spec; the same spec always yields the same model.
inline ModelHandle generate(const SynthSpec& spec) {
  if (spec.count < 10) throw Error("synthetic models need at least 10 elements");
  if (!(spec.radius > 0)) throw Error("synthetic radius must be positive");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u(-spec.radius, spec.radius);
  const double r = spec.radius;

  switch (spec.shape) {
    case SynthShape::plane:
    case SynthShape::line:
    case SynthShape::sphere: {
      ColoredPointCloud c;
      c.positions.reserve(spec.count);
      std::normal_distribution<double> g(0.0, 1.0);
      for (std::size_t i = 0; i < spec.count; ++i) {
        if (spec.shape == SynthShape::plane) {
          const double x = u(rng), y = u(rng);
          c.positions.push_back({x, y, 0.0});
        } else if (spec.shape == SynthShape::line) {
          c.positions.push_back({u(rng), 0.0, 0.0});
        } else {
          Vec3 d;
          do {
            const double x = g(rng), y = g(rng), z = g(rng);
            d = {x, y, z};
          } while (norm(d) < 1e-9);
          c.positions.push_back(r * (d / norm(d)));
        }
      }
      c.colors = detail::synth::paint(c.positions, spec.colors, rng);
      return c;
    }
    case SynthShape::grid_mesh: {
      const auto side = static_cast<std::uint32_t>(std::ceil(std::sqrt(static_cast<double>(spec.count))));
      ColoredMesh m;
      const double step = 2.0 * r / (side - 1);
      for (std::uint32_t j = 0; j < side; ++j)
        for (std::uint32_t i = 0; i < side; ++i) m.vertices.push_back({-r + i * step, -r + j * step, 0.0});
      for (std::uint32_t j = 0; j + 1 < side; ++j)
        for (std::uint32_t i = 0; i + 1 < side; ++i) {
          const auto a = j * side + i, b = a + 1, c = a + side, d = c + 1;
          m.faces.push_back({a, b, d});
          m.faces.push_back({a, d, c});
        }
      m.vertex_colors = detail::synth::paint(m.vertices, spec.colors, rng);
      return m;
    }
    case SynthShape::icosahedron: {
      auto m = detail::synth::icosphere(spec.count, r);
      m.vertex_colors = detail::synth::paint(m.vertices, spec.colors, rng);
      return m;
    }
  }
  throw Error("unknown synthetic shape");
}

enum class DistortionKind { gaussian_noise, downsample, color_quantize };

struct Distortion {
  DistortionKind kind = DistortionKind::gaussian_noise;
  /// sigma for noise, keep ratio for downsampling, bits for quantization.
  double amount = 0.01;
};

inline const char* to_string(DistortionKind k) {
  switch (k) {
    case DistortionKind::gaussian_noise: return "noise";
    case DistortionKind::downsample: return "downsample";
    case DistortionKind::color_quantize: return "quantize";
  }
  return "?";
}

/// Maps a channel to `bits` of resolution by uniform rounding.
inline std::uint8_t quantize_channel(std::uint8_t c, int bits) {
  const double levels = std::ldexp(1.0, bits) - 1.0;
  const double q = std::round(c * levels / 255.0);
  return static_cast<std::uint8_t>(std::lround(q * 255.0 / levels));
}

inline ModelHandle distort(const ModelHandle& model, const Distortion& d, std::uint64_t seed) {
  validate(model);
  std::mt19937_64 rng(seed);
  ModelHandle out = model;
  auto& pos = std::visit([](auto& m) -> std::vector<Vec3>& {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, ColoredPointCloud>) return m.positions;
    else return m.vertices;
  }, out);
  auto& col = std::visit([](auto& m) -> std::vector<Rgb>& {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, ColoredPointCloud>) return m.colors;
    else return m.vertex_colors;
  }, out);

  switch (d.kind) {
    case DistortionKind::gaussian_noise: {
      if (!(d.amount > 0) || !std::isfinite(d.amount)) throw Error("noise sigma must be positive");
      std::normal_distribution<double> g(0.0, d.amount);
      for (auto& p : pos) {
        const double x = g(rng), y = g(rng), z = g(rng);
        p += Vec3{x, y, z};
      }
      break;
    }
    case DistortionKind::color_quantize: {
      const int bits = static_cast<int>(d.amount);
      if (bits < 1 || bits > 8 || bits != d.amount) throw Error("quantization bits must be an integer in [1, 8]");
      for (auto& c : col)
        for (auto& ch : c) ch = quantize_channel(ch, bits);
      break;
    }
    case DistortionKind::downsample: {
      if (!(d.amount > 0 && d.amount <= 1)) throw Error("downsample ratio must lie in (0, 1]");
      const auto n = pos.size();
      const auto keep = static_cast<std::size_t>(std::floor(d.amount * static_cast<double>(n)));
      if (keep < 10) throw Error("downsampling leaves " + std::to_string(keep) + " elements (< 10)");
      std::vector<std::uint32_t> idx(n);
      std::iota(idx.begin(), idx.end(), 0u);
      for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
      idx.resize(keep);
      std::sort(idx.begin(), idx.end());
      std::vector<std::uint32_t> remap(n, UINT32_MAX);
      std::vector<Vec3> p2;
      std::vector<Rgb> c2;
      for (std::uint32_t k = 0; k < keep; ++k) {
        remap[idx[k]] = k;
        p2.push_back(pos[idx[k]]);
        c2.push_back(col[idx[k]]);
      }
      pos = std::move(p2);
      col = std::move(c2);
      if (auto* m = std::get_if<ColoredMesh>(&out)) {
        std::vector<Face> faces;
        for (const auto& f : m->faces) {
          if (remap[f[0]] == UINT32_MAX || remap[f[1]] == UINT32_MAX || remap[f[2]] == UINT32_MAX) continue;
          faces.push_back({remap[f[0]], remap[f[1]], remap[f[2]]});
        }
        if (faces.empty()) throw Error("downsampling removed every face of the mesh");
        m->faces = std::move(faces);
      }
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic scored dataset

struct SynthDatasetSpec {
  std::size_t groups = 5;
  std::size_t points = 3000;
  std::size_t levels = 4;  // distortion levels per type
  bool meshes = false;
  ColorPattern colors = ColorPattern::random;
  std::uint64_t seed = 0;
  double mos_base = 10.0;
  double mos_slope = 8.0;
};

struct SynthItem {
  std::string name;
  std::string group;
  ModelHandle model;
  double mos = 0;
  std::string distortion;  // "reference", "noise", "quantize"
  std::size_t level = 0;
};

/// MOS rule for the synthetic dataset: base - slope * level / levels.
inline double synthetic_mos(const SynthDatasetSpec& s, std::size_t level) {
  return s.mos_base - s.mos_slope * static_cast<double>(level) / static_cast<double>(s.levels);
}

inline std::string synthetic_mos_formula(const SynthDatasetSpec& s) {
  return "mos = " + std::to_string(s.mos_base) + " - " + std::to_string(s.mos_slope) + " * level / " +
         std::to_string(s.levels) + "; noise sigma = 0.005 * 2^(level-1) * radius; quantize bits = 6 - level";
}

/// One content group per seed: a reference model plus `levels` geometry-noise
/// and `levels` color-quantization variants, scored by synthetic_mos.
inline std::vector<SynthItem> synth_dataset(const SynthDatasetSpec& s) {
  if (s.groups < 2) throw Error("synthetic dataset needs at least 2 groups");
  if (s.levels < 1 || s.levels > 4) throw Error("synthetic dataset levels must be in [1, 4]");
  std::vector<SynthItem> items;
  for (std::size_t g = 0; g < s.groups; ++g) {
    SynthSpec spec;
    spec.shape = s.meshes ? SynthShape::icosahedron : SynthShape::sphere;
    spec.count = s.points;
    spec.colors = s.colors;
    spec.seed = s.seed * 7919 + g;
    spec.radius = 1.0 + 0.25 * static_cast<double>(g);
    const auto ref = generate(spec);
    const std::string group = "content" + std::to_string(g);
    items.push_back({group + "_ref", group, ref, synthetic_mos(s, 0), "reference", 0});
    for (std::size_t lv = 1; lv <= s.levels; ++lv) {
      const double sigma = 0.005 * std::ldexp(1.0, static_cast<int>(lv) - 1) * spec.radius;
      const auto noisy = distort(ref, {DistortionKind::gaussian_noise, sigma}, spec.seed * 31 + lv);
      items.push_back({group + "_noise" + std::to_string(lv), group, noisy, synthetic_mos(s, lv), "noise", lv});
      const double bits = 6.0 - static_cast<double>(lv);
      const auto quant = distort(ref, {DistortionKind::color_quantize, bits}, 0);
      items.push_back({group + "_quant" + std::to_string(lv), group, quant, synthetic_mos(s, lv), "quantize", lv});
    }
  }
  return items;
}

}  // namespace nss3dqa
