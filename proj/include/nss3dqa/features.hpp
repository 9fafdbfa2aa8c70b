#pragma once

// Feature-vector assembly: 8 domains x 11 parameters for point clouds,
// 7 x 11 for meshes.

#include <array>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "color.hpp"
#include "mesh_features.hpp"
#include "model.hpp"
#include "nss.hpp"
#include "pc_features.hpp"

namespace nss3dqa {

struct ExtractConfig {
  std::size_t knn = 10;
  bool include_self = false;
  std::size_t entropy_bins = kDefaultEntropyBins;
  double curvature_radius_frac = 0.01;
  unsigned threads = 1;
};

inline constexpr std::size_t kParamsPerDomain = 11;
inline constexpr std::size_t kPointCloudFeatureCount = 88;
inline constexpr std::size_t kMeshFeatureCount = 77;

/// Domain order of the feature vector; geometry domains first, then L, A, B.
inline std::span<const DomainName> domain_layout(ModelKind kind) {
  static constexpr std::array<DomainName, 8> pc{DomainName::Cur, DomainName::Ani, DomainName::Lin, DomainName::Pla,
                                                DomainName::Sph, DomainName::L,   DomainName::A,   DomainName::B};
  static constexpr std::array<DomainName, 7> mesh{DomainName::Cur, DomainName::Dih, DomainName::Far, DomainName::Fan,
                                                  DomainName::L,   DomainName::A,   DomainName::B};
  if (kind == ModelKind::point_cloud) return pc;
  return mesh;
}

inline std::size_t geometry_domain_count(ModelKind kind) { return kind == ModelKind::point_cloud ? 5 : 4; }
inline std::size_t feature_count(ModelKind kind) { return domain_layout(kind).size() * kParamsPerDomain; }

/// Parameter blocks in vector order. Each block holds `width` values for every
/// domain, domain-major: [mean,std] x D, [entropy] x D, [ggd alpha, variance] x D,
/// [aggd eta, nu, left var, right var] x D, [gamma alpha, beta] x D.
enum class ParamBlock { mean_std, entropy, ggd, aggd, gamma };

struct BlockSpan {
  std::size_t offset, width;
};

inline BlockSpan block_span(ParamBlock b, std::size_t domains) {
  switch (b) {
    case ParamBlock::mean_std: return {0, 2};
    case ParamBlock::entropy: return {2 * domains, 1};
    case ParamBlock::ggd: return {3 * domains, 2};
    case ParamBlock::aggd: return {5 * domains, 4};
    case ParamBlock::gamma: return {9 * domains, 2};
  }
  return {0, 0};
}

struct QualityFeatureVector {
  ModelKind kind = ModelKind::point_cloud;
  std::vector<double> values;
  /// DegeneracyFlag bits of each domain, in domain_layout order.
  std::vector<std::uint32_t> domain_flags;

  /// All domain flags packed 4 bits per domain.
  std::uint64_t degeneracy_mask() const {
    std::uint64_t m = 0;
    for (std::size_t i = 0; i < domain_flags.size(); ++i) m |= static_cast<std::uint64_t>(domain_flags[i] & 0xF) << (4 * i);
    return m;
  }
};

inline QualityFeatureVector assemble_summaries(ModelKind kind, std::span<const DomainSummary> s) {
  const auto d = s.size();
  QualityFeatureVector v;
  v.kind = kind;
  v.values.assign(d * kParamsPerDomain, 0.0);
  auto put = [&](ParamBlock b, std::size_t dom, std::initializer_list<double> xs) {
    const auto sp = block_span(b, d);
    std::size_t k = 0;
    for (double x : xs) v.values[sp.offset + dom * sp.width + k++] = x;
  };
  for (std::size_t i = 0; i < d; ++i) {
    put(ParamBlock::mean_std, i, {s[i].mean, s[i].std});
    put(ParamBlock::entropy, i, {s[i].entropy});
    put(ParamBlock::ggd, i, {s[i].ggd.alpha, s[i].ggd.variance});
    put(ParamBlock::aggd, i, {s[i].aggd.eta, s[i].aggd.nu, s[i].aggd.left_variance, s[i].aggd.right_variance});
    put(ParamBlock::gamma, i, {s[i].gamma.alpha, s[i].gamma.beta});
    v.domain_flags.push_back(s[i].flags);
  }
  return v;
}

/// Projects the model into its feature domains, in domain_layout order.
inline std::vector<FeatureDomain> project_domains(const ModelHandle& model, const ExtractConfig& cfg = {}) {
  validate(model);
  std::vector<FeatureDomain> out;
  if (const auto* pc = std::get_if<ColoredPointCloud>(&model)) {
    auto g = project_pc_geometry(*pc, {cfg.knn, cfg.include_self, cfg.threads});
    out.push_back({DomainName::Cur, std::move(g.curvature)});
    out.push_back({DomainName::Ani, std::move(g.anisotropy)});
    out.push_back({DomainName::Lin, std::move(g.linearity)});
    out.push_back({DomainName::Pla, std::move(g.planarity)});
    out.push_back({DomainName::Sph, std::move(g.sphericity)});
  } else {
    const auto& mesh = std::get<ColoredMesh>(model);
    auto g = project_mesh_geometry(mesh, {cfg.curvature_radius_frac, cfg.threads});
    out.push_back({DomainName::Cur, std::move(g.curvature)});
    out.push_back({DomainName::Dih, std::move(g.dihedral)});
    out.push_back({DomainName::Far, std::move(g.face_area)});
    out.push_back({DomainName::Fan, std::move(g.face_angle)});
  }
  auto lab = rgb_to_lab(colors_of(model));
  out.push_back({DomainName::L, std::move(lab.L)});
  out.push_back({DomainName::A, std::move(lab.A)});
  out.push_back({DomainName::B, std::move(lab.B)});
  return out;
}

inline QualityFeatureVector assemble_features(const ModelHandle& model, const ExtractConfig& cfg = {}) {
  const auto domains = project_domains(model, cfg);
  std::vector<DomainSummary> sums;
  sums.reserve(domains.size());
  for (const auto& d : domains) sums.push_back(summarize_domain(d.values, cfg.entropy_bins));
  return assemble_summaries(kind_of(model), sums);
}

}  // namespace nss3dqa
