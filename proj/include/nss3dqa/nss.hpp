#pragma once

// Statistical summaries of a feature domain: mean, standard deviation,
// histogram entropy and moment-matched GGD / AGGD / Gamma parameters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace nss3dqa {

enum class DomainName { Cur, Ani, Lin, Pla, Sph, Dih, Far, Fan, L, A, B };

inline const char* to_string(DomainName d) {
  static constexpr const char* names[] = {"Cur", "Ani", "Lin", "Pla", "Sph", "Dih", "Far", "Fan", "L", "A", "B"};
  return names[static_cast<int>(d)];
}

struct FeatureDomain {
  DomainName name;
  std::vector<double> values;
};

/// Added to the standard deviation when normalizing a domain.
inline constexpr double kNormalizeEpsilon = 1e-6;
inline constexpr std::size_t kDefaultEntropyBins = 256;
inline constexpr std::size_t kMinFitSamples = 16;

namespace detail::nss {
inline bool is_constant(std::span<const double> x) {
  return std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end();
}
}  // namespace detail::nss

inline double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Population standard deviation.
inline double stddev(std::span<const double> x) {
  if (detail::nss::is_constant(x)) return 0.0;
  const double m = mean(x);
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size()));
}

/// (x - mean) / (std + 1e-6).
inline std::vector<double> normalize(std::span<const double> x) {
  // a rounded mean can leave tiny residuals on a constant domain
  if (detail::nss::is_constant(x)) return std::vector<double>(x.size(), 0.0);
  const double m = mean(x);
  const double s = stddev(x) + kNormalizeEpsilon;
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [&](double v) { return (v - m) / s; });
  return out;
}

/// Shannon entropy (bits) of a histogram with `bins` equal-width bins over [min, max].
inline double entropy(std::span<const double> x, std::size_t bins = kDefaultEntropyBins) {
  if (bins < 2) throw Error("entropy needs at least 2 bins");
  if (x.empty()) return 0.0;
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) return 0.0;
  std::vector<std::size_t> hist(bins, 0);
  const double scale = static_cast<double>(bins) / (hi - lo);
  for (double v : x) {
    auto b = static_cast<std::size_t>((v - lo) * scale);
    hist[std::min(b, bins - 1)]++;
  }
  const double n = static_cast<double>(x.size());
  double h = 0;
  for (auto c : hist) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

struct GgdParams {
  double alpha = 0;     // shape
  double variance = 0;  // sigma^2
};

struct AggdParams {
  double eta = 0;  // beta_r - beta_l
  double nu = 0;   // shape
  double left_variance = 0;
  double right_variance = 0;
};

struct GammaParams {
  double alpha = 0;  // shape
  double beta = 0;   // rate
};

namespace detail::nss {

/// Generalized Gaussian moment ratio Γ(2/a)^2 / (Γ(1/a) Γ(3/a)), increasing in a.
inline double ggd_ratio(double a) {
  const double g2 = std::tgamma(2.0 / a);
  return g2 * g2 / (std::tgamma(1.0 / a) * std::tgamma(3.0 / a));
}

struct ShapeGrid {
  static constexpr double lo = 0.2, hi = 10.0, step = 0.001;
  std::vector<double> shape, ratio;

  ShapeGrid() {
    const auto n = static_cast<std::size_t>(std::lround((hi - lo) / step)) + 1;
    shape.resize(n);
    ratio.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      shape[i] = lo + step * static_cast<double>(i);
      ratio[i] = ggd_ratio(shape[i]);
    }
  }

  /// Grid shape whose moment ratio is closest to r.
  double invert(double r) const {
    const auto it = std::lower_bound(ratio.begin(), ratio.end(), r);
    if (it == ratio.begin()) return shape.front();
    if (it == ratio.end()) return shape.back();
    const auto i = static_cast<std::size_t>(it - ratio.begin());
    return (r - ratio[i - 1] <= ratio[i] - r) ? shape[i - 1] : shape[i];
  }
};

inline const ShapeGrid& shape_grid() {
  static const ShapeGrid grid;
  return grid;
}

inline void require_samples(std::span<const double> x, const char* what) {
  if (x.size() < kMinFitSamples)
    throw DegenerateDistributionError(std::string(what) + " fit needs at least " + std::to_string(kMinFitSamples) +
                                      " samples, got " + std::to_string(x.size()));
}

}  // namespace detail::nss

/// Inverts the GGD moment ratio on the shape grid [0.2, 10] (step 0.001).
inline double invert_ggd_ratio(double r) { return detail::nss::shape_grid().invert(r); }

/// Moment-ratio GGD fit after centering; variance is the population variance.
inline GgdParams fit_ggd(std::span<const double> x) {
  detail::nss::require_samples(x, "GGD");
  if (detail::nss::is_constant(x)) throw DegenerateDistributionError("GGD fit on a constant sample");
  const double m = mean(x);
  double abs_sum = 0, sq_sum = 0;
  for (double v : x) {
    const double c = v - m;
    abs_sum += std::abs(c);
    sq_sum += c * c;
  }
  const double n = static_cast<double>(x.size());
  const double e_abs = abs_sum / n, e_sq = sq_sum / n;
  if (!(e_sq > 0)) throw DegenerateDistributionError("GGD fit on a constant sample");
  return {invert_ggd_ratio(e_abs * e_abs / e_sq), e_sq};
}

struct AggdFit {
  AggdParams params;
  /// One side of the sample was empty; its variance was clamped to 0.
  bool one_sided = false;
};

/// Asymmetric GGD fit by moment matching. Values below zero form the left
/// side, the rest the right side.
inline AggdFit fit_aggd_detailed(std::span<const double> x) {
  detail::nss::require_samples(x, "AGGD");
  double left_sq = 0, right_sq = 0, abs_sum = 0;
  std::size_t nl = 0, nr = 0;
  for (double v : x) {
    if (v < 0) {
      left_sq += v * v;
      ++nl;
    } else {
      right_sq += v * v;
      ++nr;
    }
    abs_sum += std::abs(v);
  }
  const double n = static_cast<double>(x.size());
  const double e_sq = (left_sq + right_sq) / n;
  if (!(e_sq > 0)) throw DegenerateDistributionError("AGGD fit on an all-zero sample");
  const double e_abs = abs_sum / n;
  const double r_hat = e_abs * e_abs / e_sq;

  AggdFit fit;
  auto& p = fit.params;
  p.left_variance = nl > 0 ? left_sq / static_cast<double>(nl) : 0.0;
  p.right_variance = nr > 0 ? right_sq / static_cast<double>(nr) : 0.0;
  const double sl = std::sqrt(p.left_variance), sr = std::sqrt(p.right_variance);
  double big_r = r_hat;
  if (sl > 0 && sr > 0) {
    const double g = sl / sr;
    big_r = r_hat * (g * g * g + 1.0) * (g + 1.0) / ((g * g + 1.0) * (g * g + 1.0));
  } else {
    fit.one_sided = true;
  }
  p.nu = invert_ggd_ratio(big_r);
  const double k = std::sqrt(std::tgamma(1.0 / p.nu) / std::tgamma(3.0 / p.nu));
  p.eta = sr * k - sl * k;
  return fit;
}

inline AggdParams fit_aggd(std::span<const double> x) { return fit_aggd_detailed(x).params; }

/// Shape-rate Gamma fit by the method of moments after shifting the sample
/// to start at 1e-6.
inline GammaParams fit_gamma(std::span<const double> x) {
  detail::nss::require_samples(x, "Gamma");
  const double lo = *std::min_element(x.begin(), x.end());
  const double shift = -lo + 1e-6;
  double s = 0;
  for (double v : x) s += v + shift;
  const double n = static_cast<double>(x.size());
  const double m = s / n;
  double ss = 0;
  for (double v : x) ss += (v + shift - m) * (v + shift - m);
  const double var = ss / n;
  if (!(var >= 1e-12)) throw DegenerateDistributionError("Gamma fit on a sample with variance below 1e-12");
  return {m * m / var, m / var};
}

/// Bits of DomainSummary::flags.
enum DegeneracyFlag : std::uint32_t {
  kGgdDegenerate = 1u << 0,
  kAggdDegenerate = 1u << 1,
  kGammaDegenerate = 1u << 2,
  kAggdOneSided = 1u << 3,
};

struct DomainSummary {
  double mean = 0, std = 0, entropy = 0;
  GgdParams ggd;
  AggdParams aggd;
  GammaParams gamma;
  std::uint32_t flags = 0;
};

/// Mean, std and GGD on the raw values; entropy, AGGD and Gamma on the
/// normalized values. Failed fits are left at zero and flagged.
inline DomainSummary summarize_domain(std::span<const double> raw, std::size_t bins = kDefaultEntropyBins) {
  for (double v : raw)
    if (!std::isfinite(v)) throw Error("feature domain contains a non-finite value");
  DomainSummary s;
  s.mean = mean(raw);
  s.std = stddev(raw);
  const auto norm = normalize(raw);
  s.entropy = entropy(norm, bins);
  try {
    s.ggd = fit_ggd(raw);
  } catch (const DegenerateDistributionError&) {
    s.flags |= kGgdDegenerate;
  }
  try {
    const auto fit = fit_aggd_detailed(norm);
    s.aggd = fit.params;
    if (fit.one_sided) s.flags |= kAggdOneSided;
  } catch (const DegenerateDistributionError&) {
    s.flags |= kAggdDegenerate;
  }
  try {
    s.gamma = fit_gamma(norm);
  } catch (const DegenerateDistributionError&) {
    s.flags |= kGammaDegenerate;
  }
  return s;
}

inline DomainSummary summarize_domain(const FeatureDomain& d, std::size_t bins = kDefaultEntropyBins) {
  return summarize_domain(d.values, bins);
}

}  // namespace nss3dqa
