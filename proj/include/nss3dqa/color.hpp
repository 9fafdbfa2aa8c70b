#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "model.hpp"

namespace nss3dqa {

/// CIE RGB -> XYZ matrix applied to unit-range RGB.
inline constexpr std::array<std::array<double, 3>, 3> kRgbToXyz{{
    {2.7688, 1.7517, 1.1301},
    {1.0000, 4.5906, 0.0601},
    {0.0, 0.0565, 5.5942},
}};

inline constexpr double kLabDelta = 6.0 / 29.0;

/// LAB companding function: cube root above delta^3, linear below.
inline double f_lab(double t) {
  constexpr double d = kLabDelta;
  if (t > d * d * d) return std::cbrt(t);
  return t / (3.0 * d * d) + 4.0 / 29.0;
}

inline std::array<double, 3> rgb_to_xyz(double r, double g, double b) {
  std::array<double, 3> out{};
  for (int i = 0; i < 3; ++i) out[i] = kRgbToXyz[i][0] * r + kRgbToXyz[i][1] * g + kRgbToXyz[i][2] * b;
  return out;
}

struct LabDomains {
  std::vector<double> L, A, B;
  /// Reference white: the matrix applied to (1, 1, 1).
  std::array<double, 3> white = rgb_to_xyz(1.0, 1.0, 1.0);
};

struct Lab {
  double L, A, B;
};

inline Lab rgb_to_lab(Rgb c) {
  static const auto white = rgb_to_xyz(1.0, 1.0, 1.0);
  const auto xyz = rgb_to_xyz(c[0] / 255.0, c[1] / 255.0, c[2] / 255.0);
  const double fx = f_lab(xyz[0] / white[0]);
  const double fy = f_lab(xyz[1] / white[1]);
  const double fz = f_lab(xyz[2] / white[2]);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

inline LabDomains rgb_to_lab(std::span<const Rgb> colors) {
  LabDomains d;
  d.L.reserve(colors.size());
  d.A.reserve(colors.size());
  d.B.reserve(colors.size());
  for (const auto& c : colors) {
    const auto lab = rgb_to_lab(c);
    d.L.push_back(lab.L);
    d.A.push_back(lab.A);
    d.B.push_back(lab.B);
  }
  return d;
}

}  // namespace nss3dqa
