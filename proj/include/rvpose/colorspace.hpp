#pragma once

#include "rvpose/core.hpp"

namespace rvpose {

struct LabColor {
  double L = 0.0;
  double a = 0.0;
  double b = 0.0;
};

/// IEC 61966-2-1 sRGB -> linear -> XYZ (D65, 2 degree observer) -> CIELAB.
/// Throws OutOfGamutInput for components outside [0, 1].
LabColor srgb_to_lab(const Rgb &rgb);

// Unchecked variants used on hot paths where inputs are already clamped.
float srgb_decode(float c);
float srgb_encode(float linear);
Eigen::Vector3f srgb_to_lab_unchecked(const Rgb &rgb);

/// CIEDE2000 color difference with kL = kC = kH = 1.
double ciede2000(const LabColor &c1, const LabColor &c2);

inline LabColor to_lab(const Eigen::Vector3f &v) { return {double(v.x()), double(v.y()), double(v.z())}; }

}  // namespace rvpose
