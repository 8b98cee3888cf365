#include "rvpose/colorspace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rvpose {
namespace {

constexpr double kWhiteX = 0.95047;
constexpr double kWhiteY = 1.0;
constexpr double kWhiteZ = 1.08883;
constexpr double kEpsilon = 216.0 / 24389.0;  // (6/29)^3
constexpr double kKappa = 24389.0 / 27.0;     // (29/3)^3

double decode(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }

double lab_f(double t) { return t > kEpsilon ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0; }

LabColor linear_to_lab(double r, double g, double b) {
  const double x = 0.412453 * r + 0.357580 * g + 0.180423 * b;
  const double y = 0.212671 * r + 0.715160 * g + 0.072169 * b;
  const double z = 0.019334 * r + 0.119193 * g + 0.950227 * b;
  const double fx = lab_f(x / kWhiteX);
  const double fy = lab_f(y / kWhiteY);
  const double fz = lab_f(z / kWhiteZ);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

double deg(double rad) { return rad * 180.0 / std::numbers::pi; }
double rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

float srgb_decode(float c) { return float(decode(double(c))); }

float srgb_encode(float linear) {
  const double l = std::clamp(double(linear), 0.0, 1.0);
  return float(l <= 0.0031308 ? 12.92 * l : 1.055 * std::pow(l, 1.0 / 2.4) - 0.055);
}

LabColor srgb_to_lab(const Rgb &rgb) {
  for (float c : {rgb.r, rgb.g, rgb.b})
    if (!(c >= 0.f && c <= 1.f)) throw Error(ErrorCode::OutOfGamutInput, "sRGB component outside [0, 1]");
  return linear_to_lab(decode(rgb.r), decode(rgb.g), decode(rgb.b));
}

Eigen::Vector3f srgb_to_lab_unchecked(const Rgb &rgb) {
  const LabColor lab = linear_to_lab(decode(std::clamp(double(rgb.r), 0.0, 1.0)),
                                     decode(std::clamp(double(rgb.g), 0.0, 1.0)),
                                     decode(std::clamp(double(rgb.b), 0.0, 1.0)));
  return {float(lab.L), float(lab.a), float(lab.b)};
}

double ciede2000(const LabColor &c1, const LabColor &c2) {
  const double pow25_7 = 6103515625.0;  // 25^7

  const double c1_ab = std::hypot(c1.a, c1.b);
  const double c2_ab = std::hypot(c2.a, c2.b);
  const double c_mean = 0.5 * (c1_ab + c2_ab);
  const double c_mean7 = std::pow(c_mean, 7.0);
  const double g = 0.5 * (1.0 - std::sqrt(c_mean7 / (c_mean7 + pow25_7)));

  const double a1p = (1.0 + g) * c1.a;
  const double a2p = (1.0 + g) * c2.a;
  const double c1p = std::hypot(a1p, c1.b);
  const double c2p = std::hypot(a2p, c2.b);

  auto hue = [](double b, double ap) {
    if (b == 0.0 && ap == 0.0) return 0.0;
    double h = deg(std::atan2(b, ap));
    return h < 0.0 ? h + 360.0 : h;
  };
  const double h1p = hue(c1.b, a1p);
  const double h2p = hue(c2.b, a2p);

  const double dLp = c2.L - c1.L;
  const double dCp = c2p - c1p;

  const double chroma_product = c1p * c2p;
  double dhp = 0.0;
  if (chroma_product != 0.0) {
    dhp = h2p - h1p;
    if (dhp > 180.0) dhp -= 360.0;
    else if (dhp < -180.0) dhp += 360.0;
  }
  const double dHp = 2.0 * std::sqrt(chroma_product) * std::sin(rad(dhp) / 2.0);

  const double L_mean = 0.5 * (c1.L + c2.L);
  const double Cp_mean = 0.5 * (c1p + c2p);

  double hp_mean = h1p + h2p;
  if (chroma_product != 0.0) {
    if (std::abs(h1p - h2p) <= 180.0) hp_mean = 0.5 * (h1p + h2p);
    else if (h1p + h2p < 360.0) hp_mean = 0.5 * (h1p + h2p + 360.0);
    else hp_mean = 0.5 * (h1p + h2p - 360.0);
  }

  const double t = 1.0 - 0.17 * std::cos(rad(hp_mean - 30.0)) + 0.24 * std::cos(rad(2.0 * hp_mean)) +
                   0.32 * std::cos(rad(3.0 * hp_mean + 6.0)) - 0.20 * std::cos(rad(4.0 * hp_mean - 63.0));
  const double d_theta = 30.0 * std::exp(-std::pow((hp_mean - 275.0) / 25.0, 2.0));
  const double cp_mean7 = std::pow(Cp_mean, 7.0);
  const double r_c = 2.0 * std::sqrt(cp_mean7 / (cp_mean7 + pow25_7));
  const double l50 = (L_mean - 50.0) * (L_mean - 50.0);
  const double s_l = 1.0 + 0.015 * l50 / std::sqrt(20.0 + l50);
  const double s_c = 1.0 + 0.045 * Cp_mean;
  const double s_h = 1.0 + 0.015 * Cp_mean * t;
  const double r_t = -std::sin(rad(2.0 * d_theta)) * r_c;

  const double tl = dLp / s_l;
  const double tc = dCp / s_c;
  const double th = dHp / s_h;
  return std::sqrt(tl * tl + tc * tc + th * th + r_t * tc * th);
}

}  // namespace rvpose
