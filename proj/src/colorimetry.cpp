#include "falmkit/colorimetry.hpp"

#include <cmath>
#include <string>

#include "falmkit/error.hpp"

namespace falmkit {
namespace {

// Derived from the sRGB primaries and kD65White so that (1,1,1) maps exactly onto the white.
constexpr double kRgbToXyz[3][3] = {
    {0.4124564390896921, 0.35757607764390897, 0.18043748326639893},
    {0.21267285140562249, 0.71515215528781794, 0.072174993306559572},
    {0.019333895582329317, 0.11919202588130299, 0.95030407853636769},
};

constexpr double kDelta = 6.0 / 29.0;

double lab_f(double t) {
  if (t > kDelta * kDelta * kDelta) return std::cbrt(t);
  return t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inv(double t) {
  if (t > kDelta) return t * t * t;
  return 3.0 * kDelta * kDelta * (t - 4.0 / 29.0);
}

void check_channel(double c) {
  if (!(c >= 0.0 && c <= 255.0)) {
    throw Error(ErrorKind::kInputDomain, "sRGB channel out of [0, 255]: " + std::to_string(c));
  }
}

}  // namespace

double srgb_to_linear(double channel) {
  check_channel(channel);
  const double v = channel / 255.0;
  if (v <= 0.04045) return v / 12.92;
  return std::pow((v + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double linear) {
  double v;
  if (linear <= 0.0031308) {
    v = 12.92 * linear;
  } else {
    v = 1.055 * std::pow(linear, 1.0 / 2.4) - 0.055;
  }
  return v * 255.0;
}

Xyz srgb_to_xyz(const Srgb& c) {
  const double r = srgb_to_linear(c.r);
  const double g = srgb_to_linear(c.g);
  const double b = srgb_to_linear(c.b);
  return {kRgbToXyz[0][0] * r + kRgbToXyz[0][1] * g + kRgbToXyz[0][2] * b,
          kRgbToXyz[1][0] * r + kRgbToXyz[1][1] * g + kRgbToXyz[1][2] * b,
          kRgbToXyz[2][0] * r + kRgbToXyz[2][1] * g + kRgbToXyz[2][2] * b};
}

LabColor xyz_to_lab(const Xyz& xyz) {
  const double fx = lab_f(xyz.x / kD65White.x);
  const double fy = lab_f(xyz.y / kD65White.y);
  const double fz = lab_f(xyz.z / kD65White.z);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

LabColor srgb_to_lab(const Srgb& c) { return xyz_to_lab(srgb_to_xyz(c)); }

Srgb lab_to_srgb(const LabColor& lab) {
  const double fy = (lab.L + 16.0) / 116.0;
  const double fx = fy + lab.a / 500.0;
  const double fz = fy - lab.b / 200.0;
  const double x = kD65White.x * lab_f_inv(fx);
  const double y = kD65White.y * lab_f_inv(fy);
  const double z = kD65White.z * lab_f_inv(fz);

  // Inverse of kRgbToXyz via its adjugate; 3x3 is small enough to do inline.
  const auto& m = kRgbToXyz;
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  const double inv[3][3] = {
      {(m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det, (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det,
       (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det},
      {(m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det, (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det,
       (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det},
      {(m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det, (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det,
       (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det},
  };
  const double r = inv[0][0] * x + inv[0][1] * y + inv[0][2] * z;
  const double g = inv[1][0] * x + inv[1][1] * y + inv[1][2] * z;
  const double b = inv[2][0] * x + inv[2][1] * y + inv[2][2] * z;
  return {linear_to_srgb(r), linear_to_srgb(g), linear_to_srgb(b)};
}

bool in_gamut(const Srgb& c) {
  constexpr double kSlack = 1e-9;
  auto ok = [](double v) { return v >= -kSlack && v <= 255.0 + kSlack; };
  return ok(c.r) && ok(c.g) && ok(c.b);
}

Srgb mean_srgb(std::span<const Srgb> pixels) {
  if (pixels.empty()) throw Error(ErrorKind::kEmptyInput, "mean_srgb: no pixels");
  // Compensated sums keep the mean exact enough for large face regions.
  double sr = 0, sg = 0, sb = 0, cr = 0, cg = 0, cb = 0;
  auto kahan = [](double& sum, double& comp, double v) {
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  };
  for (const auto& p : pixels) {
    kahan(sr, cr, p.r);
    kahan(sg, cg, p.g);
    kahan(sb, cb, p.b);
  }
  const auto n = static_cast<double>(pixels.size());
  return {sr / n, sg / n, sb / n};
}

}  // namespace falmkit
