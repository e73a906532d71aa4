#pragma once

#include <span>

namespace falmkit {

/// sRGB triple with channels promoted to reals in [0, 255].
struct Srgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  friend bool operator==(const Srgb&, const Srgb&) = default;
};

/// CIELAB colour, D65 white, 2 degree observer.
struct LabColor {
  double L = 0.0;
  double a = 0.0;
  double b = 0.0;
};

struct Xyz {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// D65 reference white used for every conversion in the toolkit.
inline constexpr Xyz kD65White{0.95047, 1.0, 1.08883};

/// sRGB electro-optical transfer function. Throws kInputDomain outside [0, 255].
double srgb_to_linear(double channel);

/// Inverse of srgb_to_linear, returning a channel value in [0, 255].
double linear_to_srgb(double linear);

Xyz srgb_to_xyz(const Srgb& c);
LabColor xyz_to_lab(const Xyz& xyz);
LabColor srgb_to_lab(const Srgb& c);

/// Inverse conversion. The result is not clamped; callers check gamut with in_gamut().
Srgb lab_to_srgb(const LabColor& lab);
bool in_gamut(const Srgb& c);

/// Per-channel arithmetic mean. Averaging happens in sRGB space, before any Lab conversion.
Srgb mean_srgb(std::span<const Srgb> pixels);

}  // namespace falmkit
