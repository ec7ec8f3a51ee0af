#pragma once

#include <array>
#include <string>

#include "sculpt/image.hpp"
#include "sculpt/vec3.hpp"

namespace sculpt {

struct RenderedView;
struct ViewCotangent;

inline constexpr int kShCoeffs = 9;
using ShVector = std::array<double, kShCoeffs>;

enum class LightingFrame { World, Camera };

std::string to_string(LightingFrame frame);
LightingFrame lighting_frame_from_string(const std::string& s);

// Order-2 real SH lighting, coefficients ordered (0,0),(1,-1),(1,0),(1,1),(2,-2),(2,-1),
// (2,0),(2,1),(2,2).
struct SHLighting {
  ShVector coeffs{};
  LightingFrame frame = LightingFrame::World;

  bool operator==(const SHLighting&) const = default;
};

// Orthonormal real spherical harmonics up to band 2. Throws on non-unit input.
ShVector sh_basis(const Vec3& n);
// No unit-norm check; used on the hot path where n is normalised by construction.
ShVector sh_basis_unchecked(const Vec3& n);
// Vector-Jacobian product: returns (dB/dn)^T g.
Vec3 sh_basis_vjp(const Vec3& n, const ShVector& g);

double sh_dot(const ShVector& basis, const ShVector& coeffs);

// albedo * max(0, B(n) . L), clamped to [0,1].
Vec3 lambertian_shade(const Vec3& albedo, const Vec3& n, const SHLighting& light);

// Ridge least-squares fit of luminance against B(normal) over pixels with coverage > 0.5.
SHLighting estimate_lighting(const RenderedView& view, double ridge);

// Cotangent on the rgb and normal buffers for a cotangent on the estimated coefficients.
ViewCotangent estimate_lighting_vjp(const RenderedView& view, double ridge,
                                    const ShVector& coeff_cotangent);

struct IlluminationLoss {
  double value = 0.0;
  SHLighting estimate;
};

// L1 distance between the estimated and target coefficients (both WORLD frame).
IlluminationLoss illumination_loss(const RenderedView& view, const SHLighting& target,
                                   double ridge);
// Returns the loss value and writes the view cotangent (scaled by `scale`) into `out`.
double illumination_loss_with_grad(const RenderedView& view, const SHLighting& target,
                                   double ridge, double scale, ViewCotangent& out);

// Coefficients of f(d) = B(R^-1 d) . L, by least-squares fit over a Fibonacci sphere.
SHLighting sh_rotate(const SHLighting& light, const Mat3& rotation);

// Luminance weights.
inline constexpr Vec3 kLuma{0.299, 0.587, 0.114};

}  // namespace sculpt
