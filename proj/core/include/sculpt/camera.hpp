#pragma once

#include <numbers>
#include <random>

#include "sculpt/vec3.hpp"

namespace sculpt {

// Spherical camera on a sphere around the origin, looking at the origin with +z up.
struct CameraPose {
  double theta = std::numbers::pi / 2;  // polar angle from +z
  double phi = std::numbers::pi / 2;    // azimuth from +x
  double radius = 2.7;
  double fov_y = 0.4;
  int image_size = 64;

  void validate() const;

  Vec3 position() const;
  // Columns are the camera right, up and backward axes in world coordinates.
  Mat3 camera_to_world() const;
  // Unit direction through the centre of pixel (px, py); py grows downwards.
  Vec3 ray_direction(int px, int py) const;

  bool operator==(const CameraPose&) const = default;
};

struct AngleRange {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
  bool operator==(const AngleRange&) const = default;
};

inline constexpr AngleRange kDefaultSideRange{std::numbers::pi / 2 - std::numbers::pi / 12,
                                              std::numbers::pi / 2 + std::numbers::pi / 12};

// Side views drawn uniformly from independent theta and phi ranges.
struct SidePoseSampler {
  AngleRange theta = kDefaultSideRange;
  AngleRange phi = kDefaultSideRange;

  void validate() const;
  CameraPose sample(std::mt19937_64& rng, const CameraPose& base) const;
  bool operator==(const SidePoseSampler&) const = default;
};

// n poses sharing base theta with phi evenly spanning the range.
std::vector<CameraPose> azimuth_sweep(const CameraPose& base, const AngleRange& phi, int n);

}  // namespace sculpt
