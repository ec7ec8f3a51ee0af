#include "sculpt/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace sculpt {

void CameraPose::validate() const {
  if (!(theta > 0.0 && theta < std::numbers::pi))
    throw std::invalid_argument("CameraPose: theta must lie in (0, pi)");
  if (!(radius > 0.0)) throw std::invalid_argument("CameraPose: radius must be > 0");
  if (!(fov_y > 0.0 && fov_y < std::numbers::pi))
    throw std::invalid_argument("CameraPose: fov_y must lie in (0, pi)");
  if (image_size < 1) throw std::invalid_argument("CameraPose: image_size must be >= 1");
  if (!std::isfinite(phi)) throw std::invalid_argument("CameraPose: phi must be finite");
}

Vec3 CameraPose::position() const {
  return {radius * std::sin(theta) * std::cos(phi), radius * std::sin(theta) * std::sin(phi),
          radius * std::cos(theta)};
}

Mat3 CameraPose::camera_to_world() const {
  const Vec3 forward = normalized(-position());
  const Vec3 right = normalized(cross(forward, Vec3{0, 0, 1}));
  const Vec3 up = cross(right, forward);
  const Vec3 back = -forward;
  return {{{right.x, up.x, back.x}, {right.y, up.y, back.y}, {right.z, up.z, back.z}}};
}

Vec3 CameraPose::ray_direction(int px, int py) const {
  const Mat3 c2w = camera_to_world();
  const double half = std::tan(0.5 * fov_y);
  const double u = (2.0 * (px + 0.5) / image_size - 1.0) * half;
  const double v = (1.0 - 2.0 * (py + 0.5) / image_size) * half;
  return normalized(c2w * Vec3{u, v, -1.0});
}

void SidePoseSampler::validate() const {
  if (!(theta.lo <= theta.hi) || !(phi.lo <= phi.hi))
    throw std::invalid_argument("SidePoseSampler: empty angle range");
  if (!(theta.lo > 0.0 && theta.hi < std::numbers::pi))
    throw std::invalid_argument("SidePoseSampler: theta range must lie in (0, pi)");
}

CameraPose SidePoseSampler::sample(std::mt19937_64& rng, const CameraPose& base) const {
  std::uniform_real_distribution<double> ut(theta.lo, theta.hi);
  std::uniform_real_distribution<double> up(phi.lo, phi.hi);
  CameraPose p = base;
  p.theta = ut(rng);
  p.phi = up(rng);
  return p;
}

std::vector<CameraPose> azimuth_sweep(const CameraPose& base, const AngleRange& phi, int n) {
  if (n < 1) throw std::invalid_argument("azimuth_sweep: n must be >= 1");
  std::vector<CameraPose> poses;
  for (int i = 0; i < n; ++i) {
    CameraPose p = base;
    p.phi = n == 1 ? 0.5 * (phi.lo + phi.hi) : phi.lo + (phi.hi - phi.lo) * i / (n - 1);
    poses.push_back(p);
  }
  return poses;
}

}  // namespace sculpt
