#pragma once

// Reference volume renderer used by tests. It shares no code with render_scene: the scene
// is evaluated sample by sample, transmittance is a running product, and the SH basis is
// spelled out inline. The scalar type is a template parameter so tests can push
// forward-mode dual numbers through it.

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "sculpt/camera.hpp"
#include "sculpt/scene.hpp"

namespace sculpt {

inline double primal(double x) { return x; }

template <class T>
struct OracleBlob {
  std::array<T, 3> center{};
  T scale{};
  T density{};
  std::array<T, 3> albedo{};
};

template <class T>
struct OracleScene {
  std::vector<OracleBlob<T>> blobs;
  std::array<T, 9> lighting{};
};

template <class T>
struct OracleView {
  int size = 0;
  std::vector<T> rgb;       // size*size*3
  std::vector<T> normal;    // size*size*3
  std::vector<T> albedo;    // size*size*3
  std::vector<T> coverage;  // size*size
};

inline OracleScene<double> to_oracle_scene(const ToySceneParams& params) {
  OracleScene<double> s;
  for (const auto& b : params.blobs) {
    OracleBlob<double> ob;
    ob.center = {b.center.x, b.center.y, b.center.z};
    ob.scale = b.scale;
    ob.density = b.density;
    ob.albedo = {b.albedo.x, b.albedo.y, b.albedo.z};
    s.blobs.push_back(ob);
  }
  for (int i = 0; i < 9; ++i) s.lighting[i] = params.lighting.coeffs[i];
  return s;
}

namespace oracle_detail {

template <class T>
std::array<T, 9> basis(const std::array<T, 3>& n) {
  const double pi = std::numbers::pi;
  const double c0 = 0.5 / std::sqrt(pi);
  const double c1 = std::sqrt(3.0 / (4.0 * pi));
  const double c2 = 0.5 * std::sqrt(15.0 / pi);
  const double c3 = 0.25 * std::sqrt(5.0 / pi);
  const double c4 = 0.25 * std::sqrt(15.0 / pi);
  const T& x = n[0];
  const T& y = n[1];
  const T& z = n[2];
  return {T(c0),           c1 * y,       c1 * z,       c1 * x,
          c2 * x * y,      c2 * y * z,   c3 * (3.0 * z * z - 1.0),
          c2 * x * z,      c4 * (x * x - y * y)};
}

template <class T>
T clamp01(const T& v) {
  if (primal(v) < 0.0) return T(0.0);
  if (primal(v) > 1.0) return T(1.0);
  return v;
}

}  // namespace oracle_detail

template <class T>
OracleView<T> render_oracle(const OracleScene<T>& scene, const CameraPose& pose,
                            int samples_per_ray, double near, double far) {
  using std::exp;
  using std::sqrt;
  pose.validate();
  if (!(near < far)) throw std::invalid_argument("render_oracle: near must be < far");
  if (samples_per_ray < 2) throw std::invalid_argument("render_oracle: samples_per_ray < 2");

  const int n = pose.image_size;
  OracleView<T> view;
  view.size = n;
  view.rgb.assign(static_cast<std::size_t>(n) * n * 3, T(0.0));
  view.normal.assign(static_cast<std::size_t>(n) * n * 3, T(0.0));
  view.albedo.assign(static_cast<std::size_t>(n) * n * 3, T(0.0));
  view.coverage.assign(static_cast<std::size_t>(n) * n, T(0.0));

  const Vec3 origin = pose.position();
  const double dt = (far - near) / samples_per_ray;

  for (int py = 0; py < n; ++py) {
    for (int px = 0; px < n; ++px) {
      const Vec3 dir = pose.ray_direction(px, py);
      T transmittance(1.0);
      std::array<T, 3> rgb{T(0.0), T(0.0), T(0.0)};
      std::array<T, 3> nrm{T(0.0), T(0.0), T(0.0)};
      std::array<T, 3> alb{T(0.0), T(0.0), T(0.0)};
      T acc(0.0);

      for (int s = 0; s < samples_per_ray; ++s) {
        const double t = near + (s + 0.5) * dt;
        const std::array<double, 3> p{origin.x + t * dir.x, origin.y + t * dir.y,
                                      origin.z + t * dir.z};
        T sigma(0.0);
        std::array<T, 3> neg_grad{T(0.0), T(0.0), T(0.0)};
        std::array<T, 3> weighted_albedo{T(0.0), T(0.0), T(0.0)};
        for (const auto& b : scene.blobs) {
          std::array<T, 3> d{p[0] - b.center[0], p[1] - b.center[1], p[2] - b.center[2]};
          T r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
          T s2 = b.scale * b.scale;
          T g = b.density * exp(-r2 / (2.0 * s2));
          sigma = sigma + g;
          for (int k = 0; k < 3; ++k) {
            neg_grad[k] = neg_grad[k] + g * d[k] / s2;
            weighted_albedo[k] = weighted_albedo[k] + g * b.albedo[k];
          }
        }
        T gnorm = sqrt(neg_grad[0] * neg_grad[0] + neg_grad[1] * neg_grad[1] +
                       neg_grad[2] * neg_grad[2]);
        std::array<T, 3> normal{T(0.0), T(0.0), T(1.0)};
        if (primal(gnorm) > 0.0) {
          for (int k = 0; k < 3; ++k) normal[k] = neg_grad[k] / gnorm;
        }
        const T denom = primal(sigma) > 1e-12 ? sigma : T(1e-12);
        std::array<T, 3> albedo{weighted_albedo[0] / denom, weighted_albedo[1] / denom,
                                weighted_albedo[2] / denom};
        const auto basis = oracle_detail::basis(normal);
        T shade(0.0);
        for (int k = 0; k < 9; ++k) shade = shade + basis[k] * scene.lighting[k];
        if (primal(shade) < 0.0) shade = T(0.0);

        const T alpha = 1.0 - exp(-sigma * dt);
        const T weight = transmittance * alpha;
        for (int k = 0; k < 3; ++k) {
          rgb[k] = rgb[k] + weight * albedo[k] * shade;
          nrm[k] = nrm[k] + weight * normal[k];
          alb[k] = alb[k] + weight * albedo[k];
        }
        acc = acc + weight;
        transmittance = transmittance * (1.0 - alpha);
      }

      const std::size_t pix = static_cast<std::size_t>(py) * n + px;
      view.coverage[pix] = acc;
      for (int k = 0; k < 3; ++k) {
        view.rgb[pix * 3 + k] = oracle_detail::clamp01(rgb[k]);
        view.albedo[pix * 3 + k] = alb[k];
      }
      if (primal(acc) > kCoverageNormalThreshold) {
        T len = sqrt(nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]);
        if (primal(len) > 1e-300) {
          for (int k = 0; k < 3; ++k) view.normal[pix * 3 + k] = nrm[k] / len;
        } else {
          view.normal[pix * 3 + 0] = T(-dir.x);
          view.normal[pix * 3 + 1] = T(-dir.y);
          view.normal[pix * 3 + 2] = T(-dir.z);
        }
      }
    }
  }
  return view;
}

inline RenderedView to_rendered_view(const OracleView<double>& v, const CameraPose& pose) {
  RenderedView out;
  out.pose = pose;
  out.rgb = Image(v.size, v.size, 3);
  out.normal = Image(v.size, v.size, 3);
  out.albedo = Image(v.size, v.size, 3);
  out.coverage = Image(v.size, v.size, 1);
  out.rgb.data = v.rgb;
  out.normal.data = v.normal;
  out.albedo.data = v.albedo;
  out.coverage.data = v.coverage;
  return out;
}

inline RenderedView render_oracle(const ToySceneParams& params, const CameraPose& pose,
                                  int samples_per_ray, double near = 1.2, double far = 4.2) {
  return to_rendered_view(
      render_oracle<double>(to_oracle_scene(params), pose, samples_per_ray, near, far), pose);
}

}  // namespace sculpt
