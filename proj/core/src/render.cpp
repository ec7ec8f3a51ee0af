#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sculpt/errors.hpp"
#include "sculpt/scene.hpp"

namespace sculpt {

namespace {

constexpr double kDensityFloor = 1e-12;

// Forward quantities of one ray, kept for the reverse pass.
struct RayTrace {
  int samples = 0;
  int blobs = 0;
  std::vector<Vec3> points;
  std::vector<double> blob_value;  // samples x blobs
  std::vector<double> sigma;
  std::vector<Vec3> m;  // sum_k g_k (p - mu_k) / s_k^2
  std::vector<double> m_norm;
  std::vector<Vec3> normal;
  std::vector<Vec3> albedo;
  std::vector<ShVector> basis;
  std::vector<double> shade_raw;
  std::vector<Vec3> color;
  std::vector<double> transmittance;
  std::vector<double> weight;

  Vec3 rgb_raw, normal_raw, albedo_acc;
  double coverage = 0.0;

  void resize(int s, int k) {
    samples = s;
    blobs = k;
    points.resize(s);
    blob_value.resize(static_cast<std::size_t>(s) * k);
    sigma.resize(s);
    m.resize(s);
    m_norm.resize(s);
    normal.resize(s);
    albedo.resize(s);
    basis.resize(s);
    shade_raw.resize(s);
    color.resize(s);
    transmittance.resize(s);
    weight.resize(s);
  }
};

void trace_ray(const ToySceneParams& params, const Vec3& origin, const Vec3& dir,
               const RenderQuality& q, RayTrace& tr) {
  const int S = q.samples_per_ray;
  const int K = static_cast<int>(params.blobs.size());
  tr.resize(S, K);
  const double dt = (q.far - q.near) / S;
  double optical_depth = 0.0;
  tr.rgb_raw = {};
  tr.normal_raw = {};
  tr.albedo_acc = {};
  tr.coverage = 0.0;

  for (int i = 0; i < S; ++i) {
    const Vec3 p = origin + dir * (q.near + (i + 0.5) * dt);
    tr.points[i] = p;
    double sigma = 0.0;
    Vec3 m, wa;
    for (int k = 0; k < K; ++k) {
      const Blob& b = params.blobs[k];
      const Vec3 d = p - b.center;
      const double s2 = b.scale * b.scale;
      const double g = b.density * std::exp(-dot(d, d) / (2.0 * s2));
      tr.blob_value[static_cast<std::size_t>(i) * K + k] = g;
      sigma += g;
      m += d * (g / s2);
      wa += b.albedo * g;
    }
    tr.sigma[i] = sigma;
    tr.m[i] = m;
    const double mn = norm(m);
    tr.m_norm[i] = mn;
    const Vec3 n = mn > 0.0 ? m / mn : Vec3{0, 0, 1};
    tr.normal[i] = n;
    const Vec3 a = wa / std::max(sigma, kDensityFloor);
    tr.albedo[i] = a;
    tr.basis[i] = sh_basis_unchecked(n);
    const double shade = sh_dot(tr.basis[i], params.lighting.coeffs);
    tr.shade_raw[i] = shade;
    tr.color[i] = a * std::max(0.0, shade);

    const double T = std::exp(-optical_depth);
    const double alpha = 1.0 - std::exp(-sigma * dt);
    const double w = T * alpha;
    tr.transmittance[i] = T;
    tr.weight[i] = w;
    optical_depth += sigma * dt;

    tr.rgb_raw += tr.color[i] * w;
    tr.normal_raw += n * w;
    tr.albedo_acc += a * w;
    tr.coverage += w;
  }
}

void check_view_inputs(const CameraPose& pose, const RenderQuality& quality) {
  pose.validate();
  quality.validate();
}

}  // namespace

SceneGradient& SceneGradient::operator+=(const SceneGradient& o) {
  if (blobs.size() != o.blobs.size()) throw ShapeError("SceneGradient: blob count mismatch");
  for (std::size_t k = 0; k < blobs.size(); ++k) {
    blobs[k].center += o.blobs[k].center;
    blobs[k].scale += o.blobs[k].scale;
    blobs[k].density += o.blobs[k].density;
    blobs[k].albedo += o.blobs[k].albedo;
  }
  for (int i = 0; i < kShCoeffs; ++i) lighting[i] += o.lighting[i];
  return *this;
}

ViewCotangent ViewCotangent::zeros_like(const RenderedView& view) {
  ViewCotangent ct;
  ct.rgb = Image(view.rgb.height, view.rgb.width, 3);
  ct.normal = Image(view.rgb.height, view.rgb.width, 3);
  ct.albedo = Image(view.rgb.height, view.rgb.width, 3);
  ct.coverage = Image(view.rgb.height, view.rgb.width, 1);
  return ct;
}

void RenderQuality::validate() const {
  if (samples_per_ray < 2) throw std::invalid_argument("render: samples_per_ray must be >= 2");
  if (!(near < far)) throw std::invalid_argument("render: near must be < far");
}

RenderedView render_scene(const ToySceneParams& params, const CameraPose& pose,
                          const RenderQuality& quality) {
  check_view_inputs(pose, quality);
  const int n = pose.image_size;
  RenderedView view;
  view.pose = pose;
  view.rgb = Image(n, n, 3);
  view.normal = Image(n, n, 3);
  view.albedo = Image(n, n, 3);
  view.coverage = Image(n, n, 1);
  const Vec3 origin = pose.position();
  RayTrace tr;
  for (int py = 0; py < n; ++py) {
    for (int px = 0; px < n; ++px) {
      const Vec3 dir = pose.ray_direction(px, py);
      trace_ray(params, origin, dir, quality, tr);
      for (int k = 0; k < 3; ++k) {
        view.rgb.at(py, px, k) = std::clamp(tr.rgb_raw[k], 0.0, 1.0);
        view.albedo.at(py, px, k) = tr.albedo_acc[k];
      }
      view.coverage.at(py, px) = std::min(tr.coverage, 1.0);  // the weight sum can overshoot 1 by rounding
      if (tr.coverage > kCoverageNormalThreshold) {
        const double len = norm(tr.normal_raw);
        const Vec3 nb = len > 1e-300 ? tr.normal_raw / len : -dir;
        for (int k = 0; k < 3; ++k) view.normal.at(py, px, k) = nb[k];
      }
    }
  }
  return view;
}

SceneGradient render_scene_vjp(const ToySceneParams& params, const CameraPose& pose,
                               const RenderQuality& quality, const ViewCotangent& ct) {
  check_view_inputs(pose, quality);
  const int n = pose.image_size;
  const int K = static_cast<int>(params.blobs.size());
  const int S = quality.samples_per_ray;
  const double dt = (quality.far - quality.near) / S;
  auto check = [n](const Image& im, int c) {
    if (!im.empty() && (im.height != n || im.width != n || im.channels != c))
      throw ShapeError("render_scene_vjp: cotangent shape mismatch");
  };
  check(ct.rgb, 3);
  check(ct.normal, 3);
  check(ct.albedo, 3);
  check(ct.coverage, 1);

  SceneGradient grad(params.blobs.size());
  const Vec3 origin = pose.position();
  RayTrace tr;
  std::vector<double> g_w(S), g_sigma(S);
  std::vector<Vec3> g_color(S), g_normal(S), g_albedo(S);

  auto pixel3 = [](const Image& im, int py, int px) {
    if (im.empty()) return Vec3{};
    return Vec3{im.at(py, px, 0), im.at(py, px, 1), im.at(py, px, 2)};
  };

  for (int py = 0; py < n; ++py) {
    for (int px = 0; px < n; ++px) {
      const Vec3 g_rgb_in = pixel3(ct.rgb, py, px);
      const Vec3 g_nbuf = pixel3(ct.normal, py, px);
      const Vec3 g_alb = pixel3(ct.albedo, py, px);
      const double g_cov = ct.coverage.empty() ? 0.0 : ct.coverage.at(py, px);
      if (g_rgb_in == Vec3{} && g_nbuf == Vec3{} && g_alb == Vec3{} && g_cov == 0.0) continue;

      const Vec3 dir = pose.ray_direction(px, py);
      trace_ray(params, origin, dir, quality, tr);

      Vec3 g_raw;
      for (int k = 0; k < 3; ++k)
        g_raw[k] = (tr.rgb_raw[k] > 0.0 && tr.rgb_raw[k] < 1.0) ? g_rgb_in[k] : 0.0;

      Vec3 g_nraw;
      if (tr.coverage > kCoverageNormalThreshold) {
        const double len = norm(tr.normal_raw);
        if (len > 1e-300) {
          const Vec3 nh = tr.normal_raw / len;
          g_nraw = (g_nbuf - nh * dot(nh, g_nbuf)) / len;
        }
      }

      for (int i = 0; i < S; ++i) {
        const double w = tr.weight[i];
        g_w[i] = dot(g_raw, tr.color[i]) + dot(g_nraw, tr.normal[i]) + dot(g_alb, tr.albedo[i]) + g_cov;
        g_color[i] = g_raw * w;
        g_normal[i] = g_nraw * w;
        g_albedo[i] = g_alb * w;
      }

      // w_i = T_i (1 - exp(-sigma_i dt)), T_i = exp(-dt sum_{j<i} sigma_j)
      double suffix = 0.0;  // sum_{i>j} g_w_i w_i
      for (int j = S - 1; j >= 0; --j) {
        const double own = g_w[j] * tr.transmittance[j] * dt * std::exp(-tr.sigma[j] * dt);
        g_sigma[j] = own - dt * suffix;
        suffix += g_w[j] * tr.weight[j];
      }

      for (int i = 0; i < S; ++i) {
        const Vec3& a = tr.albedo[i];
        const double shade = std::max(0.0, tr.shade_raw[i]);
        Vec3 g_a = g_albedo[i] + g_color[i] * shade;
        Vec3 g_n = g_normal[i];
        if (tr.shade_raw[i] > 0.0) {
          const double g_shade = dot(g_color[i], a);
          ShVector g_b{};
          for (int c = 0; c < kShCoeffs; ++c) {
            grad.lighting[c] += g_shade * tr.basis[i][c];
            g_b[c] = g_shade * params.lighting.coeffs[c];
          }
          g_n += sh_basis_vjp(tr.normal[i], g_b);
        }

        double gs = g_sigma[i];
        const double denom = std::max(tr.sigma[i], kDensityFloor);
        const Vec3 g_wa = g_a / denom;
        if (tr.sigma[i] > kDensityFloor) gs += -dot(a, g_a) / denom;

        Vec3 g_m;
        if (tr.m_norm[i] > 0.0) {
          const Vec3& nn = tr.normal[i];
          g_m = (g_n - nn * dot(nn, g_n)) / tr.m_norm[i];
        }

        const Vec3& p = tr.points[i];
        for (int k = 0; k < K; ++k) {
          const Blob& b = params.blobs[k];
          Blob& gb = grad.blobs[k];
          const double g = tr.blob_value[static_cast<std::size_t>(i) * K + k];
          if (g == 0.0) continue;
          const Vec3 d = p - b.center;
          const double s = b.scale;
          const double s2 = s * s;
          const double q = dot(d, d);
          const double g_g = gs + dot(g_m, d) / s2 + dot(g_wa, b.albedo);
          gb.albedo += g_wa * g;
          Vec3 g_d = g_m * (g / s2);
          double g_s = -2.0 * g * dot(d, g_m) / (s2 * s);
          gb.density += g_g * (g / b.density);
          const double g_q = -g_g * g / (2.0 * s2);
          g_s += g_g * g * q / (s2 * s);
          g_d += d * (2.0 * g_q);
          gb.center -= g_d;
          gb.scale += g_s;
        }
      }
    }
  }
  return grad;
}

}  // namespace sculpt
