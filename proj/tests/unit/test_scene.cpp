#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "sculpt/camera.hpp"
#include "sculpt/render_oracle.hpp"
#include "sculpt/scene.hpp"
#include "support/fixtures.hpp"

using namespace sculpt;
using namespace sculpt::testing;

namespace {

const ToyGenerator& default_generator() {
  static const ToyGenerator gen(GeneratorConfig{});
  return gen;
}

LatentCode seeded_latent(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return default_generator().sample_latent(rng);
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

// Density and blended albedo at a world point, straight from the blob list.
std::pair<double, Vec3> field_at(const ToySceneParams& p, const Vec3& x) {
  double sigma = 0.0;
  Vec3 acc{0, 0, 0};
  for (const Blob& b : p.blobs) {
    const Vec3 d = x - b.center;
    const double g = b.density * std::exp(-dot(d, d) / (2.0 * b.scale * b.scale));
    sigma += g;
    acc = acc + g * b.albedo;
  }
  return {sigma, (1.0 / sigma) * acc};
}

}  // namespace

TEST_CASE("camera pose validation and geometry") {
  CameraPose p;
  CHECK_NOTHROW(p.validate());
  CameraPose bad = p;
  bad.theta = 0.0;
  CHECK_THROWS(bad.validate());
  bad = p;
  bad.theta = std::numbers::pi;
  CHECK_THROWS(bad.validate());
  bad = p;
  bad.radius = 0.0;
  CHECK_THROWS(bad.validate());
  bad = p;
  bad.fov_y = std::numbers::pi;
  CHECK_THROWS(bad.validate());
  bad = p;
  bad.image_size = 0;
  CHECK_THROWS(bad.validate());

  // Looks at the origin with +z up.
  p.theta = 1.1;
  p.phi = 0.7;
  p.image_size = 64;
  const Vec3 pos = p.position();
  CHECK(norm(pos) == doctest::Approx(p.radius).epsilon(1e-12));
  const Vec3 centre = 0.5 * (p.ray_direction(31, 31) + p.ray_direction(32, 32));
  const Vec3 expect = (-1.0 / norm(pos)) * pos;
  CHECK(norm(normalized(centre) - expect) < 1e-6);
  CHECK(p.ray_direction(32, 0).z > p.ray_direction(32, 63).z);
  const Mat3 R = p.camera_to_world();
  const Mat3 RtR = transpose(R) * R;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(RtR[i][j] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
  CHECK(determinant(R) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("decode") {
  const ToyGenerator& gen = default_generator();
  const GeneratorConfig& cfg = gen.config();
  SUBCASE("zero code stays inside activation ranges") {
    const LatentCode z = LatentCode::zeros(LatentSpace::WPlus, cfg.layers, cfg.latent_dim);
    const ToySceneParams p = gen.decode(z);
    REQUIRE(p.blobs.size() == static_cast<std::size_t>(cfg.blobs));
    const auto& W = gen.weights();
    for (int k = 0; k < cfg.blobs; ++k) {
      const Blob& b = p.blobs[k];
      CHECK(b.center.x == doctest::Approx(0.8 * std::tanh(W.blob_bias[k * 8 + 0])).epsilon(1e-14));
      CHECK(b.center.y == doctest::Approx(0.8 * std::tanh(W.blob_bias[k * 8 + 1])).epsilon(1e-14));
      CHECK(b.center.z == doctest::Approx(0.8 * std::tanh(W.blob_bias[k * 8 + 2])).epsilon(1e-14));
      CHECK(b.scale >= 0.05);
      CHECK(b.density >= 0.1);
      for (double a : {b.albedo.x, b.albedo.y, b.albedo.z}) {
        CHECK(a > 0.0);
        CHECK(a < 1.0);
      }
    }
    for (int i = 0; i < 9; ++i) CHECK(p.lighting.coeffs[i] == W.light_bias[i]);
  }
  SUBCASE("deterministic across instances") {
    const LatentCode w = seeded_latent(7);
    const ToyGenerator other(cfg);
    const ToySceneParams a = gen.decode(w);
    const ToySceneParams b = other.decode(w);
    for (std::size_t k = 0; k < a.blobs.size(); ++k) {
      CHECK(a.blobs[k].center == b.blobs[k].center);
      CHECK(a.blobs[k].scale == b.blobs[k].scale);
      CHECK(a.blobs[k].density == b.blobs[k].density);
      CHECK(a.blobs[k].albedo == b.blobs[k].albedo);
    }
    CHECK(a.lighting == b.lighting);
  }
  SUBCASE("lighting slice only moves the lighting") {
    const LatentCode w = seeded_latent(8);
    const ToySceneParams base = gen.decode(w);
    std::vector<double> v(w.values().begin(), w.values().end());
    for (int i = 0; i < 9; ++i) v[gen.lighting_slice_offset() + i] += 0.3 * (i + 1);
    const ToySceneParams lit = gen.decode(w.with_values(v));
    for (std::size_t k = 0; k < base.blobs.size(); ++k) {
      CHECK(lit.blobs[k].center == base.blobs[k].center);
      CHECK(lit.blobs[k].scale == base.blobs[k].scale);
      CHECK(lit.blobs[k].density == base.blobs[k].density);
      CHECK(lit.blobs[k].albedo == base.blobs[k].albedo);
    }
    CHECK_FALSE(lit.lighting == base.lighting);

    // Any entry outside the slice leaves the lighting alone.
    std::vector<double> u(w.values().begin(), w.values().end());
    for (std::size_t i = 0; i < u.size(); ++i)
      if (!gen.in_lighting_slice(i)) u[i] += 0.1;
    const ToySceneParams moved = gen.decode(w.with_values(u));
    CHECK(moved.lighting == base.lighting);
    CHECK(moved.blobs[0].center != base.blobs[0].center);
  }
  SUBCASE("matches the generic oracle decode") {
    const LatentCode w = seeded_latent(9);
    const ToySceneParams p = gen.decode(w);
    const auto o = oracle_decode<double>(gen, std::vector<double>(w.values().begin(), w.values().end()));
    for (std::size_t k = 0; k < p.blobs.size(); ++k) {
      CHECK(p.blobs[k].center.x == doctest::Approx(o.blobs[k].center[0]).epsilon(1e-12));
      CHECK(p.blobs[k].scale == doctest::Approx(o.blobs[k].scale).epsilon(1e-12));
      CHECK(p.blobs[k].density == doctest::Approx(o.blobs[k].density).epsilon(1e-12));
      CHECK(p.blobs[k].albedo.z == doctest::Approx(o.blobs[k].albedo[2]).epsilon(1e-12));
    }
    for (int i = 0; i < 9; ++i) CHECK(p.lighting.coeffs[i] == doctest::Approx(o.lighting[i]).epsilon(1e-12));
  }
  SUBCASE("rejects codes of the wrong shape") {
    CHECK_THROWS(gen.decode(LatentCode::zeros(LatentSpace::WPlus, cfg.layers - 1, cfg.latent_dim)));
    CHECK_THROWS(gen.decode(LatentCode::zeros(LatentSpace::W, 1, cfg.latent_dim)));
  }
}

TEST_CASE("render quality validation") {
  const ToyGenerator& gen = default_generator();
  const LatentCode w = seeded_latent(1);
  CameraPose pose;
  pose.image_size = 8;
  RenderQuality q;
  q.near = 3.0;
  q.far = 3.0;
  CHECK_THROWS_AS(gen.render(w, pose, q), std::invalid_argument);
  q.near = 4.0;
  q.far = 2.0;
  CHECK_THROWS_AS(gen.render(w, pose, q), std::invalid_argument);
  q = RenderQuality{};
  q.samples_per_ray = 1;
  CHECK_THROWS_AS(gen.render(w, pose, q), std::invalid_argument);
}

TEST_CASE("empty scene renders to nothing") {
  ToySceneParams p;
  for (int k = 0; k < 8; ++k) {
    Blob b;
    b.center = {0.8 * ((k & 1) ? 1 : -1), 0.8 * ((k & 2) ? 1 : -1), 0.8};
    b.scale = 0.05;
    b.density = 0.1;
    b.albedo = {0.5, 0.5, 0.5};
    p.blobs.push_back(b);
  }
  p.lighting.coeffs[0] = 2.0 * std::sqrt(std::numbers::pi);
  CameraPose pose;
  pose.image_size = 32;
  const RenderedView v = render_scene(p, pose, RenderQuality{});
  CHECK(*std::max_element(v.coverage.data.begin(), v.coverage.data.end()) < 1e-2);
  CHECK(*std::max_element(v.rgb.data.begin(), v.rgb.data.end()) < 1e-2);
  const RenderedView o = render_oracle(p, pose, 32);
  CHECK(*std::max_element(o.rgb.data.begin(), o.rgb.data.end()) < 1e-2);
}

TEST_CASE("render agrees with the reference renderer") {
  const ToyGenerator& gen = default_generator();
  CameraPose pose;
  const RenderQuality q;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const LatentCode w = seeded_latent(seed);
    const ToySceneParams p = gen.decode(w);
    const RenderedView fast = render_scene(p, pose, q);
    const RenderedView ref = render_oracle(p, pose, q.samples_per_ray, q.near, q.far);
    CHECK(max_abs_diff(fast.rgb, ref.rgb) < 1e-5);
    CHECK(max_abs_diff(fast.normal, ref.normal) < 1e-5);
    CHECK(max_abs_diff(fast.albedo, ref.albedo) < 1e-5);
    CHECK(max_abs_diff(fast.coverage, ref.coverage) < 1e-5);
  }
}

TEST_CASE("quadrature convergence") {
  const ToyGenerator& gen = default_generator();
  const CameraPose pose;
  const ToySceneParams p = gen.decode(seeded_latent(1));
  const RenderedView r32 = gen.render(seeded_latent(1), pose, RenderQuality{});
  const RenderedView o128 = render_oracle(p, pose, 128);
  CHECK(psnr(r32.rgb, o128.rgb) >= 40.0);
  const RenderedView o64 = render_oracle(p, pose, 64);
  CHECK(psnr(o64.rgb, o128.rgb) >= 45.0);
}

TEST_CASE("ambient-only lighting reproduces the albedo buffer") {
  const ToyGenerator& gen = default_generator();
  ToySceneParams p = gen.decode(seeded_latent(4));
  p.lighting.coeffs = {};
  p.lighting.coeffs[0] = 2.0 * std::sqrt(std::numbers::pi);
  CameraPose pose;
  pose.image_size = 48;
  const RenderedView v = render_scene(p, pose, RenderQuality{});
  CHECK(max_abs_diff(v.rgb, v.albedo) < 1e-4);
}

TEST_CASE("buffer invariants over random latents and poses") {
  const ToyGenerator& gen = default_generator();
  std::mt19937_64 rng(21);
  const SidePoseSampler sampler;
  for (int trial = 0; trial < 6; ++trial) {
    std::normal_distribution<double> normal(0.0, 1.0 + trial);
    std::vector<double> v(static_cast<std::size_t>(gen.config().layers) * gen.config().latent_dim);
    for (double& x : v) x = normal(rng);
    const LatentCode w(LatentSpace::WPlus, gen.config().layers, gen.config().latent_dim, v);
    CameraPose pose = sampler.sample(rng, CameraPose{});
    pose.image_size = 24;
    const RenderedView view = gen.render(w, pose, RenderQuality{});
    CHECK(view.rgb.height == 24);
    CHECK(view.normal.width == 24);
    CHECK(view.coverage.channels == 1);
    for (double x : view.rgb.data) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
    }
    for (double x : view.albedo.data) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
    }
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 24; ++x) {
        const double c = view.coverage.at(y, x);
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
        const Vec3 n{view.normal.at(y, x, 0), view.normal.at(y, x, 1), view.normal.at(y, x, 2)};
        if (c > kCoverageNormalThreshold)
          CHECK(std::abs(norm(n) - 1.0) < 1e-5);
        else
          CHECK(norm(n) == 0.0);
      }
  }
}

TEST_CASE("render is deterministic") {
  const ToyGenerator& gen = default_generator();
  const LatentCode w = seeded_latent(5);
  CameraPose pose;
  pose.image_size = 32;
  const RenderedView a = gen.render(w, pose, RenderQuality{});
  const RenderedView b = gen.render(w, pose, RenderQuality{});
  CHECK(a.rgb == b.rgb);
  CHECK(a.normal == b.normal);
  CHECK(a.albedo == b.albedo);
  CHECK(a.coverage == b.coverage);
}

TEST_CASE("scene is pose independent") {
  const ToyGenerator& gen = default_generator();
  const LatentCode w = seeded_latent(6);
  const ToySceneParams p = gen.decode(w);
  CameraPose front;
  front.image_size = 16;
  CameraPose side = front;
  side.phi += 0.2;
  side.theta -= 0.1;
  // Rendering in between must not perturb the decoded field.
  (void)gen.render(w, front, RenderQuality{});
  (void)gen.render(w, side, RenderQuality{});
  const ToySceneParams q = gen.decode(w);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (int i = 0; i < 100; ++i) {
    const Vec3 x{u(rng), u(rng), u(rng)};
    const auto [s1, a1] = field_at(p, x);
    const auto [s2, a2] = field_at(q, x);
    CHECK(s1 == s2);
    CHECK(a1 == a2);
  }
}

TEST_CASE("side pose sampler") {
  const SidePoseSampler s;
  CameraPose base;
  base.radius = 3.1;
  base.fov_y = 0.5;
  base.image_size = 40;
  std::mt19937_64 rng(11);
  const double lo = std::numbers::pi / 2 - std::numbers::pi / 12;
  const double hi = std::numbers::pi / 2 + std::numbers::pi / 12;
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const CameraPose p = s.sample(rng, base);
    if (i < 1000) {
      CHECK(p.theta >= lo);
      CHECK(p.theta <= hi);
      CHECK(p.phi >= lo);
      CHECK(p.phi <= hi);
      CHECK(p.radius == base.radius);
      CHECK(p.fov_y == base.fov_y);
      CHECK(p.image_size == base.image_size);
    }
    sum += p.theta;
  }
  CHECK(std::abs(sum / n - std::numbers::pi / 2) < 0.005);

  std::mt19937_64 a(77), b(77);
  CHECK(s.sample(a, base) == s.sample(b, base));

  SidePoseSampler bad;
  bad.theta = {1.0, 0.5};
  CHECK_THROWS(bad.validate());
}

TEST_CASE("mean rgb gradient matches finite differences") {
  const ToyGenerator& gen = default_generator();
  const LatentCode w = seeded_latent(3);
  CameraPose pose;
  pose.image_size = 24;
  const RenderQuality q;
  auto mean_rgb = [&](const LatentCode& x) {
    const RenderedView v = gen.render(x, pose, q);
    double s = 0.0;
    for (double c : v.rgb.data) s += c;
    return s / static_cast<double>(v.rgb.size());
  };
  RenderedView v = gen.render(w, pose, q);
  ViewCotangent ct = ViewCotangent::zeros_like(v);
  for (double& c : ct.rgb.data) c = 1.0 / static_cast<double>(ct.rgb.size());
  const std::vector<double> grad = gen.render_vjp(w, pose, q, ct);
  const double gmax = *std::max_element(grad.begin(), grad.end(),
                                         [](double a, double b) { return std::abs(a) < std::abs(b); });

  const double h = 1e-3;
  std::vector<double> fd(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    std::vector<double> e(grad.size(), 0.0);
    e[i] = 1.0;
    fd[i] = (mean_rgb(shifted(w, e, h)) - mean_rgb(shifted(w, e, -h))) / (2.0 * h);
  }
  int bad = 0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    // Entries far below the gradient scale are compared absolutely.
    const double denom = std::max(std::abs(fd[i]), 1e-3 * std::abs(gmax));
    if (std::abs(grad[i] - fd[i]) / denom >= 1e-2) ++bad;
  }
  CHECK(bad == 0);
  CHECK(rel_err(grad, fd) < 1e-3);
}
