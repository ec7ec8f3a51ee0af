#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "sculpt/errors.hpp"
#include "sculpt/illumination.hpp"
#include "sculpt/scene.hpp"
#include "support/fixtures.hpp"

using namespace sculpt;
using namespace sculpt::testing;

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return normalized(Vec3{n(rng), n(rng), n(rng)});
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  double q[4] = {n(rng), n(rng), n(rng), n(rng)};
  const double len = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  for (double& v : q) v /= len;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

// Synthetic view: an orthographic unit sphere facing +y (normals on the visible
// hemisphere), fully covered inside the disc, shaded by lambertian_shade.
RenderedView sphere_view(int size, const SHLighting& light, const Vec3& albedo) {
  RenderedView v;
  v.rgb = Image(size, size, 3);
  v.normal = Image(size, size, 3);
  v.albedo = Image(size, size, 3);
  v.coverage = Image(size, size, 1);
  for (int py = 0; py < size; ++py)
    for (int px = 0; px < size; ++px) {
      const double u = 2.0 * (px + 0.5) / size - 1.0;
      const double s = 1.0 - 2.0 * (py + 0.5) / size;
      const double r2 = u * u + s * s;
      if (r2 >= 0.98) continue;
      const Vec3 n{u, std::sqrt(1.0 - r2), s};
      const Vec3 c = lambertian_shade(albedo, n, light);
      for (int k = 0; k < 3; ++k) {
        v.rgb.at(py, px, k) = c[k];
        v.normal.at(py, px, k) = n[k];
        v.albedo.at(py, px, k) = albedo[k];
      }
      v.coverage.at(py, px) = 1.0;
    }
  return v;
}

// Every pixel covered with a random normal from the full sphere.
RenderedView random_normal_view(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RenderedView v;
  v.rgb = Image(size, size, 3);
  v.normal = Image(size, size, 3);
  v.albedo = Image(size, size, 3, 1.0);
  v.coverage = Image(size, size, 1, 1.0);
  for (int py = 0; py < size; ++py)
    for (int px = 0; px < size; ++px) {
      const Vec3 n = random_unit(rng);
      for (int k = 0; k < 3; ++k) v.normal.at(py, px, k) = n[k];
    }
  return v;
}

SHLighting linear_regime_light() {
  SHLighting l;
  l.coeffs = {0.6 * 2.0 * std::sqrt(kPi), 0.12, 0.2, -0.08, 0.05, -0.04, 0.06, 0.03, -0.05};
  return l;
}

double band_norm(const ShVector& c, int band) {
  const int lo = band * band, hi = (band + 1) * (band + 1);
  double s = 0.0;
  for (int i = lo; i < hi; ++i) s += c[i] * c[i];
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("sh basis is orthonormal over the sphere") {
  std::mt19937_64 rng(2024);
  const int n = 1000000;
  std::array<std::array<double, 9>, 9> gram{};
  for (int s = 0; s < n; ++s) {
    const ShVector b = sh_basis(random_unit(rng));
    for (int i = 0; i < 9; ++i)
      for (int j = i; j < 9; ++j) gram[i][j] += b[i] * b[j];
  }
  for (int i = 0; i < 9; ++i)
    for (int j = i; j < 9; ++j) {
      const double v = 4.0 * kPi * gram[i][j] / n;
      CHECK(std::abs(v - (i == j ? 1.0 : 0.0)) < 1e-2);
    }
}

TEST_CASE("sh basis values and symmetries") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i)
    CHECK(sh_basis(random_unit(rng))[0] == doctest::Approx(0.28209479177387814).epsilon(1e-12));

  const ShVector up = sh_basis({0, 0, 1});
  CHECK(up[1] == 0.0);
  CHECK(up[3] == 0.0);
  CHECK(up[2] == doctest::Approx(std::sqrt(3.0 / (4.0 * kPi))));

  for (int i = 0; i < 100; ++i) {
    const Vec3 n = random_unit(rng);
    const ShVector a = sh_basis(n);
    const ShVector b = sh_basis(-n);
    CHECK(b[0] == a[0]);
    for (int k = 1; k < 4; ++k) CHECK(b[k] == doctest::Approx(-a[k]).epsilon(1e-14));
    for (int k = 4; k < 9; ++k) CHECK(b[k] == doctest::Approx(a[k]).epsilon(1e-14));
  }

  CHECK_THROWS_AS(sh_basis({0, 0, 1.01}), std::invalid_argument);
  CHECK_THROWS_AS(sh_basis({0, 0, 0}), std::invalid_argument);
}

TEST_CASE("sh basis vjp matches finite differences") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3 n = random_unit(rng);
    ShVector g;
    for (double& x : g) x = nd(rng);
    const Vec3 an = sh_basis_vjp(n, g);
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
      Vec3 p = n, m = n;
      p[k] += h;
      m[k] -= h;
      const double fd = (sh_dot(sh_basis_unchecked(p), g) - sh_dot(sh_basis_unchecked(m), g)) / (2 * h);
      CHECK(an[k] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("lambertian shading") {
  const Vec3 albedo{0.2, 0.5, 0.9};
  const Vec3 n = normalized(Vec3{0.3, -0.2, 0.9});
  SHLighting zero;
  CHECK(lambertian_shade(albedo, n, zero) == Vec3{0, 0, 0});

  SHLighting ambient;
  ambient.coeffs[0] = 2.0 * std::sqrt(kPi);
  const Vec3 c = lambertian_shade(albedo, n, ambient);
  CHECK(c.x == doctest::Approx(albedo.x).epsilon(1e-15));
  CHECK(c.y == doctest::Approx(albedo.y).epsilon(1e-15));
  CHECK(c.z == doctest::Approx(albedo.z).epsilon(1e-15));

  SHLighting opposing;
  opposing.coeffs[2] = -1.0;  // light from -z
  CHECK(lambertian_shade(albedo, {0, 0, 1}, opposing) == Vec3{0, 0, 0});

  SHLighting bright;
  bright.coeffs[0] = 20.0;
  const Vec3 b = lambertian_shade(albedo, n, bright);
  CHECK(b.z == 1.0);

  CHECK_THROWS(lambertian_shade(albedo, {0, 0, 2}, ambient));
}

TEST_CASE("estimate_lighting recovers a known light") {
  const SHLighting truth = linear_regime_light();
  const RenderedView v = sphere_view(48, truth, {1, 1, 1});
  // The construction must stay out of the clamp for the round trip to be exact.
  int covered = 0, linear = 0;
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 48; ++x) {
      if (v.coverage.at(y, x) < 0.5) continue;
      ++covered;
      const double r = v.rgb.at(y, x, 0);
      if (r > 0.0 && r < 1.0) ++linear;
    }
  REQUIRE(linear == covered);

  const SHLighting est = estimate_lighting(v, 1e-8);
  CHECK(est.frame == LightingFrame::World);
  for (int i = 0; i < 9; ++i) CHECK(std::abs(est.coeffs[i] - truth.coeffs[i]) < 1e-3);
}

TEST_CASE("estimate_lighting simple fits") {
  SUBCASE("black image gives zero light") {
    RenderedView v = random_normal_view(16, 1);
    const SHLighting est = estimate_lighting(v, 1e-6);
    for (double c : est.coeffs) CHECK(c == 0.0);
  }
  SUBCASE("constant luminance gives the ambient light") {
    RenderedView v = random_normal_view(24, 2);
    for (double& c : v.rgb.data) c = 1.0;
    const SHLighting est = estimate_lighting(v, 1e-8);
    CHECK(est.coeffs[0] == doctest::Approx(2.0 * std::sqrt(kPi)).epsilon(1e-6));
    for (int i = 1; i < 9; ++i) CHECK(std::abs(est.coeffs[i]) < 1e-6);
  }
  SUBCASE("insufficient coverage") {
    RenderedView v = random_normal_view(8, 3);
    for (double& c : v.coverage.data) c = 0.4;
    for (int i = 0; i < 8; ++i) v.coverage.data[i] = 0.9;
    CHECK_THROWS_AS(estimate_lighting(v, 1e-6), InsufficientCoverageError);
  }
  SUBCASE("rank deficiency without ridge") {
    RenderedView v = random_normal_view(8, 4);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        v.normal.at(y, x, 0) = 0.0;
        v.normal.at(y, x, 1) = 0.0;
        v.normal.at(y, x, 2) = 1.0;
      }
    CHECK_THROWS_AS(estimate_lighting(v, 0.0), RankDeficiencyError);
    CHECK_NOTHROW(estimate_lighting(v, 1e-6));
  }
  SUBCASE("negative ridge") {
    CHECK_THROWS_AS(estimate_lighting(random_normal_view(8, 5), -1.0), std::invalid_argument);
  }
}

TEST_CASE("estimate_lighting vjp matches finite differences") {
  RenderedView v = sphere_view(24, linear_regime_light(), {0.9, 0.7, 0.5});
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  ShVector g;
  for (double& x : g) x = nd(rng);
  const ViewCotangent ct = estimate_lighting_vjp(v, 1e-6, g);
  auto f = [&](const RenderedView& x) { return sh_dot(estimate_lighting(x, 1e-6).coeffs, g); };
  for (int trial = 0; trial < 5; ++trial) {
    RenderedView dir = v;
    for (double& x : dir.rgb.data) x = nd(rng);
    for (double& x : dir.normal.data) x = nd(rng);
    double analytic = 0.0;
    for (std::size_t i = 0; i < v.rgb.size(); ++i)
      analytic += ct.rgb.data[i] * dir.rgb.data[i] + ct.normal.data[i] * dir.normal.data[i];
    const double h = 1e-6;
    RenderedView p = v, m = v;
    for (std::size_t i = 0; i < v.rgb.size(); ++i) {
      p.rgb.data[i] += h * dir.rgb.data[i];
      m.rgb.data[i] -= h * dir.rgb.data[i];
      p.normal.data[i] += h * dir.normal.data[i];
      m.normal.data[i] -= h * dir.normal.data[i];
    }
    const double fd = (f(p) - f(m)) / (2 * h);
    CHECK(analytic == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("illumination loss") {
  const RenderedView v = sphere_view(32, linear_regime_light(), {1, 1, 1});
  const SHLighting est = estimate_lighting(v, 1e-6);
  CHECK(illumination_loss(v, est, 1e-6).value == 0.0);

  SHLighting off = est;
  off.coeffs[0] -= 0.1;
  CHECK(illumination_loss(v, off, 1e-6).value == doctest::Approx(0.1).epsilon(1e-12));

  SHLighting cam = est;
  cam.frame = LightingFrame::Camera;
  CHECK_THROWS_AS(illumination_loss(v, cam, 1e-6), std::invalid_argument);

  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 20; ++i) {
    SHLighting t;
    for (double& c : t.coeffs) c = nd(rng);
    CHECK(illumination_loss(v, t, 1e-6).value > 0.0);
  }
}

TEST_CASE("illumination loss gradient through the renderer") {
  const ToyGenerator gen(GeneratorConfig{});
  std::mt19937_64 rng(4);
  const LatentCode w = gen.sample_latent(rng);
  CameraPose pose;
  pose.image_size = 32;
  const RenderQuality q;
  SHLighting target;
  target.coeffs = {2.0, 0.3, 0.4, 0.1, 0.0, 0.05, -0.1, 0.0, 0.05};
  const double ridge = 1e-6;
  auto f = [&](const LatentCode& x) { return illumination_loss(gen.render(x, pose, q), target, ridge).value; };

  const RenderedView view = gen.render(w, pose, q);
  ViewCotangent ct = ViewCotangent::zeros_like(view);
  illumination_loss_with_grad(view, target, ridge, 1.0, ct);
  const std::vector<double> grad = gen.render_vjp(w, pose, q, ct);

  std::mt19937_64 drng(10);
  std::vector<double> an, fd;
  for (int trial = 0; trial < 8; ++trial) {
    const std::vector<double> d = unit_direction(grad.size(), drng);
    const double h = 1e-5;
    an.push_back(dot(grad, d));
    fd.push_back((f(shifted(w, d, h)) - f(shifted(w, d, -h))) / (2 * h));
  }
  CHECK(rel_err(an, fd) < 1e-2);
}

TEST_CASE("sh_rotate") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  SHLighting l;
  for (double& c : l.coeffs) c = nd(rng);

  const SHLighting same = sh_rotate(l, identity3());
  for (int i = 0; i < 9; ++i) CHECK(std::abs(same.coeffs[i] - l.coeffs[i]) < 1e-10);

  SHLighting ambient;
  ambient.coeffs[0] = 1.7;
  for (int i = 0; i < 100; ++i) {
    const Mat3 R = random_rotation(rng);
    const SHLighting a = sh_rotate(ambient, R);
    CHECK(std::abs(a.coeffs[0] - 1.7) < 1e-10);
    for (int k = 1; k < 9; ++k) CHECK(std::abs(a.coeffs[k]) < 1e-10);

    const SHLighting r = sh_rotate(l, R);
    for (int band = 0; band < 3; ++band)
      CHECK(std::abs(band_norm(r.coeffs, band) - band_norm(l.coeffs, band)) < 1e-8);

    // The rotated light evaluated at d equals the original at R^-1 d.
    for (int s = 0; s < 5; ++s) {
      const Vec3 d = random_unit(rng);
      const Vec3 back = transpose(R) * d;
      CHECK(sh_dot(sh_basis(d), r.coeffs) == doctest::Approx(sh_dot(sh_basis(normalized(back)), l.coeffs)).epsilon(1e-9));
    }
  }

  const Mat3 R1 = random_rotation(rng), R2 = random_rotation(rng);
  const SHLighting twice = sh_rotate(sh_rotate(l, R1), R2);
  const SHLighting once = sh_rotate(l, R2 * R1);
  for (int i = 0; i < 9; ++i) CHECK(std::abs(twice.coeffs[i] - once.coeffs[i]) < 1e-8);
  CHECK(once.frame == l.frame);

  Mat3 scaled = identity3();
  scaled[0][0] = 1.1;
  CHECK_THROWS_AS(sh_rotate(l, scaled), std::invalid_argument);
  Mat3 mirror = identity3();
  mirror[2][2] = -1.0;
  CHECK_THROWS_AS(sh_rotate(l, mirror), std::invalid_argument);
}

TEST_CASE("lighting frame names") {
  CHECK(to_string(LightingFrame::World) == "WORLD");
  CHECK(lighting_frame_from_string("CAMERA") == LightingFrame::Camera);
  CHECK_THROWS(lighting_frame_from_string("world-ish"));
}
