#pragma once

// Shared seeded fixtures for the unit and acceptance tests.

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sculpt/commands.hpp"
#include "sculpt/pipeline.hpp"
#include "support/fixtures.hpp"

namespace sculpt::testing {

// eps_hat = A z_t + b with fixed seeded A, b.
class LinearDenoiser final : public Denoiser {
 public:
  LinearDenoiser(int d, std::uint64_t seed) : d_(d), A_(static_cast<std::size_t>(d) * d), b_(d) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.3);
    for (double& a : A_) a = nd(rng);
    for (double& x : b_) x = nd(rng);
  }
  std::vector<double> predict_noise(std::span<const double> z_t, const std::string&, double) const override {
    std::vector<double> out(b_);
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j) out[i] += A_[static_cast<std::size_t>(i) * d_ + j] * z_t[j];
    return out;
  }

 private:
  int d_;
  std::vector<double> A_, b_;
};

// Orthographic unit sphere facing +y, covered inside the disc and shaded by
// lambertian_shade, so the normal buffer is exact.
inline RenderedView lambert_sphere_view(int size, const SHLighting& light, const Vec3& albedo) {
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

// Fraction of covered pixels whose shading is strictly inside (0, 1).
inline double linear_fraction(const RenderedView& v) {
  int covered = 0, linear = 0;
  for (int y = 0; y < v.rgb.height; ++y)
    for (int x = 0; x < v.rgb.width; ++x) {
      if (v.coverage.at(y, x) <= 0.5) continue;
      ++covered;
      bool ok = true;
      for (int c = 0; c < 3; ++c) ok = ok && v.rgb.at(y, x, c) > 0.0 && v.rgb.at(y, x, c) < 1.0;
      linear += ok;
    }
  return covered ? static_cast<double>(linear) / covered : 0.0;
}

// Largest deviation of the Monte Carlo Gram matrix 4 pi E[B B^T] from the identity.
inline double sh_orthonormality_error(int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  double gram[9][9] = {};
  for (int s = 0; s < samples; ++s) {
    const ShVector b = sh_basis(normalized(Vec3{nd(rng), nd(rng), nd(rng)}));
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 9; ++j) gram[i][j] += b[i] * b[j];
  }
  double worst = 0.0;
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j)
      worst = std::max(worst, std::abs(4.0 * std::numbers::pi * gram[i][j] / samples - (i == j ? 1.0 : 0.0)));
  return worst;
}

// mean + psi (sample - mean): a sample pulled toward the mean.
inline LatentCode truncated_latent(const PipelineContext& ctx, std::uint64_t seed, double psi) {
  const LatentCode s = latent_from_seed(ctx.generator, seed);
  std::vector<double> v(s.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double m = ctx.stats.mean.values()[i];
    v[i] = m + psi * (s.values()[i] - m);
  }
  return s.with_values(std::move(v));
}

inline double prompt_distance(const PipelineContext& ctx, const LatentCode& w, const std::string& prompt) {
  const auto z = ctx.latent_encoder.encode(ctx.generator.render(w, ctx.settings.base_pose, ctx.settings.quality).rgb);
  const auto& mu = ctx.bank.at(prompt).target_mu;
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (z[i] - mu[i]) * (z[i] - mu[i]);
  return std::sqrt(s);
}

struct Fixture {
  LatentCode latent;
  Image input;
  std::string prompt = "smile";
  ObjectiveSpec edit_spec;
  SHLighting relit_target;
};

// Known latent, its frontal render, a registered prompt whose exemplar is another
// latent's render, and a reachable world-frame relighting target.
inline Fixture make_fixture(PipelineContext& ctx, std::uint64_t seed, double psi) {
  const PipelineSettings& st = ctx.settings;
  Fixture f{truncated_latent(ctx, seed, psi), {}, "smile", {}, {}};
  f.input = ctx.generator.render(f.latent, st.base_pose, st.quality).rgb;
  const LatentCode exemplar = truncated_latent(ctx, seed + 1000, psi);
  ctx.register_prompt(f.prompt, ctx.generator.render(exemplar, st.base_pose, st.quality).rgb, 0.25);

  f.edit_spec.weights = {0.2, 0.2, 2e-5, 0.0, 0.0};
  f.edit_spec.prompt = f.prompt;
  f.edit_spec.input_image = f.input;
  f.edit_spec.input_pose = st.base_pose;

  std::vector<double> lit(f.latent.values().begin(), f.latent.values().end());
  std::mt19937_64 rng(seed * 7919 + 1);
  std::normal_distribution<double> nd(0.0, 0.8);
  const std::size_t off = ctx.generator.lighting_slice_offset();
  for (int i = 0; i < kShCoeffs; ++i) lit[off + i] += nd(rng);
  f.relit_target = estimate_lighting(ctx.generator.render(f.latent.with_values(lit), st.base_pose, st.quality),
                                     st.ridge);
  return f;
}

}  // namespace sculpt::testing
