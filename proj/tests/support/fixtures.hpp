#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "sculpt/pipeline.hpp"
#include "sculpt/render_oracle.hpp"

namespace sculpt::testing {

// Decode written straight from the generator's definition, generic in the scalar type.
// Shares nothing with ToyGenerator::decode beyond reading its frozen weights.
template <class T>
OracleScene<T> oracle_decode(const ToyGenerator& gen, const std::vector<T>& w) {
  using std::exp;
  using std::log1p;
  using std::tanh;
  const GeneratorConfig& cfg = gen.config();
  const GeneratorWeights& W = gen.weights();
  const std::size_t light_off = static_cast<std::size_t>(cfg.layers - 1) * cfg.latent_dim;
  std::vector<T> x;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (i < light_off || i >= light_off + 9) x.push_back(w[i]);

  auto softplus = [](const T& a) { return primal(a) > 30.0 ? a : log1p(exp(a)); };
  auto sigmoid = [](const T& a) { return 1.0 / (1.0 + exp(-a)); };

  OracleScene<T> scene;
  for (int k = 0; k < cfg.blobs; ++k) {
    T pre[8];
    for (int j = 0; j < 8; ++j) {
      const int o = k * 8 + j;
      T acc(W.blob_bias[o]);
      for (int i = 0; i < W.inputs; ++i) acc = acc + W.blob_matrix[static_cast<std::size_t>(o) * W.inputs + i] * x[i];
      pre[j] = acc;
    }
    OracleBlob<T> b;
    for (int c = 0; c < 3; ++c) b.center[c] = 0.8 * tanh(pre[c]);
    b.scale = softplus(pre[3]) + 0.05;
    b.density = softplus(pre[4]) + 0.1;
    for (int c = 0; c < 3; ++c) b.albedo[c] = sigmoid(pre[5 + c]);
    scene.blobs.push_back(b);
  }
  for (int r = 0; r < 9; ++r) {
    T acc(W.light_bias[r]);
    for (int c = 0; c < 9; ++c) acc = acc + W.light_matrix[r * 9 + c] * w[light_off + c];
    scene.lighting[r] = acc;
  }
  return scene;
}

inline double norm2(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

inline double rel_err(std::span<const double> a, std::span<const double> b) {
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) num += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(num) / std::max(norm2(b), 1e-300);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline std::vector<double> unit_direction(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  const double len = norm2(v);
  for (double& x : v) x /= len;
  return v;
}

inline LatentCode shifted(const LatentCode& w, std::span<const double> dir, double h) {
  std::vector<double> v(w.values().begin(), w.values().end());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += h * dir[i];
  return w.with_values(std::move(v));
}

inline PipelineSettings small_settings(int image_size = 32, int samples = 24) {
  PipelineSettings s;
  s.base_pose.image_size = image_size;
  s.quality.samples_per_ray = samples;
  s.eval_sds_draws = 8;
  s.eval_poses = 4;
  return s;
}

}  // namespace sculpt::testing
