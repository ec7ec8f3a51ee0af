#pragma once

// Exact d(encode(render(w)))/dw assembled column by column with forward-mode duals through
// the reference decode and reference renderer. Independent of every reverse-mode pass in
// the library.

#include <vector>

#include "sculpt/diffusion.hpp"
#include "support/dual.hpp"
#include "support/fixtures.hpp"

namespace sculpt::testing {

// Average-pool to 16x16 and apply the encoder's frozen matrix.
template <class T>
std::vector<T> oracle_encode(const std::vector<T>& rgb, int size, const LatentImageEncoder& enc) {
  const int p = LatentImageEncoder::kPooledSize;
  const int f = size / p;
  std::vector<T> pooled(static_cast<std::size_t>(p) * p * 3, T(0.0));
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c)
        pooled[(static_cast<std::size_t>(y / f) * p + x / f) * 3 + c] =
            pooled[(static_cast<std::size_t>(y / f) * p + x / f) * 3 + c] +
            rgb[(static_cast<std::size_t>(y) * size + x) * 3 + c] / double(f * f);
  const auto& M = enc.matrix();
  std::vector<T> z(enc.latent_dim(), T(0.0));
  for (int o = 0; o < enc.latent_dim(); ++o)
    for (std::size_t i = 0; i < pooled.size(); ++i) z[o] = z[o] + M[o * pooled.size() + i] * pooled[i];
  return z;
}

// Row-major latent_dim x w.size().
struct EncodedJacobian {
  int rows = 0;
  int cols = 0;
  std::vector<double> z;  // encode(render(w)) from the reference path
  std::vector<double> J;

  std::vector<double> transpose_times(const std::vector<double>& r) const {
    std::vector<double> out(cols, 0.0);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) out[j] += J[static_cast<std::size_t>(i) * cols + j] * r[i];
    return out;
  }
};

inline EncodedJacobian encoded_render_jacobian(const ToyGenerator& gen, const LatentCode& w,
                                               const CameraPose& pose, const RenderQuality& q,
                                               const LatentImageEncoder& enc) {
  const std::size_t n = w.size();
  EncodedJacobian out;
  out.rows = enc.latent_dim();
  out.cols = static_cast<int>(n);
  out.J.assign(static_cast<std::size_t>(out.rows) * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<Dual> wd(n);
    for (std::size_t i = 0; i < n; ++i) wd[i] = Dual(w.values()[i], i == j ? 1.0 : 0.0);
    const auto view = render_oracle<Dual>(oracle_decode<Dual>(gen, wd), pose, q.samples_per_ray, q.near, q.far);
    const std::vector<Dual> z = oracle_encode(view.rgb, pose.image_size, enc);
    for (int i = 0; i < out.rows; ++i) out.J[static_cast<std::size_t>(i) * n + j] = z[i].d;
    if (j == 0) {
      out.z.resize(out.rows);
      for (int i = 0; i < out.rows; ++i) out.z[i] = z[i].v;
    }
  }
  return out;
}

}  // namespace sculpt::testing
