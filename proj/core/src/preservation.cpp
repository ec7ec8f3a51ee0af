#include "sculpt/preservation.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "sculpt/errors.hpp"

namespace sculpt {

namespace {

constexpr int kKernel = 4;
constexpr int kStride = 2;
constexpr int kPad = 1;
constexpr int kChannels[] = {3, 8, 16, 16};
constexpr double kConvGain = 1.5;

constexpr std::uint64_t kFeatureStream = 0xFE;
constexpr std::uint64_t kIdentityStream = 0x1D;

}  // namespace

// Channel-first activations: index 0 is the centred input, index l+1 the output of layer l.
struct ConvEncoder::Activations {
  std::vector<std::vector<double>> maps;
  std::vector<double> output;
};

ConvEncoder::ConvEncoder(Config config) : config_(config) {
  if (config_.image_size < 8 || config_.image_size % 8 != 0)
    throw std::invalid_argument("ConvEncoder: image_size must be a positive multiple of 8");
  if (config_.output_dim < 1) throw std::invalid_argument("ConvEncoder: output_dim must be >= 1");

  std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                    static_cast<std::uint32_t>(config_.stream)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);

  int size = config_.image_size;
  for (int l = 0; l < 3; ++l) {
    Layer layer;
    layer.in_channels = kChannels[l];
    layer.out_channels = kChannels[l + 1];
    layer.in_size = size;
    layer.out_size = size / kStride;
    const double fan = layer.in_channels * kKernel * kKernel;
    layer.weight.resize(static_cast<std::size_t>(layer.out_channels) * fan);
    for (auto& v : layer.weight) v = kConvGain * normal(rng) / std::sqrt(fan);
    layer.bias.resize(layer.out_channels);
    for (auto& v : layer.bias) v = 0.1 * normal(rng);
    layers_.push_back(std::move(layer));
    size /= kStride;
  }
  head_inputs_ = kChannels[3] * size * size;
  head_.resize(static_cast<std::size_t>(config_.output_dim) * head_inputs_);
  for (auto& v : head_) v = normal(rng) / std::sqrt(static_cast<double>(head_inputs_));
  head_bias_.resize(config_.output_dim);
  for (auto& v : head_bias_) v = 0.1 * normal(rng);
}

void ConvEncoder::check_input(const Image& x) const {
  if (x.height != config_.image_size || x.width != config_.image_size || x.channels != 3)
    throw ShapeError("encoder: expected a " + std::to_string(config_.image_size) + "x" +
                     std::to_string(config_.image_size) + "x3 image");
}

ConvEncoder::Activations ConvEncoder::run(const Image& x) const {
  check_input(x);
  Activations act;
  const int n = config_.image_size;
  std::vector<double> input(static_cast<std::size_t>(3) * n * n);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < n; ++y)
      for (int xx = 0; xx < n; ++xx)
        input[(static_cast<std::size_t>(c) * n + y) * n + xx] = x.at(y, xx, c) - 0.5;
  act.maps.push_back(std::move(input));

  for (const Layer& L : layers_) {
    const std::vector<double>& in = act.maps.back();
    std::vector<double> out(static_cast<std::size_t>(L.out_channels) * L.out_size * L.out_size);
    for (int o = 0; o < L.out_channels; ++o) {
      for (int y = 0; y < L.out_size; ++y) {
        for (int xx = 0; xx < L.out_size; ++xx) {
          double acc = L.bias[o];
          for (int c = 0; c < L.in_channels; ++c) {
            const double* wk = &L.weight[((static_cast<std::size_t>(o) * L.in_channels + c) * kKernel) * kKernel];
            for (int ky = 0; ky < kKernel; ++ky) {
              const int iy = kStride * y - kPad + ky;
              if (iy < 0 || iy >= L.in_size) continue;
              const double* row = &in[(static_cast<std::size_t>(c) * L.in_size + iy) * L.in_size];
              for (int kx = 0; kx < kKernel; ++kx) {
                const int ix = kStride * xx - kPad + kx;
                if (ix < 0 || ix >= L.in_size) continue;
                acc += wk[ky * kKernel + kx] * row[ix];
              }
            }
          }
          out[(static_cast<std::size_t>(o) * L.out_size + y) * L.out_size + xx] = std::tanh(acc);
        }
      }
    }
    act.maps.push_back(std::move(out));
  }

  const std::vector<double>& h = act.maps.back();
  act.output.assign(head_bias_.begin(), head_bias_.end());
  for (int o = 0; o < config_.output_dim; ++o) {
    const double* row = &head_[static_cast<std::size_t>(o) * head_inputs_];
    double acc = 0.0;
    for (int i = 0; i < head_inputs_; ++i) acc += row[i] * h[i];
    act.output[o] += acc;
  }
  return act;
}

std::vector<double> ConvEncoder::forward(const Image& x) const { return run(x).output; }

Image ConvEncoder::vjp(const Image& x, std::span<const double> g) const {
  if (g.size() != static_cast<std::size_t>(config_.output_dim))
    throw ShapeError("encoder vjp: cotangent has wrong dimension");
  const Activations act = run(x);

  std::vector<double> g_map(head_inputs_, 0.0);
  for (int o = 0; o < config_.output_dim; ++o) {
    const double* row = &head_[static_cast<std::size_t>(o) * head_inputs_];
    for (int i = 0; i < head_inputs_; ++i) g_map[i] += row[i] * g[o];
  }

  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    const Layer& L = layers_[l];
    const std::vector<double>& out = act.maps[l + 1];
    std::vector<double> g_pre(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) g_pre[i] = g_map[i] * (1.0 - out[i] * out[i]);
    std::vector<double> g_in(static_cast<std::size_t>(L.in_channels) * L.in_size * L.in_size, 0.0);
    for (int o = 0; o < L.out_channels; ++o) {
      for (int y = 0; y < L.out_size; ++y) {
        for (int xx = 0; xx < L.out_size; ++xx) {
          const double gp = g_pre[(static_cast<std::size_t>(o) * L.out_size + y) * L.out_size + xx];
          if (gp == 0.0) continue;
          for (int c = 0; c < L.in_channels; ++c) {
            const double* wk = &L.weight[((static_cast<std::size_t>(o) * L.in_channels + c) * kKernel) * kKernel];
            for (int ky = 0; ky < kKernel; ++ky) {
              const int iy = kStride * y - kPad + ky;
              if (iy < 0 || iy >= L.in_size) continue;
              double* row = &g_in[(static_cast<std::size_t>(c) * L.in_size + iy) * L.in_size];
              for (int kx = 0; kx < kKernel; ++kx) {
                const int ix = kStride * xx - kPad + kx;
                if (ix < 0 || ix >= L.in_size) continue;
                row[ix] += wk[ky * kKernel + kx] * gp;
              }
            }
          }
        }
      }
    }
    g_map = std::move(g_in);
  }

  const int n = config_.image_size;
  Image out(n, n, 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < n; ++y)
      for (int xx = 0; xx < n; ++xx) out.at(y, xx, c) = g_map[(static_cast<std::size_t>(c) * n + y) * n + xx];
  return out;
}

FeatureEncoder::FeatureEncoder(int image_size, std::uint64_t seed, int dim)
    : net_(ConvEncoder::Config{image_size, dim, seed, kFeatureStream}) {}

IdentityEmbedder::IdentityEmbedder(int image_size, std::uint64_t seed, int dim)
    : net_(ConvEncoder::Config{image_size, dim, seed, kIdentityStream}) {}

namespace {

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::vector<double> IdentityEmbedder::embed(const Image& x) const {
  std::vector<double> raw = net_.forward(x);
  const double len = l2(raw);
  if (!(len > 1e-12)) throw std::domain_error("identity_embed: zero embedding before normalisation");
  for (auto& v : raw) v /= len;
  return raw;
}

Image IdentityEmbedder::vjp(const Image& x, std::span<const double> g) const {
  const std::vector<double> raw = net_.forward(x);
  const double len = l2(raw);
  if (!(len > 1e-12)) throw std::domain_error("identity_embed: zero embedding before normalisation");
  double eg = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) eg += raw[i] / len * g[i];
  std::vector<double> g_raw(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) g_raw[i] = (g[i] - raw[i] / len * eg) / len;
  return net_.vjp(x, g_raw);
}

double reconstruction_loss(const FeatureEncoder& v, const Image& x_render, const Image& x_input) {
  if (!x_render.same_shape(x_input)) throw ShapeError("reconstruction_loss: image shape mismatch");
  const auto a = v.encode(x_render);
  const auto b = v.encode(x_input);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

ImageLoss reconstruction_loss_with_grad(const FeatureEncoder& v, const Image& x_render,
                                        std::span<const double> input_features) {
  const auto a = v.encode(x_render);
  if (a.size() != input_features.size()) throw ShapeError("reconstruction_loss: feature size mismatch");
  ImageLoss out;
  std::vector<double> g(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - input_features[i];
    out.value += d * d;
    g[i] = 2.0 * d;
  }
  out.grad = v.vjp(x_render, g);
  return out;
}

ImageLoss reconstruction_loss_with_grad(const FeatureEncoder& v, const Image& x_render,
                                        const Image& x_input) {
  if (!x_render.same_shape(x_input)) throw ShapeError("reconstruction_loss: image shape mismatch");
  return reconstruction_loss_with_grad(v, x_render, v.encode(x_input));
}

double identity_loss(const IdentityEmbedder& r, const Image& x_render, const Image& x_input) {
  if (!x_render.same_shape(x_input)) throw ShapeError("identity_loss: image shape mismatch");
  const auto a = r.embed(x_input);
  const auto b = r.embed(x_render);
  double ip = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ip += a[i] * b[i];
  return 1.0 - ip;
}

ImageLoss identity_loss_with_grad(const IdentityEmbedder& r, const Image& x_render,
                                  std::span<const double> input_embedding) {
  const auto b = r.embed(x_render);
  if (b.size() != input_embedding.size()) throw ShapeError("identity_loss: embedding size mismatch");
  ImageLoss out;
  double ip = 0.0;
  std::vector<double> g(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    ip += input_embedding[i] * b[i];
    g[i] = -input_embedding[i];
  }
  out.value = 1.0 - ip;
  out.grad = r.vjp(x_render, g);
  return out;
}

}  // namespace sculpt
