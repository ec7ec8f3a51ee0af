#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sculpt/image.hpp"

namespace sculpt {

// Frozen random convolutional encoder: three stride-2 4x4 convolutions with tanh, then a
// linear head. Weights are drawn once from the seed.
class ConvEncoder {
 public:
  struct Config {
    int image_size = 64;
    int output_dim = 128;
    std::uint64_t seed = 7;
    std::uint64_t stream = 0;  // separates encoders built from the same seed
    bool operator==(const Config&) const = default;
  };

  explicit ConvEncoder(Config config);

  const Config& config() const noexcept { return config_; }
  int output_dim() const noexcept { return config_.output_dim; }

  std::vector<double> forward(const Image& x) const;
  // (d forward / dx)^T g
  Image vjp(const Image& x, std::span<const double> g) const;

 private:
  struct Layer {
    int in_channels, out_channels, in_size, out_size;
    std::vector<double> weight;  // out x in x 4 x 4
    std::vector<double> bias;
  };
  struct Activations;

  void check_input(const Image& x) const;
  Activations run(const Image& x) const;

  Config config_;
  std::vector<Layer> layers_;
  int head_inputs_ = 0;
  std::vector<double> head_;  // output_dim x head_inputs
  std::vector<double> head_bias_;
};

using FeatureVector = std::vector<double>;

class FeatureEncoder {
 public:
  static constexpr int kDefaultDim = 128;
  FeatureEncoder(int image_size, std::uint64_t seed, int dim = kDefaultDim);

  FeatureVector encode(const Image& x) const { return net_.forward(x); }
  Image vjp(const Image& x, std::span<const double> g) const { return net_.vjp(x, g); }
  const ConvEncoder& network() const noexcept { return net_; }

 private:
  ConvEncoder net_;
};

// Unit-norm embedding from a frozen encoder on a seed stream disjoint from the feature
// encoder.
class IdentityEmbedder {
 public:
  static constexpr int kDefaultDim = 64;
  IdentityEmbedder(int image_size, std::uint64_t seed, int dim = kDefaultDim);

  std::vector<double> embed(const Image& x) const;
  Image vjp(const Image& x, std::span<const double> g) const;
  const ConvEncoder& network() const noexcept { return net_; }

 private:
  ConvEncoder net_;
};

struct ImageLoss {
  double value = 0.0;
  Image grad;  // d value / d x_render; empty when not requested
};

// ||V(x_render) - V(x_input)||^2
double reconstruction_loss(const FeatureEncoder& v, const Image& x_render, const Image& x_input);
ImageLoss reconstruction_loss_with_grad(const FeatureEncoder& v, const Image& x_render,
                                        const Image& x_input);
// Same loss against precomputed input features.
ImageLoss reconstruction_loss_with_grad(const FeatureEncoder& v, const Image& x_render,
                                        std::span<const double> input_features);

// 1 - <R(x_input), R(x_render)>
double identity_loss(const IdentityEmbedder& r, const Image& x_render, const Image& x_input);
ImageLoss identity_loss_with_grad(const IdentityEmbedder& r, const Image& x_render,
                                  std::span<const double> input_embedding);

}  // namespace sculpt
