#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sculpt/camera.hpp"
#include "sculpt/illumination.hpp"
#include "sculpt/image.hpp"
#include "sculpt/latent.hpp"
#include "sculpt/vec3.hpp"

namespace sculpt {

struct Blob {
  Vec3 center;
  double scale = 0.0;
  double density = 0.0;
  Vec3 albedo;
};

// Decoded Gaussian-blob radiance field plus its SH lighting.
struct ToySceneParams {
  std::vector<Blob> blobs;
  SHLighting lighting;
};

// Gradient with respect to ToySceneParams; Blob fields hold the partials.
struct SceneGradient {
  std::vector<Blob> blobs;
  ShVector lighting{};

  explicit SceneGradient(std::size_t num_blobs = 0) : blobs(num_blobs) {}
  SceneGradient& operator+=(const SceneGradient& o);
};

struct RenderedView {
  Image rgb;       // H x W x 3 in [0,1]
  Image normal;    // H x W x 3 world-frame unit vectors, zero where uncovered
  Image albedo;    // H x W x 3
  Image coverage;  // H x W x 1 accumulated opacity
  CameraPose pose;
};

// Cotangents on the view buffers. Empty images are treated as zero.
struct ViewCotangent {
  Image rgb;
  Image normal;
  Image albedo;
  Image coverage;

  static ViewCotangent zeros_like(const RenderedView& view);
};

struct RenderQuality {
  int samples_per_ray = 32;
  double near = 1.2;
  double far = 4.2;

  void validate() const;
  bool operator==(const RenderQuality&) const = default;
};

inline constexpr double kCoverageNormalThreshold = 1e-3;

RenderedView render_scene(const ToySceneParams& params, const CameraPose& pose,
                          const RenderQuality& quality);

// Reverse-mode pass; recomputes each ray's forward quantities.
SceneGradient render_scene_vjp(const ToySceneParams& params, const CameraPose& pose,
                               const RenderQuality& quality, const ViewCotangent& cotangent);

struct GeneratorConfig {
  int latent_dim = 64;
  int layers = 4;
  int blobs = 8;
  std::uint64_t weights_seed = 1234;

  void validate() const;
  bool operator==(const GeneratorConfig&) const = default;
};

// Trainable parameters of the decode map. Stage-1 optimisation treats them as frozen;
// pivotal tuning updates them.
struct GeneratorWeights {
  int outputs = 0;  // 8 pre-activations per blob
  int inputs = 0;   // latent entries feeding the blob map (lighting slice excluded)
  std::vector<double> blob_matrix;  // outputs x inputs, row-major
  std::vector<double> blob_bias;    // outputs
  std::array<double, kShCoeffs * kShCoeffs> light_matrix{};
  ShVector light_bias{};

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  bool operator==(const GeneratorWeights&) const = default;
};

// Frozen, seeded latent-to-scene decoder. Blob parameters come from an affine map of the
// flattened W+ code minus the lighting slice; the lighting comes from a separate affine
// map of the first nine entries of the last latent row.
class ToyGenerator {
 public:
  explicit ToyGenerator(GeneratorConfig config);
  ToyGenerator(GeneratorConfig config, GeneratorWeights weights);

  const GeneratorConfig& config() const noexcept { return config_; }
  const GeneratorWeights& weights() const noexcept { return weights_; }
  ToyGenerator with_weights(GeneratorWeights weights) const;

  // Index into the flattened code where the 9-entry lighting slice begins.
  std::size_t lighting_slice_offset() const;
  bool in_lighting_slice(std::size_t flat_index) const;

  ToySceneParams decode(const LatentCode& w) const;
  std::vector<double> decode_vjp_latent(const LatentCode& w, const SceneGradient& g) const;
  GeneratorWeights decode_vjp_weights(const LatentCode& w, const SceneGradient& g) const;

  // Stand-in for the mapping network: w = 0.6 z + b with z ~ N(0, I), broadcast to W+.
  LatentCode sample_latent(std::mt19937_64& rng) const;
  LatentSampler sampler() const;

  RenderedView render(const LatentCode& w, const CameraPose& pose,
                      const RenderQuality& quality) const;
  // Gradient of <cotangent, render(w)> with respect to w.
  std::vector<double> render_vjp(const LatentCode& w, const CameraPose& pose,
                                 const RenderQuality& quality,
                                 const ViewCotangent& cotangent) const;

 private:
  void check_latent(const LatentCode& w) const;
  std::vector<double> blob_inputs(const LatentCode& w) const;
  std::vector<double> pre_activations(const LatentCode& w) const;
  ShVector lighting_inputs(const LatentCode& w) const;
  void pre_activation_grad(const LatentCode& w, const SceneGradient& g,
                           std::vector<double>& g_pre) const;

  GeneratorConfig config_;
  GeneratorWeights weights_;
  std::vector<double> mapping_bias_;
};

}  // namespace sculpt
