#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sculpt/errors.hpp"
#include "sculpt/scene.hpp"

namespace sculpt {

namespace {

constexpr int kPerBlob = 8;  // center(3) scale density albedo(3)
constexpr double kCenterExtent = 0.8;
constexpr double kScaleFloor = 0.05;
constexpr double kDensityFloor = 0.1;

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-output gains for the frozen blob map, indexed by slot within a blob.
constexpr double kGain[kPerBlob] = {0.4, 0.4, 0.4, 0.4, 1.0, 1.5, 1.5, 1.5};

}  // namespace

void GeneratorConfig::validate() const {
  if (latent_dim < kShCoeffs) throw std::invalid_argument("generator: latent_dim must be >= 9");
  if (layers < 1) throw std::invalid_argument("generator: layers must be >= 1");
  if (blobs < 1) throw std::invalid_argument("generator: blobs must be >= 1");
}

std::size_t GeneratorWeights::parameter_count() const {
  return blob_matrix.size() + blob_bias.size() + light_matrix.size() + light_bias.size();
}

std::vector<double> GeneratorWeights::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  flat.insert(flat.end(), blob_matrix.begin(), blob_matrix.end());
  flat.insert(flat.end(), blob_bias.begin(), blob_bias.end());
  flat.insert(flat.end(), light_matrix.begin(), light_matrix.end());
  flat.insert(flat.end(), light_bias.begin(), light_bias.end());
  return flat;
}

void GeneratorWeights::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw ShapeError("GeneratorWeights::assign: size mismatch");
  auto it = flat.begin();
  std::copy(it, it + blob_matrix.size(), blob_matrix.begin());
  it += blob_matrix.size();
  std::copy(it, it + blob_bias.size(), blob_bias.begin());
  it += blob_bias.size();
  std::copy(it, it + light_matrix.size(), light_matrix.begin());
  it += light_matrix.size();
  std::copy(it, it + light_bias.size(), light_bias.begin());
}

ToyGenerator::ToyGenerator(GeneratorConfig config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.weights_seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  GeneratorWeights& w = weights_;
  w.outputs = kPerBlob * config_.blobs;
  w.inputs = config_.layers * config_.latent_dim - kShCoeffs;
  w.blob_matrix.resize(static_cast<std::size_t>(w.outputs) * w.inputs);
  w.blob_bias.resize(w.outputs);
  const double fan = std::sqrt(static_cast<double>(w.inputs));
  for (int o = 0; o < w.outputs; ++o)
    for (int i = 0; i < w.inputs; ++i)
      w.blob_matrix[static_cast<std::size_t>(o) * w.inputs + i] = kGain[o % kPerBlob] * normal(rng) / fan;

  const double scale_bias = std::log(std::expm1(0.09));  // softplus^-1(0.09)
  for (int k = 0; k < config_.blobs; ++k) {
    double* b = &w.blob_bias[static_cast<std::size_t>(k) * kPerBlob];
    for (int c = 0; c < 3; ++c) b[c] = 0.3 * normal(rng);
    b[3] = scale_bias + 0.2 * normal(rng);
    b[4] = 12.0 + 2.0 * normal(rng);
    for (int c = 5; c < 8; ++c) b[c] = 0.8 * normal(rng);
  }

  for (int r = 0; r < kShCoeffs; ++r)
    for (int c = 0; c < kShCoeffs; ++c)
      w.light_matrix[r * kShCoeffs + c] = 0.3 * ((r == c ? 1.0 : 0.0) + 0.15 * normal(rng));
  // Mostly ambient light from above-front.
  w.light_bias = {0.75 * 2.0 * std::sqrt(std::numbers::pi), 0.15, 0.35, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0};

  mapping_bias_.resize(config_.latent_dim);
  for (auto& v : mapping_bias_) v = 0.3 * normal(rng);
}

ToyGenerator::ToyGenerator(GeneratorConfig config, GeneratorWeights weights) : ToyGenerator(config) {
  if (weights.outputs != weights_.outputs || weights.inputs != weights_.inputs ||
      weights.parameter_count() != weights_.parameter_count())
    throw ShapeError("ToyGenerator: weights do not match the configuration");
  weights_ = std::move(weights);
}

ToyGenerator ToyGenerator::with_weights(GeneratorWeights weights) const {
  ToyGenerator g = *this;
  if (weights.parameter_count() != weights_.parameter_count())
    throw ShapeError("ToyGenerator::with_weights: size mismatch");
  g.weights_ = std::move(weights);
  return g;
}

std::size_t ToyGenerator::lighting_slice_offset() const {
  return static_cast<std::size_t>(config_.layers - 1) * config_.latent_dim;
}

bool ToyGenerator::in_lighting_slice(std::size_t flat_index) const {
  const std::size_t off = lighting_slice_offset();
  return flat_index >= off && flat_index < off + kShCoeffs;
}

void ToyGenerator::check_latent(const LatentCode& w) const {
  if (w.space() != LatentSpace::WPlus || w.rows() != config_.layers || w.dim() != config_.latent_dim)
    throw ShapeError("generator: latent must be W+ with shape [" + std::to_string(config_.layers) +
                     ", " + std::to_string(config_.latent_dim) + "]");
}

std::vector<double> ToyGenerator::blob_inputs(const LatentCode& w) const {
  std::vector<double> x;
  x.reserve(weights_.inputs);
  for (std::size_t i = 0; i < w.size(); ++i)
    if (!in_lighting_slice(i)) x.push_back(w.values()[i]);
  return x;
}

ShVector ToyGenerator::lighting_inputs(const LatentCode& w) const {
  ShVector s{};
  const std::size_t off = lighting_slice_offset();
  for (int i = 0; i < kShCoeffs; ++i) s[i] = w.values()[off + i];
  return s;
}

std::vector<double> ToyGenerator::pre_activations(const LatentCode& w) const {
  const std::vector<double> x = blob_inputs(w);
  std::vector<double> pre(weights_.blob_bias);
  for (int o = 0; o < weights_.outputs; ++o) {
    const double* row = &weights_.blob_matrix[static_cast<std::size_t>(o) * weights_.inputs];
    double acc = 0.0;
    for (int i = 0; i < weights_.inputs; ++i) acc += row[i] * x[i];
    pre[o] += acc;
  }
  return pre;
}

ToySceneParams ToyGenerator::decode(const LatentCode& w) const {
  check_latent(w);
  const std::vector<double> pre = pre_activations(w);
  ToySceneParams p;
  p.blobs.resize(config_.blobs);
  for (int k = 0; k < config_.blobs; ++k) {
    const double* a = &pre[static_cast<std::size_t>(k) * kPerBlob];
    Blob& b = p.blobs[k];
    b.center = Vec3{std::tanh(a[0]), std::tanh(a[1]), std::tanh(a[2])} * kCenterExtent;
    b.scale = softplus(a[3]) + kScaleFloor;
    b.density = softplus(a[4]) + kDensityFloor;
    b.albedo = {logistic(a[5]), logistic(a[6]), logistic(a[7])};
  }
  const ShVector s = lighting_inputs(w);
  for (int r = 0; r < kShCoeffs; ++r) {
    double acc = weights_.light_bias[r];
    for (int c = 0; c < kShCoeffs; ++c) acc += weights_.light_matrix[r * kShCoeffs + c] * s[c];
    p.lighting.coeffs[r] = acc;
  }
  p.lighting.frame = LightingFrame::World;
  return p;
}

void ToyGenerator::pre_activation_grad(const LatentCode& w, const SceneGradient& g,
                                       std::vector<double>& g_pre) const {
  if (g.blobs.size() != static_cast<std::size_t>(config_.blobs))
    throw ShapeError("generator: scene gradient has wrong blob count");
  const std::vector<double> pre = pre_activations(w);
  g_pre.assign(pre.size(), 0.0);
  for (int k = 0; k < config_.blobs; ++k) {
    const double* a = &pre[static_cast<std::size_t>(k) * kPerBlob];
    double* ga = &g_pre[static_cast<std::size_t>(k) * kPerBlob];
    const Blob& gb = g.blobs[k];
    for (int c = 0; c < 3; ++c) {
      const double t = std::tanh(a[c]);
      ga[c] = gb.center[c] * kCenterExtent * (1.0 - t * t);
    }
    ga[3] = gb.scale * logistic(a[3]);
    ga[4] = gb.density * logistic(a[4]);
    for (int c = 0; c < 3; ++c) {
      const double s = logistic(a[5 + c]);
      ga[5 + c] = gb.albedo[c] * s * (1.0 - s);
    }
  }
}

std::vector<double> ToyGenerator::decode_vjp_latent(const LatentCode& w, const SceneGradient& g) const {
  check_latent(w);
  std::vector<double> g_pre;
  pre_activation_grad(w, g, g_pre);
  std::vector<double> g_x(weights_.inputs, 0.0);
  for (int o = 0; o < weights_.outputs; ++o) {
    const double* row = &weights_.blob_matrix[static_cast<std::size_t>(o) * weights_.inputs];
    const double go = g_pre[o];
    if (go == 0.0) continue;
    for (int i = 0; i < weights_.inputs; ++i) g_x[i] += row[i] * go;
  }
  std::vector<double> out(w.size(), 0.0);
  std::size_t xi = 0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (!in_lighting_slice(i)) out[i] = g_x[xi++];
  const std::size_t off = lighting_slice_offset();
  for (int c = 0; c < kShCoeffs; ++c) {
    double acc = 0.0;
    for (int r = 0; r < kShCoeffs; ++r) acc += weights_.light_matrix[r * kShCoeffs + c] * g.lighting[r];
    out[off + c] = acc;
  }
  return out;
}

GeneratorWeights ToyGenerator::decode_vjp_weights(const LatentCode& w, const SceneGradient& g) const {
  check_latent(w);
  std::vector<double> g_pre;
  pre_activation_grad(w, g, g_pre);
  const std::vector<double> x = blob_inputs(w);
  GeneratorWeights out = weights_;
  for (int o = 0; o < weights_.outputs; ++o) {
    double* row = &out.blob_matrix[static_cast<std::size_t>(o) * weights_.inputs];
    for (int i = 0; i < weights_.inputs; ++i) row[i] = g_pre[o] * x[i];
    out.blob_bias[o] = g_pre[o];
  }
  const ShVector s = lighting_inputs(w);
  for (int r = 0; r < kShCoeffs; ++r) {
    for (int c = 0; c < kShCoeffs; ++c) out.light_matrix[r * kShCoeffs + c] = g.lighting[r] * s[c];
    out.light_bias[r] = g.lighting[r];
  }
  return out;
}

LatentCode ToyGenerator::sample_latent(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> row(config_.latent_dim);
  for (int i = 0; i < config_.latent_dim; ++i) row[i] = 0.6 * normal(rng) + mapping_bias_[i];
  return broadcast_to_wplus(LatentCode(LatentSpace::W, 1, config_.latent_dim, std::move(row)),
                            config_.layers);
}

LatentSampler ToyGenerator::sampler() const {
  return [self = *this](std::mt19937_64& rng) { return self.sample_latent(rng); };
}

RenderedView ToyGenerator::render(const LatentCode& w, const CameraPose& pose,
                                  const RenderQuality& quality) const {
  return render_scene(decode(w), pose, quality);
}

std::vector<double> ToyGenerator::render_vjp(const LatentCode& w, const CameraPose& pose,
                                             const RenderQuality& quality,
                                             const ViewCotangent& cotangent) const {
  const SceneGradient g = render_scene_vjp(decode(w), pose, quality, cotangent);
  return decode_vjp_latent(w, g);
}

}  // namespace sculpt
