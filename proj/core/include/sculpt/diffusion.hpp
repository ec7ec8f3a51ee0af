#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sculpt/camera.hpp"
#include "sculpt/image.hpp"
#include "sculpt/scene.hpp"

namespace sculpt {

// cos^2(pi t / 2), defined on (0, 1].
double alpha_bar(double t);

enum class SdsWeighting { OneMinusAlphaBar, Unit };

std::string to_string(SdsWeighting w);
SdsWeighting sds_weighting_from_string(const std::string& s);

struct DiffusionSchedule {
  double t_min = 0.02;
  double t_max = 0.98;
  SdsWeighting weighting = SdsWeighting::OneMinusAlphaBar;

  void validate() const;
  double alpha_bar(double t) const { return sculpt::alpha_bar(t); }
  double sds_weight(double t) const;
  double sample_timestep(std::mt19937_64& rng) const;

  bool operator==(const DiffusionSchedule&) const = default;
};

using DiffusionLatent = std::vector<double>;

// sqrt(abar) z + sqrt(1 - abar) eps
DiffusionLatent noise_latent(std::span<const double> z, double t, std::span<const double> eps);

// Average-pools to 16x16, flattens and applies a frozen seeded linear map (no bias).
class LatentImageEncoder {
 public:
  static constexpr int kPooledSize = 16;
  static constexpr int kDefaultDim = 16;

  LatentImageEncoder(int image_size, std::uint64_t seed, int latent_dim = kDefaultDim);

  int latent_dim() const noexcept { return latent_dim_; }
  int image_size() const noexcept { return image_size_; }
  DiffusionLatent encode(const Image& x) const;
  Image vjp(std::span<const double> g) const;
  // latent_dim x (16*16*3), row-major
  const std::vector<double>& matrix() const noexcept { return matrix_; }

 private:
  int image_size_;
  int latent_dim_;
  std::vector<double> matrix_;
};

struct PromptEntry {
  std::vector<double> target_mu;
  double spread = 1.0;
};

class PromptBank {
 public:
  void add(const std::string& prompt, PromptEntry entry);
  bool contains(const std::string& prompt) const { return entries_.contains(prompt); }
  const PromptEntry& at(const std::string& prompt) const;
  const std::map<std::string, PromptEntry>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }

  // {"<prompt>": {"image": "<path>", "spread": s}, ...}; image paths are resolved
  // relative to the bank file. target_mu is the encoding of each exemplar.
  static PromptBank load(const std::filesystem::path& path, const LatentImageEncoder& encoder);

 private:
  std::map<std::string, PromptEntry> entries_;
};

// Frozen epsilon predictor. Gradients are never taken through it.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual std::vector<double> predict_noise(std::span<const double> z_t, const std::string& prompt,
                                            double t) const = 0;
};

// MMSE epsilon predictor for data ~ N(target_mu, s^2 I).
class AnalyticDenoiser final : public Denoiser {
 public:
  explicit AnalyticDenoiser(PromptBank bank) : bank_(std::move(bank)) {}
  std::vector<double> predict_noise(std::span<const double> z_t, const std::string& prompt,
                                    double t) const override;
  const PromptBank& bank() const noexcept { return bank_; }

 private:
  PromptBank bank_;
};

std::vector<double> denoise(std::span<const double> z_t, const std::string& prompt, double t,
                            const PromptBank& bank);

struct SdsSample {
  double t = 0.5;
  std::vector<double> eps;
};

SdsSample draw_sds_sample(const DiffusionSchedule& schedule, int latent_dim, std::mt19937_64& rng);

struct SdsImageTerm {
  double loss_value = 0.0;  // ||r||^2, monitoring only
  double weight = 0.0;      // sds_weight(t)
  std::vector<double> residual;
  Image grad_image;         // weight * E^T r
};

// Score-distillation gradient on an image: the denoiser Jacobian is skipped, the image
// encoder Jacobian is kept.
SdsImageTerm sds_image_term(const Image& x, const std::string& prompt, const SdsSample& sample,
                            const LatentImageEncoder& encoder, const Denoiser& denoiser,
                            const DiffusionSchedule& schedule);

struct SdsContext {
  const ToyGenerator* generator = nullptr;
  RenderQuality quality;
  const LatentImageEncoder* encoder = nullptr;
  const Denoiser* denoiser = nullptr;
  DiffusionSchedule schedule;
};

struct SdsResult {
  double loss_value = 0.0;
  std::vector<double> grad_w;
  SdsSample sample;
};

// One (t, eps) draw; renders at c_s and returns sds_weight(t) (dz/dw)^T (eps_hat - eps).
SdsResult sds_loss(const SdsContext& ctx, const LatentCode& w, const CameraPose& c_s,
                   const std::string& prompt, std::mt19937_64& rng);
SdsResult sds_loss(const SdsContext& ctx, const LatentCode& w, const CameraPose& c_s,
                   const std::string& prompt, const SdsSample& sample);

}  // namespace sculpt
