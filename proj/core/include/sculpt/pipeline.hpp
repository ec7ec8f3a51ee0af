#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sculpt/camera.hpp"
#include "sculpt/diffusion.hpp"
#include "sculpt/illumination.hpp"
#include "sculpt/image.hpp"
#include "sculpt/latent.hpp"
#include "sculpt/preservation.hpp"
#include "sculpt/scene.hpp"

namespace sculpt {

// Term keys used in loss maps, manifests and loss tables.
namespace term {
inline constexpr const char* kIdentity = "id";
inline constexpr const char* kReconstruction = "r";
inline constexpr const char* kDiffusion = "d";
inline constexpr const char* kIllumination = "il";
inline constexpr const char* kRegularization = "regu";
}  // namespace term

inline const std::vector<std::string>& term_order() {
  static const std::vector<std::string> order{term::kIdentity, term::kReconstruction, term::kDiffusion,
                                              term::kIllumination, term::kRegularization};
  return order;
}

struct LossWeights {
  double id = 0.2;
  double r = 0.2;
  double d = 2e-5;
  double il = 1.0;
  double regu = 0.0;

  double get(const std::string& term) const;
  void set(const std::string& term, double value);
  bool operator==(const LossWeights&) const = default;
};

struct ObjectiveSpec {
  LossWeights weights;
  std::optional<std::string> prompt;
  std::optional<SHLighting> target_light;
  std::optional<Image> input_image;
  std::optional<CameraPose> input_pose;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct PipelineSettings {
  RenderQuality quality;
  CameraPose base_pose;  // frontal view; base for side-pose sampling and evaluation
  SidePoseSampler side_sampler;
  DiffusionSchedule schedule;
  double ridge = 1e-6;
  bool decouple_side_views = false;
  int eval_sds_draws = 64;
  int eval_poses = 8;
  std::uint64_t eval_seed = 2024;
  bool operator==(const PipelineSettings&) const = default;
};

struct EncoderSeeds {
  std::uint64_t feature = 11;
  std::uint64_t identity = 13;
  std::uint64_t diffusion = 17;
  int feature_dim = FeatureEncoder::kDefaultDim;
  int identity_dim = IdentityEmbedder::kDefaultDim;
  int diffusion_dim = LatentImageEncoder::kDefaultDim;
  bool operator==(const EncoderSeeds&) const = default;
};

// Frozen components shared by every stage of a run.
struct PipelineContext {
  PipelineContext(GeneratorConfig generator_config, EncoderSeeds seeds, PipelineSettings settings,
                  int stats_samples = 1000, std::uint64_t stats_seed = 99);

  ToyGenerator generator;
  FeatureEncoder features;
  IdentityEmbedder identity;
  LatentImageEncoder latent_encoder;
  PromptBank bank;
  std::shared_ptr<const Denoiser> denoiser;
  LatentStats stats;
  PipelineSettings settings;
  EncoderSeeds seeds;
  int stats_samples;
  std::uint64_t stats_seed;

  // Replaces the prompt bank and rebuilds the analytic denoiser.
  void set_prompt_bank(PromptBank bank);
  // Registers the encoding of an exemplar image under `prompt`.
  void register_prompt(const std::string& prompt, const Image& exemplar, double spread);
};

// Pins the stochastic parts of one objective evaluation.
struct ObjectiveOverrides {
  std::optional<CameraPose> side_pose;
  std::optional<CameraPose> illumination_pose;
  std::optional<SdsSample> sds;
};

struct ObjectiveResult {
  double total = 0.0;
  std::map<std::string, double> parts;     // unweighted term values
  std::map<std::string, double> weighted;  // lambda * part
  std::vector<double> grad_w;
  std::map<std::string, std::string> pose_tags;  // term -> "input" | "side"
  std::optional<CameraPose> side_pose;
  std::optional<CameraPose> illumination_pose;
  std::optional<double> sds_t;
};

ObjectiveResult compose_objective(const PipelineContext& ctx, const LatentCode& w, const ObjectiveSpec& spec,
                                  std::mt19937_64& rng, const ObjectiveOverrides* overrides = nullptr);

// Same objective with the generator weights as the free variable (latent fixed).
struct GeneratorObjectiveResult {
  ObjectiveResult objective;  // grad_w left empty
  GeneratorWeights grad_weights;
};
GeneratorObjectiveResult compose_generator_objective(const PipelineContext& ctx, const ToyGenerator& generator,
                                                     const LatentCode& w, const ObjectiveSpec& spec,
                                                     std::mt19937_64& rng,
                                                     const ObjectiveOverrides* overrides = nullptr);

struct AdamSettings {
  int iterations = 500;
  double step = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool operator==(const AdamSettings&) const = default;
};

class Adam {
 public:
  Adam(std::size_t n, AdamSettings settings);
  // Returns the update to add to the parameters for gradient g.
  std::vector<double> step(std::span<const double> g);

 private:
  AdamSettings s_;
  std::vector<double> m_, v_;
  int t_ = 0;
};

struct IterationRecord {
  int iteration = 0;
  std::string stage;
  std::map<std::string, double> parts;
  std::map<std::string, double> weighted;
  double total = 0.0;
  std::map<std::string, std::string> pose_tags;
  std::optional<CameraPose> side_pose;
  std::optional<double> sds_t;
  std::map<std::string, double> extra;
  double wall_ms = 0.0;
};

struct RunManifest {
  nlohmann::json config = nlohmann::json::object();
  std::vector<IterationRecord> iterations;
  std::map<std::string, double> final_metrics;
  std::optional<LatentCode> final_latent;
  std::map<std::string, std::string> checksums;
  double wall_clock_s = 0.0;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

// Deterministic end-of-run metrics; pose sets and SDS draws come from settings.eval_seed.
std::map<std::string, double> evaluate_metrics(const PipelineContext& ctx, const ToyGenerator& generator,
                                               const LatentCode& w, const ObjectiveSpec& spec);

// Describes the pipeline-level selections recorded in every manifest.
nlohmann::json describe_pipeline(const PipelineContext& ctx, const ObjectiveSpec& spec);

struct LatentRun {
  LatentCode w;
  RunManifest manifest;
};

LatentRun optimize_latent(const PipelineContext& ctx, const ObjectiveSpec& spec, const LatentCode& init,
                          const AdamSettings& settings, std::mt19937_64& rng);

struct PtiSettings {
  int iterations = 200;
  double step = 1e-3;
  int max_backtracks = 5;
  bool operator==(const PtiSettings&) const = default;
};

struct PtiRun {
  ToyGenerator tuned;
  RunManifest manifest;
};

// Fine-tunes the decode weights around a fixed pivot latent. Each Adam proposal is
// backtracked until the input-view part of the objective does not increase.
PtiRun pivotal_tune(const PipelineContext& ctx, const LatentCode& w_t, const ObjectiveSpec& spec,
                    const PtiSettings& settings, std::mt19937_64& rng);

enum class InitMode { Mean, InvertFirst };
std::string to_string(InitMode m);
InitMode init_mode_from_string(const std::string& s);

struct InitSettings {
  InitMode mode = InitMode::Mean;
  double perturbation = 0.0;
  std::uint64_t seed = 0;
  int warmup_iterations = 200;
  bool operator==(const InitSettings&) const = default;
};

LatentCode initialize_latent(const PipelineContext& ctx, const ObjectiveSpec& spec, const InitSettings& init,
                             const AdamSettings& optimizer, std::mt19937_64& rng);

struct GenerateOptions {
  // Test hook: permits lambda_d = 0 so the pure regulariser can be exercised.
  bool allow_zero_diffusion_weight = false;
};

LatentRun generate_from_text(const PipelineContext& ctx, const std::string& prompt, double lambda_d,
                             double lambda_regu, const AdamSettings& settings, std::mt19937_64& rng,
                             const GenerateOptions& options = {});

enum class SweepAxis { LambdaId, LambdaR, LambdaD };
std::string to_string(SweepAxis a);
SweepAxis sweep_axis_from_string(const std::string& s);
// Loss term key controlled by a sweep axis.
std::string sweep_term(SweepAxis a);

struct SweepCell {
  double value = 0.0;
  LatentRun run;
};

// One optimize_latent run per value; every cell restarts from the same init and seed.
std::vector<SweepCell> ablation_sweep(const PipelineContext& ctx, const ObjectiveSpec& base_spec, SweepAxis axis,
                                      const std::vector<double>& values, const LatentCode& init,
                                      const AdamSettings& settings, std::uint64_t seed);

}  // namespace sculpt
