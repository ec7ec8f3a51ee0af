#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sculpt/pipeline.hpp"
#include "sculpt/run_config.hpp"

namespace sculpt {

// Artifact file names inside a run directory.
namespace artifact {
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kLosses = "losses.csv";
inline constexpr const char* kGrid = "grid.ppm";
inline constexpr const char* kLatent = "latent.json";
inline constexpr const char* kSweepSummary = "sweep.json";
}  // namespace artifact

// Frozen generator, encoders and prompt bank described by a config.
PipelineContext build_context(const RunConfig& config);

// The input view named by config.input, rendered or loaded at the camera pose.
std::optional<Image> load_input_image(const RunConfig& config, const ToyGenerator& generator);

ObjectiveSpec build_spec(const RunConfig& config, const PipelineContext& ctx);

// The latent named by a seed, as drawn by the generator's sampler.
LatentCode latent_from_seed(const ToyGenerator& generator, std::uint64_t seed);

// Default grid: n poses spanning the side-view azimuth range at the camera elevation.
std::vector<CameraPose> grid_poses(const PipelineSettings& settings, int n);

// Horizontally tiled renders of w at the given poses, written as a binary PPM.
Image render_view_grid(const ToyGenerator& generator, const LatentCode& w, std::span<const CameraPose> poses,
                       const RenderQuality& quality);
void export_view_grid(const ToyGenerator& generator, const LatentCode& w, std::span<const CameraPose> poses,
                      const RenderQuality& quality, const std::filesystem::path& path);

// rgb/normal/albedo as PPM, coverage as PGM, plus a JSON sidecar with the value mappings.
void export_rendered_view(const RenderedView& view, const std::filesystem::path& dir, const std::string& stem);

// One row per iteration: iteration, lambda-weighted parts, total, wall-clock ms.
std::string loss_table_csv(const std::vector<IterationRecord>& records);

// Runs a command and writes its artifacts under config.out_dir. Returns the manifest
// (for sweep, the sweep summary).
nlohmann::json run_command(const RunConfig& config);

struct ReplayReport {
  bool identical = false;
  nlohmann::json recorded;  // final metrics in the manifest
  nlohmann::json replayed;  // final metrics from the rerun
};

// Re-runs the configuration recorded in a manifest (or sweep summary) into out_dir and
// compares final metrics exactly.
ReplayReport replay_manifest(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir);

}  // namespace sculpt
