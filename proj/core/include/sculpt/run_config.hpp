#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sculpt/pipeline.hpp"

namespace sculpt {

enum class Command { Invert, Edit, Relight, Generate, Sweep };
std::string to_string(Command c);
Command command_from_string(const std::string& s);

// Static configuration problem; field() is the dotted path of the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Where the input view comes from. Exactly one source is set for commands that need it.
struct InputSource {
  std::optional<std::filesystem::path> image;   // PPM file
  std::optional<std::filesystem::path> latent;  // latent JSON, rendered at the camera pose
  std::optional<std::uint64_t> latent_seed;     // sampled latent, rendered at the camera pose
  bool present() const { return image || latent || latent_seed; }
  bool operator==(const InputSource&) const = default;
};

// One prompt bank entry: an exemplar image or a sampled latent rendered at the camera pose.
struct PromptSource {
  std::optional<std::filesystem::path> image;
  std::optional<std::uint64_t> latent_seed;
  double spread = 0.25;
  bool operator==(const PromptSource&) const = default;
};

struct RunConfig {
  Command command = Command::Invert;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";

  GeneratorConfig generator;
  int stats_samples = 1000;
  std::uint64_t stats_seed = 99;
  EncoderSeeds encoders;
  PipelineSettings settings;  // settings.base_pose doubles as the input camera pose

  LossWeights weights;
  std::optional<std::string> prompt;
  std::map<std::string, PromptSource> prompt_bank;
  InputSource input;
  std::optional<SHLighting> target_light;

  AdamSettings optimizer;
  InitSettings init;
  bool pti_enabled = false;
  PtiSettings pti;
  int grid_views = 5;

  std::optional<SweepAxis> sweep_axis;
  std::vector<double> sweep_values;

  bool operator==(const RunConfig&) const = default;
};

// Documented defaults for a command, as a JSON document in config-file form.
nlohmann::json default_config_json(Command command);

// Parses a config document for `command`. Defaults are filled in first, then the
// document is applied on top; relative paths resolve against base_dir. Unknown keys,
// type mismatches and constraint violations throw ConfigError naming the field.
// With validate = false only per-field checks run (used to borrow generator and render
// settings from a config without requiring a complete command).
RunConfig parse_config(Command command, const nlohmann::json& doc, const std::filesystem::path& base_dir = {},
                       bool validate = true);
RunConfig parse_config_file(Command command, const std::filesystem::path& path,
                            const std::vector<std::string>& overrides = {}, bool validate = true);

// Applies "a.b.c=value" overrides to a config document. value is parsed as JSON when
// possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// The effective configuration with every field present and paths absolute.
nlohmann::json serialize_config(const RunConfig& config);

// Checks the cross-field rules run_command relies on. Called by parse_config.
void validate_config(const RunConfig& config);

SHLighting parse_lighting(const nlohmann::json& j);
nlohmann::json lighting_to_json(const SHLighting& l);
SHLighting read_lighting_file(const std::filesystem::path& path);
void write_lighting_file(const SHLighting& l, const std::filesystem::path& path);

}  // namespace sculpt
