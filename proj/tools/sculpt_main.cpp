#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "sculpt/commands.hpp"
#include "sculpt/errors.hpp"
#include "sculpt/run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPipeline = 3;

int report_error(int code, const std::string& type, const std::string& message, json details = json::object()) {
  json err = {{"type", type}, {"message", message}};
  for (auto& [k, v] : details.items()) err[k] = v;
  std::cerr << json{{"status", "error"}, {"exit_code", code}, {"error", err}}.dump() << std::endl;
  return code;
}

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> sets;
  std::optional<std::string> prompt;
  std::optional<int> iterations;
  std::optional<double> lambda_id, lambda_r, lambda_d, lambda_il, lambda_regu;
};

// Flags are applied after the config file: --set entries in order, then the named flags.
std::vector<std::string> collect_overrides(const RunFlags& f) {
  std::vector<std::string> o = f.sets;
  auto num = [](double v) { return json(v).dump(); };
  if (f.seed) o.push_back("seed=" + std::to_string(*f.seed));
  if (f.out) o.push_back("out_dir=" + json(*f.out).dump());
  if (f.prompt) o.push_back("prompt=" + json(*f.prompt).dump());
  if (f.iterations) o.push_back("optimizer.iterations=" + std::to_string(*f.iterations));
  if (f.lambda_id) o.push_back("weights.lambda_id=" + num(*f.lambda_id));
  if (f.lambda_r) o.push_back("weights.lambda_r=" + num(*f.lambda_r));
  if (f.lambda_d) o.push_back("weights.lambda_d=" + num(*f.lambda_d));
  if (f.lambda_il) o.push_back("weights.lambda_il=" + num(*f.lambda_il));
  if (f.lambda_regu) o.push_back("weights.lambda_regu=" + num(*f.lambda_regu));
  return o;
}

void add_run_flags(CLI::App* sub, RunFlags& f) {
  sub->add_option("--config", f.config, "JSON config file");
  sub->add_option("--seed", f.seed, "Master seed");
  sub->add_option("--out", f.out, "Output directory");
  sub->add_option("--set", f.sets, "Override a config key, e.g. --set optimizer.step=0.02");
  sub->add_option("--prompt", f.prompt, "Prompt (must be in the prompt bank)");
  sub->add_option("--iterations", f.iterations, "Stage-1 iterations");
  sub->add_option("--lambda-id", f.lambda_id);
  sub->add_option("--lambda-r", f.lambda_r);
  sub->add_option("--lambda-d", f.lambda_d);
  sub->add_option("--lambda-il", f.lambda_il);
  sub->add_option("--lambda-regu", f.lambda_regu);
}

// Parses the config; errors here are static configuration problems.
std::optional<sculpt::RunConfig> load_config(sculpt::Command cmd, const RunFlags& f, int& exit_code) {
  try {
    return sculpt::parse_config_file(cmd, f.config.empty() ? fs::path{} : fs::path(f.config), collect_overrides(f));
  } catch (const sculpt::ConfigError& e) {
    exit_code = report_error(kExitConfig, "config_error", e.what(), {{"field", e.field()}});
  } catch (const sculpt::UnknownPromptError& e) {
    exit_code = report_error(kExitConfig, "unknown_prompt", e.what(), {{"prompt", e.prompt()}});
  } catch (const std::exception& e) {
    exit_code = report_error(kExitConfig, "config_error", e.what());
  }
  return std::nullopt;
}

int run_pipeline(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const sculpt::NonFiniteLossError& e) {
    return report_error(kExitPipeline, "non_finite_loss", e.what(), {{"term", e.term()}, {"iteration", e.iteration()}});
  } catch (const sculpt::UnknownPromptError& e) {
    return report_error(kExitPipeline, "unknown_prompt", e.what(), {{"prompt", e.prompt()}});
  } catch (const sculpt::InsufficientCoverageError& e) {
    return report_error(kExitPipeline, "insufficient_coverage", e.what());
  } catch (const sculpt::RankDeficiencyError& e) {
    return report_error(kExitPipeline, "rank_deficiency", e.what());
  } catch (const sculpt::DegenerateObjectiveError& e) {
    return report_error(kExitPipeline, "degenerate_objective", e.what());
  } catch (const std::exception& e) {
    return report_error(kExitPipeline, "pipeline_error", e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-space sculpting of a toy 3D-aware generator"};
  app.require_subcommand(1);

  const std::vector<sculpt::Command> run_commands = {sculpt::Command::Invert, sculpt::Command::Edit,
                                                     sculpt::Command::Relight, sculpt::Command::Generate,
                                                     sculpt::Command::Sweep};
  const std::map<sculpt::Command, std::string> help = {
      {sculpt::Command::Invert, "Reconstruct the input view (lambda_r / lambda_id only)"},
      {sculpt::Command::Edit, "Edit the input toward a prompt"},
      {sculpt::Command::Relight, "Relight the input toward a target light"},
      {sculpt::Command::Generate, "Generate from a prompt alone"},
      {sculpt::Command::Sweep, "Sweep one loss weight and compare runs"}};
  std::map<sculpt::Command, RunFlags> flags;
  std::map<sculpt::Command, CLI::App*> subs;
  for (auto cmd : run_commands) {
    CLI::App* sub = app.add_subcommand(sculpt::to_string(cmd), help.at(cmd));
    add_run_flags(sub, flags[cmd]);
    subs[cmd] = sub;
  }

  std::string sample_config, sample_out = "sample";
  std::uint64_t sample_seed = 0;
  CLI::App* sample = app.add_subcommand("sample", "Draw a latent and export its render at the camera pose");
  sample->add_option("--config", sample_config, "Config whose generator/render settings to use");
  sample->add_option("--seed", sample_seed, "Latent seed");
  sample->add_option("--out", sample_out, "Output directory");

  std::string replay_manifest, replay_out = "replay";
  CLI::App* replay = app.add_subcommand("replay", "Re-run a recorded manifest and compare final metrics");
  replay->add_option("--manifest", replay_manifest, "manifest.json or sweep.json")->required();
  replay->add_option("--out", replay_out, "Output directory for the rerun");

  std::string defaults_cmd;
  CLI::App* defaults = app.add_subcommand("defaults", "Print the default config for a command");
  defaults->add_option("command", defaults_cmd)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(kExitConfig, "usage_error", e.what());
  }

  for (auto cmd : run_commands) {
    if (!subs[cmd]->parsed()) continue;
    int code = 0;
    auto config = load_config(cmd, flags[cmd], code);
    if (!config) return code;
    return run_pipeline([&] {
      const json m = sculpt::run_command(*config);
      json summary = {{"status", "ok"}, {"command", sculpt::to_string(cmd)}, {"out_dir", config->out_dir.string()}};
      if (m.contains("final_metrics")) summary["final_metrics"] = m["final_metrics"];
      std::cout << summary.dump() << std::endl;
    });
  }

  if (sample->parsed()) {
    std::optional<sculpt::RunConfig> config;
    try {
      json doc = json::object();
      if (!sample_config.empty()) doc = json::parse(std::ifstream(sample_config));
      if (!doc.is_object()) throw sculpt::ConfigError("", "config must be a JSON object");
      doc.erase("command");
      doc["out_dir"] = sample_out;
      const fs::path base = sample_config.empty() ? fs::current_path() : fs::absolute(sample_config).parent_path();
      config = sculpt::parse_config(sculpt::Command::Invert, doc, base, false);
    } catch (const sculpt::ConfigError& e) {
      return report_error(kExitConfig, "config_error", e.what(), {{"field", e.field()}});
    } catch (const std::exception& e) {
      return report_error(kExitConfig, "config_error", e.what());
    }
    return run_pipeline([&] {
      const sculpt::ToyGenerator gen(config->generator);
      const sculpt::LatentCode w = sculpt::latent_from_seed(gen, sample_seed);
      fs::create_directories(config->out_dir);
      std::ofstream(config->out_dir / "latent.json") << sculpt::serialize_latent(w);
      sculpt::export_rendered_view(gen.render(w, config->settings.base_pose, config->settings.quality),
                                   config->out_dir, "view");
      std::cout << json{{"status", "ok"}, {"out_dir", config->out_dir.string()}}.dump() << std::endl;
    });
  }

  if (replay->parsed()) {
    int mismatch = 0;
    const int code = run_pipeline([&] {
      const auto report = sculpt::replay_manifest(replay_manifest, replay_out);
      if (!report.identical) {
        mismatch = report_error(kExitPipeline, "replay_mismatch", "replayed metrics differ from the manifest",
                                {{"recorded", report.recorded}, {"replayed", report.replayed}});
        return;
      }
      std::cout << json{{"status", "ok"}, {"identical", true}, {"final_metrics", report.replayed}}.dump() << std::endl;
    });
    return code != 0 ? code : mismatch;
  }

  if (defaults->parsed()) {
    try {
      std::cout << sculpt::default_config_json(sculpt::command_from_string(defaults_cmd)).dump(2) << std::endl;
      return 0;
    } catch (const sculpt::ConfigError& e) {
      return report_error(kExitConfig, "config_error", e.what(), {{"field", e.field()}});
    }
  }
  return 0;
}
