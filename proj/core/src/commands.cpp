#include "sculpt/commands.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sculpt/checksum.hpp"
#include "sculpt/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sculpt {

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + p.string() + "'");
}

std::string file_hash(const fs::path& p) { return sha256_hex(read_text(p)); }

struct StageOutput {
  RunManifest manifest;
  LatentCode w;
  ToyGenerator generator;
};

// Writes the four per-run artifacts; the manifest records the hashes of the other three.
json write_run_directory(const fs::path& dir, const RunConfig& config, const StageOutput& out, json extra) {
  fs::create_directories(dir);
  write_text(dir / artifact::kLatent, serialize_latent(out.w));
  write_text(dir / artifact::kLosses, loss_table_csv(out.manifest.iterations));
  const auto poses = grid_poses(config.settings, config.grid_views);
  export_view_grid(out.generator, out.w, poses, config.settings.quality, dir / artifact::kGrid);

  json m = out.manifest.to_json();
  for (auto& [k, v] : extra.items()) m[k] = v;
  json poses_json = json::array();
  for (const auto& p : poses) poses_json.push_back({{"theta", p.theta}, {"phi", p.phi}});
  m["grid_poses"] = std::move(poses_json);
  m["artifacts"] = {{artifact::kLatent, file_hash(dir / artifact::kLatent)},
                    {artifact::kLosses, file_hash(dir / artifact::kLosses)},
                    {artifact::kGrid, file_hash(dir / artifact::kGrid)}};
  write_text(dir / artifact::kManifest, m.dump(2) + "\n");
  return m;
}

json base_config_block(const RunConfig& config, const json& pipeline_config) {
  return {{"command", to_string(config.command)},
          {"effective_config", serialize_config(config)},
          {"pipeline", pipeline_config}};
}

StageOutput run_two_stage(const RunConfig& config, const PipelineContext& ctx, const ObjectiveSpec& spec) {
  std::mt19937_64 rng(config.seed);
  LatentRun stage1 = [&] {
    if (config.command == Command::Generate)
      return generate_from_text(ctx, *spec.prompt, spec.weights.d, spec.weights.regu, config.optimizer, rng);
    const LatentCode init = initialize_latent(ctx, spec, config.init, config.optimizer, rng);
    return optimize_latent(ctx, spec, init, config.optimizer, rng);
  }();

  StageOutput out{RunManifest{}, stage1.w, ctx.generator};
  out.manifest.config = base_config_block(config, stage1.manifest.config);
  out.manifest.iterations = stage1.manifest.iterations;
  out.manifest.final_metrics = stage1.manifest.final_metrics;
  out.manifest.final_latent = stage1.w;
  out.manifest.checksums = stage1.manifest.checksums;
  out.manifest.wall_clock_s = stage1.manifest.wall_clock_s;

  if (config.pti_enabled) {
    PtiRun stage2 = pivotal_tune(ctx, stage1.w, spec, config.pti, rng);
    const int offset = static_cast<int>(out.manifest.iterations.size());
    for (IterationRecord r : stage2.manifest.iterations) {
      r.iteration += offset;
      out.manifest.iterations.push_back(std::move(r));
    }
    out.manifest.config["pti"] = stage2.manifest.config["pti"];
    out.manifest.config["stage1_metrics"] = stage1.manifest.final_metrics;
    out.manifest.final_metrics = stage2.manifest.final_metrics;
    for (const auto& [k, v] : stage2.manifest.checksums) out.manifest.checksums[k] = v;
    out.manifest.wall_clock_s += stage2.manifest.wall_clock_s;
    out.generator = std::move(stage2.tuned);
  }
  return out;
}

std::string cell_dir_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "cell_%02zu", index);
  return buf;
}

json run_sweep(const RunConfig& config, const PipelineContext& ctx, const ObjectiveSpec& spec,
               std::optional<std::size_t> only_cell) {
  std::mt19937_64 rng(config.seed);
  const LatentCode init = initialize_latent(ctx, spec, config.init, config.optimizer, rng);
  fs::create_directories(config.out_dir);

  json summary;
  summary["command"] = "sweep";
  summary["effective_config"] = serialize_config(config);
  summary["axis"] = to_string(*config.sweep_axis);
  json cells = json::array();
  std::vector<Image> rows;
  const auto poses = grid_poses(config.settings, config.grid_views);
  for (std::size_t i = 0; i < config.sweep_values.size(); ++i) {
    if (only_cell && *only_cell != i) continue;
    const double value = config.sweep_values[i];
    std::vector<SweepCell> result =
        ablation_sweep(ctx, spec, *config.sweep_axis, {value}, init, config.optimizer, config.seed);
    LatentRun& run = result.front().run;
    StageOutput out{RunManifest{}, run.w, ctx.generator};
    out.manifest = run.manifest;
    out.manifest.config = base_config_block(config, run.manifest.config);
    const json cell_info = {{"index", i}, {"axis", to_string(*config.sweep_axis)}, {"value", value}};
    const fs::path dir = config.out_dir / cell_dir_name(i);
    write_run_directory(dir, config, out, {{"sweep_cell", cell_info}});

    json final_parts = json::object();
    if (!out.manifest.iterations.empty()) final_parts = out.manifest.iterations.back().weighted;
    cells.push_back({{"index", i},
                     {"value", value},
                     {"directory", cell_dir_name(i)},
                     {"final_metrics", out.manifest.final_metrics},
                     {"final_weighted_parts", final_parts}});
    rows.push_back(render_view_grid(ctx.generator, run.w, poses, config.settings.quality));
  }
  summary["cells"] = std::move(cells);

  // Stack the per-cell rows vertically into one grid.
  if (!rows.empty()) {
    Image grid(static_cast<int>(rows.size()) * rows.front().height, rows.front().width, 3);
    std::size_t offset = 0;
    for (const Image& r : rows) {
      std::copy(r.data.begin(), r.data.end(), grid.data.begin() + static_cast<std::ptrdiff_t>(offset));
      offset += r.data.size();
    }
    write_pnm(grid, config.out_dir / artifact::kGrid);
    summary["grid"] = {{"file", artifact::kGrid}, {"sha256", file_hash(config.out_dir / artifact::kGrid)}};
  }
  write_text(config.out_dir / artifact::kSweepSummary, summary.dump(2) + "\n");
  return summary;
}

}  // namespace

LatentCode latent_from_seed(const ToyGenerator& generator, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return generator.sample_latent(rng);
}

PipelineContext build_context(const RunConfig& config) {
  PipelineContext ctx(config.generator, config.encoders, config.settings, config.stats_samples, config.stats_seed);
  PromptBank bank;
  for (const auto& [name, src] : config.prompt_bank) {
    const Image exemplar =
        src.image ? read_pnm(*src.image)
                  : ctx.generator.render(latent_from_seed(ctx.generator, *src.latent_seed), config.settings.base_pose,
                                         config.settings.quality)
                        .rgb;
    if (exemplar.height != config.settings.base_pose.image_size || exemplar.channels != 3)
      throw ShapeError("prompt exemplar '" + name + "' does not match the render size");
    bank.add(name, PromptEntry{ctx.latent_encoder.encode(exemplar), src.spread});
  }
  ctx.set_prompt_bank(std::move(bank));
  return ctx;
}

std::optional<Image> load_input_image(const RunConfig& config, const ToyGenerator& generator) {
  const InputSource& in = config.input;
  if (in.image) return read_pnm(*in.image);
  std::optional<LatentCode> w;
  if (in.latent) {
    w = parse_latent(read_text(*in.latent));
    if (w->space() == LatentSpace::W) w = broadcast_to_wplus(*w, generator.config().layers);
  } else if (in.latent_seed) {
    w = latent_from_seed(generator, *in.latent_seed);
  }
  if (!w) return std::nullopt;
  return generator.render(*w, config.settings.base_pose, config.settings.quality).rgb;
}

ObjectiveSpec build_spec(const RunConfig& config, const PipelineContext& ctx) {
  ObjectiveSpec spec;
  spec.weights = config.weights;
  spec.prompt = config.prompt;
  spec.target_light = config.target_light;
  spec.input_image = load_input_image(config, ctx.generator);
  if (spec.input_image) spec.input_pose = config.settings.base_pose;
  return spec;
}

std::vector<CameraPose> grid_poses(const PipelineSettings& settings, int n) {
  return azimuth_sweep(settings.base_pose, settings.side_sampler.phi, n);
}

Image render_view_grid(const ToyGenerator& generator, const LatentCode& w, std::span<const CameraPose> poses,
                       const RenderQuality& quality) {
  if (poses.empty()) throw std::invalid_argument("view grid needs at least one pose");
  std::vector<Image> tiles;
  tiles.reserve(poses.size());
  for (const CameraPose& p : poses) tiles.push_back(generator.render(w, p, quality).rgb);
  return hstack(tiles);
}

void export_view_grid(const ToyGenerator& generator, const LatentCode& w, std::span<const CameraPose> poses,
                      const RenderQuality& quality, const fs::path& path) {
  write_pnm(render_view_grid(generator, w, poses, quality), path);
}

void export_rendered_view(const RenderedView& view, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  write_pnm(view.rgb, dir / (stem + "_rgb.ppm"));
  Image normal = view.normal;
  for (double& v : normal.data) v = 0.5 * (v + 1.0);
  write_pnm(normal, dir / (stem + "_normal.ppm"));
  write_pnm(view.albedo, dir / (stem + "_albedo.ppm"));
  write_pnm(view.coverage, dir / (stem + "_coverage.pgm"));
  const json sidecar = {
      {"pose", {{"theta", view.pose.theta}, {"phi", view.pose.phi}, {"radius", view.pose.radius},
                {"fov_y", view.pose.fov_y}, {"image_size", view.pose.image_size}}},
      {"files",
       {{stem + "_rgb.ppm", {{"quantity", "rgb"}, {"stored", "value"}}},
        {stem + "_normal.ppm", {{"quantity", "world-frame unit normal"}, {"stored", "0.5 * (value + 1)"}}},
        {stem + "_albedo.ppm", {{"quantity", "composited albedo"}, {"stored", "value"}}},
        {stem + "_coverage.pgm", {{"quantity", "accumulated opacity"}, {"stored", "value"}}}}},
      {"encoding", "8-bit, round(255 * clamp(stored, 0, 1))"}};
  write_text(dir / (stem + ".json"), sidecar.dump(2) + "\n");
}

std::string loss_table_csv(const std::vector<IterationRecord>& records) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration";
  for (const auto& t : term_order()) out << "," << t;
  out << ",total,wall_ms\n";
  for (const auto& r : records) {
    out << r.iteration;
    for (const auto& t : term_order()) {
      auto it = r.weighted.find(t);
      out << "," << (it == r.weighted.end() ? 0.0 : it->second);
    }
    out << "," << r.total << "," << r.wall_ms << "\n";
  }
  return out.str();
}

json run_command(const RunConfig& config) {
  validate_config(config);
  const PipelineContext ctx = build_context(config);
  const ObjectiveSpec spec = build_spec(config, ctx);
  if (config.command == Command::Sweep) return run_sweep(config, ctx, spec, std::nullopt);
  const StageOutput out = run_two_stage(config, ctx, spec);
  return write_run_directory(config.out_dir, config, out, json::object());
}

ReplayReport replay_manifest(const fs::path& manifest_path, const fs::path& out_dir) {
  const json recorded = json::parse(read_text(manifest_path));
  // run manifests nest it under "config", sweep summaries keep it at the top
  const json& effective = recorded.contains("config") ? recorded["config"].at("effective_config")
                                                      : recorded.at("effective_config");
  const Command command = command_from_string(effective.at("command").get<std::string>());
  json doc = effective;
  doc["out_dir"] = fs::absolute(out_dir).string();
  const RunConfig config = parse_config(command, doc);

  ReplayReport report;
  if (recorded.contains("cells")) {
    const json replayed = run_command(config);
    json a = json::array(), b = json::array();
    for (const auto& c : recorded["cells"]) a.push_back(c.at("final_metrics"));
    for (const auto& c : replayed["cells"]) b.push_back(c.at("final_metrics"));
    report.recorded = a;
    report.replayed = b;
  } else if (recorded.contains("sweep_cell")) {
    const std::size_t index = recorded["sweep_cell"].at("index").get<std::size_t>();
    const PipelineContext ctx = build_context(config);
    const ObjectiveSpec spec = build_spec(config, ctx);
    const json replayed = run_sweep(config, ctx, spec, index);
    report.recorded = recorded.at("final_metrics");
    report.replayed = replayed["cells"].at(0).at("final_metrics");
  } else {
    const json replayed = run_command(config);
    report.recorded = recorded.at("final_metrics");
    report.replayed = replayed.at("final_metrics");
  }
  report.identical = report.recorded == report.replayed;
  return report;
}

}  // namespace sculpt
