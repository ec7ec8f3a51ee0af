#include "sculpt/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "sculpt/checksum.hpp"
#include "sculpt/errors.hpp"

namespace sculpt {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void require_finite(double v, const std::string& term) {
  if (!std::isfinite(v)) throw NonFiniteLossError(term, -1);
}

bool uses_input_view(const LossWeights& w) { return w.id > 0.0 || w.r > 0.0; }
bool uses_side_view(const LossWeights& w) { return w.d > 0.0 || w.il > 0.0; }

SHLighting world_target(const SHLighting& target, const CameraPose& pose) {
  if (target.frame == LightingFrame::World) return target;
  SHLighting out = sh_rotate(target, pose.camera_to_world());
  out.frame = LightingFrame::World;
  return out;
}

void add_into(Image& dst, const Image& src, double scale) {
  if (dst.empty()) dst = Image(src.height, src.width, src.channels);
  for (std::size_t i = 0; i < src.data.size(); ++i) dst.data[i] += scale * src.data[i];
}

struct TermEvaluation {
  ObjectiveResult result;
  SceneGradient scene_grad;
};

TermEvaluation evaluate_terms(const PipelineContext& ctx, const ToyGenerator& gen, const LatentCode& w,
                              const ObjectiveSpec& spec, std::mt19937_64& rng, const ObjectiveOverrides* ov) {
  spec.validate();
  const PipelineSettings& st = ctx.settings;
  const LossWeights& lw = spec.weights;
  const ToySceneParams params = gen.decode(w);
  TermEvaluation ev{ObjectiveResult{}, SceneGradient(params.blobs.size())};
  ObjectiveResult& res = ev.result;

  if (uses_input_view(lw)) {
    const CameraPose& pose = *spec.input_pose;
    const RenderedView view = render_scene(params, pose, st.quality);
    if (!view.rgb.same_shape(*spec.input_image))
      throw ShapeError("input_image does not match the render size");
    ViewCotangent ct;
    ct.rgb = Image(view.rgb.height, view.rgb.width, 3);
    if (lw.r > 0.0) {
      const ImageLoss l = reconstruction_loss_with_grad(ctx.features, view.rgb, *spec.input_image);
      require_finite(l.value, term::kReconstruction);
      res.parts[term::kReconstruction] = l.value;
      res.pose_tags[term::kReconstruction] = "input";
      add_into(ct.rgb, l.grad, lw.r);
    }
    if (lw.id > 0.0) {
      const auto target = ctx.identity.embed(*spec.input_image);
      const ImageLoss l = identity_loss_with_grad(ctx.identity, view.rgb, target);
      require_finite(l.value, term::kIdentity);
      res.parts[term::kIdentity] = l.value;
      res.pose_tags[term::kIdentity] = "input";
      add_into(ct.rgb, l.grad, lw.id);
    }
    ev.scene_grad += render_scene_vjp(params, pose, st.quality, ct);
  }

  if (uses_side_view(lw)) {
    const CameraPose side =
        ov && ov->side_pose ? *ov->side_pose : st.side_sampler.sample(rng, st.base_pose);
    CameraPose il_pose = side;
    const bool separate = st.decouple_side_views && lw.d > 0.0 && lw.il > 0.0;
    if (ov && ov->illumination_pose)
      il_pose = *ov->illumination_pose;
    else if (separate)
      il_pose = st.side_sampler.sample(rng, st.base_pose);
    res.side_pose = side;

    std::optional<RenderedView> side_view;
    ViewCotangent side_ct;
    if (lw.d > 0.0) {
      const SdsSample sample = ov && ov->sds ? *ov->sds
                                             : draw_sds_sample(st.schedule, ctx.latent_encoder.latent_dim(), rng);
      side_view = render_scene(params, side, st.quality);
      const SdsImageTerm t =
          sds_image_term(side_view->rgb, *spec.prompt, sample, ctx.latent_encoder, *ctx.denoiser, st.schedule);
      require_finite(t.loss_value, term::kDiffusion);
      res.parts[term::kDiffusion] = t.loss_value;
      res.pose_tags[term::kDiffusion] = "side";
      res.sds_t = sample.t;
      add_into(side_ct.rgb, t.grad_image, lw.d);
    }
    if (lw.il > 0.0) {
      res.illumination_pose = il_pose;
      const bool shared = side_view && il_pose == side;
      RenderedView il_view = shared ? *side_view : render_scene(params, il_pose, st.quality);
      ViewCotangent il_ct;
      const double v = illumination_loss_with_grad(il_view, world_target(*spec.target_light, il_pose), st.ridge,
                                                   lw.il, il_ct);
      require_finite(v, term::kIllumination);
      res.parts[term::kIllumination] = v;
      res.pose_tags[term::kIllumination] = "side";
      if (shared) {
        add_into(side_ct.rgb, il_ct.rgb, 1.0);
        add_into(side_ct.normal, il_ct.normal, 1.0);
      } else {
        ev.scene_grad += render_scene_vjp(params, il_pose, st.quality, il_ct);
      }
    }
    if (side_view) ev.scene_grad += render_scene_vjp(params, side, st.quality, side_ct);
  }

  if (lw.regu > 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double d = w.values()[i] - ctx.stats.mean.values()[i];
      sq += d * d;
    }
    res.parts[term::kRegularization] = sq;
  }

  for (const auto& [name, value] : res.parts) {
    const double wv = lw.get(name) * value;
    res.weighted[name] = wv;
    res.total += wv;
  }
  return ev;
}

struct InputViewLoss {
  double combined = 0.0;
  double reconstruction = 0.0;
  double identity = 0.0;
};

InputViewLoss input_view_loss(const PipelineContext& ctx, const ToyGenerator& gen, const LatentCode& w,
                              const ObjectiveSpec& spec) {
  InputViewLoss out;
  const RenderedView view = gen.render(w, *spec.input_pose, ctx.settings.quality);
  out.reconstruction = reconstruction_loss(ctx.features, view.rgb, *spec.input_image);
  out.identity = identity_loss(ctx.identity, view.rgb, *spec.input_image);
  out.combined = spec.weights.r * out.reconstruction + spec.weights.id * out.identity;
  return out;
}

nlohmann::json pose_json(const CameraPose& p) {
  return {{"theta", p.theta}, {"phi", p.phi}, {"radius", p.radius}, {"fov_y", p.fov_y},
          {"image_size", p.image_size}};
}

void check_grad(const std::vector<double>& g, int iteration) {
  for (double v : g)
    if (!std::isfinite(v)) throw NonFiniteLossError("gradient", iteration);
}

IterationRecord make_record(int it, const std::string& stage, const ObjectiveResult& r, double wall_ms) {
  IterationRecord rec;
  rec.iteration = it;
  rec.stage = stage;
  rec.parts = r.parts;
  rec.weighted = r.weighted;
  rec.total = r.total;
  rec.pose_tags = r.pose_tags;
  rec.side_pose = r.side_pose;
  rec.sds_t = r.sds_t;
  rec.wall_ms = wall_ms;
  return rec;
}

}  // namespace

double LossWeights::get(const std::string& t) const {
  if (t == term::kIdentity) return id;
  if (t == term::kReconstruction) return r;
  if (t == term::kDiffusion) return d;
  if (t == term::kIllumination) return il;
  if (t == term::kRegularization) return regu;
  throw std::invalid_argument("unknown loss term '" + t + "'");
}

void LossWeights::set(const std::string& t, double value) {
  if (t == term::kIdentity)
    id = value;
  else if (t == term::kReconstruction)
    r = value;
  else if (t == term::kDiffusion)
    d = value;
  else if (t == term::kIllumination)
    il = value;
  else if (t == term::kRegularization)
    regu = value;
  else
    throw std::invalid_argument("unknown loss term '" + t + "'");
}

void ObjectiveSpec::validate() const {
  const std::pair<const char*, double> all[] = {
      {"lambda_id", weights.id}, {"lambda_r", weights.r}, {"lambda_d", weights.d},
      {"lambda_il", weights.il}, {"lambda_regu", weights.regu}};
  for (const auto& [name, v] : all)
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be finite and >= 0");
  if (weights.d > 0.0 && !prompt) throw std::invalid_argument("prompt: required when lambda_d > 0");
  if (weights.il > 0.0 && !target_light) throw std::invalid_argument("target_light: required when lambda_il > 0");
  if (uses_input_view(weights) && (!input_image || !input_pose))
    throw std::invalid_argument("input_image/input_pose: required when lambda_id or lambda_r > 0");
  if (input_pose) input_pose->validate();
}

PipelineContext::PipelineContext(GeneratorConfig generator_config, EncoderSeeds seeds_, PipelineSettings settings_,
                                 int stats_samples_, std::uint64_t stats_seed_)
    : generator(generator_config),
      features(settings_.base_pose.image_size, seeds_.feature, seeds_.feature_dim),
      identity(settings_.base_pose.image_size, seeds_.identity, seeds_.identity_dim),
      latent_encoder(settings_.base_pose.image_size, seeds_.diffusion, seeds_.diffusion_dim),
      denoiser(std::make_shared<AnalyticDenoiser>(PromptBank{})),
      stats(estimate_latent_stats(generator.sampler(), stats_samples_, stats_seed_)),
      settings(settings_),
      seeds(seeds_),
      stats_samples(stats_samples_),
      stats_seed(stats_seed_) {
  settings.base_pose.validate();
  settings.quality.validate();
  settings.side_sampler.validate();
  settings.schedule.validate();
  if (!(settings.ridge >= 0.0)) throw std::invalid_argument("ridge must be >= 0");
}

void PipelineContext::set_prompt_bank(PromptBank b) {
  bank = std::move(b);
  denoiser = std::make_shared<AnalyticDenoiser>(bank);
}

void PipelineContext::register_prompt(const std::string& prompt, const Image& exemplar, double spread) {
  PromptBank b = bank;
  b.add(prompt, PromptEntry{latent_encoder.encode(exemplar), spread});
  set_prompt_bank(std::move(b));
}

ObjectiveResult compose_objective(const PipelineContext& ctx, const LatentCode& w, const ObjectiveSpec& spec,
                                  std::mt19937_64& rng, const ObjectiveOverrides* overrides) {
  TermEvaluation ev = evaluate_terms(ctx, ctx.generator, w, spec, rng, overrides);
  ObjectiveResult res = std::move(ev.result);
  res.grad_w = ctx.generator.decode_vjp_latent(w, ev.scene_grad);
  if (spec.weights.regu > 0.0) {
    const ScalarWithGrad rg = regularization_loss(w, ctx.stats, spec.weights.regu);
    for (std::size_t i = 0; i < rg.grad.size(); ++i) res.grad_w[i] += rg.grad[i];
  }
  return res;
}

GeneratorObjectiveResult compose_generator_objective(const PipelineContext& ctx, const ToyGenerator& generator,
                                                     const LatentCode& w, const ObjectiveSpec& spec,
                                                     std::mt19937_64& rng, const ObjectiveOverrides* overrides) {
  TermEvaluation ev = evaluate_terms(ctx, generator, w, spec, rng, overrides);
  GeneratorObjectiveResult out{std::move(ev.result), generator.decode_vjp_weights(w, ev.scene_grad)};
  return out;
}

Adam::Adam(std::size_t n, AdamSettings settings) : s_(settings), m_(n, 0.0), v_(n, 0.0) {
  if (!(settings.step > 0.0)) throw std::invalid_argument("optimizer step must be > 0");
}

std::vector<double> Adam::step(std::span<const double> g) {
  if (g.size() != m_.size()) throw ShapeError("Adam: gradient size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(s_.beta1, t_);
  const double c2 = 1.0 - std::pow(s_.beta2, t_);
  std::vector<double> upd(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    m_[i] = s_.beta1 * m_[i] + (1.0 - s_.beta1) * g[i];
    v_[i] = s_.beta2 * v_[i] + (1.0 - s_.beta2) * g[i] * g[i];
    upd[i] = -s_.step * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + s_.epsilon);
  }
  return upd;
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["config"] = config;
  nlohmann::json its = nlohmann::json::array();
  for (const auto& r : iterations) {
    nlohmann::json e;
    e["iteration"] = r.iteration;
    e["stage"] = r.stage;
    e["parts"] = r.parts;
    e["weighted"] = r.weighted;
    e["total"] = r.total;
    e["pose_tags"] = r.pose_tags;
    if (r.side_pose) e["side_pose"] = {{"theta", r.side_pose->theta}, {"phi", r.side_pose->phi}};
    if (r.sds_t) e["t"] = *r.sds_t;
    if (!r.extra.empty()) e["extra"] = r.extra;
    e["wall_ms"] = r.wall_ms;
    its.push_back(std::move(e));
  }
  j["iterations"] = std::move(its);
  j["final_metrics"] = final_metrics;
  if (final_latent) j["final_latent"] = nlohmann::json::parse(serialize_latent(*final_latent));
  j["checksums"] = checksums;
  j["wall_clock_s"] = wall_clock_s;
  return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  m.config = j.value("config", nlohmann::json::object());
  for (const auto& e : j.at("iterations")) {
    IterationRecord r;
    r.iteration = e.at("iteration").get<int>();
    r.stage = e.at("stage").get<std::string>();
    r.parts = e.at("parts").get<std::map<std::string, double>>();
    r.weighted = e.at("weighted").get<std::map<std::string, double>>();
    r.total = e.at("total").get<double>();
    r.pose_tags = e.at("pose_tags").get<std::map<std::string, std::string>>();
    if (e.contains("side_pose")) {
      CameraPose p;
      p.theta = e["side_pose"].at("theta").get<double>();
      p.phi = e["side_pose"].at("phi").get<double>();
      r.side_pose = p;
    }
    if (e.contains("t")) r.sds_t = e["t"].get<double>();
    if (e.contains("extra")) r.extra = e["extra"].get<std::map<std::string, double>>();
    r.wall_ms = e.value("wall_ms", 0.0);
    m.iterations.push_back(std::move(r));
  }
  m.final_metrics = j.at("final_metrics").get<std::map<std::string, double>>();
  if (j.contains("final_latent")) m.final_latent = parse_latent(j["final_latent"].dump());
  m.checksums = j.value("checksums", std::map<std::string, std::string>{});
  m.wall_clock_s = j.value("wall_clock_s", 0.0);
  return m;
}

std::map<std::string, double> evaluate_metrics(const PipelineContext& ctx, const ToyGenerator& gen,
                                               const LatentCode& w, const ObjectiveSpec& spec) {
  std::map<std::string, double> m;
  const PipelineSettings& st = ctx.settings;
  const ToySceneParams params = gen.decode(w);
  if (spec.input_image && spec.input_pose) {
    const RenderedView view = render_scene(params, *spec.input_pose, st.quality);
    m["reconstruction_loss"] = reconstruction_loss(ctx.features, view.rgb, *spec.input_image);
    m["identity_loss"] = identity_loss(ctx.identity, view.rgb, *spec.input_image);
    m["psnr_input"] = psnr(view.rgb, *spec.input_image);
  }
  if (spec.prompt && ctx.bank.contains(*spec.prompt)) {
    std::mt19937_64 rng(st.eval_seed);
    double acc = 0.0;
    for (int i = 0; i < st.eval_sds_draws; ++i) {
      const CameraPose pose = st.side_sampler.sample(rng, st.base_pose);
      const SdsSample s = draw_sds_sample(st.schedule, ctx.latent_encoder.latent_dim(), rng);
      const RenderedView view = render_scene(params, pose, st.quality);
      acc += sds_image_term(view.rgb, *spec.prompt, s, ctx.latent_encoder, *ctx.denoiser, st.schedule).loss_value;
    }
    if (st.eval_sds_draws > 0) m["sds_residual"] = acc / st.eval_sds_draws;
    const auto z = ctx.latent_encoder.encode(render_scene(params, st.base_pose, st.quality).rgb);
    const auto& mu = ctx.bank.at(*spec.prompt).target_mu;
    double d2 = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) d2 += (z[i] - mu[i]) * (z[i] - mu[i]);
    m["prompt_distance"] = std::sqrt(d2);
  }
  if (spec.target_light) {
    std::mt19937_64 rng(st.eval_seed + 1);
    double sum = 0.0, worst = 0.0;
    for (int i = 0; i < st.eval_poses; ++i) {
      const CameraPose pose = st.side_sampler.sample(rng, st.base_pose);
      const double v =
          illumination_loss(render_scene(params, pose, st.quality), world_target(*spec.target_light, pose), st.ridge)
              .value;
      sum += v;
      worst = std::max(worst, v);
    }
    if (st.eval_poses > 0) {
      m["illumination_residual"] = sum / st.eval_poses;
      m["illumination_residual_max"] = worst;
    }
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = w.values()[i] - ctx.stats.mean.values()[i];
    d2 += d * d;
  }
  m["latent_distance_to_mean"] = std::sqrt(d2);
  return m;
}

nlohmann::json describe_pipeline(const PipelineContext& ctx, const ObjectiveSpec& spec) {
  const PipelineSettings& st = ctx.settings;
  nlohmann::json j;
  j["weights"] = {{"lambda_id", spec.weights.id}, {"lambda_r", spec.weights.r}, {"lambda_d", spec.weights.d},
                  {"lambda_il", spec.weights.il}, {"lambda_regu", spec.weights.regu}};
  if (spec.prompt) {
    j["prompt"] = *spec.prompt;
    if (ctx.bank.contains(*spec.prompt)) {
      j["prompt_target_mu"] = ctx.bank.at(*spec.prompt).target_mu;
      j["prompt_spread"] = ctx.bank.at(*spec.prompt).spread;
    }
  }
  if (spec.target_light)
    j["target_light"] = {{"frame", to_string(spec.target_light->frame)}, {"coeffs", spec.target_light->coeffs}};
  if (spec.input_pose) j["input_pose"] = pose_json(*spec.input_pose);
  j["base_pose"] = pose_json(st.base_pose);
  j["side_pose_ranges"] = {{"theta", {st.side_sampler.theta.lo, st.side_sampler.theta.hi}},
                           {"phi", {st.side_sampler.phi.lo, st.side_sampler.phi.hi}}};
  j["schedule"] = {{"alpha_bar", "cos^2(pi t / 2)"},
                   {"t_min", st.schedule.t_min},
                   {"t_max", st.schedule.t_max},
                   {"sds_weight", to_string(st.schedule.weighting)}};
  j["render"] = {{"samples_per_ray", st.quality.samples_per_ray}, {"near", st.quality.near}, {"far", st.quality.far}};
  j["illumination"] = {{"ridge", st.ridge}, {"estimator_frame", "WORLD"}, {"decouple_side_views", st.decouple_side_views}};
  const GeneratorConfig& gc = ctx.generator.config();
  j["generator"] = {{"latent_dim", gc.latent_dim}, {"layers", gc.layers}, {"blobs", gc.blobs},
                    {"weights_seed", gc.weights_seed}};
  j["encoders"] = {{"feature_seed", ctx.seeds.feature},     {"identity_seed", ctx.seeds.identity},
                   {"diffusion_seed", ctx.seeds.diffusion}, {"feature_dim", ctx.seeds.feature_dim},
                   {"identity_dim", ctx.seeds.identity_dim}, {"diffusion_dim", ctx.seeds.diffusion_dim}};
  j["latent_stats"] = {{"samples", ctx.stats_samples}, {"seed", ctx.stats_seed}};
  j["evaluation"] = {{"seed", st.eval_seed}, {"sds_draws", st.eval_sds_draws}, {"poses", st.eval_poses}};
  return j;
}

LatentRun optimize_latent(const PipelineContext& ctx, const ObjectiveSpec& spec, const LatentCode& init,
                          const AdamSettings& settings, std::mt19937_64& rng) {
  spec.validate();
  if (settings.iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  const auto t0 = Clock::now();
  RunManifest manifest;
  manifest.config = describe_pipeline(ctx, spec);
  manifest.config["optimizer"] = {{"kind", "adam"},
                                  {"iterations", settings.iterations},
                                  {"step", settings.step},
                                  {"beta1", settings.beta1},
                                  {"beta2", settings.beta2},
                                  {"epsilon", settings.epsilon}};
  const std::vector<double> gen_before = ctx.generator.weights().flatten();
  manifest.checksums["generator_before"] = checksum(gen_before);

  std::vector<double> x(init.values().begin(), init.values().end());
  Adam adam(x.size(), settings);
  for (int it = 0; it < settings.iterations; ++it) {
    const auto ti = Clock::now();
    const LatentCode w = init.with_values(x);
    ObjectiveResult r;
    try {
      r = compose_objective(ctx, w, spec, rng);
    } catch (const NonFiniteLossError& e) {
      throw NonFiniteLossError(e.term(), it);
    }
    check_grad(r.grad_w, it);
    const std::vector<double> upd = adam.step(r.grad_w);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += upd[i];
    manifest.iterations.push_back(make_record(it, "latent", r, ms_since(ti)));
  }
  LatentCode w = init.with_values(std::move(x));
  manifest.final_metrics = evaluate_metrics(ctx, ctx.generator, w, spec);
  manifest.final_latent = w;
  manifest.checksums["generator_after"] = checksum(ctx.generator.weights().flatten());
  manifest.checksums["latent_final"] = checksum(w.values());
  manifest.wall_clock_s = ms_since(t0) / 1000.0;
  return LatentRun{std::move(w), std::move(manifest)};
}

PtiRun pivotal_tune(const PipelineContext& ctx, const LatentCode& w_t, const ObjectiveSpec& spec,
                    const PtiSettings& settings, std::mt19937_64& rng) {
  spec.validate();
  if (settings.iterations < 0) throw std::invalid_argument("pti iterations must be >= 0");
  if (settings.max_backtracks < 0) throw std::invalid_argument("pti max_backtracks must be >= 0");
  const auto t0 = Clock::now();
  RunManifest manifest;
  manifest.config = describe_pipeline(ctx, spec);
  manifest.config["pti"] = {{"iterations", settings.iterations},
                            {"step", settings.step},
                            {"max_backtracks", settings.max_backtracks},
                            {"line_search", "input-view objective non-increase"}};
  manifest.checksums["latent_before"] = checksum(w_t.values());
  manifest.checksums["generator_original"] = checksum(ctx.generator.weights().flatten());

  const bool search = uses_input_view(spec.weights);
  ToyGenerator gen = ctx.generator;
  std::vector<double> flat = gen.weights().flatten();
  AdamSettings as;
  as.iterations = settings.iterations;
  as.step = settings.step;
  Adam adam(flat.size(), as);
  InputViewLoss current;
  if (search) current = input_view_loss(ctx, gen, w_t, spec);
  double best_recon = current.reconstruction;

  for (int it = 0; it < settings.iterations; ++it) {
    const auto ti = Clock::now();
    GeneratorObjectiveResult r;
    try {
      r = compose_generator_objective(ctx, gen, w_t, spec, rng);
    } catch (const NonFiniteLossError& e) {
      throw NonFiniteLossError(e.term(), it);
    }
    const std::vector<double> g = r.grad_weights.flatten();
    check_grad(g, it);
    const std::vector<double> upd = adam.step(g);

    double scale = 1.0;
    bool accepted = !search;
    GeneratorWeights candidate = gen.weights();
    for (int b = 0; b <= settings.max_backtracks; ++b) {
      std::vector<double> cand(flat);
      for (std::size_t i = 0; i < cand.size(); ++i) cand[i] += scale * upd[i];
      candidate.assign(cand);
      if (!search) break;
      const InputViewLoss trial = input_view_loss(ctx, gen.with_weights(candidate), w_t, spec);
      if (trial.combined <= current.combined) {
        current = trial;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (accepted) {
      gen = gen.with_weights(candidate);
      flat = candidate.flatten();
    }
    best_recon = std::min(best_recon, current.reconstruction);
    IterationRecord rec = make_record(it, "pivotal_tuning", r.objective, ms_since(ti));
    rec.extra["accepted"] = accepted ? 1.0 : 0.0;
    rec.extra["step_scale"] = accepted ? scale : 0.0;
    if (search) {
      rec.extra["input_view_objective"] = current.combined;
      rec.extra["pivot_reconstruction"] = current.reconstruction;
      rec.extra["pivot_identity"] = current.identity;
      rec.extra["best_pivot_reconstruction"] = best_recon;
    }
    manifest.iterations.push_back(std::move(rec));
  }
  manifest.final_metrics = evaluate_metrics(ctx, gen, w_t, spec);
  manifest.final_latent = w_t;
  manifest.checksums["latent_after"] = checksum(w_t.values());
  manifest.checksums["generator_tuned"] = checksum(gen.weights().flatten());
  manifest.wall_clock_s = ms_since(t0) / 1000.0;
  return PtiRun{std::move(gen), std::move(manifest)};
}

std::string to_string(InitMode m) { return m == InitMode::Mean ? "mean" : "invert_first"; }

InitMode init_mode_from_string(const std::string& s) {
  if (s == "mean") return InitMode::Mean;
  if (s == "invert_first") return InitMode::InvertFirst;
  throw std::invalid_argument("unknown init mode '" + s + "'");
}

LatentCode initialize_latent(const PipelineContext& ctx, const ObjectiveSpec& spec, const InitSettings& init,
                             const AdamSettings& optimizer, std::mt19937_64& rng) {
  LatentCode start = initial_latent(ctx.stats, init.perturbation, init.seed);
  if (init.mode == InitMode::Mean) return start;
  if (!spec.input_image || !spec.input_pose)
    throw std::invalid_argument("init.mode: invert_first needs an input image and pose");
  ObjectiveSpec warm;
  warm.weights = LossWeights{0.0, 1.0, 0.0, 0.0, 0.0};
  warm.input_image = spec.input_image;
  warm.input_pose = spec.input_pose;
  AdamSettings s = optimizer;
  s.iterations = init.warmup_iterations;
  return optimize_latent(ctx, warm, start, s, rng).w;
}

LatentRun generate_from_text(const PipelineContext& ctx, const std::string& prompt, double lambda_d,
                             double lambda_regu, const AdamSettings& settings, std::mt19937_64& rng,
                             const GenerateOptions& options) {
  if (!ctx.bank.contains(prompt)) throw UnknownPromptError(prompt);
  if (!(lambda_d > 0.0) && !options.allow_zero_diffusion_weight)
    throw DegenerateObjectiveError("generate_from_text: lambda_d must be > 0");
  ObjectiveSpec spec;
  spec.weights = LossWeights{0.0, 0.0, lambda_d, 0.0, lambda_regu};
  spec.prompt = prompt;
  LatentRun run = optimize_latent(ctx, spec, ctx.stats.mean, settings, rng);
  run.manifest.config["mode"] = "generate";
  return run;
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::LambdaId:
      return "lambda_id";
    case SweepAxis::LambdaR:
      return "lambda_r";
    case SweepAxis::LambdaD:
      return "lambda_d";
  }
  return "";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "lambda_id") return SweepAxis::LambdaId;
  if (s == "lambda_r") return SweepAxis::LambdaR;
  if (s == "lambda_d") return SweepAxis::LambdaD;
  throw std::invalid_argument("unknown sweep axis '" + s + "'");
}

std::string sweep_term(SweepAxis a) {
  switch (a) {
    case SweepAxis::LambdaId:
      return term::kIdentity;
    case SweepAxis::LambdaR:
      return term::kReconstruction;
    case SweepAxis::LambdaD:
      return term::kDiffusion;
  }
  return "";
}

std::vector<SweepCell> ablation_sweep(const PipelineContext& ctx, const ObjectiveSpec& base_spec, SweepAxis axis,
                                      const std::vector<double>& values, const LatentCode& init,
                                      const AdamSettings& settings, std::uint64_t seed) {
  if (values.empty()) throw std::invalid_argument("ablation_sweep: values must be nonempty");
  std::vector<SweepCell> cells;
  for (double v : values) {
    ObjectiveSpec spec = base_spec;
    spec.weights.set(sweep_term(axis), v);
    std::mt19937_64 rng(seed);
    LatentRun run = optimize_latent(ctx, spec, init, settings, rng);
    run.manifest.config["sweep"] = {{"axis", to_string(axis)}, {"value", v}};
    cells.push_back(SweepCell{v, std::move(run)});
  }
  return cells;
}

}  // namespace sculpt
