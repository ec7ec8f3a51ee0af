#include "sculpt/run_config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "sculpt/errors.hpp"
#include "sculpt/image.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sculpt {

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers can be rejected.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  void read(const std::string& key, double& out) {
    if (const json* v = raw(key)) {
      if (!v->is_number()) throw ConfigError(field(key), "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) throw ConfigError(field(key), "must be finite");
    }
  }

  void read(const std::string& key, int& out) {
    if (const json* v = raw(key)) {
      if (!v->is_number_integer()) throw ConfigError(field(key), "expected an integer");
      const auto x = v->get<std::int64_t>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        throw ConfigError(field(key), "integer out of range");
      out = static_cast<int>(x);
    }
  }

  void read(const std::string& key, std::uint64_t& out) {
    if (const json* v = raw(key)) {
      // documents built in code store small ints as signed
      if (v->is_number_unsigned()) {
        out = v->get<std::uint64_t>();
      } else if (v->is_number_integer()) {
        if (v->get<std::int64_t>() < 0) throw ConfigError(field(key), "must be >= 0");
        out = static_cast<std::uint64_t>(v->get<std::int64_t>());
      } else {
        throw ConfigError(field(key), "expected an integer");
      }
    }
  }

  void read(const std::string& key, bool& out) {
    if (const json* v = raw(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void read(const std::string& key, std::string& out) {
    if (const json* v = raw(key)) {
      if (!v->is_string()) throw ConfigError(field(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  std::optional<Reader> child(const std::string& key) {
    if (const json* v = raw(key)) return Reader(*v, field(key));
    return std::nullopt;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) throw ConfigError(field(key), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& p, const fs::path& base) {
  fs::path full = p.is_absolute() || base.empty() ? p : base / p;
  return fs::absolute(full).lexically_normal();
}

AngleRange parse_range(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError(field, "expected [lo, hi]");
  return AngleRange{j[0].get<double>(), j[1].get<double>()};
}

void merge_into(json& dst, const json& src) {
  for (const auto& [key, value] : src.items()) {
    if (value.is_object() && dst.contains(key) && dst[key].is_object() && key != "prompt_bank")
      merge_into(dst[key], value);
    else
      dst[key] = value;
  }
}

LossWeights default_weights(Command c) {
  switch (c) {
    case Command::Invert:
      return LossWeights{0.2, 0.2, 0.0, 0.0, 0.0};
    case Command::Edit:
    case Command::Sweep:
      return LossWeights{0.2, 0.2, 2e-5, 0.0, 0.0};
    case Command::Relight:
      return LossWeights{0.2, 0.2, 0.0, 1.0, 0.0};
    case Command::Generate:
      return LossWeights{0.0, 0.0, 1.0, 0.0, 1e-3};
  }
  return {};
}

json weights_json(const LossWeights& w) {
  return {{"lambda_id", w.id}, {"lambda_r", w.r}, {"lambda_d", w.d}, {"lambda_il", w.il}, {"lambda_regu", w.regu}};
}

std::map<std::string, PromptSource> parse_bank_object(const json& j, const std::string& field, const fs::path& base) {
  if (!j.is_object()) throw ConfigError(field, "expected an object or a path");
  std::map<std::string, PromptSource> out;
  for (const auto& [name, entry] : j.items()) {
    Reader r(entry, field + "." + name);
    PromptSource src;
    std::string image;
    r.read("image", image);
    if (!image.empty()) src.image = resolve(image, base);
    std::uint64_t seed = 0;
    if (r.has("latent_seed")) {
      r.read("latent_seed", seed);
      src.latent_seed = seed;
    }
    r.read("spread", src.spread);
    r.finish();
    if (src.image.has_value() == src.latent_seed.has_value())
      throw ConfigError(r.field("image"), "exactly one of image or latent_seed is required");
    if (!(src.spread > 0.0)) throw ConfigError(r.field("spread"), "must be > 0");
    out.emplace(name, std::move(src));
  }
  return out;
}

json read_json_file(const fs::path& path, const std::string& field) {
  std::ifstream in(path);
  if (!in) throw ConfigError(field, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(field, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void require_nonnegative(double v, const std::string& field) {
  if (!(v >= 0.0)) throw ConfigError(field, "must be >= 0");
}

void require_zero(double v, const std::string& field, Command c) {
  if (v != 0.0) throw ConfigError(field, "must be 0 for " + to_string(c));
}

void check_image_file(const fs::path& p, int size, const std::string& field) {
  if (!fs::exists(p)) throw ConfigError(field, "file not found: " + p.string());
  Image img;
  try {
    img = read_pnm(p);
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
  if (img.channels != 3) throw ConfigError(field, "expected an RGB (P6) image");
  if (img.height != size || img.width != size)
    throw ConfigError(field, "image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                                 ", render.image_size is " + std::to_string(size));
}

}  // namespace

std::string to_string(Command c) {
  switch (c) {
    case Command::Invert:
      return "invert";
    case Command::Edit:
      return "edit";
    case Command::Relight:
      return "relight";
    case Command::Generate:
      return "generate";
    case Command::Sweep:
      return "sweep";
  }
  return "";
}

Command command_from_string(const std::string& s) {
  for (Command c : {Command::Invert, Command::Edit, Command::Relight, Command::Generate, Command::Sweep})
    if (to_string(c) == s) return c;
  throw ConfigError("command", "unknown command '" + s + "'");
}

SHLighting parse_lighting(const json& j) {
  Reader r(j, "target_light");
  SHLighting l;
  std::string frame = "WORLD";
  r.read("frame", frame);
  if (frame == "WORLD")
    l.frame = LightingFrame::World;
  else if (frame == "CAMERA")
    l.frame = LightingFrame::Camera;
  else
    throw ConfigError("target_light.frame", "expected WORLD or CAMERA");
  const json* c = r.raw("coeffs");
  if (!c || !c->is_array() || c->size() != kShCoeffs)
    throw ConfigError("target_light.coeffs", "expected 9 numbers");
  for (int i = 0; i < kShCoeffs; ++i) {
    if (!(*c)[i].is_number()) throw ConfigError("target_light.coeffs", "expected 9 numbers");
    l.coeffs[i] = (*c)[i].get<double>();
    if (!std::isfinite(l.coeffs[i])) throw ConfigError("target_light.coeffs", "must be finite");
  }
  r.finish();
  return l;
}

json lighting_to_json(const SHLighting& l) {
  return {{"frame", to_string(l.frame)}, {"coeffs", std::vector<double>(l.coeffs.begin(), l.coeffs.end())}};
}

SHLighting read_lighting_file(const fs::path& path) { return parse_lighting(read_json_file(path, "target_light")); }

void write_lighting_file(const SHLighting& l, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << lighting_to_json(l).dump(2) << "\n";
}

json default_config_json(Command command) {
  RunConfig c;
  c.command = command;
  c.weights = default_weights(command);
  c.pti_enabled = command == Command::Edit || command == Command::Relight;
  json j = serialize_config(c);
  j["out_dir"] = "out";
  return j;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("", "override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "empty path component");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

RunConfig parse_config(Command command, const json& doc, const fs::path& base_dir, bool validate) {
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  json merged = default_config_json(command);
  merge_into(merged, doc);

  RunConfig c;
  c.command = command;
  Reader top(merged, "");

  std::string cmd = to_string(command);
  top.read("command", cmd);
  if (cmd != to_string(command))
    throw ConfigError("command", "config is for '" + cmd + "' but '" + to_string(command) + "' was requested");
  top.read("seed", c.seed);
  std::string out_dir;
  top.read("out_dir", out_dir);
  if (out_dir.empty()) throw ConfigError("out_dir", "must not be empty");
  c.out_dir = fs::absolute(out_dir).lexically_normal();

  if (auto r = top.child("generator")) {
    r->read("latent_dim", c.generator.latent_dim);
    r->read("layers", c.generator.layers);
    r->read("blobs", c.generator.blobs);
    r->read("weights_seed", c.generator.weights_seed);
    r->read("stats_samples", c.stats_samples);
    r->read("stats_seed", c.stats_seed);
    r->finish();
  }
  if (auto r = top.child("encoders")) {
    r->read("feature_seed", c.encoders.feature);
    r->read("identity_seed", c.encoders.identity);
    r->read("diffusion_seed", c.encoders.diffusion);
    r->read("feature_dim", c.encoders.feature_dim);
    r->read("identity_dim", c.encoders.identity_dim);
    r->read("diffusion_dim", c.encoders.diffusion_dim);
    r->finish();
  }
  PipelineSettings& st = c.settings;
  if (auto r = top.child("render")) {
    r->read("image_size", st.base_pose.image_size);
    r->read("samples_per_ray", st.quality.samples_per_ray);
    r->read("near", st.quality.near);
    r->read("far", st.quality.far);
    r->finish();
  }
  if (auto r = top.child("camera")) {
    r->read("theta", st.base_pose.theta);
    r->read("phi", st.base_pose.phi);
    r->read("radius", st.base_pose.radius);
    r->read("fov_y", st.base_pose.fov_y);
    r->finish();
  }
  if (auto r = top.child("side_views")) {
    if (const json* v = r->raw("theta")) st.side_sampler.theta = parse_range(*v, "side_views.theta");
    if (const json* v = r->raw("phi")) st.side_sampler.phi = parse_range(*v, "side_views.phi");
    r->read("decouple", st.decouple_side_views);
    r->finish();
  }
  if (auto r = top.child("diffusion")) {
    r->read("t_min", st.schedule.t_min);
    r->read("t_max", st.schedule.t_max);
    std::string weighting = to_string(st.schedule.weighting);
    r->read("weighting", weighting);
    try {
      st.schedule.weighting = sds_weighting_from_string(weighting);
    } catch (const std::exception&) {
      throw ConfigError("diffusion.weighting", "expected one_minus_alpha_bar or unit");
    }
    r->finish();
  }
  if (auto r = top.child("illumination")) {
    r->read("ridge", st.ridge);
    r->finish();
  }
  if (auto r = top.child("weights")) {
    r->read("lambda_id", c.weights.id);
    r->read("lambda_r", c.weights.r);
    r->read("lambda_d", c.weights.d);
    r->read("lambda_il", c.weights.il);
    r->read("lambda_regu", c.weights.regu);
    r->finish();
  }
  if (top.has("prompt")) {
    std::string p;
    top.read("prompt", p);
    c.prompt = p;
  } else {
    top.raw("prompt");
  }
  if (const json* b = top.raw("prompt_bank")) {
    if (b->is_string()) {
      const fs::path path = resolve(b->get<std::string>(), base_dir);
      c.prompt_bank = parse_bank_object(read_json_file(path, "prompt_bank"), "prompt_bank", path.parent_path());
    } else {
      c.prompt_bank = parse_bank_object(*b, "prompt_bank", base_dir);
    }
  }
  if (auto r = top.child("input")) {
    std::string image, latent;
    r->read("image", image);
    r->read("latent", latent);
    if (!image.empty()) c.input.image = resolve(image, base_dir);
    if (!latent.empty()) c.input.latent = resolve(latent, base_dir);
    if (r->has("latent_seed")) {
      std::uint64_t s = 0;
      r->read("latent_seed", s);
      c.input.latent_seed = s;
    }
    r->finish();
    const int sources = int(c.input.image.has_value()) + int(c.input.latent.has_value()) +
                        int(c.input.latent_seed.has_value());
    if (sources > 1) throw ConfigError("input", "set only one of image, latent, latent_seed");
  }
  if (const json* t = top.raw("target_light")) {
    c.target_light = t->is_string() ? read_lighting_file(resolve(t->get<std::string>(), base_dir)) : parse_lighting(*t);
  }
  if (auto r = top.child("optimizer")) {
    r->read("iterations", c.optimizer.iterations);
    r->read("step", c.optimizer.step);
    r->read("beta1", c.optimizer.beta1);
    r->read("beta2", c.optimizer.beta2);
    r->read("epsilon", c.optimizer.epsilon);
    r->finish();
  }
  if (auto r = top.child("init")) {
    std::string mode = to_string(c.init.mode);
    r->read("mode", mode);
    try {
      c.init.mode = init_mode_from_string(mode);
    } catch (const std::exception&) {
      throw ConfigError("init.mode", "expected mean or invert_first");
    }
    r->read("perturbation", c.init.perturbation);
    r->read("seed", c.init.seed);
    r->read("warmup_iterations", c.init.warmup_iterations);
    r->finish();
  }
  if (auto r = top.child("pti")) {
    r->read("enabled", c.pti_enabled);
    r->read("iterations", c.pti.iterations);
    r->read("step", c.pti.step);
    r->read("max_backtracks", c.pti.max_backtracks);
    r->finish();
  }
  if (auto r = top.child("evaluation")) {
    r->read("seed", st.eval_seed);
    r->read("sds_draws", st.eval_sds_draws);
    r->read("poses", st.eval_poses);
    r->finish();
  }
  if (auto r = top.child("grid")) {
    r->read("views", c.grid_views);
    r->finish();
  }
  if (auto r = top.child("sweep")) {
    if (r->has("axis")) {
      std::string axis;
      r->read("axis", axis);
      try {
        c.sweep_axis = sweep_axis_from_string(axis);
      } catch (const std::exception&) {
        throw ConfigError("sweep.axis", "expected lambda_id, lambda_r or lambda_d");
      }
    } else {
      r->raw("axis");
    }
    if (const json* v = r->raw("values")) {
      if (!v->is_array()) throw ConfigError("sweep.values", "expected a list of numbers");
      for (const auto& x : *v) {
        if (!x.is_number()) throw ConfigError("sweep.values", "expected a list of numbers");
        c.sweep_values.push_back(x.get<double>());
      }
    }
    r->finish();
  }
  top.finish();
  if (validate) validate_config(c);
  return c;
}

RunConfig parse_config_file(Command command, const fs::path& path, const std::vector<std::string>& overrides,
                            bool validate) {
  json doc = path.empty() ? json::object() : read_json_file(path, "config");
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  for (const auto& o : overrides) apply_override(doc, o);
  const fs::path base = path.empty() ? fs::current_path() : fs::absolute(path).parent_path();
  return parse_config(command, doc, base, validate);
}

json serialize_config(const RunConfig& c) {
  const PipelineSettings& st = c.settings;
  json j;
  j["command"] = to_string(c.command);
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir.string();
  j["generator"] = {{"latent_dim", c.generator.latent_dim},     {"layers", c.generator.layers},
                    {"blobs", c.generator.blobs},               {"weights_seed", c.generator.weights_seed},
                    {"stats_samples", c.stats_samples},         {"stats_seed", c.stats_seed}};
  j["encoders"] = {{"feature_seed", c.encoders.feature},     {"identity_seed", c.encoders.identity},
                   {"diffusion_seed", c.encoders.diffusion}, {"feature_dim", c.encoders.feature_dim},
                   {"identity_dim", c.encoders.identity_dim}, {"diffusion_dim", c.encoders.diffusion_dim}};
  j["render"] = {{"image_size", st.base_pose.image_size},
                 {"samples_per_ray", st.quality.samples_per_ray},
                 {"near", st.quality.near},
                 {"far", st.quality.far}};
  j["camera"] = {{"theta", st.base_pose.theta},
                 {"phi", st.base_pose.phi},
                 {"radius", st.base_pose.radius},
                 {"fov_y", st.base_pose.fov_y}};
  j["side_views"] = {{"theta", {st.side_sampler.theta.lo, st.side_sampler.theta.hi}},
                     {"phi", {st.side_sampler.phi.lo, st.side_sampler.phi.hi}},
                     {"decouple", st.decouple_side_views}};
  j["diffusion"] = {{"t_min", st.schedule.t_min}, {"t_max", st.schedule.t_max},
                    {"weighting", to_string(st.schedule.weighting)}};
  j["illumination"] = {{"ridge", st.ridge}};
  j["weights"] = weights_json(c.weights);
  j["prompt"] = c.prompt ? json(*c.prompt) : json(nullptr);
  json bank = json::object();
  for (const auto& [name, src] : c.prompt_bank) {
    json e = {{"spread", src.spread}};
    if (src.image) e["image"] = src.image->string();
    if (src.latent_seed) e["latent_seed"] = *src.latent_seed;
    bank[name] = std::move(e);
  }
  j["prompt_bank"] = std::move(bank);
  if (c.input.present()) {
    json in = json::object();
    if (c.input.image) in["image"] = c.input.image->string();
    if (c.input.latent) in["latent"] = c.input.latent->string();
    if (c.input.latent_seed) in["latent_seed"] = *c.input.latent_seed;
    j["input"] = std::move(in);
  } else {
    j["input"] = nullptr;
  }
  j["target_light"] = c.target_light ? lighting_to_json(*c.target_light) : json(nullptr);
  j["optimizer"] = {{"iterations", c.optimizer.iterations}, {"step", c.optimizer.step},
                    {"beta1", c.optimizer.beta1},           {"beta2", c.optimizer.beta2},
                    {"epsilon", c.optimizer.epsilon}};
  j["init"] = {{"mode", to_string(c.init.mode)},
               {"perturbation", c.init.perturbation},
               {"seed", c.init.seed},
               {"warmup_iterations", c.init.warmup_iterations}};
  j["pti"] = {{"enabled", c.pti_enabled},
              {"iterations", c.pti.iterations},
              {"step", c.pti.step},
              {"max_backtracks", c.pti.max_backtracks}};
  j["evaluation"] = {{"seed", st.eval_seed}, {"sds_draws", st.eval_sds_draws}, {"poses", st.eval_poses}};
  j["grid"] = {{"views", c.grid_views}};
  j["sweep"] = {{"axis", c.sweep_axis ? json(to_string(*c.sweep_axis)) : json(nullptr)},
                {"values", c.sweep_values}};
  return j;
}

void validate_config(const RunConfig& c) {
  const Command cmd = c.command;
  const PipelineSettings& st = c.settings;

  if (c.generator.latent_dim < kShCoeffs) throw ConfigError("generator.latent_dim", "must be >= 9");
  if (c.generator.layers < 1) throw ConfigError("generator.layers", "must be >= 1");
  if (c.generator.blobs < 1) throw ConfigError("generator.blobs", "must be >= 1");
  if (c.stats_samples < 2) throw ConfigError("generator.stats_samples", "must be >= 2");
  if (c.encoders.feature_dim < 1) throw ConfigError("encoders.feature_dim", "must be >= 1");
  if (c.encoders.identity_dim < 1) throw ConfigError("encoders.identity_dim", "must be >= 1");
  if (c.encoders.diffusion_dim < 1) throw ConfigError("encoders.diffusion_dim", "must be >= 1");

  const int size = st.base_pose.image_size;
  if (size < LatentImageEncoder::kPooledSize || size % LatentImageEncoder::kPooledSize != 0)
    throw ConfigError("render.image_size", "must be a positive multiple of 16");
  if (st.quality.samples_per_ray < 2) throw ConfigError("render.samples_per_ray", "must be >= 2");
  if (!(st.quality.near > 0.0)) throw ConfigError("render.near", "must be > 0");
  if (!(st.quality.near < st.quality.far)) throw ConfigError("render.far", "must be greater than render.near");
  const double pi = std::numbers::pi;
  if (!(st.base_pose.theta > 0.0 && st.base_pose.theta < pi)) throw ConfigError("camera.theta", "must be in (0, pi)");
  if (!(st.base_pose.radius > 0.0)) throw ConfigError("camera.radius", "must be > 0");
  if (!(st.base_pose.fov_y > 0.0 && st.base_pose.fov_y < pi)) throw ConfigError("camera.fov_y", "must be in (0, pi)");
  if (!(st.base_pose.radius > st.quality.near)) throw ConfigError("camera.radius", "must exceed render.near");
  const auto& th = st.side_sampler.theta;
  if (!(th.lo > 0.0 && th.lo <= th.hi && th.hi < pi))
    throw ConfigError("side_views.theta", "needs 0 < lo <= hi < pi");
  const auto& ph = st.side_sampler.phi;
  if (!(ph.lo <= ph.hi)) throw ConfigError("side_views.phi", "needs lo <= hi");
  if (!(st.schedule.t_min > 0.0 && st.schedule.t_min <= st.schedule.t_max && st.schedule.t_max <= 1.0))
    throw ConfigError("diffusion.t_min", "needs 0 < t_min <= t_max <= 1");
  require_nonnegative(st.ridge, "illumination.ridge");

  require_nonnegative(c.weights.id, "weights.lambda_id");
  require_nonnegative(c.weights.r, "weights.lambda_r");
  require_nonnegative(c.weights.d, "weights.lambda_d");
  require_nonnegative(c.weights.il, "weights.lambda_il");
  require_nonnegative(c.weights.regu, "weights.lambda_regu");

  if (c.optimizer.iterations < 0) throw ConfigError("optimizer.iterations", "must be >= 0");
  if (!(c.optimizer.step > 0.0)) throw ConfigError("optimizer.step", "must be > 0");
  if (!(c.optimizer.beta1 >= 0.0 && c.optimizer.beta1 < 1.0)) throw ConfigError("optimizer.beta1", "must be in [0, 1)");
  if (!(c.optimizer.beta2 >= 0.0 && c.optimizer.beta2 < 1.0)) throw ConfigError("optimizer.beta2", "must be in [0, 1)");
  if (!(c.optimizer.epsilon > 0.0)) throw ConfigError("optimizer.epsilon", "must be > 0");
  require_nonnegative(c.init.perturbation, "init.perturbation");
  if (c.init.warmup_iterations < 0) throw ConfigError("init.warmup_iterations", "must be >= 0");
  if (c.pti.iterations < 0) throw ConfigError("pti.iterations", "must be >= 0");
  if (!(c.pti.step > 0.0)) throw ConfigError("pti.step", "must be > 0");
  if (c.pti.max_backtracks < 0) throw ConfigError("pti.max_backtracks", "must be >= 0");
  if (st.eval_sds_draws < 0) throw ConfigError("evaluation.sds_draws", "must be >= 0");
  if (st.eval_poses < 0) throw ConfigError("evaluation.poses", "must be >= 0");
  if (c.grid_views < 1) throw ConfigError("grid.views", "must be >= 1");

  // Files referenced by the config.
  if (c.input.image) check_image_file(*c.input.image, size, "input.image");
  if (c.input.latent) {
    if (!fs::exists(*c.input.latent)) throw ConfigError("input.latent", "file not found: " + c.input.latent->string());
    std::ifstream in(*c.input.latent);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::optional<LatentCode> parsed;
    try {
      parsed = parse_latent(text);
    } catch (const std::exception& e) {
      throw ConfigError("input.latent", e.what());
    }
    const LatentCode& w = *parsed;
    if (w.dim() != c.generator.latent_dim || (w.space() == LatentSpace::WPlus && w.rows() != c.generator.layers))
      throw ConfigError("input.latent", "latent shape does not match the generator");
  }
  for (const auto& [name, src] : c.prompt_bank)
    if (src.image) check_image_file(*src.image, size, "prompt_bank." + name + ".image");

  // Per-command structure.
  if (cmd != Command::Sweep && (c.sweep_axis || !c.sweep_values.empty()))
    throw ConfigError("sweep", "only used by the sweep command");
  if (cmd == Command::Generate && c.pti_enabled) throw ConfigError("pti.enabled", "not supported for generate");
  if (cmd == Command::Generate && (c.init.mode != InitMode::Mean || c.init.perturbation != 0.0))
    throw ConfigError("init", "generate always starts from the latent mean");
  if (cmd == Command::Sweep && c.pti_enabled) throw ConfigError("pti.enabled", "not supported for sweep");
  if (c.init.mode == InitMode::InvertFirst && !c.input.present())
    throw ConfigError("init.mode", "invert_first needs an input");

  std::vector<LossWeights> runs{c.weights};
  switch (cmd) {
    case Command::Invert:
      require_zero(c.weights.d, "weights.lambda_d", cmd);
      require_zero(c.weights.il, "weights.lambda_il", cmd);
      require_zero(c.weights.regu, "weights.lambda_regu", cmd);
      if (!(c.weights.id + c.weights.r > 0.0))
        throw ConfigError("weights.lambda_r", "invert needs lambda_r or lambda_id > 0");
      break;
    case Command::Edit:
      if (!(c.weights.d > 0.0)) throw ConfigError("weights.lambda_d", "must be > 0 for edit");
      if (!c.prompt) throw ConfigError("prompt", "required for edit");
      if (!c.input.present()) throw ConfigError("input", "required for edit");
      break;
    case Command::Relight:
      require_zero(c.weights.d, "weights.lambda_d", cmd);
      if (!(c.weights.il > 0.0)) throw ConfigError("weights.lambda_il", "must be > 0 for relight");
      if (!c.target_light) throw ConfigError("target_light", "required for relight");
      if (!c.input.present()) throw ConfigError("input", "required for relight");
      break;
    case Command::Generate:
      require_zero(c.weights.id, "weights.lambda_id", cmd);
      require_zero(c.weights.r, "weights.lambda_r", cmd);
      require_zero(c.weights.il, "weights.lambda_il", cmd);
      if (!(c.weights.d > 0.0)) throw ConfigError("weights.lambda_d", "must be > 0 for generate");
      if (!c.prompt) throw ConfigError("prompt", "required for generate");
      if (c.input.present()) throw ConfigError("input", "not used by generate");
      break;
    case Command::Sweep: {
      if (!c.sweep_axis) throw ConfigError("sweep.axis", "required for sweep");
      if (c.sweep_values.empty()) throw ConfigError("sweep.values", "must be nonempty");
      runs.clear();
      for (std::size_t i = 0; i < c.sweep_values.size(); ++i) {
        const double v = c.sweep_values[i];
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("sweep.values", "entries must be finite and >= 0");
        LossWeights w = c.weights;
        w.set(sweep_term(*c.sweep_axis), v);
        runs.push_back(w);
      }
      break;
    }
  }
  for (const LossWeights& w : runs) {
    if (w.d > 0.0 && !c.prompt) throw ConfigError("prompt", "required when lambda_d > 0");
    if (w.il > 0.0 && !c.target_light) throw ConfigError("target_light", "required when lambda_il > 0");
    if ((w.id > 0.0 || w.r > 0.0) && !c.input.present()) throw ConfigError("input", "required when lambda_id or lambda_r > 0");
  }
  if (c.prompt && !c.prompt_bank.contains(*c.prompt)) throw UnknownPromptError(*c.prompt);
}

}  // namespace sculpt
