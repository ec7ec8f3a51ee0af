#include "sculpt/diffusion.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <stdexcept>

#include "sculpt/errors.hpp"

namespace sculpt {

double alpha_bar(double t) {
  if (!(t > 0.0 && t <= 1.0)) throw std::domain_error("alpha_bar: t must lie in (0, 1]");
  const double c = std::cos(0.5 * std::numbers::pi * t);
  return c * c;
}

std::string to_string(SdsWeighting w) {
  return w == SdsWeighting::OneMinusAlphaBar ? "one_minus_alpha_bar" : "unit";
}

SdsWeighting sds_weighting_from_string(const std::string& s) {
  if (s == "one_minus_alpha_bar") return SdsWeighting::OneMinusAlphaBar;
  if (s == "unit") return SdsWeighting::Unit;
  throw std::invalid_argument("unknown SDS weighting '" + s + "'");
}

void DiffusionSchedule::validate() const {
  if (!(t_min > 0.0 && t_min < t_max && t_max < 1.0))
    throw std::invalid_argument("diffusion schedule: need 0 < t_min < t_max < 1");
}

double DiffusionSchedule::sds_weight(double t) const {
  return weighting == SdsWeighting::OneMinusAlphaBar ? 1.0 - alpha_bar(t) : 1.0;
}

double DiffusionSchedule::sample_timestep(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(t_min, t_max);
  return u(rng);
}

DiffusionLatent noise_latent(std::span<const double> z, double t, std::span<const double> eps) {
  if (z.size() != eps.size()) throw ShapeError("noise_latent: eps dimension mismatch");
  const double ab = alpha_bar(t);
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  DiffusionLatent out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = a * z[i] + b * eps[i];
  return out;
}

LatentImageEncoder::LatentImageEncoder(int image_size, std::uint64_t seed, int latent_dim)
    : image_size_(image_size), latent_dim_(latent_dim) {
  if (image_size < kPooledSize || image_size % kPooledSize != 0)
    throw std::invalid_argument("LatentImageEncoder: image_size must be a multiple of 16");
  if (latent_dim < 1) throw std::invalid_argument("LatentImageEncoder: latent_dim must be >= 1");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xD1u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr int inputs = kPooledSize * kPooledSize * 3;
  matrix_.resize(static_cast<std::size_t>(latent_dim) * inputs);
  // Unit-variance rows over [0,1]-valued pooled pixels give latents of order one.
  for (auto& v : matrix_) v = 4.0 * normal(rng) / std::sqrt(static_cast<double>(inputs));
}

DiffusionLatent LatentImageEncoder::encode(const Image& x) const {
  if (x.height != image_size_ || x.width != image_size_ || x.channels != 3)
    throw ShapeError("encode_image: image does not match the configured render size");
  const int f = image_size_ / kPooledSize;
  const double inv = 1.0 / (f * f);
  constexpr int inputs = kPooledSize * kPooledSize * 3;
  std::vector<double> pooled(inputs, 0.0);
  for (int y = 0; y < image_size_; ++y)
    for (int xx = 0; xx < image_size_; ++xx)
      for (int c = 0; c < 3; ++c)
        pooled[((y / f) * kPooledSize + xx / f) * 3 + c] += x.at(y, xx, c) * inv;
  DiffusionLatent z(latent_dim_, 0.0);
  for (int o = 0; o < latent_dim_; ++o) {
    const double* row = &matrix_[static_cast<std::size_t>(o) * inputs];
    double acc = 0.0;
    for (int i = 0; i < inputs; ++i) acc += row[i] * pooled[i];
    z[o] = acc;
  }
  return z;
}

Image LatentImageEncoder::vjp(std::span<const double> g) const {
  if (g.size() != static_cast<std::size_t>(latent_dim_)) throw ShapeError("encoder vjp: wrong dimension");
  constexpr int inputs = kPooledSize * kPooledSize * 3;
  std::vector<double> g_pooled(inputs, 0.0);
  for (int o = 0; o < latent_dim_; ++o) {
    const double* row = &matrix_[static_cast<std::size_t>(o) * inputs];
    for (int i = 0; i < inputs; ++i) g_pooled[i] += row[i] * g[o];
  }
  const int f = image_size_ / kPooledSize;
  const double inv = 1.0 / (f * f);
  Image out(image_size_, image_size_, 3);
  for (int y = 0; y < image_size_; ++y)
    for (int xx = 0; xx < image_size_; ++xx)
      for (int c = 0; c < 3; ++c) out.at(y, xx, c) = g_pooled[((y / f) * kPooledSize + xx / f) * 3 + c] * inv;
  return out;
}

void PromptBank::add(const std::string& prompt, PromptEntry entry) {
  if (!(entry.spread > 0.0)) throw std::invalid_argument("prompt '" + prompt + "': spread must be > 0");
  for (double v : entry.target_mu)
    if (!std::isfinite(v)) throw std::invalid_argument("prompt '" + prompt + "': non-finite target");
  entries_[prompt] = std::move(entry);
}

const PromptEntry& PromptBank::at(const std::string& prompt) const {
  auto it = entries_.find(prompt);
  if (it == entries_.end()) throw UnknownPromptError(prompt);
  return it->second;
}

PromptBank PromptBank::load(const std::filesystem::path& path, const LatentImageEncoder& encoder) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open prompt bank '" + path.string() + "'");
  const auto doc = nlohmann::json::parse(in);
  if (!doc.is_object()) throw std::invalid_argument("prompt bank must be a JSON object");
  PromptBank bank;
  for (const auto& [prompt, spec] : doc.items()) {
    for (const auto& [key, _] : spec.items())
      if (key != "image" && key != "spread")
        throw std::invalid_argument("prompt bank entry '" + prompt + "': unknown key '" + key + "'");
    std::filesystem::path image = spec.at("image").get<std::string>();
    if (image.is_relative()) image = path.parent_path() / image;
    PromptEntry e;
    e.target_mu = encoder.encode(read_pnm(image));
    e.spread = spec.value("spread", 1.0);
    bank.add(prompt, std::move(e));
  }
  return bank;
}

std::vector<double> denoise(std::span<const double> z_t, const std::string& prompt, double t,
                            const PromptBank& bank) {
  const PromptEntry& e = bank.at(prompt);
  if (z_t.size() != e.target_mu.size()) throw ShapeError("denoise: latent dimension mismatch");
  const double ab = alpha_bar(t);
  const double s2 = e.spread * e.spread;
  const double scale = std::sqrt(1.0 - ab) / (ab * s2 + 1.0 - ab);
  const double sa = std::sqrt(ab);
  std::vector<double> out(z_t.size());
  for (std::size_t i = 0; i < z_t.size(); ++i) out[i] = scale * (z_t[i] - sa * e.target_mu[i]);
  return out;
}

std::vector<double> AnalyticDenoiser::predict_noise(std::span<const double> z_t, const std::string& prompt,
                                                    double t) const {
  return denoise(z_t, prompt, t, bank_);
}

SdsSample draw_sds_sample(const DiffusionSchedule& schedule, int latent_dim, std::mt19937_64& rng) {
  SdsSample s;
  s.t = schedule.sample_timestep(rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  s.eps.resize(latent_dim);
  for (auto& e : s.eps) e = normal(rng);
  return s;
}

SdsImageTerm sds_image_term(const Image& x, const std::string& prompt, const SdsSample& sample,
                            const LatentImageEncoder& encoder, const Denoiser& denoiser,
                            const DiffusionSchedule& schedule) {
  const DiffusionLatent z = encoder.encode(x);
  const DiffusionLatent z_t = noise_latent(z, sample.t, sample.eps);
  const std::vector<double> eps_hat = denoiser.predict_noise(z_t, prompt, sample.t);
  if (eps_hat.size() != z.size()) throw ShapeError("denoiser returned a vector of the wrong size");
  SdsImageTerm out;
  out.weight = schedule.sds_weight(sample.t);
  out.residual.resize(z.size());
  std::vector<double> g(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double r = eps_hat[i] - sample.eps[i];
    out.residual[i] = r;
    out.loss_value += r * r;
    g[i] = out.weight * r;
  }
  out.grad_image = encoder.vjp(g);
  return out;
}

SdsResult sds_loss(const SdsContext& ctx, const LatentCode& w, const CameraPose& c_s,
                   const std::string& prompt, const SdsSample& sample) {
  if (!ctx.generator || !ctx.encoder || !ctx.denoiser)
    throw std::invalid_argument("sds_loss: context is incomplete");
  const RenderedView view = ctx.generator->render(w, c_s, ctx.quality);
  const SdsImageTerm term = sds_image_term(view.rgb, prompt, sample, *ctx.encoder, *ctx.denoiser, ctx.schedule);
  ViewCotangent ct;
  ct.rgb = term.grad_image;
  SdsResult out;
  out.loss_value = term.loss_value;
  out.grad_w = ctx.generator->render_vjp(w, c_s, ctx.quality, ct);
  out.sample = sample;
  return out;
}

SdsResult sds_loss(const SdsContext& ctx, const LatentCode& w, const CameraPose& c_s,
                   const std::string& prompt, std::mt19937_64& rng) {
  if (!ctx.encoder) throw std::invalid_argument("sds_loss: context is incomplete");
  return sds_loss(ctx, w, c_s, prompt, draw_sds_sample(ctx.schedule, ctx.encoder->latent_dim(), rng));
}

}  // namespace sculpt
