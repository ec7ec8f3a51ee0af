#include "sculpt/latent.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "sculpt/errors.hpp"

namespace sculpt {

std::string to_string(LatentSpace space) { return space == LatentSpace::W ? "W" : "W_PLUS"; }

LatentSpace latent_space_from_string(const std::string& s) {
  if (s == "W") return LatentSpace::W;
  if (s == "W_PLUS") return LatentSpace::WPlus;
  throw std::invalid_argument("unknown latent space '" + s + "'");
}

LatentCode::LatentCode(LatentSpace space, int rows, int dim, std::vector<double> values)
    : space_(space), rows_(rows), dim_(dim), values_(std::move(values)) {
  if (dim < 1) throw ShapeError("LatentCode: dim must be >= 1");
  if (rows < 1) throw ShapeError("LatentCode: rows must be >= 1");
  if (space == LatentSpace::W && rows != 1) throw ShapeError("LatentCode: W form has one row");
  if (values_.size() != static_cast<std::size_t>(rows) * dim)
    throw ShapeError("LatentCode: value count does not match shape");
  for (double v : values_)
    if (!std::isfinite(v)) throw std::domain_error("LatentCode: non-finite entry");
}

LatentCode LatentCode::zeros(LatentSpace space, int rows, int dim) {
  return LatentCode(space, rows, dim, std::vector<double>(static_cast<std::size_t>(rows) * dim));
}

std::span<const double> LatentCode::row(int r) const {
  if (r < 0 || r >= rows_) throw std::out_of_range("LatentCode::row");
  return std::span<const double>(values_).subspan(static_cast<std::size_t>(r) * dim_, dim_);
}

LatentCode LatentCode::with_values(std::vector<double> values) const {
  return LatentCode(space_, rows_, dim_, std::move(values));
}

LatentCode broadcast_to_wplus(const LatentCode& w, int layers) {
  if (w.space() != LatentSpace::W) throw ShapeError("broadcast_to_wplus: input must be a W code");
  if (layers < 1) throw ShapeError("broadcast_to_wplus: layers must be >= 1");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(layers) * w.dim());
  for (int l = 0; l < layers; ++l) out.insert(out.end(), w.values().begin(), w.values().end());
  return LatentCode(LatentSpace::WPlus, layers, w.dim(), std::move(out));
}

LatentCode extract_row(const LatentCode& w, int row) {
  auto r = w.row(row);
  return LatentCode(LatentSpace::W, 1, w.dim(), std::vector<double>(r.begin(), r.end()));
}

LatentStats latent_stats_from_draws(std::span<const LatentCode> draws) {
  if (draws.size() < 2) throw std::invalid_argument("latent stats need at least 2 draws");
  const LatentCode& first = draws.front();
  const std::size_t m = first.size();
  std::vector<double> mean(m, 0.0);
  for (const auto& d : draws) {
    if (d.rows() != first.rows() || d.dim() != first.dim())
      throw ShapeError("latent stats: draws differ in shape");
    for (std::size_t i = 0; i < m; ++i) mean[i] += d.values()[i];
  }
  const double n = static_cast<double>(draws.size());
  for (auto& v : mean) v /= n;
  std::vector<double> var(m, 0.0);
  for (const auto& d : draws)
    for (std::size_t i = 0; i < m; ++i) {
      const double e = d.values()[i] - mean[i];
      var[i] += e * e;
    }
  for (auto& v : var) v = std::sqrt(v / (n - 1.0));
  return LatentStats{LatentCode(LatentSpace::WPlus, first.rows(), first.dim(), std::move(mean)),
                     std::move(var), static_cast<int>(draws.size())};
}

LatentStats estimate_latent_stats(const LatentSampler& sampler, int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("estimate_latent_stats: n must be >= 2");
  std::mt19937_64 rng(seed);
  std::vector<LatentCode> draws;
  draws.reserve(n);
  for (int i = 0; i < n; ++i) {
    LatentCode d = sampler(rng);
    if (d.space() == LatentSpace::W) d = broadcast_to_wplus(d, 1);
    draws.push_back(std::move(d));
  }
  return latent_stats_from_draws(draws);
}

ScalarWithGrad regularization_loss(const LatentCode& w, const LatentStats& stats,
                                   double lambda_regu) {
  if (!(lambda_regu >= 0.0)) throw std::invalid_argument("lambda_regu must be >= 0");
  if (w.rows() != stats.mean.rows() || w.dim() != stats.mean.dim())
    throw ShapeError("regularization_loss: shape mismatch between w and the latent mean");
  ScalarWithGrad out;
  out.grad.resize(w.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = w.values()[i] - stats.mean.values()[i];
    sq += d * d;
    out.grad[i] = 2.0 * lambda_regu * d;
  }
  out.value = lambda_regu * sq;
  return out;
}

LatentCode initial_latent(const LatentStats& stats, double perturbation_scale, std::uint64_t seed) {
  if (perturbation_scale == 0.0) return stats.mean;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(stats.mean.values().begin(), stats.mean.values().end());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] += perturbation_scale * stats.per_dim_std[i] * normal(rng);
  return stats.mean.with_values(std::move(v));
}

std::string serialize_latent(const LatentCode& w) {
  nlohmann::json j;
  j["shape"] = {w.rows(), w.dim()};
  j["space"] = to_string(w.space());
  j["values"] = std::vector<double>(w.values().begin(), w.values().end());
  return j.dump();
}

LatentCode parse_latent(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  for (const auto& [key, _] : j.items())
    if (key != "shape" && key != "space" && key != "values")
      throw std::invalid_argument("latent document: unknown key '" + key + "'");
  const auto shape = j.at("shape").get<std::vector<int>>();
  if (shape.size() != 2) throw ShapeError("latent document: shape must have two entries");
  return LatentCode(latent_space_from_string(j.at("space").get<std::string>()), shape[0], shape[1],
                    j.at("values").get<std::vector<double>>());
}

}  // namespace sculpt
