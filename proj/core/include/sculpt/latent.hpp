#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace sculpt {

enum class LatentSpace { W, WPlus };

std::string to_string(LatentSpace space);
LatentSpace latent_space_from_string(const std::string& s);

// A point in W (one row) or W+ (one row per generator layer). Entries are finite by
// construction; the value is immutable once built.
class LatentCode {
 public:
  LatentCode(LatentSpace space, int rows, int dim, std::vector<double> values);

  static LatentCode zeros(LatentSpace space, int rows, int dim);

  LatentSpace space() const noexcept { return space_; }
  int rows() const noexcept { return rows_; }
  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> row(int r) const;
  double at(int r, int c) const { return values_[static_cast<std::size_t>(r) * dim_ + c]; }

  // Same shape and space, new entries.
  LatentCode with_values(std::vector<double> values) const;
  bool same_shape(const LatentCode& o) const noexcept {
    return space_ == o.space_ && rows_ == o.rows_ && dim_ == o.dim_;
  }

  bool operator==(const LatentCode&) const = default;

 private:
  LatentSpace space_;
  int rows_;
  int dim_;
  std::vector<double> values_;
};

// Elementwise sample statistics of W+ draws.
struct LatentStats {
  LatentCode mean;
  std::vector<double> per_dim_std;
  int sample_count = 0;
};

using LatentSampler = std::function<LatentCode(std::mt19937_64&)>;

LatentCode broadcast_to_wplus(const LatentCode& w, int layers);

// Extracts a single row as a W code.
LatentCode extract_row(const LatentCode& w, int row);

LatentStats estimate_latent_stats(const LatentSampler& sampler, int n, std::uint64_t seed);

// Statistics of an explicit draw sequence (mean plus unbiased standard deviation).
LatentStats latent_stats_from_draws(std::span<const LatentCode> draws);

struct ScalarWithGrad {
  double value = 0.0;
  std::vector<double> grad;
};

// lambda * ||w - mean||_F^2 and its gradient 2 lambda (w - mean).
ScalarWithGrad regularization_loss(const LatentCode& w, const LatentStats& stats,
                                   double lambda_regu);

// stats.mean + scale * per_dim_std * N(0, 1); scale 0 returns the mean exactly.
LatentCode initial_latent(const LatentStats& stats, double perturbation_scale, std::uint64_t seed);

// {"shape": [L, D], "space": "W"|"W_PLUS", "values": [...]}
std::string serialize_latent(const LatentCode& w);
LatentCode parse_latent(const std::string& text);

}  // namespace sculpt
