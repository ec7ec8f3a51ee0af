#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sculpt {

// Dense H x W x C image of doubles, row-major with interleaved channels.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0);

  bool empty() const noexcept { return data.empty(); }
  std::size_t size() const noexcept { return data.size(); }
  bool same_shape(const Image& o) const noexcept {
    return height == o.height && width == o.width && channels == o.channels;
  }

  double& at(int y, int x, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool operator==(const Image&) const = default;
};

double mean_squared_error(const Image& a, const Image& b);
// Peak signal-to-noise ratio in dB for images in [0, 1]; +inf for identical inputs.
double psnr(const Image& a, const Image& b);

// Tiles images left to right. All inputs must share height and channel count.
Image hstack(std::span<const Image> images);

// Binary netpbm: P6 for 3-channel, P5 for 1-channel. Values are clamped to [0,1] and
// rounded to 8 bits.
void write_pnm(const Image& img, const std::filesystem::path& path);
Image read_pnm(const std::filesystem::path& path);
std::vector<unsigned char> encode_pnm(const Image& img);

}  // namespace sculpt
