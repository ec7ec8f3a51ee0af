#include "sculpt/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "sculpt/errors.hpp"

namespace sculpt {

Image::Image(int h, int w, int c, double fill)
    : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {
  if (h < 0 || w < 0 || c < 0) throw ShapeError("Image: negative dimension");
}

double mean_squared_error(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("mean_squared_error: shape mismatch");
  if (a.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

double psnr(const Image& a, const Image& b) {
  const double mse = mean_squared_error(a, b);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

Image hstack(std::span<const Image> images) {
  if (images.empty()) throw ShapeError("hstack: no images");
  const int h = images.front().height;
  const int c = images.front().channels;
  int total_w = 0;
  for (const auto& im : images) {
    if (im.height != h || im.channels != c) throw ShapeError("hstack: inconsistent shapes");
    total_w += im.width;
  }
  Image out(h, total_w, c);
  int x0 = 0;
  for (const auto& im : images) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < im.width; ++x)
        for (int k = 0; k < c; ++k) out.at(y, x0 + x, k) = im.at(y, x, k);
    x0 += im.width;
  }
  return out;
}

std::vector<unsigned char> encode_pnm(const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw ShapeError("encode_pnm: only 1 or 3 channels supported");
  std::ostringstream header;
  header << (img.channels == 3 ? "P6" : "P5") << "\n" << img.width << " " << img.height << "\n255\n";
  const std::string h = header.str();
  std::vector<unsigned char> bytes(h.begin(), h.end());
  bytes.reserve(h.size() + img.data.size());
  for (double v : img.data) {
    const double c = std::clamp(v, 0.0, 1.0);
    bytes.push_back(static_cast<unsigned char>(std::lround(c * 255.0)));
  }
  return bytes;
}

void write_pnm(const Image& img, const std::filesystem::path& path) {
  const auto bytes = encode_pnm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

namespace {

void skip_ws_and_comments(std::istream& in) {
  while (true) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image '" + path.string() + "'");
  std::string magic;
  in >> magic;
  int channels = 0;
  if (magic == "P6")
    channels = 3;
  else if (magic == "P5")
    channels = 1;
  else
    throw std::runtime_error("'" + path.string() + "' is not a binary PPM/PGM file");
  int w = 0, h = 0, maxval = 0;
  skip_ws_and_comments(in);
  in >> w;
  skip_ws_and_comments(in);
  in >> h;
  skip_ws_and_comments(in);
  in >> maxval;
  in.get();
  if (!in || w <= 0 || h <= 0 || maxval != 255)
    throw std::runtime_error("unsupported header in '" + path.string() + "'");
  Image img(h, w, channels);
  std::vector<unsigned char> raw(img.data.size());
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw std::runtime_error("truncated image data in '" + path.string() + "'");
  for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 255.0;
  return img;
}

}  // namespace sculpt
