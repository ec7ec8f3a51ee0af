#include "sculpt/illumination.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sculpt/errors.hpp"
#include "sculpt/scene.hpp"

namespace sculpt {

namespace {

const double kPi = std::numbers::pi;
const double kC0 = 0.5 / std::sqrt(kPi);           // Y00
const double kC1 = std::sqrt(3.0 / (4.0 * kPi));   // band 1
const double kC2 = 0.5 * std::sqrt(15.0 / kPi);    // xy, yz, xz
const double kC3 = 0.25 * std::sqrt(5.0 / kPi);    // 3z^2 - 1
const double kC4 = 0.25 * std::sqrt(15.0 / kPi);   // x^2 - y^2

constexpr double kCoverageFitThreshold = 0.5;

using Mat9 = Eigen::Matrix<double, 9, 9>;
using Vec9 = Eigen::Matrix<double, 9, 1>;

Vec9 to_eigen(const ShVector& v) { return Vec9(v.data()); }

ShVector from_eigen(const Vec9& v) {
  ShVector out{};
  for (int i = 0; i < 9; ++i) out[i] = v[i];
  return out;
}

struct FitSystem {
  std::vector<std::size_t> pixels;
  std::vector<ShVector> basis;
  std::vector<double> luminance;
  Mat9 normal_matrix = Mat9::Zero();
  Vec9 rhs = Vec9::Zero();
};

FitSystem assemble(const RenderedView& view, double ridge) {
  if (!(ridge >= 0.0)) throw std::invalid_argument("estimate_lighting: ridge must be >= 0");
  const Image& cov = view.coverage;
  if (cov.channels != 1 || !view.rgb.same_shape(view.normal) || view.rgb.channels != 3 ||
      cov.height != view.rgb.height || cov.width != view.rgb.width)
    throw ShapeError("estimate_lighting: inconsistent view buffers");
  FitSystem sys;
  const std::size_t npix = cov.data.size();
  for (std::size_t p = 0; p < npix; ++p) {
    if (!(cov.data[p] > kCoverageFitThreshold)) continue;
    const Vec3 n{view.normal.data[3 * p], view.normal.data[3 * p + 1], view.normal.data[3 * p + 2]};
    const Vec3 c{view.rgb.data[3 * p], view.rgb.data[3 * p + 1], view.rgb.data[3 * p + 2]};
    const ShVector b = sh_basis_unchecked(n);
    const double y = dot(kLuma, c);
    const Vec9 be = to_eigen(b);
    sys.normal_matrix.noalias() += be * be.transpose();
    sys.rhs += y * be;
    sys.pixels.push_back(p);
    sys.basis.push_back(b);
    sys.luminance.push_back(y);
  }
  if (sys.pixels.size() < static_cast<std::size_t>(kShCoeffs))
    throw InsufficientCoverageError("estimate_lighting: fewer than 9 pixels with coverage > 0.5");
  if (ridge == 0.0) {
    Eigen::SelfAdjointEigenSolver<Mat9> eig(sys.normal_matrix, Eigen::EigenvaluesOnly);
    const auto ev = eig.eigenvalues();
    if (ev.minCoeff() <= 1e-12 * std::max(1.0, ev.maxCoeff()))
      throw RankDeficiencyError("estimate_lighting: visible normals do not span the SH basis");
  }
  sys.normal_matrix += ridge * Mat9::Identity();
  return sys;
}

}  // namespace

std::string to_string(LightingFrame frame) {
  return frame == LightingFrame::World ? "WORLD" : "CAMERA";
}

LightingFrame lighting_frame_from_string(const std::string& s) {
  if (s == "WORLD") return LightingFrame::World;
  if (s == "CAMERA") return LightingFrame::Camera;
  throw std::invalid_argument("unknown lighting frame '" + s + "'");
}

ShVector sh_basis_unchecked(const Vec3& n) {
  const double x = n.x, y = n.y, z = n.z;
  return {kC0,         kC1 * y,     kC1 * z, kC1 * x, kC2 * x * y, kC2 * y * z,
          kC3 * (3.0 * z * z - 1.0), kC2 * x * z, kC4 * (x * x - y * y)};
}

ShVector sh_basis(const Vec3& n) {
  if (std::abs(norm(n) - 1.0) > 1e-5) throw std::invalid_argument("sh_basis: normal is not unit");
  return sh_basis_unchecked(n);
}

Vec3 sh_basis_vjp(const Vec3& n, const ShVector& g) {
  const double x = n.x, y = n.y, z = n.z;
  Vec3 out;
  out.x = kC1 * g[3] + kC2 * y * g[4] + kC2 * z * g[7] + 2.0 * kC4 * x * g[8];
  out.y = kC1 * g[1] + kC2 * x * g[4] + kC2 * z * g[5] - 2.0 * kC4 * y * g[8];
  out.z = kC1 * g[2] + kC2 * y * g[5] + 6.0 * kC3 * z * g[6] + kC2 * x * g[7];
  return out;
}

double sh_dot(const ShVector& basis, const ShVector& coeffs) {
  double s = 0.0;
  for (int i = 0; i < kShCoeffs; ++i) s += basis[i] * coeffs[i];
  return s;
}

Vec3 lambertian_shade(const Vec3& albedo, const Vec3& n, const SHLighting& light) {
  const double shade = std::max(0.0, sh_dot(sh_basis(n), light.coeffs));
  Vec3 out = albedo * shade;
  for (int k = 0; k < 3; ++k) out[k] = std::clamp(out[k], 0.0, 1.0);
  return out;
}

SHLighting estimate_lighting(const RenderedView& view, double ridge) {
  const FitSystem sys = assemble(view, ridge);
  const Vec9 coeffs = sys.normal_matrix.ldlt().solve(sys.rhs);
  return SHLighting{from_eigen(coeffs), LightingFrame::World};
}

ViewCotangent estimate_lighting_vjp(const RenderedView& view, double ridge,
                                    const ShVector& coeff_cotangent) {
  const FitSystem sys = assemble(view, ridge);
  const auto ldlt = sys.normal_matrix.ldlt();
  const Vec9 coeffs = ldlt.solve(sys.rhs);
  const Vec9 v = ldlt.solve(to_eigen(coeff_cotangent));
  const ShVector L = from_eigen(coeffs);
  const ShVector vv = from_eigen(v);

  ViewCotangent out;
  out.rgb = Image(view.rgb.height, view.rgb.width, 3);
  out.normal = Image(view.rgb.height, view.rgb.width, 3);
  for (std::size_t i = 0; i < sys.pixels.size(); ++i) {
    const std::size_t p = sys.pixels[i];
    const ShVector& b = sys.basis[i];
    const double bv = sh_dot(b, vv);
    const double resid = sys.luminance[i] - sh_dot(b, L);
    ShVector gb{};
    for (int k = 0; k < kShCoeffs; ++k) gb[k] = resid * vv[k] - bv * L[k];
    const Vec3 n{view.normal.data[3 * p], view.normal.data[3 * p + 1], view.normal.data[3 * p + 2]};
    const Vec3 gn = sh_basis_vjp(n, gb);
    for (int k = 0; k < 3; ++k) {
      out.rgb.data[3 * p + k] = kLuma[k] * bv;
      out.normal.data[3 * p + k] = gn[k];
    }
  }
  return out;
}

IlluminationLoss illumination_loss(const RenderedView& view, const SHLighting& target,
                                   double ridge) {
  if (target.frame != LightingFrame::World)
    throw std::invalid_argument("illumination_loss: target must be expressed in the WORLD frame");
  IlluminationLoss out;
  out.estimate = estimate_lighting(view, ridge);
  for (int i = 0; i < kShCoeffs; ++i)
    out.value += std::abs(out.estimate.coeffs[i] - target.coeffs[i]);
  return out;
}

double illumination_loss_with_grad(const RenderedView& view, const SHLighting& target,
                                   double ridge, double scale, ViewCotangent& out) {
  const IlluminationLoss loss = illumination_loss(view, target, ridge);
  ShVector g{};
  for (int i = 0; i < kShCoeffs; ++i) {
    const double d = loss.estimate.coeffs[i] - target.coeffs[i];
    g[i] = scale * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
  }
  ViewCotangent ct = estimate_lighting_vjp(view, ridge, g);
  if (out.rgb.empty()) out.rgb = Image(view.rgb.height, view.rgb.width, 3);
  if (out.normal.empty()) out.normal = Image(view.rgb.height, view.rgb.width, 3);
  for (std::size_t i = 0; i < ct.rgb.data.size(); ++i) {
    out.rgb.data[i] += ct.rgb.data[i];
    out.normal.data[i] += ct.normal.data[i];
  }
  return loss.value;
}

SHLighting sh_rotate(const SHLighting& light, const Mat3& rotation) {
  const Mat3 rtr = transpose(rotation) * rotation;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (std::abs(rtr[i][j] - (i == j ? 1.0 : 0.0)) > 1e-6)
        throw std::invalid_argument("sh_rotate: matrix is not orthonormal");
  if (std::abs(determinant(rotation) - 1.0) > 1e-6)
    throw std::invalid_argument("sh_rotate: matrix is a reflection");

  constexpr int kDirections = 128;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const Mat3 inverse = transpose(rotation);
  Eigen::Matrix<double, kDirections, 9> A;
  Eigen::Matrix<double, kDirections, 1> f;
  for (int i = 0; i < kDirections; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / kDirections;
    const double r = std::sqrt(1.0 - z * z);
    const double a = golden * i;
    const Vec3 d{r * std::cos(a), r * std::sin(a), z};
    const ShVector b = sh_basis_unchecked(d);
    for (int k = 0; k < 9; ++k) A(i, k) = b[k];
    f[i] = sh_dot(sh_basis_unchecked(inverse * d), light.coeffs);
  }
  const Vec9 c = A.colPivHouseholderQr().solve(f);
  return SHLighting{from_eigen(c), light.frame};
}

}  // namespace sculpt
