#include "thermoloss/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "thermoloss/error.hpp"

namespace thermoloss {

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian_kernel: sigma must be positive");
  const auto half = static_cast<long long>(std::ceil(3.0 * sigma));
  std::vector<double> w(static_cast<std::size_t>(2 * half + 1));
  double total = 0.0;
  for (long long k = -half; k <= half; ++k) {
    const double v = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
    w[static_cast<std::size_t>(k + half)] = v;
    total += v;
  }
  for (auto& v : w) v /= total;
  return w;
}

std::size_t mirror_index(long long i, std::size_t n) {
  const auto period = static_cast<long long>(2 * n);
  long long m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<long long>(n)) m = period - 1 - m;
  return static_cast<std::size_t>(m);
}

namespace {

// Returns (blurred, detail) where detail = g - blurred, accumulated as
// weighted differences so constant inputs give exactly zero detail.
std::pair<Grid, Grid> blur_with_detail(const Grid& g, double sigma) {
  const auto w = gaussian_kernel(sigma);
  const auto half = static_cast<long long>(w.size() / 2);
  const std::size_t h = g.height, wd = g.width;

  Grid rows(h, wd), detail(h, wd);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < wd; ++c) {
      double acc = 0.0, diff = 0.0;
      for (long long k = -half; k <= half; ++k) {
        const double v = g(r, mirror_index(static_cast<long long>(c) + k, wd));
        const double wk = w[static_cast<std::size_t>(k + half)];
        acc += wk * v;
        diff += wk * (g(r, c) - v);
      }
      rows(r, c) = acc;
      detail(r, c) = diff;
    }
  }
  Grid blurred(h, wd);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < wd; ++c) {
      double acc = 0.0, diff = 0.0;
      for (long long k = -half; k <= half; ++k) {
        const double v = rows(mirror_index(static_cast<long long>(r) + k, h), c);
        const double wk = w[static_cast<std::size_t>(k + half)];
        acc += wk * v;
        diff += wk * (rows(r, c) - v);
      }
      blurred(r, c) = acc;
      detail(r, c) += diff;
    }
  }
  return {std::move(blurred), std::move(detail)};
}

}  // namespace

Grid gaussian_blur(const Grid& g, double sigma) {
  return blur_with_detail(g, sigma).first;
}

ThermalImage unsharp_mask(const ThermalImage& img, const UnsharpParams& params) {
  const auto detail = blur_with_detail(img.pixels, params.radius).second;
  ThermalImage out = img;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels.values[i] =
        std::clamp(img.pixels.values[i] + params.amount * detail.values[i], 0.0, 1.0);
  }
  return out;
}

ThermalImage invert(const ThermalImage& img) {
  ThermalImage out = img;
  for (auto& v : out.pixels.values) v = 1.0 - v;
  return out;
}

std::vector<ThermalImage> preprocess_stack(const ThermalImage& img,
                                           const UnsharpParams& a,
                                           const UnsharpParams& b, double ceil) {
  img.validate();
  const ThermalImage clamped = remap_temperature_range(img, kDefaultTempFloor, ceil);
  const ThermalImage inverted = invert(clamped);
  return {unsharp_mask(clamped, a), unsharp_mask(inverted, a),
          unsharp_mask(clamped, b), unsharp_mask(inverted, b)};
}

}  // namespace thermoloss
