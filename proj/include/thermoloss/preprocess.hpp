#pragma once

#include <vector>

#include "thermoloss/core_types.hpp"

namespace thermoloss {

// Unsharp masking: out = clamp(v + amount * (v - gaussian_blur(v)), 0, 1).
// The Gaussian has standard deviation `radius` pixels and is truncated at
// ceil(3 * radius); borders use symmetric mirror padding (a b c | c b a).
struct UnsharpParams {
  double radius = 2.0;
  double amount = 1.0;
};

inline constexpr UnsharpParams kUnsharpA{2.0, 1.0};
inline constexpr UnsharpParams kUnsharpB{5.0, 2.0};

// Normalized 1-D Gaussian taps, index 0 = offset -half_width.
std::vector<double> gaussian_kernel(double sigma);

// Symmetric mirror index into [0, n).
std::size_t mirror_index(long long i, std::size_t n);

Grid gaussian_blur(const Grid& g, double sigma);
ThermalImage unsharp_mask(const ThermalImage& img, const UnsharpParams& params);
ThermalImage invert(const ThermalImage& img);

// Clamps to [20, 45] C, then returns
//   [unsharp A, unsharp A of inverted, unsharp B, unsharp B of inverted].
std::vector<ThermalImage> preprocess_stack(const ThermalImage& img,
                                           const UnsharpParams& a = kUnsharpA,
                                           const UnsharpParams& b = kUnsharpB,
                                           double ceil = kPreprocessTempCeil);

}  // namespace thermoloss
