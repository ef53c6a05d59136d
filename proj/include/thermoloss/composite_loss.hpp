#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "thermoloss/core_types.hpp"
#include "thermoloss/ot.hpp"
#include "thermoloss/patch_wasserstein.hpp"
#include "thermoloss/region_regularizer.hpp"

namespace thermoloss {

// Normalization constant for the patch term: 5 scales of 8 x 8 patches.
inline constexpr double kPatchNormalization = 1.0 / (5.0 * 8.0 * 8.0);

struct LossConfig {
  double lambda_w = 0.01 * kPatchNormalization;
  double lambda_r = 1.0;
  double mse_dim_norm = 256.0 * 256.0;
  ReferenceTemperatureProfile profile = ReferenceTemperatureProfile::cold();
  bool include_background = true;
  PatchConfig patch_cfg;
  SinkhornConfig sink_cfg;
  OtBackend backend = OtBackend::kSinkhorn;

  void validate() const;
};

struct PairedExample {
  ThermalImage gen;
  ThermalImage target;
};

struct LossProblem {
  std::vector<PairedExample> paired;
  std::vector<GeneratedImage> unpaired;
  std::vector<ThermalImage> real;
};

struct MseResult {
  double value = 0.0;
  Grid grad;
};

// ||gen - target||^2 / mse_dim_norm and its gradient.
MseResult paired_mse(const ThermalImage& gen, const ThermalImage& target,
                     double mse_dim_norm);

struct LossBreakdown {
  double mse = 0.0;      // mean paired MSE
  double patch_w = 0.0;  // multiscale patch W, unweighted
  double region = 0.0;   // mean region regularizer, unweighted
  double weighted_patch_w = 0.0;
  double weighted_region = 0.0;
  double total = 0.0;
};

struct LossResult {
  double value = 0.0;
  LossBreakdown breakdown;
  std::vector<Grid> paired_grads;    // per paired generated image
  std::vector<Grid> unpaired_grads;  // per unpaired generated image
  std::vector<ScaleReport> patch_scales;
  bool converged = true;
};

// mean paired MSE + lambda_w * W(unpaired, real) + lambda_r * mean R(unpaired).
// A term whose weight is 0 is not evaluated at all.
LossResult rgb2thermal_loss(const LossProblem& problem, const LossConfig& cfg);

struct ToyResult {
  LossProblem optimized;
  std::vector<double> trace;  // total loss at iterates 0..steps
  std::vector<LossBreakdown> breakdowns;
  bool aborted = false;
  std::string message;
};

// Projected gradient descent directly on the generated images' pixels:
//   x <- clamp(x - step_size * grad, 0, 1).
ToyResult toy_thermalize(const LossProblem& init, const LossConfig& cfg,
                         std::size_t steps, double step_size);

}  // namespace thermoloss
