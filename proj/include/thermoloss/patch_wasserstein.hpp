#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "thermoloss/core_types.hpp"
#include "thermoloss/ot.hpp"

namespace thermoloss {

struct PatchConfig {
  std::size_t patch_size = 8;
  std::size_t stride = 4;
  std::size_t scales = 5;
  double scale_factor = 0.5;
  std::size_t max_patches_per_side = 1024;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PatchIndex {
  std::size_t image = 0;
  std::size_t scale = 0;
  std::size_t top = 0;
  std::size_t left = 0;
};

// Flattened (row-major) s x s patches plus where each came from.
struct PatchMeasure {
  EmpiricalMeasure measure;
  std::vector<PatchIndex> index;
  bool image_too_small = false;
};

// Patches at top-left positions that are multiples of the stride and lie
// fully inside the image. With a mask, any patch touching label 0 is dropped;
// without one, patches whose pixels are all exactly 0 are dropped.
PatchMeasure extract_patches(const Grid& img, const SegmentationMask* mask,
                             const PatchConfig& cfg, std::size_t image_id = 0,
                             std::size_t scale = 0);
PatchMeasure extract_patches(const ThermalImage& img, const SegmentationMask* mask,
                             const PatchConfig& cfg);

// Separable linear resampling by `factor` with half-pixel centres:
// output i samples input at (i + 0.5) / factor - 0.5, edge-clamped.
// For factor 0.5 this is exactly a 2x2 box average.
struct AxisWeights {
  std::size_t in_size = 0;
  std::size_t out_size = 0;
  // Per output index: up to two (input index, weight) taps.
  std::vector<std::vector<std::pair<std::size_t, double>>> taps;
};

AxisWeights bilinear_axis_weights(std::size_t in_size, double factor);
Grid downsample(const Grid& g, double factor);
// Exact transpose of downsample(): maps a gradient on the small grid back to
// a gradient on the (in_h x in_w) grid.
Grid downsample_adjoint(const Grid& grad_small, std::size_t in_h, std::size_t in_w,
                        double factor);
// Output pixel is background (0) when any contributing input pixel is;
// otherwise it takes the label of its heaviest tap.
SegmentationMask downsample_mask(const SegmentationMask& mask, double factor);

// Level 0 is the input; each further level is downsample(previous) and is
// kept only while both sides stay >= patch_size, up to cfg.scales levels.
std::vector<ThermalImage> build_pyramid(const ThermalImage& img, const PatchConfig& cfg);

enum class OtBackend { kSinkhorn, kExact };

struct ScaleReport {
  std::size_t scale = 0;
  std::size_t gen_patches = 0;
  std::size_t real_patches = 0;
  std::size_t subsample = 0;
  double value = 0.0;
  bool skipped = false;
  bool converged = true;
  // Indices into the pooled generated / real patch lists, in draw order.
  std::vector<std::size_t> gen_selected;
  std::vector<std::size_t> real_selected;
};

struct PatchLossResult {
  double value = 0.0;
  std::vector<Grid> grads;  // one per generated image, level-0 shape
  std::vector<ScaleReport> scales;
  bool converged = true;
};

struct GeneratedImage {
  ThermalImage image;
  SegmentationMask mask;
};

// Sum over pyramid levels of W_{2,E}^2 between equal-size random subsamples
// of the pooled generated and real patch sets. Gradients flow to the
// generated level-0 pixels through the plan (held fixed), the patch
// extraction adjoint and the downsampling adjoints.
PatchLossResult patch_w_loss(const std::vector<GeneratedImage>& gen,
                             const std::vector<ThermalImage>& real,
                             const PatchConfig& cfg, const SinkhornConfig& sink_cfg,
                             OtBackend backend = OtBackend::kSinkhorn);

}  // namespace thermoloss
