#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "thermoloss/core_types.hpp"

namespace thermoloss {

struct NllConfig {
  double epsilon = 1e-6;  // floor applied to the predicted variance
};

struct NllResult {
  double value = 0.0;
  std::vector<Point2> grad_mu;
  std::vector<double> grad_sigma2;
};

// sum_l log(2 pi s_l) + ||mu_l - y_l||^2 / (2 s_l),  s_l = max(sigma2_l, eps).
// grad_sigma2_l is 0 wherever the floor is active (sigma2_l <= eps).
NllResult gaussian_nll(const LandmarkSet& mu, std::span<const double> sigma2,
                       const LandmarkSet& y, const NllConfig& cfg = {});

struct WindowPlanConfig {
  std::size_t window = 224;
  std::size_t stride = 20;
  double scale_factor = 0.75;
  std::size_t min_dim_stop = 224;

  void validate() const;
};

// One sliding window on one pyramid level. scale = scale_factor^scale_index;
// level dimensions are floor(image dimension * scale).
struct WindowGeometry {
  std::size_t scale_index = 0;
  double scale = 1.0;
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t window_h = 224;
  std::size_t window_w = 224;
  std::size_t level_h = 0;
  std::size_t level_w = 0;
  std::size_t image_h = 0;
  std::size_t image_w = 0;
};

// Anchors at multiples of stride plus one flush with the far edge when the
// last regular anchor leaves pixels uncovered. An axis shorter than the
// window gets a single anchor at 0 (the window covers mirror padding).
std::vector<std::size_t> axis_anchors(std::size_t dim, std::size_t window, std::size_t stride);

// Level 0 is always planned; further levels while min(h, w) >= min_dim_stop.
std::vector<WindowGeometry> plan_windows(std::size_t img_h, std::size_t img_w,
                                         const WindowPlanConfig& cfg = {});

// Window-local normalized (fraction of window side) <-> full-image normalized.
Point2 window_to_image(const WindowGeometry& g, Point2 local);
Point2 image_to_window(const WindowGeometry& g, Point2 global);

struct WindowPrediction {
  WindowGeometry geometry;
  std::vector<Point2> points;  // window-local normalized
  std::vector<double> sigmas;
};

// Per landmark, keeps the prediction with the smallest sigma over all
// windows (first window wins ties), mapped back to full-image coordinates.
LandmarkSet pool_predictions(const std::vector<WindowPrediction>& windows);

// Accepted iff mean(sigmas) < sigma_bar.
bool confidence_filter(const LandmarkSet& pred, double sigma_bar);

}  // namespace thermoloss
