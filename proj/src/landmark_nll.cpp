#include "thermoloss/landmark_nll.hpp"

#include <cmath>
#include <numbers>

#include "thermoloss/error.hpp"

namespace thermoloss {

NllResult gaussian_nll(const LandmarkSet& mu, std::span<const double> sigma2,
                       const LandmarkSet& y, const NllConfig& cfg) {
  if (!(cfg.epsilon > 0.0)) throw InvalidArgument("gaussian_nll: epsilon must be positive");
  if (mu.size() != y.size() || sigma2.size() != mu.size()) {
    throw DimensionMismatch("gaussian_nll: landmark counts differ");
  }
  NllResult out;
  out.grad_mu.resize(mu.size());
  out.grad_sigma2.resize(mu.size());
  for (std::size_t l = 0; l < mu.size(); ++l) {
    const double raw = sigma2[l];
    if (!(raw > 0.0) || !std::isfinite(raw)) {
      throw InvalidArgument("gaussian_nll: variances must be positive and finite");
    }
    const double s = std::max(raw, cfg.epsilon);
    const double dx = mu.points[l].x - y.points[l].x;
    const double dy = mu.points[l].y - y.points[l].y;
    const double r2 = dx * dx + dy * dy;
    out.value += std::log(2.0 * std::numbers::pi * s) + r2 / (2.0 * s);
    out.grad_mu[l] = {dx / s, dy / s};
    out.grad_sigma2[l] = raw > cfg.epsilon ? 1.0 / s - r2 / (2.0 * s * s) : 0.0;
  }
  return out;
}

void WindowPlanConfig::validate() const {
  if (window < 1 || stride < 1) throw InvalidArgument("WindowPlanConfig: window and stride must be >= 1");
  if (!(scale_factor > 0.0 && scale_factor < 1.0)) {
    throw InvalidArgument("WindowPlanConfig: scale_factor must lie in (0, 1)");
  }
}

std::vector<std::size_t> axis_anchors(std::size_t dim, std::size_t window, std::size_t stride) {
  if (dim <= window) return {0};
  std::vector<std::size_t> anchors;
  std::size_t a = 0;
  for (; a + window <= dim; a += stride) anchors.push_back(a);
  if (anchors.back() + window < dim) anchors.push_back(dim - window);
  return anchors;
}

std::vector<WindowGeometry> plan_windows(std::size_t img_h, std::size_t img_w,
                                         const WindowPlanConfig& cfg) {
  cfg.validate();
  if (img_h < 1 || img_w < 1) throw InvalidArgument("plan_windows: empty image");
  std::vector<WindowGeometry> plan;
  double scale = 1.0;
  for (std::size_t level = 0;; ++level) {
    const auto h = static_cast<std::size_t>(std::floor(static_cast<double>(img_h) * scale));
    const auto w = static_cast<std::size_t>(std::floor(static_cast<double>(img_w) * scale));
    if (level > 0 && std::min(h, w) < cfg.min_dim_stop) break;
    if (h == 0 || w == 0) break;
    for (auto top : axis_anchors(h, cfg.window, cfg.stride)) {
      for (auto left : axis_anchors(w, cfg.window, cfg.stride)) {
        plan.push_back({level, scale, top, left, cfg.window, cfg.window, h, w, img_h, img_w});
      }
    }
    scale *= cfg.scale_factor;
  }
  return plan;
}

Point2 window_to_image(const WindowGeometry& g, Point2 local) {
  const double x_px = (static_cast<double>(g.left) + local.x * static_cast<double>(g.window_w)) / g.scale;
  const double y_px = (static_cast<double>(g.top) + local.y * static_cast<double>(g.window_h)) / g.scale;
  return {x_px / static_cast<double>(g.image_w), y_px / static_cast<double>(g.image_h)};
}

Point2 image_to_window(const WindowGeometry& g, Point2 global) {
  const double x_lvl = global.x * static_cast<double>(g.image_w) * g.scale;
  const double y_lvl = global.y * static_cast<double>(g.image_h) * g.scale;
  return {(x_lvl - static_cast<double>(g.left)) / static_cast<double>(g.window_w),
          (y_lvl - static_cast<double>(g.top)) / static_cast<double>(g.window_h)};
}

LandmarkSet pool_predictions(const std::vector<WindowPrediction>& windows) {
  if (windows.empty()) throw InvalidArgument("pool_predictions: no windows");
  const std::size_t L = windows.front().points.size();
  for (const auto& w : windows) {
    if (w.points.size() != L || w.sigmas.size() != L) {
      throw DimensionMismatch("pool_predictions: windows carry different landmark counts");
    }
  }
  LandmarkSet out;
  out.points.resize(L);
  out.sigmas = std::vector<double>(L);
  for (std::size_t l = 0; l < L; ++l) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < windows.size(); ++k) {
      if (windows[k].sigmas[l] < windows[best].sigmas[l]) best = k;
    }
    out.points[l] = window_to_image(windows[best].geometry, windows[best].points[l]);
    (*out.sigmas)[l] = windows[best].sigmas[l];
  }
  return out;
}

bool confidence_filter(const LandmarkSet& pred, double sigma_bar) {
  if (!pred.sigmas) throw InvalidArgument("confidence_filter: prediction has no sigmas");
  if (pred.sigmas->empty()) throw InvalidArgument("confidence_filter: empty prediction");
  double sum = 0.0;
  for (double s : *pred.sigmas) sum += s;
  return sum / static_cast<double>(pred.sigmas->size()) < sigma_bar;
}

}  // namespace thermoloss
