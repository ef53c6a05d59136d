#include "thermoloss/composite_loss.hpp"

#include <algorithm>
#include <cmath>

#include "thermoloss/error.hpp"
#include "thermoloss/parallel.hpp"

namespace thermoloss {

void LossConfig::validate() const {
  if (!(lambda_w >= 0.0) || !(lambda_r >= 0.0)) {
    throw InvalidArgument("LossConfig: lambda_w and lambda_r must be >= 0");
  }
  if (!(mse_dim_norm > 0.0)) throw InvalidArgument("LossConfig: mse_dim_norm must be positive");
  profile.validate();
  patch_cfg.validate();
}

MseResult paired_mse(const ThermalImage& gen, const ThermalImage& target,
                     double mse_dim_norm) {
  if (!gen.pixels.same_shape(target.pixels)) {
    throw DimensionMismatch("paired_mse: generated and target shapes differ");
  }
  if (!(mse_dim_norm > 0.0)) throw InvalidArgument("paired_mse: mse_dim_norm must be positive");
  MseResult out;
  out.grad = Grid(gen.height(), gen.width());
  double sum = 0.0;
  for (std::size_t p = 0; p < gen.pixels.size(); ++p) {
    const double diff = gen.pixels.values[p] - target.pixels.values[p];
    sum += diff * diff;
    out.grad.values[p] = 2.0 * diff / mse_dim_norm;
  }
  out.value = sum / mse_dim_norm;
  return out;
}

LossResult rgb2thermal_loss(const LossProblem& problem, const LossConfig& cfg) {
  cfg.validate();
  if (problem.paired.empty() && problem.unpaired.empty()) {
    throw InvalidArgument("rgb2thermal_loss: need at least one paired or unpaired example");
  }
  LossResult out;

  const std::size_t N = problem.paired.size();
  if (N > 0) {
    std::vector<MseResult> terms(N);
    parallel_for(N, [&](std::size_t i) {
      terms[i] = paired_mse(problem.paired[i].gen, problem.paired[i].target, cfg.mse_dim_norm);
    });
    const double inv = 1.0 / static_cast<double>(N);
    for (auto& t : terms) {
      out.breakdown.mse += t.value;
      for (auto& g : t.grad.values) g *= inv;
      out.paired_grads.push_back(std::move(t.grad));
    }
    out.breakdown.mse *= inv;
  }

  const std::size_t M = problem.unpaired.size();
  for (const auto& u : problem.unpaired) {
    out.unpaired_grads.emplace_back(u.image.height(), u.image.width());
  }

  if (M > 0 && cfg.lambda_w > 0.0) {
    if (problem.real.empty()) {
      throw InvalidArgument("rgb2thermal_loss: patch term needs real thermal images");
    }
    auto pw = patch_w_loss(problem.unpaired, problem.real, cfg.patch_cfg, cfg.sink_cfg,
                           cfg.backend);
    out.breakdown.patch_w = pw.value;
    out.breakdown.weighted_patch_w = cfg.lambda_w * pw.value;
    out.converged = pw.converged;
    out.patch_scales = std::move(pw.scales);
    for (std::size_t i = 0; i < M; ++i) {
      auto& dst = out.unpaired_grads[i].values;
      const auto& src = pw.grads[i].values;
      for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += cfg.lambda_w * src[p];
    }
  }

  if (M > 0 && cfg.lambda_r > 0.0) {
    std::vector<RegionRegResult> terms(M);
    parallel_for(M, [&](std::size_t i) {
      terms[i] = region_reg(problem.unpaired[i].image, problem.unpaired[i].mask, cfg.profile,
                            cfg.include_background);
    });
    const double scale = cfg.lambda_r / static_cast<double>(M);
    for (std::size_t i = 0; i < M; ++i) {
      out.breakdown.region += terms[i].value;
      auto& dst = out.unpaired_grads[i].values;
      for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += scale * terms[i].grad.values[p];
    }
    out.breakdown.region /= static_cast<double>(M);
    out.breakdown.weighted_region = cfg.lambda_r * out.breakdown.region;
  }

  out.breakdown.total =
      out.breakdown.mse + out.breakdown.weighted_patch_w + out.breakdown.weighted_region;
  out.value = out.breakdown.total;
  return out;
}

namespace {

void descend(ThermalImage& img, const Grid& grad, double step_size) {
  for (std::size_t p = 0; p < img.pixels.size(); ++p) {
    img.pixels.values[p] =
        std::clamp(img.pixels.values[p] - step_size * grad.values[p], 0.0, 1.0);
  }
}

}  // namespace

ToyResult toy_thermalize(const LossProblem& init, const LossConfig& cfg, std::size_t steps,
                         double step_size) {
  if (steps < 1) throw InvalidArgument("toy_thermalize: steps must be >= 1");
  if (!(step_size > 0.0)) throw InvalidArgument("toy_thermalize: step_size must be positive");
  ToyResult out;
  out.optimized = init;
  for (std::size_t step = 0;; ++step) {
    const LossResult loss = rgb2thermal_loss(out.optimized, cfg);
    out.trace.push_back(loss.value);
    out.breakdowns.push_back(loss.breakdown);
    if (!std::isfinite(loss.value)) {
      out.aborted = true;
      out.message = "non-finite loss at step " + std::to_string(step);
      return out;
    }
    if (step == steps) break;
    for (std::size_t i = 0; i < out.optimized.paired.size(); ++i) {
      descend(out.optimized.paired[i].gen, loss.paired_grads[i], step_size);
    }
    for (std::size_t i = 0; i < out.optimized.unpaired.size(); ++i) {
      descend(out.optimized.unpaired[i].image, loss.unpaired_grads[i], step_size);
    }
  }
  return out;
}

}  // namespace thermoloss
