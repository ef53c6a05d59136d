#include "thermoloss/patch_wasserstein.hpp"

#include <algorithm>
#include <cmath>

#include "thermoloss/error.hpp"
#include "thermoloss/rng.hpp"

namespace thermoloss {

void PatchConfig::validate() const {
  if (patch_size < 1) throw InvalidArgument("PatchConfig: patch_size must be >= 1");
  if (stride < 1 || stride > patch_size) {
    throw InvalidArgument("PatchConfig: stride must lie in [1, patch_size]");
  }
  if (scales < 1) throw InvalidArgument("PatchConfig: scales must be >= 1");
  if (!(scale_factor > 0.0 && scale_factor < 1.0)) {
    throw InvalidArgument("PatchConfig: scale_factor must lie in (0, 1)");
  }
  if (max_patches_per_side < 1) {
    throw InvalidArgument("PatchConfig: max_patches_per_side must be >= 1");
  }
}

namespace {

// Appends the retained patches of one image to coords/index.
bool append_patches(const Grid& img, const SegmentationMask* mask, const PatchConfig& cfg,
                    std::size_t image_id, std::size_t scale, std::vector<double>& coords,
                    std::vector<PatchIndex>& index) {
  const std::size_t s = cfg.patch_size;
  if (img.height < s || img.width < s) return false;
  if (mask && (mask->height != img.height || mask->width != img.width)) {
    throw DimensionMismatch("extract_patches: mask shape differs from image");
  }
  for (std::size_t top = 0; top + s <= img.height; top += cfg.stride) {
    for (std::size_t left = 0; left + s <= img.width; left += cfg.stride) {
      bool keep = true;
      if (mask) {
        for (std::size_t r = 0; r < s && keep; ++r)
          for (std::size_t c = 0; c < s && keep; ++c)
            if ((*mask)(top + r, left + c) == 0) keep = false;
      } else {
        bool all_black = true;
        for (std::size_t r = 0; r < s && all_black; ++r)
          for (std::size_t c = 0; c < s && all_black; ++c)
            if (img(top + r, left + c) != 0.0) all_black = false;
        keep = !all_black;
      }
      if (!keep) continue;
      for (std::size_t r = 0; r < s; ++r)
        for (std::size_t c = 0; c < s; ++c) coords.push_back(img(top + r, left + c));
      index.push_back({image_id, scale, top, left});
    }
  }
  return true;
}

}  // namespace

PatchMeasure extract_patches(const Grid& img, const SegmentationMask* mask,
                             const PatchConfig& cfg, std::size_t image_id,
                             std::size_t scale) {
  cfg.validate();
  std::vector<double> coords;
  PatchMeasure out;
  out.image_too_small = !append_patches(img, mask, cfg, image_id, scale, coords, out.index);
  out.measure = EmpiricalMeasure(cfg.patch_size * cfg.patch_size, std::move(coords));
  return out;
}

PatchMeasure extract_patches(const ThermalImage& img, const SegmentationMask* mask,
                             const PatchConfig& cfg) {
  return extract_patches(img.pixels, mask, cfg);
}

AxisWeights bilinear_axis_weights(std::size_t in_size, double factor) {
  if (in_size == 0) throw InvalidArgument("bilinear_axis_weights: empty axis");
  if (!(factor > 0.0 && factor < 1.0)) {
    throw InvalidArgument("bilinear_axis_weights: factor must lie in (0, 1)");
  }
  AxisWeights w;
  w.in_size = in_size;
  w.out_size = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(static_cast<double>(in_size) * factor)));
  w.taps.resize(w.out_size);
  const auto last = static_cast<long long>(in_size) - 1;
  for (std::size_t i = 0; i < w.out_size; ++i) {
    const double src = (static_cast<double>(i) + 0.5) / factor - 0.5;
    const double fl = std::floor(src);
    const double t = src - fl;
    const auto i0 = std::clamp(static_cast<long long>(fl), 0LL, last);
    const auto i1 = std::clamp(static_cast<long long>(fl) + 1, 0LL, last);
    auto& taps = w.taps[i];
    if (i0 == i1 || t == 0.0) {
      taps.emplace_back(static_cast<std::size_t>(i0), 1.0);
    } else {
      taps.emplace_back(static_cast<std::size_t>(i0), 1.0 - t);
      taps.emplace_back(static_cast<std::size_t>(i1), t);
    }
  }
  return w;
}

Grid downsample(const Grid& g, double factor) {
  const auto wr = bilinear_axis_weights(g.height, factor);
  const auto wc = bilinear_axis_weights(g.width, factor);
  Grid out(wr.out_size, wc.out_size);
  for (std::size_t r = 0; r < wr.out_size; ++r) {
    for (std::size_t c = 0; c < wc.out_size; ++c) {
      double acc = 0.0;
      for (const auto& [ri, rw] : wr.taps[r])
        for (const auto& [ci, cw] : wc.taps[c]) acc += rw * cw * g(ri, ci);
      out(r, c) = acc;
    }
  }
  return out;
}

Grid downsample_adjoint(const Grid& grad_small, std::size_t in_h, std::size_t in_w,
                        double factor) {
  const auto wr = bilinear_axis_weights(in_h, factor);
  const auto wc = bilinear_axis_weights(in_w, factor);
  if (grad_small.height != wr.out_size || grad_small.width != wc.out_size) {
    throw DimensionMismatch("downsample_adjoint: gradient shape does not match level");
  }
  Grid out(in_h, in_w);
  for (std::size_t r = 0; r < wr.out_size; ++r) {
    for (std::size_t c = 0; c < wc.out_size; ++c) {
      const double g = grad_small(r, c);
      if (g == 0.0) continue;
      for (const auto& [ri, rw] : wr.taps[r])
        for (const auto& [ci, cw] : wc.taps[c]) out(ri, ci) += rw * cw * g;
    }
  }
  return out;
}

SegmentationMask downsample_mask(const SegmentationMask& mask, double factor) {
  const auto wr = bilinear_axis_weights(mask.height, factor);
  const auto wc = bilinear_axis_weights(mask.width, factor);
  SegmentationMask out(wr.out_size, wc.out_size);
  for (std::size_t r = 0; r < wr.out_size; ++r) {
    for (std::size_t c = 0; c < wc.out_size; ++c) {
      bool background = false;
      double best_w = -1.0;
      std::uint8_t best = 0;
      for (const auto& [ri, rw] : wr.taps[r]) {
        for (const auto& [ci, cw] : wc.taps[c]) {
          const auto l = mask(ri, ci);
          if (l == 0) background = true;
          if (rw * cw > best_w) {
            best_w = rw * cw;
            best = l;
          }
        }
      }
      out(r, c) = background ? 0 : best;
    }
  }
  return out;
}

namespace {

std::vector<Grid> grid_pyramid(const Grid& g, const PatchConfig& cfg) {
  std::vector<Grid> levels{g};
  while (levels.size() < cfg.scales) {
    Grid next = downsample(levels.back(), cfg.scale_factor);
    if (next.height < cfg.patch_size || next.width < cfg.patch_size) break;
    levels.push_back(std::move(next));
  }
  return levels;
}

}  // namespace

std::vector<ThermalImage> build_pyramid(const ThermalImage& img, const PatchConfig& cfg) {
  cfg.validate();
  std::vector<ThermalImage> out;
  for (auto& g : grid_pyramid(img.pixels, cfg)) {
    ThermalImage level;
    level.pixels = std::move(g);
    level.temp_floor = img.temp_floor;
    level.temp_ceil = img.temp_ceil;
    out.push_back(std::move(level));
  }
  return out;
}

PatchLossResult patch_w_loss(const std::vector<GeneratedImage>& gen,
                             const std::vector<ThermalImage>& real,
                             const PatchConfig& cfg, const SinkhornConfig& sink_cfg,
                             OtBackend backend) {
  cfg.validate();
  if (gen.empty() || real.empty()) {
    throw InvalidArgument("patch_w_loss: need at least one generated and one real image");
  }

  std::vector<std::vector<Grid>> gen_levels;
  std::vector<std::vector<SegmentationMask>> gen_masks;
  for (const auto& gi : gen) {
    if (gi.mask.height != gi.image.height() || gi.mask.width != gi.image.width()) {
      throw DimensionMismatch("patch_w_loss: mask shape differs from image");
    }
    auto levels = grid_pyramid(gi.image.pixels, cfg);
    std::vector<SegmentationMask> masks{gi.mask};
    while (masks.size() < levels.size()) {
      masks.push_back(downsample_mask(masks.back(), cfg.scale_factor));
    }
    gen_levels.push_back(std::move(levels));
    gen_masks.push_back(std::move(masks));
  }
  std::vector<std::vector<Grid>> real_levels;
  for (const auto& ri : real) real_levels.push_back(grid_pyramid(ri.pixels, cfg));

  std::size_t num_levels = 0;
  for (const auto& l : gen_levels) num_levels = std::max(num_levels, l.size());
  for (const auto& l : real_levels) num_levels = std::max(num_levels, l.size());

  PatchLossResult result;
  std::vector<std::vector<Grid>> level_grads(gen.size());
  for (std::size_t i = 0; i < gen.size(); ++i) {
    for (const auto& g : gen_levels[i]) level_grads[i].emplace_back(g.height, g.width);
  }

  const std::size_t d = cfg.patch_size * cfg.patch_size;
  for (std::size_t s = 0; s < num_levels; ++s) {
    std::vector<double> gen_coords, real_coords;
    std::vector<PatchIndex> gen_index, real_index;
    for (std::size_t i = 0; i < gen.size(); ++i) {
      if (s < gen_levels[i].size()) {
        append_patches(gen_levels[i][s], &gen_masks[i][s], cfg, i, s, gen_coords, gen_index);
      }
    }
    for (std::size_t i = 0; i < real.size(); ++i) {
      if (s < real_levels[i].size()) {
        append_patches(real_levels[i][s], nullptr, cfg, i, s, real_coords, real_index);
      }
    }

    ScaleReport report;
    report.scale = s;
    report.gen_patches = gen_index.size();
    report.real_patches = real_index.size();
    if (gen_index.empty() || real_index.empty()) {
      if (s == 0) {
        throw InvalidArgument("patch_w_loss: no usable patches at scale 0 on one side");
      }
      report.skipped = true;
      result.scales.push_back(report);
      continue;
    }

    const std::size_t n =
        std::min({gen_index.size(), real_index.size(), cfg.max_patches_per_side});
    // Both sides draw from identically seeded streams, so equal-size patch
    // pools get the same positions.
    const std::uint64_t scale_seed = derive_seed(cfg.seed, s);
    report.gen_selected = Rng(scale_seed).sample_without_replacement(gen_index.size(), n);
    report.real_selected = Rng(scale_seed).sample_without_replacement(real_index.size(), n);
    report.subsample = n;

    std::vector<double> sub_gen(n * d), sub_real(n * d);
    for (std::size_t j = 0; j < n; ++j) {
      std::copy_n(gen_coords.begin() + static_cast<long>(report.gen_selected[j] * d), d,
                  sub_gen.begin() + static_cast<long>(j * d));
      std::copy_n(real_coords.begin() + static_cast<long>(report.real_selected[j] * d), d,
                  sub_real.begin() + static_cast<long>(j * d));
    }
    const EmpiricalMeasure mu(d, std::move(sub_gen)), nu(d, std::move(sub_real));

    TransportPlan plan;
    if (backend == OtBackend::kSinkhorn) {
      auto res = sinkhorn(mu, nu, sink_cfg);
      report.value = res.cost;
      report.converged = res.converged;
      plan = std::move(res.plan);
    } else {
      auto res = exact_w2_squared(mu, nu);
      report.value = res.cost;
      plan = std::move(res.plan);
    }
    result.value += report.value;
    result.converged = result.converged && report.converged;

    const auto grad = sinkhorn_grad_source(mu, nu, plan);
    for (std::size_t j = 0; j < n; ++j) {
      const PatchIndex& idx = gen_index[report.gen_selected[j]];
      Grid& target = level_grads[idx.image][s];
      const double* gj = grad.data() + j * d;
      for (std::size_t r = 0; r < cfg.patch_size; ++r)
        for (std::size_t c = 0; c < cfg.patch_size; ++c)
          target(idx.top + r, idx.left + c) += gj[r * cfg.patch_size + c];
    }
    result.scales.push_back(std::move(report));
  }

  for (auto& levels : level_grads) {
    for (std::size_t s = levels.size(); s-- > 1;) {
      const Grid back = downsample_adjoint(levels[s], levels[s - 1].height,
                                           levels[s - 1].width, cfg.scale_factor);
      for (std::size_t p = 0; p < back.size(); ++p) levels[s - 1].values[p] += back.values[p];
    }
    result.grads.push_back(std::move(levels.front()));
  }
  return result;
}

}  // namespace thermoloss
