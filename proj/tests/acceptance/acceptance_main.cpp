// Acceptance harness: one PASS/FAIL line per criterion. With arguments, runs
// only the listed criterion numbers. Exit status is 0 iff every run passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "support/synthetic.hpp"
#include "thermoloss/composite_loss.hpp"
#include "thermoloss/error.hpp"
#include "thermoloss/label_adaptation.hpp"
#include "thermoloss/landmark_io.hpp"
#include "thermoloss/landmark_nll.hpp"
#include "thermoloss/metrics_eval.hpp"
#include "thermoloss/ot.hpp"
#include "thermoloss/patch_wasserstein.hpp"
#include "thermoloss/pgm.hpp"
#include "thermoloss/problem_io.hpp"
#include "thermoloss/region_regularizer.hpp"
#include "thermoloss/rng.hpp"

namespace fs = std::filesystem;
using namespace thermoloss;
using testing::central_differences;
using testing::max_relative_error;
using testing::random_points;

namespace {

const std::string kData = THERMOLOSS_DATA_DIR;
const std::string kCli = THERMOLOSS_CLI;

// Collects failed checks for one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return failed_ == 0; }
  std::string summary() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < notes_.size(); ++i) os << (i ? "; " : "") << notes_[i];
    if (failed_) {
      os << (notes_.empty() ? "" : "; ") << failed_ << " failed check(s):";
      for (const auto& f : failures_) os << " [" << f << "]";
    }
    return os.str();
  }

 private:
  std::size_t failed_ = 0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

ThermalImage random_image(Rng& rng, std::size_t h, std::size_t w, double lo = 0.0,
                          double hi = 1.0) {
  ThermalImage img(h, w);
  for (auto& v : img.pixels.values) v = rng.uniform(lo, hi);
  return img;
}

SegmentationMask random_mask(Rng& rng, std::size_t h, std::size_t w, bool allow_background) {
  SegmentationMask m(h, w);
  const std::size_t lo = allow_background ? 0 : 1;
  for (auto& l : m.labels) l = static_cast<std::uint8_t>(lo + rng.below(kNumRegions - lo));
  return m;
}

// ---------------------------------------------------------------------------

void criterion_ot(Check& c) {
  Rng rng(101);
  const std::size_t dims[] = {1, 2, 8};
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(5);
    const std::size_t d = dims[rng.below(3)];
    const auto x = random_points(rng, n, d), y = random_points(rng, n, d);
    const double oracle = testing::brute_force_w2(x, y);
    const auto mu = EmpiricalMeasure::from_points(x), nu = EmpiricalMeasure::from_points(y);
    const double exact = exact_w2_squared(mu, nu).cost;
    const auto res = sinkhorn(mu, nu);
    const double rel = std::abs(res.cost - exact) / exact;
    worst = std::max(worst, rel);
    c.expect(res.converged, "trial " + std::to_string(trial) + " did not converge");
    c.expect(rel <= 1e-3, "trial " + std::to_string(trial) + " rel err " + fmt(rel));
    c.expect(std::abs(exact - oracle) <= 1e-12 * std::max(1.0, oracle),
             "trial " + std::to_string(trial) + " assignment differs from enumeration");
  }
  c.note("max rel err " + fmt(worst) + " (<= 1e-3)");
}

void criterion_gradients(Check& c) {
  // Entropic OT with respect to source support points.
  {
    Rng rng(201);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const std::size_t n = 3 + rng.below(3), d = 1 + rng.below(3);
      const auto xs = random_points(rng, n, d);
      const auto nu = EmpiricalMeasure::from_points(random_points(rng, n, d));
      std::vector<double> flat;
      for (const auto& p : xs) flat.insert(flat.end(), p.begin(), p.end());
      const EmpiricalMeasure mu(d, flat);
      const auto analytic = sinkhorn_grad_source(mu, nu, sinkhorn(mu, nu).plan);
      const auto numeric = central_differences(
          [&](const std::vector<double>& v) { return sinkhorn(EmpiricalMeasure(d, v), nu).cost; },
          flat, 1e-5);
      worst = std::max(worst, max_relative_error(analytic, numeric));
    }
    c.expect(worst <= 1e-3, "OT support rel err " + fmt(worst));
    c.note("ot " + fmt(worst));
  }
  // Patch loss, 16x16, one scale, four patches per side.
  {
    Rng rng(202);
    const auto gen = random_image(rng, 16, 16, 0.1, 0.9);
    const auto real = random_image(rng, 16, 16, 0.1, 0.9);
    PatchConfig cfg;
    cfg.scales = 1;
    cfg.max_patches_per_side = 4;
    const SegmentationMask full(16, 16, 1);
    const auto res = patch_w_loss({{gen, full}}, {real}, cfg, SinkhornConfig{});
    const auto numeric = central_differences(
        [&](const std::vector<double>& v) {
          ThermalImage g = gen;
          g.pixels.values = v;
          return patch_w_loss({{g, full}}, {real}, cfg, SinkhornConfig{}).value;
        },
        gen.pixels.values, 1e-4);
    const double err = max_relative_error(res.grads[0].values, numeric);
    c.expect(res.scales[0].subsample == 4, "patch subsample is not 4");
    c.expect(err <= 1e-3, "patch rel err " + fmt(err));
    c.note("patch " + fmt(err));
  }
  // Region regularizer.
  {
    Rng rng(203);
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
      const auto img = random_image(rng, 12, 12);
      const auto mask = random_mask(rng, 12, 12, true);
      const auto prof = trial % 2 ? ReferenceTemperatureProfile::warm()
                                  : ReferenceTemperatureProfile::cold();
      const auto res = region_reg(img, mask, prof);
      const auto numeric = central_differences(
          [&](const std::vector<double>& v) {
            ThermalImage g = img;
            g.pixels.values = v;
            return region_reg(g, mask, prof).value;
          },
          img.pixels.values, 1e-5);
      worst = std::max(worst, max_relative_error(res.grad.values, numeric));
    }
    c.expect(worst <= 1e-3, "region rel err " + fmt(worst));
    c.note("region " + fmt(worst));
  }
  // Gaussian NLL in mu and sigma^2.
  {
    Rng rng(204);
    LandmarkSet mu, y;
    std::vector<double> s2;
    for (int l = 0; l < 10; ++l) {
      mu.points.push_back({rng.uniform(), rng.uniform()});
      y.points.push_back({rng.uniform(), rng.uniform()});
      s2.push_back(rng.uniform(0.05, 0.5));
    }
    const auto res = gaussian_nll(mu, s2, y);
    std::vector<double> flat, g;
    for (std::size_t l = 0; l < mu.size(); ++l) {
      flat.insert(flat.end(), {mu.points[l].x, mu.points[l].y});
      g.insert(g.end(), {res.grad_mu[l].x, res.grad_mu[l].y});
    }
    const auto num_mu = central_differences(
        [&](const std::vector<double>& v) {
          LandmarkSet m;
          for (std::size_t l = 0; l < v.size() / 2; ++l) m.points.push_back({v[2 * l], v[2 * l + 1]});
          return gaussian_nll(m, s2, y).value;
        },
        flat, 1e-6);
    const auto num_s2 = central_differences(
        [&](const std::vector<double>& v) { return gaussian_nll(mu, v, y).value; }, s2, 1e-6);
    const double e_mu = max_relative_error(g, num_mu);
    const double e_s2 = max_relative_error(res.grad_sigma2, num_s2);
    c.expect(e_mu <= 1e-4, "nll mu rel err " + fmt(e_mu));
    c.expect(e_s2 <= 1e-4, "nll sigma2 rel err " + fmt(e_s2));
    c.note("nll " + fmt(std::max(e_mu, e_s2)));
  }
  // Adapter parameters.
  {
    const auto mlp = AdapterMLP::with_widths({9, 12, 12, 12, 12, 6}, 205);
    Rng rng(205);
    Eigen::MatrixXd X(9, 8), Y(6, 8);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1, 1);
    for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] = rng.uniform(-1, 1) + (i % 2 ? 3.0 : -3.0);
    AdapterGradients grads;
    adapter_l1_loss(mlp, X, Y, &grads);
    const auto numeric = central_differences(
        [&](const std::vector<double>& p) {
          AdapterMLP m = mlp;
          m.set_flat_parameters(p);
          return adapter_l1_loss(m, X, Y, nullptr);
        },
        mlp.flat_parameters(), 1e-6);
    const double err = max_relative_error(grads.flat(), numeric);
    c.expect(err <= 1e-4, "adapter rel err " + fmt(err));
    c.note("adapter " + fmt(err));
  }
}

void criterion_ranges(Check& c) {
  Rng rng(301);
  const SinkhornConfig sc;
  double max_mse = 0.0, max_region = 0.0, max_patch_ratio = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t h = 16 + rng.below(17), w = 16 + rng.below(17);
    // Every fourth trial uses binary images, which push each term toward its
    // upper end.
    const bool binary = trial % 4 == 0;
    auto draw = [&](ThermalImage img) {
      for (auto& v : img.pixels.values) v = binary ? static_cast<double>(rng.below(2)) : rng.uniform();
      return img;
    };
    const auto gen = draw(ThermalImage(h, w));
    const auto tgt = draw(ThermalImage(h, w));
    const double mse = paired_mse(gen, tgt, static_cast<double>(h * w)).value;
    c.expect(mse >= 0.0 && mse <= 1.0, "mse " + fmt(mse));
    max_mse = std::max(max_mse, mse);

    const auto mask = random_mask(rng, h, w, trial % 2 == 0);
    const auto prof = trial % 3 ? ReferenceTemperatureProfile::cold()
                                : ReferenceTemperatureProfile::warm();
    const double region = region_reg(gen, mask, prof).value;
    c.expect(region >= 0.0 && region <= 1.0, "region " + fmt(region));
    max_region = std::max(max_region, region);

    PatchConfig pc;
    pc.seed = static_cast<std::uint64_t>(trial);
    const SegmentationMask gen_mask = random_mask(rng, h, w, false);
    const auto real = draw(ThermalImage(h, w));
    try {
      const auto res = patch_w_loss({{gen, gen_mask}}, {real}, pc, sc, OtBackend::kExact);
      std::size_t n = 1;
      for (const auto& s : res.scales) n = std::max(n, s.subsample);
      const double term = kPatchNormalization * res.value;
      const double bound = 1.0 + 5.0 * sc.lambda_e * std::log(static_cast<double>(n));
      c.expect(term >= 0.0 && term <= bound, "patch term " + fmt(term));
      max_patch_ratio = std::max(max_patch_ratio, term / bound);
    } catch (const InvalidArgument&) {
      // A binary real image can lose every level-0 patch to the all-black
      // rule; that is an input error, not a range violation.
      c.expect(binary, "patch loss rejected a continuous-valued trial");
    }
  }
  c.note("max mse " + fmt(max_mse) + ", max region " + fmt(max_region) +
         ", max patch/bound " + fmt(max_patch_ratio));
}

void criterion_nll(Check& c) {
  Rng rng(401);
  LandmarkSet y;
  for (int l = 0; l < 68; ++l) y.points.push_back({rng.uniform(), rng.uniform()});
  const double v = gaussian_nll(y, std::vector<double>(68, 1.0), y).value;
  const double expected = 68.0 * std::log(2.0 * std::numbers::pi);
  c.expect(std::abs(v - expected) <= 1e-12, "zero residual value off by " + fmt(v - expected));

  for (int trial = 0; trial < 20; ++trial) {
    LandmarkSet mu, t;
    mu.points = {{rng.uniform(), rng.uniform()}};
    t.points = {{rng.uniform(), rng.uniform()}};
    const double dx = mu.points[0].x - t.points[0].x, dy = mu.points[0].y - t.points[0].y;
    const double star = (dx * dx + dy * dy) / 2.0;
    if (star <= 1e-4) continue;
    const double below = gaussian_nll(mu, std::vector<double>{star * 0.99}, t).grad_sigma2[0];
    const double at = gaussian_nll(mu, std::vector<double>{star}, t).grad_sigma2[0];
    const double above = gaussian_nll(mu, std::vector<double>{star * 1.01}, t).grad_sigma2[0];
    c.expect(below < 0.0 && above > 0.0, "no sign change around r^2/2");
    c.expect(std::abs(at) <= 1e-9 / star, "gradient at r^2/2 is " + fmt(at));
  }

  NllConfig cfg;
  LandmarkSet mu, t;
  mu.points = {{0.001, 0.0}};
  t.points = {{0.0, 0.0}};
  const auto half = gaussian_nll(mu, std::vector<double>{cfg.epsilon / 2.0}, t, cfg);
  const auto eps = gaussian_nll(mu, std::vector<double>{cfg.epsilon}, t, cfg);
  const double clipped = std::log(2.0 * std::numbers::pi * cfg.epsilon) + 1e-6 / (2.0 * cfg.epsilon);
  c.expect(half.value == eps.value, "value at eps/2 differs from value at eps");
  c.expect(half.value == clipped, "clipped value not exact");
  c.expect(half.grad_sigma2[0] == 0.0, "sigma2 gradient nonzero under the floor");
  c.expect(half.grad_mu[0].x == 0.001 / cfg.epsilon, "mu gradient not using the floor");
  c.note("zero-residual err " + fmt(std::abs(v - expected)));
}

void criterion_toy(Check& c) {
  const auto bundle = load_problem(kData + "/problems/toy16");
  const LossConfig cfg = loss_config_from_json(bundle.config);
  c.expect(cfg.lambda_w > 0 && cfg.lambda_r > 0 && !bundle.problem.paired.empty(),
           "toy16 does not exercise all three terms");
  const auto res = toy_thermalize(bundle.problem, cfg, 100, 0.4 * cfg.mse_dim_norm);
  c.expect(!res.aborted, "toy16 aborted: " + res.message);
  const double ratio = res.trace.back() / res.trace.front();
  c.expect(ratio < 0.5, "toy16 final/initial " + fmt(ratio));
  const auto again = toy_thermalize(bundle.problem, cfg, 100, 0.4 * cfg.mse_dim_norm);
  c.expect(again.trace == res.trace, "toy16 trace not reproducible");

  const auto paired = load_problem(kData + "/problems/paired8");
  const LossConfig pcfg = loss_config_from_json(paired.config);
  c.expect(pcfg.lambda_w == 0.0 && pcfg.lambda_r == 0.0, "paired8 is not paired-only");
  const auto pres = toy_thermalize(paired.problem, pcfg, 500, 0.4 * pcfg.mse_dim_norm);
  std::size_t hit = pres.trace.size();
  for (std::size_t i = 0; i < pres.trace.size(); ++i) {
    if (pres.trace[i] < 1e-6) {
      hit = i;
      break;
    }
  }
  c.expect(hit < pres.trace.size(), "paired-only MSE " + fmt(pres.trace.back()) + " after 500 steps");
  c.note("toy16 final/initial " + fmt(ratio) + ", paired-only below 1e-6 at step " +
         std::to_string(hit));
}

void criterion_adapter(Check& c) {
  const auto train = testing::synthetic_adapt_samples(1000, 601);
  const auto held = testing::synthetic_adapt_samples(200, 602);
  const AdaptTrainConfig cfg;
  const auto t0 = std::chrono::steady_clock::now();
  const auto a = adapter_train(train, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double l1 = adapter_mean_l1(a.model, held);
  c.expect(l1 < 1e-2, "held-out L1 " + fmt(l1));
  c.expect(secs < 300.0, "training took " + fmt(secs) + " s");
  const auto b = adapter_train(train, cfg);
  c.expect(a.loss_trace == b.loss_trace, "loss trace differs between runs");
  c.expect(a.model.flat_parameters() == b.model.flat_parameters(), "weights differ between runs");
  c.note("held-out L1 " + fmt(l1) + ", one training run " + fmt(secs) + " s, " +
         std::to_string(a.loss_trace.size()) + "-epoch trace identical");
}

LandmarkSet box(double x0, double y0, double w, double h, ImageDims dims) {
  const double W = static_cast<double>(dims.width), H = static_cast<double>(dims.height);
  LandmarkSet s;
  s.points = {{x0 / W, y0 / H}, {(x0 + w) / W, y0 / H}, {x0 / W, (y0 + h) / H},
              {(x0 + w) / W, (y0 + h) / H}, {(x0 + w / 2) / W, (y0 + h / 2) / H}};
  return s;
}

LandmarkSet shift(LandmarkSet s, double dx, double dy, ImageDims dims) {
  for (auto& p : s.points) {
    p.x += dx / static_cast<double>(dims.width);
    p.y += dy / static_cast<double>(dims.height);
  }
  return s;
}

void criterion_metrics(Check& c) {
  // 100 x 200 px box, every landmark off by (3, 4) px.
  const ImageDims d0{500, 400};
  const auto gt0 = box(50, 60, 100, 200, d0);
  const double v = nme(shift(gt0, 3, 4, d0), gt0, d0);
  c.expect(std::abs(v - 5.0 / 150.0) <= 1e-15, "NME_wh " + fmt(v));

  const ImageDims dims{1000, 1000};
  const auto gt = box(100, 100, 100, 200, dims);
  std::vector<EvalRecord> recs{{"missing", std::nullopt, gt, dims}};
  for (int k = 1; k <= 3; ++k) {
    auto pred = shift(gt, 9.0 * k, 12.0 * k, dims);
    pred.sigmas = std::vector<double>(pred.size(), 0.001 * k);
    recs.push_back({"f" + std::to_string(k), pred, gt, dims});
  }
  const auto r25 = evaluate_dataset(recs, std::nullopt);
  c.expect(r25.failure_rate == 0.25, "failure rate " + fmt(r25.failure_rate) + " != 0.25");
  const auto r50 = evaluate_dataset(recs, 0.0025);
  c.expect(r50.failure_rate == 0.5, "failure rate " + fmt(r50.failure_rate) + " != 0.5");
  // Mean sigma equal to the threshold is rejected; just above it passes.
  const auto edge = evaluate_dataset(recs, 0.002);
  c.expect(edge.frames[2].status == FrameStatus::kRejected, "sigma == threshold accepted");
  const auto above = evaluate_dataset(recs, std::nextafter(0.002, 1.0));
  c.expect(above.frames[2].status == FrameStatus::kEvaluated, "sigma just below threshold rejected");

  const auto bundled = evaluate_dataset(
      records_from_jsonl(read_file_bytes(kData + "/examples/manifest4.jsonl")), std::nullopt);
  c.expect(bundled.failure_rate == 0.25, "bundled manifest failure rate " + fmt(bundled.failure_rate));

  Rng rng(701);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ImageDims di{200 + rng.below(800), 200 + rng.below(800)};
    LandmarkSet g, p;
    for (int l = 0; l < 68; ++l) {
      g.points.push_back({rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)});
      p.points.push_back({g.points.back().x + rng.uniform(-0.02, 0.02),
                          g.points.back().y + rng.uniform(-0.02, 0.02)});
    }
    const double base = nme(p, g, di);
    const double k = rng.uniform(0.5, 2.0), tx = rng.uniform(-50, 50), ty = rng.uniform(-50, 50);
    const ImageDims big{di.width * 4, di.height * 4};
    auto move = [&](const LandmarkSet& s) {
      LandmarkSet out;
      for (const auto& q : s.points) {
        out.points.push_back({(q.x * di.width * k + tx) / big.width,
                              (q.y * di.height * k + ty) / big.height});
      }
      return out;
    };
    worst = std::max(worst, std::abs(nme(move(p), move(g), big) - base));
  }
  c.expect(worst <= 1e-9, "invariance error " + fmt(worst));
  c.note("NME_wh err " + fmt(std::abs(v - 5.0 / 150.0)) + ", invariance err " + fmt(worst));
}

void criterion_windows(Check& c) {
  const auto single = plan_windows(224, 224);
  c.expect(single.size() == 1, "224x224 planned " + std::to_string(single.size()) + " windows");

  Rng rng(801);
  std::size_t total_windows = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = 224 + rng.below(577), w = 224 + rng.below(577);
    const auto plan = plan_windows(h, w);
    total_windows += plan.size();
    std::size_t levels = 0;
    for (const auto& g : plan) levels = std::max(levels, g.scale_index + 1);
    for (std::size_t lvl = 0; lvl < levels; ++lvl) {
      std::size_t lh = 0, lw = 0;
      for (const auto& g : plan) {
        if (g.scale_index == lvl) {
          lh = g.level_h;
          lw = g.level_w;
        }
      }
      std::vector<char> cov(lh * lw, 0);
      for (const auto& g : plan) {
        if (g.scale_index != lvl) continue;
        for (std::size_t r = g.top; r < std::min(lh, g.top + g.window_h); ++r)
          for (std::size_t col = g.left; col < std::min(lw, g.left + g.window_w); ++col)
            cov[r * lw + col] = 1;
      }
      const bool covered = std::all_of(cov.begin(), cov.end(), [](char v) { return v != 0; });
      c.expect(covered, std::to_string(h) + "x" + std::to_string(w) + " level " +
                            std::to_string(lvl) + " not covered");
    }

    std::vector<WindowPrediction> wins;
    for (int k = 0; k < 8; ++k) {
      WindowPrediction wp{plan[rng.below(plan.size())], {}, {}};
      for (int l = 0; l < 5; ++l) {
        wp.points.push_back({rng.uniform(), rng.uniform()});
        wp.sigmas.push_back(rng.uniform(0.001, 0.01));
      }
      wins.push_back(wp);
    }
    auto doubled = wins;
    doubled.insert(doubled.end(), wins.begin(), wins.end());
    const auto once = pool_predictions(wins), twice = pool_predictions(doubled);
    bool same = true;
    for (std::size_t l = 0; l < once.size(); ++l) {
      same = same && once.points[l].x == twice.points[l].x && once.points[l].y == twice.points[l].y &&
             (*once.sigmas)[l] == (*twice.sigmas)[l];
    }
    c.expect(same, "pooling not idempotent");

    double worst = 0.0;
    for (const auto& g : plan) {
      const Point2 local{rng.uniform(), rng.uniform()};
      const auto back = image_to_window(g, window_to_image(g, local));
      worst = std::max({worst, std::abs(back.x - local.x), std::abs(back.y - local.y)});
    }
    c.expect(worst <= 1e-9, "inverse transform error " + fmt(worst));
  }
  c.note("50 sizes, " + std::to_string(total_windows) + " windows");
}

// ---------------------------------------------------------------------------
// Determinism of the command-line tool.

std::string hash_path(const fs::path& p) {
  std::vector<fs::path> files;
  if (fs::is_directory(p)) {
    for (const auto& e : fs::recursive_directory_iterator(p))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(p);
  }
  std::ostringstream os;
  for (const auto& f : files) {
    os << fs::relative(f, fs::is_directory(p) ? p : p.parent_path()).string() << ':'
       << std::hash<std::string>{}(read_file_bytes(f)) << ';';
  }
  return os.str();
}

void criterion_cli(Check& c) {
  const fs::path work = fs::temp_directory_path() / "thermoloss_acceptance_cli";
  fs::remove_all(work);
  fs::create_directories(work);
  const std::string ex = kData + "/examples/";

  // Small training set for the adapter commands.
  {
    std::string jsonl;
    for (const auto& s : testing::synthetic_adapt_samples(20, 901)) {
      nlohmann::json j = {{"pred", landmarks_to_json(s.pred)},
                          {"gt", landmarks_to_json(s.gt)},
                          {"resize", s.resize}};
      jsonl += j.dump() + "\n";
    }
    write_file_bytes(work / "adapt.jsonl", jsonl);
    const auto first = testing::synthetic_adapt_samples(1, 902).front().pred;
    write_file_bytes(work / "pred.json", landmarks_to_json(first).dump());
  }
  const std::string w = work.string() + "/";
  const std::string fixed_model = w + "fixed_model.bin";
  const std::string real0 =
      kData + "/problems/toy16/real/" + fs::directory_iterator(kData + "/problems/toy16/real")->path().filename().string();

  struct Cmd {
    std::string name;
    std::string args;
    std::string output;  // file or directory to hash
  };
  const std::vector<Cmd> cmds = {
      {"ot exact", "ot exact --mu " + ex + "mu4.json --nu " + ex + "nu4.json --out " + w + "o.json", w + "o.json"},
      {"ot sinkhorn", "ot sinkhorn --mu " + ex + "mu4.json --nu " + ex + "nu4.json --out " + w + "o.json", w + "o.json"},
      {"loss eval", "loss eval --problem " + kData + "/problems/toy16 --grad-check --fd-coords 16 --out " + w + "o.json", w + "o.json"},
      {"toy-thermalize", "toy-thermalize --problem " + kData + "/problems/toy16 --steps 20 --seed 3 --out-dir " + w + "toy --out " + w + "toy/result.json", w + "toy"},
      {"landmarks pool", "landmarks pool --windows " + ex + "windows.json --out " + w + "o.json", w + "o.json"},
      {"landmarks nll", "landmarks nll --mu " + ex + "gt3.json --gt " + ex + "gt3.json --sigma2 " + ex + "sigma2_ones.json --out " + w + "o.json", w + "o.json"},
      {"landmarks plan", "landmarks plan --height 480 --width 640 --out " + w + "o.json", w + "o.json"},
      {"adapt train", "adapt train --data " + w + "adapt.jsonl --model-out " + w + "train/model.bin --epochs 5 --hidden 32 --seed 4 --out " + w + "train/result.json", w + "train"},
      {"adapt apply", "adapt apply --model " + fixed_model + " --pred " + w + "pred.json --out " + w + "o.json", w + "o.json"},
      {"eval nme", "eval nme --manifest " + ex + "manifest4.jsonl --sigma-bar 0.0025 --out " + w + "o.json", w + "o.json"},
      {"preprocess", "preprocess --input " + real0 + " --out-dir " + w + "pre --out " + w + "pre/result.json", w + "pre"},
  };
  // The apply command needs a model that is not rewritten between runs.
  const int prep = std::system((kCli + " adapt train --data " + w + "adapt.jsonl --model-out " +
                                fixed_model + " --epochs 3 --hidden 16 > /dev/null")
                                   .c_str());
  c.expect(prep == 0, "could not train the model used by adapt apply");

  for (const auto& cmd : cmds) {
    std::vector<std::string> hashes;
    for (int run = 0; run < 3; ++run) {
      fs::remove_all(cmd.output);
      fs::create_directories(fs::path(cmd.output).parent_path());
      if (cmd.output.find('.') == std::string::npos) fs::create_directories(cmd.output);
      const int rc = std::system((kCli + " " + cmd.args + " > /dev/null 2>&1").c_str());
      c.expect(rc == 0, cmd.name + " exited with " + std::to_string(rc));
      hashes.push_back(hash_path(cmd.output));
    }
    c.expect(hashes[0] == hashes[1] && hashes[1] == hashes[2], cmd.name + " output differs across runs");
  }
  c.note(std::to_string(cmds.size()) + " commands x 3 runs");
  fs::remove_all(work);
}

struct Criterion {
  int id;
  const char* name;
  double time_limit_s;  // 0: none
  std::function<void(Check&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "OT oracle equivalence", 10.0, criterion_ot},
      {2, "gradient suite", 60.0, criterion_gradients},
      {3, "range claims", 0.0, criterion_ranges},
      {4, "NLL analytics", 0.0, criterion_nll},
      {5, "toy thermalization", 30.0, criterion_toy},
      {6, "label adaptation recovery", 0.0, criterion_adapter},
      {7, "metrics harness", 0.0, criterion_metrics},
      {8, "window planning and pooling", 0.0, criterion_windows},
      {9, "CLI determinism", 0.0, criterion_cli},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  bool all_ok = true;
  for (const auto& crit : all) {
    if (!wanted.empty() && !wanted.count(crit.id)) continue;
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      crit.run(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (crit.time_limit_s > 0) {
      check.expect(secs < crit.time_limit_s, "took " + fmt(secs) + " s, limit " + fmt(crit.time_limit_s) + " s");
    }
    all_ok = all_ok && check.ok();
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", check.ok() ? "PASS" : "FAIL", crit.id,
                crit.name, check.summary().c_str(), secs);
    std::fflush(stdout);
  }
  return all_ok ? 0 : 1;
}
