// Writes the bundled data directory: reference profiles and the small loss
// problems used by the tests and the README walkthrough.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "thermoloss/pgm.hpp"
#include "thermoloss/problem_io.hpp"
#include "thermoloss/region_regularizer.hpp"
#include "thermoloss/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace thermoloss;

namespace {

// Coarse face layout on an h x w grid: background border, hair on top,
// skin oval with eyes, brows, nose and lips, neck below.
SegmentationMask face_mask(std::size_t h, std::size_t w) {
  SegmentationMask m(h, w, 0);
  const double cy = 0.45 * static_cast<double>(h), cx = 0.5 * static_cast<double>(w);
  const double ry = 0.38 * static_cast<double>(h), rx = 0.32 * static_cast<double>(w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double y = (static_cast<double>(r) + 0.5 - cy) / ry;
      const double x = (static_cast<double>(c) + 0.5 - cx) / rx;
      const double fy = (static_cast<double>(r) + 0.5) / static_cast<double>(h);
      const double fx = (static_cast<double>(c) + 0.5) / static_cast<double>(w);
      std::uint8_t l = 0;
      if (x * x + y * y <= 1.0) {
        l = 1;
        if (fy < 0.22) l = 13;
        else if (fy < 0.32 && std::abs(fx - 0.5) > 0.08) l = fx < 0.5 ? 5 : 6;
        else if (fy < 0.42 && std::abs(fx - 0.5) > 0.1) l = fx < 0.5 ? 3 : 4;
        else if (fy < 0.6 && std::abs(fx - 0.5) < 0.08) l = 2;
        else if (fy >= 0.66 && fy < 0.72 && std::abs(fx - 0.5) < 0.14) l = 10;
        else if (fy >= 0.72 && fy < 0.78 && std::abs(fx - 0.5) < 0.14) l = 11;
      } else if (fy > 0.8 && std::abs(fx - 0.5) < 0.18) {
        l = 12;
      }
      m(r, c) = l;
    }
  }
  return m;
}

ThermalImage noise_image(Rng& rng, std::size_t h, std::size_t w, double lo, double hi) {
  ThermalImage img(h, w);
  for (auto& v : img.pixels.values) v = rng.uniform(lo, hi);
  return img;
}

// Profile temperatures plus small noise; plays the role of a real capture.
ThermalImage thermal_from_mask(Rng& rng, const SegmentationMask& m,
                               const ReferenceTemperatureProfile& prof, double noise) {
  ThermalImage img(m.height, m.width);
  for (std::size_t p = 0; p < m.labels.size(); ++p) {
    const double base = prof.floor_class[m.labels[p]] ? 0.05 : prof.targets[m.labels[p]];
    img.pixels.values[p] = std::clamp(base + rng.uniform(-noise, noise), 0.0, 1.0);
  }
  return img;
}

void write_json(const fs::path& p, const json& j) {
  fs::create_directories(p.parent_path());
  write_file_bytes(p, j.dump(2) + "\n");
}

void write_profiles(const fs::path& root) {
  fs::create_directories(root / "profiles");
  for (const auto& p : {ReferenceTemperatureProfile::cold(), ReferenceTemperatureProfile::warm()}) {
    write_file_bytes(root / "profiles" / (p.name + ".json"), p.to_json_text());
  }
}

void write_toy16(const fs::path& root) {
  Rng rng(20240601);
  const auto cold = ReferenceTemperatureProfile::cold();
  ProblemBundle b;
  for (int i = 0; i < 2; ++i) {
    const auto mask = face_mask(16, 16);
    b.problem.paired.push_back(
        {noise_image(rng, 16, 16, 0.0, 1.0), thermal_from_mask(rng, mask, cold, 0.05)});
    b.paired_names.push_back("p" + std::to_string(i));
    b.problem.unpaired.push_back({noise_image(rng, 16, 16, 0.05, 0.95), mask});
    b.unpaired_names.push_back("u" + std::to_string(i));
    b.problem.real.push_back(thermal_from_mask(rng, mask, cold, 0.08));
    b.real_names.push_back("r" + std::to_string(i));
  }
  b.config = {{"mse_dim_norm", 256.0},
              {"lambda_r", 1.0},
              {"lambda_w", 0.01 * kPatchNormalization},
              {"profile", "cold"},
              {"patch", {{"scales", 5}, {"max_patches_per_side", 1024}, {"seed", 0}}}};
  save_problem(b, root / "problems" / "toy16");
}

void write_paired8(const fs::path& root) {
  Rng rng(7);
  ProblemBundle b;
  b.problem.paired.push_back({noise_image(rng, 8, 8, 0.0, 1.0), noise_image(rng, 8, 8, 0.0, 1.0)});
  b.paired_names.push_back("p0");
  b.config = {{"mse_dim_norm", 64.0}, {"lambda_w", 0.0}, {"lambda_r", 0.0}};
  save_problem(b, root / "problems" / "paired8");
}

void write_examples(const fs::path& root) {
  const fs::path ex = root / "examples";
  write_json(ex / "atom_origin.json", {{"points", {{0.0, 0.0}}}});
  write_json(ex / "atom_34.json", {{"points", {{3.0, 4.0}}}});
  Rng rng(11);
  json a = json::array(), b = json::array();
  for (int k = 0; k < 4; ++k) {
    a.push_back({rng.uniform(), rng.uniform()});
    b.push_back({rng.uniform(), rng.uniform()});
  }
  write_json(ex / "mu4.json", {{"points", a}});
  write_json(ex / "nu4.json", {{"points", b}});

  // Four frames: one missing prediction, three with NME 0.1, 0.2, 0.3
  // (ground-truth box 100 x 200 px, uniform (6, 8) px offset per 0.1).
  std::string manifest;
  const double W = 1000.0, H = 1000.0;
  const json gt_pts = {{0.1, 0.1}, {0.2, 0.3}, {0.1, 0.3}, {0.2, 0.1}};
  const json gt = {{"points", gt_pts}};
  manifest += json({{"frame", "f0"}, {"width", W}, {"height", H}, {"gt", gt}, {"pred", nullptr}}).dump() + "\n";
  for (int k = 1; k <= 3; ++k) {
    json pts = json::array();
    for (const auto& p : gt_pts) {
      pts.push_back({p[0].get<double>() + 9.0 * k / W, p[1].get<double>() + 12.0 * k / H});
    }
    json pred = {{"points", pts}, {"sigmas", json::array({0.001 * k, 0.001 * k, 0.001 * k, 0.001 * k})}};
    manifest += json({{"frame", "f" + std::to_string(k)}, {"width", W}, {"height", H},
                      {"gt", gt}, {"pred", pred}}).dump() + "\n";
  }
  write_file_bytes(ex / "manifest4.jsonl", manifest);

  json windows = {{"image_height", 400}, {"image_width", 400}, {"window", 224}, {"windows", json::array()}};
  windows["windows"].push_back({{"scale_index", 0}, {"scale", 1.0}, {"top", 0}, {"left", 0},
                                {"points", {{0.5, 0.5}, {0.25, 0.75}}}, {"sigmas", {0.01, 0.004}}});
  windows["windows"].push_back({{"scale_index", 1}, {"scale", 0.75}, {"top", 10}, {"left", 20},
                                {"points", {{0.5, 0.5}, {0.3, 0.6}}}, {"sigmas", {0.002, 0.02}}});
  write_json(ex / "windows.json", windows);

  json gt3 = {{"points", {{0.3, 0.4}, {0.5, 0.5}, {0.7, 0.4}}}};
  write_json(ex / "gt3.json", gt3);
  write_json(ex / "sigma2_ones.json", json::array({1.0, 1.0, 1.0}));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s OUTPUT_DIR\n", argv[0]);
    return 2;
  }
  const fs::path root = argv[1];
  try {
    write_profiles(root);
    write_toy16(root);
    write_paired8(root);
    write_examples(root);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
