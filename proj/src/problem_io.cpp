#include "thermoloss/problem_io.hpp"

#include <algorithm>

#include "thermoloss/error.hpp"
#include "thermoloss/pgm.hpp"

namespace thermoloss {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::string> sorted_pgm_stems(const fs::path& dir) {
  std::vector<std::string> stems;
  if (!fs::is_directory(dir)) return stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
      stems.push_back(entry.path().stem().string());
    }
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

fs::path require(const fs::path& p) {
  if (!fs::exists(p)) throw ParseError(ParseErrorKind::kIo, "missing file " + p.string());
  return p;
}

}  // namespace

ProblemBundle load_problem(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw ParseError(ParseErrorKind::kIo, "problem directory not found: " + dir.string());
  }
  ProblemBundle b;
  for (const auto& stem : sorted_pgm_stems(dir / "paired")) {
    if (!ends_with(stem, "_gen")) continue;
    const std::string name = stem.substr(0, stem.size() - 4);
    PairedExample ex{load_thermal_pgm(dir / "paired" / (name + "_gen.pgm")),
                     load_thermal_pgm(require(dir / "paired" / (name + "_tgt.pgm")))};
    b.problem.paired.push_back(std::move(ex));
    b.paired_names.push_back(name);
  }
  for (const auto& stem : sorted_pgm_stems(dir / "unpaired")) {
    if (ends_with(stem, "_mask")) continue;
    GeneratedImage g{load_thermal_pgm(dir / "unpaired" / (stem + ".pgm")),
                     load_mask_pgm(require(dir / "unpaired" / (stem + "_mask.pgm")))};
    if (g.mask.height != g.image.height() || g.mask.width != g.image.width()) {
      throw DimensionMismatch("problem: mask shape differs for " + stem);
    }
    b.problem.unpaired.push_back(std::move(g));
    b.unpaired_names.push_back(stem);
  }
  for (const auto& stem : sorted_pgm_stems(dir / "real")) {
    b.problem.real.push_back(load_thermal_pgm(dir / "real" / (stem + ".pgm")));
    b.real_names.push_back(stem);
  }
  if (b.problem.paired.empty() && b.problem.unpaired.empty()) {
    throw ParseError(ParseErrorKind::kIo, "problem has no paired or unpaired images: " + dir.string());
  }
  if (fs::exists(dir / "config.json")) {
    try {
      b.config = json::parse(read_file_bytes(dir / "config.json"));
    } catch (const json::exception& e) {
      throw ParseError(ParseErrorKind::kBadValue, std::string("config.json: ") + e.what());
    }
  }
  return b;
}

void save_problem(const ProblemBundle& bundle, const fs::path& dir) {
  const auto& p = bundle.problem;
  if (bundle.paired_names.size() != p.paired.size() ||
      bundle.unpaired_names.size() != p.unpaired.size() ||
      bundle.real_names.size() != p.real.size()) {
    throw InvalidArgument("save_problem: names do not match images");
  }
  fs::create_directories(dir);
  if (!p.paired.empty()) fs::create_directories(dir / "paired");
  if (!p.unpaired.empty()) fs::create_directories(dir / "unpaired");
  if (!p.real.empty()) fs::create_directories(dir / "real");
  for (std::size_t i = 0; i < p.paired.size(); ++i) {
    save_thermal_pgm(p.paired[i].gen, dir / "paired" / (bundle.paired_names[i] + "_gen.pgm"));
    save_thermal_pgm(p.paired[i].target, dir / "paired" / (bundle.paired_names[i] + "_tgt.pgm"));
  }
  for (std::size_t i = 0; i < p.unpaired.size(); ++i) {
    save_thermal_pgm(p.unpaired[i].image, dir / "unpaired" / (bundle.unpaired_names[i] + ".pgm"));
    save_mask_pgm(p.unpaired[i].mask, dir / "unpaired" / (bundle.unpaired_names[i] + "_mask.pgm"));
  }
  for (std::size_t i = 0; i < p.real.size(); ++i) {
    save_thermal_pgm(p.real[i], dir / "real" / (bundle.real_names[i] + ".pgm"));
  }
  write_file_bytes(dir / "config.json", bundle.config.dump(2) + "\n");
}

LossConfig loss_config_from_json(const json& j, LossConfig cfg) {
  try {
    if (j.contains("lambda_w")) cfg.lambda_w = j.at("lambda_w").get<double>();
    if (j.contains("lambda_r")) cfg.lambda_r = j.at("lambda_r").get<double>();
    if (j.contains("mse_dim_norm")) cfg.mse_dim_norm = j.at("mse_dim_norm").get<double>();
    if (j.contains("include_background")) {
      cfg.include_background = j.at("include_background").get<bool>();
    }
    if (j.contains("profile")) {
      const auto& p = j.at("profile");
      cfg.profile = p.is_string() ? ReferenceTemperatureProfile::by_name(p.get<std::string>())
                                  : ReferenceTemperatureProfile::from_json_text(p.dump());
    }
    if (j.contains("backend")) {
      const auto name = j.at("backend").get<std::string>();
      if (name == "sinkhorn") {
        cfg.backend = OtBackend::kSinkhorn;
      } else if (name == "exact") {
        cfg.backend = OtBackend::kExact;
      } else {
        throw InvalidArgument("config: backend must be sinkhorn or exact");
      }
    }
    if (j.contains("patch")) {
      const auto& p = j.at("patch");
      auto& pc = cfg.patch_cfg;
      pc.patch_size = p.value("patch_size", pc.patch_size);
      pc.stride = p.value("stride", pc.stride);
      pc.scales = p.value("scales", pc.scales);
      pc.scale_factor = p.value("scale_factor", pc.scale_factor);
      pc.max_patches_per_side = p.value("max_patches_per_side", pc.max_patches_per_side);
      pc.seed = p.value("seed", pc.seed);
    }
    if (j.contains("sinkhorn")) {
      const auto& s = j.at("sinkhorn");
      auto& sc = cfg.sink_cfg;
      sc.lambda_e = s.value("lambda_e", sc.lambda_e);
      sc.tolerance = s.value("tolerance", sc.tolerance);
      sc.max_iters = s.value("max_iters", sc.max_iters);
      sc.anneal = s.value("anneal", sc.anneal);
      sc.stage_tolerance = s.value("stage_tolerance", sc.stage_tolerance);
    }
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::kBadValue, std::string("loss config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json loss_config_to_json(const LossConfig& cfg) {
  const auto& pc = cfg.patch_cfg;
  const auto& sc = cfg.sink_cfg;
  return {
      {"lambda_w", cfg.lambda_w},
      {"lambda_r", cfg.lambda_r},
      {"mse_dim_norm", cfg.mse_dim_norm},
      {"profile", json::parse(cfg.profile.to_json_text())},
      {"include_background", cfg.include_background},
      {"backend", cfg.backend == OtBackend::kSinkhorn ? "sinkhorn" : "exact"},
      {"patch",
       {{"patch_size", pc.patch_size},
        {"stride", pc.stride},
        {"scales", pc.scales},
        {"scale_factor", pc.scale_factor},
        {"max_patches_per_side", pc.max_patches_per_side},
        {"seed", pc.seed}}},
      {"sinkhorn",
       {{"lambda_e", sc.lambda_e},
        {"tolerance", sc.tolerance},
        {"max_iters", sc.max_iters},
        {"anneal", sc.anneal},
        {"stage_tolerance", sc.stage_tolerance}}},
  };
}

json breakdown_to_json(const LossBreakdown& b) {
  return {{"mse", b.mse},
          {"patch_w", b.patch_w},
          {"region", b.region},
          {"weighted_patch_w", b.weighted_patch_w},
          {"weighted_region", b.weighted_region},
          {"total", b.total}};
}

}  // namespace thermoloss
