#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "thermoloss/composite_loss.hpp"

namespace thermoloss {

// Problem bundle layout:
//   paired/{name}_gen.pgm + paired/{name}_tgt.pgm
//   unpaired/{name}.pgm   + unpaired/{name}_mask.pgm
//   real/*.pgm
//   config.json           (optional; keys as in loss_config_to_json)
// Entries are ordered by file name.
struct ProblemBundle {
  LossProblem problem;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> paired_names;
  std::vector<std::string> unpaired_names;
  std::vector<std::string> real_names;
};

ProblemBundle load_problem(const std::filesystem::path& dir);
void save_problem(const ProblemBundle& bundle, const std::filesystem::path& dir);

// Overlays the recognised keys of `j` onto `base`:
//   lambda_w, lambda_r, mse_dim_norm, profile ("cold" | "warm" | {table}),
//   include_background, backend ("sinkhorn" | "exact"),
//   patch {patch_size, stride, scales, scale_factor, max_patches_per_side, seed},
//   sinkhorn {lambda_e, tolerance, max_iters, anneal, stage_tolerance}
LossConfig loss_config_from_json(const nlohmann::json& j, LossConfig base = {});
nlohmann::json loss_config_to_json(const LossConfig& cfg);

nlohmann::json breakdown_to_json(const LossBreakdown& b);

}  // namespace thermoloss
