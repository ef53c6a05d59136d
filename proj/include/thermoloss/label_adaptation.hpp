#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "thermoloss/core_types.hpp"

namespace thermoloss {

inline constexpr std::size_t kAdapterHiddenWidth = 256;
inline constexpr int kAdapterModelVersion = 1;

// Fully connected adapter from one landmark convention to another:
//   [2 * L_in + 1] -> 256 -> 256 -> 256 -> 256 -> [2 * L_out]
// ReLU on hidden layers, identity on the output. The extra input is the
// resize factor (original width / processed width).
struct AdapterMLP {
  std::vector<std::size_t> widths;
  std::vector<Eigen::MatrixXd> weights;  // layer k: widths[k+1] x widths[k]
  std::vector<Eigen::VectorXd> biases;
  std::uint64_t seed = 0;

  // Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), drawn layer by
  // layer (weights row-major, then biases) from Rng(seed).
  static AdapterMLP with_widths(std::vector<std::size_t> widths, std::uint64_t seed);
  static AdapterMLP for_conventions(std::size_t in_landmarks, std::size_t out_landmarks,
                                    std::uint64_t seed,
                                    std::size_t hidden = kAdapterHiddenWidth);

  std::size_t input_size() const { return widths.front(); }
  std::size_t output_size() const { return widths.back(); }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t parameter_count() const;

  // Layer by layer: weights row-major, then biases.
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> params);

  void validate() const;
};

// Inputs as columns (input_size x batch); returns output_size x batch.
Eigen::MatrixXd adapter_forward_batch(const AdapterMLP& mlp, const Eigen::MatrixXd& inputs);
std::vector<double> adapter_forward(const AdapterMLP& mlp, std::span<const double> input);

// Concatenated (x, y) coordinates followed by the resize factor.
std::vector<double> adapter_input(const LandmarkSet& pred, double resize);
LandmarkSet adapter_apply(const AdapterMLP& mlp, const LandmarkSet& pred, double resize);

struct AdapterGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  std::vector<double> flat() const;
};

// Mean absolute error over every output coordinate of the batch, and its
// subgradient with sign(0) = 0.
double adapter_l1_loss(const AdapterMLP& mlp, const Eigen::MatrixXd& inputs,
                       const Eigen::MatrixXd& targets, AdapterGradients* grads);

struct AdaptSample {
  LandmarkSet pred;
  double resize = 1.0;
  LandmarkSet gt;
};

struct AdaptTrainConfig {
  std::size_t epochs = 2000;
  double base_lr = 0.002;
  double warmup_fraction = 0.1;
  double initial_lr_div = 25.0;  // warmup starts at base_lr / 25
  double final_lr_div = 100.0;   // cosine decay ends at base_lr / 100
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch = 64;
  double aug_rotation_max_deg = 45.0;
  double aug_shear_max = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

// Learning rate at optimizer step t of total_steps: linear warmup over the
// first warmup_fraction of steps, cosine decay afterwards.
double one_cycle_lr(const AdaptTrainConfig& cfg, std::size_t t, std::size_t total_steps);

// Rotation by angle_rad and horizontal shear (x += shear * y), applied about
// the centroid of the predicted landmarks to both pred and gt.
AdaptSample augment_sample(const AdaptSample& s, double angle_rad, double shear);

struct AdaptTrainResult {
  AdapterMLP model;
  std::vector<double> loss_trace;  // per-epoch training MAE
};

// Adam on mini-batches in a per-epoch shuffled order drawn from
// Rng(cfg.seed); augmentation draws come from the same stream.
AdaptTrainResult adapter_train(const std::vector<AdaptSample>& samples,
                               const AdaptTrainConfig& cfg, const AdapterMLP& init);
AdaptTrainResult adapter_train(const std::vector<AdaptSample>& samples,
                               const AdaptTrainConfig& cfg);

// Unaugmented mean absolute error over all output coordinates.
double adapter_mean_l1(const AdapterMLP& mlp, const std::vector<AdaptSample>& samples);

// First line: JSON header {"format": "thermoloss-adapter", "version": 1,
// "widths": [...], "seed": s, "parameter_count": n, "config": {...}},
// then '\n', then n little-endian IEEE-754 doubles.
std::string serialize_adapter(const AdapterMLP& mlp, const AdaptTrainConfig* cfg = nullptr);
AdapterMLP deserialize_adapter(std::string_view bytes);
void save_adapter(const AdapterMLP& mlp, const std::filesystem::path& path,
                  const AdaptTrainConfig* cfg = nullptr);
AdapterMLP load_adapter(const std::filesystem::path& path);

}  // namespace thermoloss
