#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace thermoloss {

// K points in R^d with uniform weights 1/K, stored row-major.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  EmpiricalMeasure(std::size_t dim, std::vector<double> coords);
  static EmpiricalMeasure from_points(const std::vector<std::vector<double>>& points);

  std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return size() == 0; }
  std::span<const double> point(std::size_t k) const {
    return {coords_.data() + k * dim_, dim_};
  }
  const std::vector<double>& coords() const noexcept { return coords_; }

  EmpiricalMeasure translated(std::span<const double> shift) const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

// Non-negative K x L coupling, row-major.
struct TransportPlan {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> entries;

  double operator()(std::size_t k, std::size_t l) const { return entries[k * cols + l]; }
  double& operator()(std::size_t k, std::size_t l) { return entries[k * cols + l]; }

  // max(|row_k - 1/K|, |col_l - 1/L|) over all rows and columns.
  double max_marginal_violation() const;
};

// Squared Euclidean cost matrix, K x L row-major.
std::vector<double> squared_distance_matrix(const EmpiricalMeasure& mu,
                                            const EmpiricalMeasure& nu);

// ---------------------------------------------------------------------------
// Exact squared Wasserstein-2 between equal-size uniform measures, solved as a
// minimum-cost assignment. Among equal-cost optima the lexicographically
// smallest permutation is returned for n <= kLexicographicTieBreakLimit.

inline constexpr std::size_t kLexicographicTieBreakLimit = 16;

struct ExactOtResult {
  double cost = 0.0;
  TransportPlan plan;
  std::vector<std::size_t> assignment;  // row k -> column assignment[k]
};

ExactOtResult exact_w2_squared(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

// Minimum-cost perfect matching on an n x n row-major cost matrix.
std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n);

// ---------------------------------------------------------------------------
// Entropy-regularized transport
//   min_pi <C, pi> + lambda_e * sum pi log pi,   pi in Pi(1/K, 1/L)
// solved with log-domain Sinkhorn iterations on dual potentials (f, g):
//   pi_kl = exp((f_k + g_l - C_kl) / eps).
// With annealing on, eps starts at max(C) / 10 and is halved until it reaches
// lambda_e; each stage is warm-started from the previous potentials.
// max_iters bounds the iterations of each stage.

struct SinkhornConfig {
  double lambda_e = 1e-6;
  double tolerance = 1e-9;
  std::size_t max_iters = 10000;
  bool anneal = true;
  // Marginal tolerance for the intermediate annealing stages (never tighter
  // than `tolerance`); the final stage always uses `tolerance`.
  double stage_tolerance = 1e-5;
};

struct SinkhornStage {
  double epsilon = 0.0;
  double cost = 0.0;            // <C, pi> + eps * sum pi log pi
  double transport_cost = 0.0;  // <C, pi>
  std::size_t iterations = 0;
  double max_violation = 0.0;
};

struct SinkhornResult {
  double cost = 0.0;  // W_{2,E}^2 at lambda_e
  double transport_cost = 0.0;
  double entropy = 0.0;  // sum pi log pi
  TransportPlan plan;
  std::vector<double> f;
  std::vector<double> g;
  bool converged = false;
  std::size_t iterations = 0;  // summed over stages
  double max_violation = 0.0;
  std::vector<SinkhornStage> stages;
};

SinkhornResult sinkhorn(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                        const SinkhornConfig& cfg = {});

// d/dx_k of the transport cost with the plan held fixed:
//   grad_k = sum_l 2 (x_k - y_l) pi_kl.
// Returned row-major, K x d.
std::vector<double> sinkhorn_grad_source(const EmpiricalMeasure& mu,
                                         const EmpiricalMeasure& nu,
                                         const TransportPlan& plan);

}  // namespace thermoloss
