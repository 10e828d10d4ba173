#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <vector>

#include "fmreg/pyramid.hpp"
#include "fmreg/se3.hpp"

namespace fmreg {

using Matrix6d = Eigen::Matrix<double, 6, 6>;

struct RegistrationConfig {
  /// Iteration counts ordered coarse to fine: index 0 drives pyramid
  /// level 3, index 3 drives level 0.
  std::array<int, kPyramidLevels> iterations_per_level = {16, 12, 8, 4};
  /// Huber scale on the feature-difference norm.
  double huber_gamma = 0.1;
  /// Tikhonov term on the normal matrix. Numerical-rank insurance only,
  /// small enough not to act as damping.
  double tikhonov_eps = 1e-8;
  int min_valid_pixels = 100;
};

enum class RegistrationStatus { kOk, kTooFewValidPixels, kSingularSystem };

struct TraceEntry {
  int level = 0;      // pyramid level, 3 = coarsest
  int iteration = 0;  // iteration within the level
  SE3 pose;           // estimate after this iteration's update
  double weighted_residual_sum = 0.0;  // objective evaluated at `pose`
  int valid_pixels = 0;
};

struct RegistrationResult {
  SE3 final_pose;
  std::vector<TraceEntry> trace;
  /// Informational: max-norm of the last update fell below 1e-7. The
  /// schedule always runs to completion regardless.
  bool converged = false;
  RegistrationStatus status = RegistrationStatus::kOk;
  int failure_level = -1;
  int failure_iteration = -1;

  bool ok() const { return status == RegistrationStatus::kOk; }
};

/// IRLS weight of the Huber norm: 1 on the quadratic branch
/// (norm <= gamma), gamma/norm on the linear branch.
inline double huber_weight(double residual_norm, double gamma) {
  return residual_norm <= gamma ? 1.0 : gamma / residual_norm;
}

/// Huber penalty itself; the objective reported in traces is the sum of
/// saliency-weighted penalties.
inline double huber_cost(double residual_norm, double gamma) {
  return residual_norm <= gamma
             ? 0.5 * residual_norm * residual_norm
             : gamma * (residual_norm - 0.5 * gamma);
}

/**
 * Per-pixel terms of the inverse-compositional linearization, computed
 * once per level from the reference frame alone: for each valid-depth
 * pixel, the C x 6 Jacobian of the feature values under a perturbation
 * of the template warp (feature gradients chained with the projection
 * and SE(3) generator Jacobians) and its 6x6 Gram matrix.
 */
struct LevelJacobians {
  int channels = 0;
  std::vector<int> px;  // pixel x
  std::vector<int> py;  // pixel y
  std::vector<Eigen::Vector3d> point;  // back-projected reference point
  std::vector<double> jac;   // size() * channels * 6, row-major per pixel
  std::vector<double> gram;  // size() * 21, lower triangle of J^T J

  size_t size() const { return px.size(); }
};

LevelJacobians compute_level_jacobians(const PyramidLevel& ref);

/// Recomputes the rows of a single feature channel (and the Gram
/// matrices) after that channel changed in place. The pixel set is
/// depth-driven and unchanged.
void update_level_jacobians_channel(LevelJacobians& jacs,
                                    const PyramidLevel& ref, int channel);

struct NormalEquations {
  Matrix6d h = Matrix6d::Zero();
  Vector6d b = Vector6d::Zero();
  double cost = 0.0;  // sum of S_r * S_q * huber_cost(||r||)
  int count = 0;
};

/**
 * One pass over the reference pixels at the current estimate: warps
 * each cached pixel into the query level, forms the feature residual
 * and the saliency-Huber weight, and accumulates J^T W J, J^T W r and
 * the robust objective. Pixels whose warp fails are skipped.
 */
NormalEquations assemble_normal_equations(const LevelJacobians& jacs,
                                          const PyramidLevel& ref,
                                          const PyramidLevel& query,
                                          const SE3& t_qr,
                                          const RegistrationConfig& cfg);

/**
 * Solves (H + eps I) delta = -b. Empty when the regularized system is
 * numerically rank-deficient (condition number above 1e12).
 */
std::optional<Twist> gauss_newton_step(const NormalEquations& ne, double eps);

/// Materialized residual set, for diagnostics and brute-force checks.
struct PixelResidual {
  int x = 0;
  int y = 0;
  Eigen::Vector2d uv_query = Eigen::Vector2d::Zero();
  Eigen::VectorXd residual;  // channels
  double weight = 0.0;       // S_r * S_q * huber_weight
};

struct ResidualSet {
  std::vector<PixelResidual> items;
  double weighted_cost = 0.0;
  int count() const { return static_cast<int>(items.size()); }
};

ResidualSet residuals_and_weights(const PyramidLevel& ref,
                                  const PyramidLevel& query, const SE3& t_qr,
                                  const RegistrationConfig& cfg);

/**
 * Registration problem with the reference-side linearization cached per
 * level. The reference pyramid must outlive the problem. Multiple
 * queries can be run against the same problem; runs are independent
 * and the problem is const after construction (except refresh_level).
 */
class RegistrationProblem {
 public:
  RegistrationProblem(const FramePyramid& ref, const RegistrationConfig& cfg);

  /// Recompute one level's cached Jacobians after the reference
  /// features changed in place (training-time use).
  void refresh_level(int level);

  /// Cheaper variant when only one feature channel changed.
  void refresh_level_channel(int level, int channel);

  /// Exchange a level's cached Jacobians (save/restore around an
  /// in-place feature perturbation).
  void swap_jacobians(int level, LevelJacobians& other) {
    std::swap(jacobians_[level], other);
  }

  RegistrationResult run(const FramePyramid& query, const SE3& init) const;

  /// Coarse-to-fine from `start_level` only, seeded with `init` and an
  /// already-recorded prefix trace. Levels above start_level are
  /// assumed unchanged since the prefix was recorded.
  RegistrationResult run_from_level(const FramePyramid& query, int start_level,
                                    const SE3& init,
                                    std::vector<TraceEntry> prefix) const;

  const LevelJacobians& jacobians(int level) const { return jacobians_[level]; }
  const RegistrationConfig& config() const { return cfg_; }

 private:
  const FramePyramid* ref_;
  RegistrationConfig cfg_;
  std::array<LevelJacobians, kPyramidLevels> jacobians_;
};

/**
 * Saliency-weighted, Huber-robust, inverse-compositional Gauss-Newton
 * alignment of a query pyramid to a reference pyramid, coarse to fine
 * with a fixed iteration schedule and no early exit. Every intermediate
 * estimate is recorded in the trace. Deterministic for fixed inputs.
 */
RegistrationResult register_frames(const FramePyramid& ref,
                                   const FramePyramid& query,
                                   const RegistrationConfig& cfg,
                                   const SE3& init = SE3());

}  // namespace fmreg
