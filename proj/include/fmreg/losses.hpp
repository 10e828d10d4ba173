#pragma once

#include <string>
#include <vector>

#include "fmreg/se3.hpp"

namespace fmreg {

struct LossConfig {
  /// Weight on the accuracy term. 10 during initialization, 1 afterwards.
  double lambda = 1.0;
  /// Sum over every level's iterations (default) or the finest level only.
  bool finest_level_only = false;
};

/// One k-indexed row of the combined loss: the two consistency addends
/// and the lambda-weighted accuracy addend. Rows beyond a trace's
/// length contribute zero.
struct LossAddends {
  double consistency_q_r0 = 0.0;
  double consistency_q_r1 = 0.0;
  double accuracy = 0.0;
};

struct LossReport {
  double consistency_q_r0 = 0.0;  // sum over k of the first addend
  double consistency_q_r1 = 0.0;  // sum over k of the second addend
  double accuracy = 0.0;          // sum over k of L_a, before lambda
  double lambda = 1.0;
  double total = 0.0;             // consistency sums + lambda * accuracy
  std::vector<LossAddends> per_iteration;

  /// Flat key-value record for training logs, one CSV row.
  static std::string csv_header();
  std::string csv_row() const;
};

/**
 * Consistency error between two estimates of the query pose obtained
 * through different reference frames:
 *   || log( that_r0_r1 * t_q_r1^-1 * t_q_r0 ) ||_1.
 * Zero exactly when the estimates agree through that_r0_r1. Throws
 * AngleNearPi when the interior product's rotation is near pi; the
 * caller rejects the sample.
 */
double consistency_loss(const SE3& t_q_r0, const SE3& t_q_r1,
                        const SE3& that_r0_r1);

/**
 * Accuracy error of a reference-to-reference estimate against the
 * provided odometry transform: || log( that_r0_r1 * t_r1_r0 ) ||_1.
 * Zero iff t_r1_r0 = that_r0_r1^-1.
 */
double accuracy_loss(const SE3& t_r1_r0, const SE3& that_r0_r1);

/**
 * Combined objective over three pose traces (q->r0, q->r1, r1->r0):
 * the final entries of the query traces serve as fixed targets for the
 * opposing trace's per-iteration estimates, plus the lambda-weighted
 * accuracy of every r1->r0 iterate. Traces of unequal length are
 * summed over their own iterations independently per addend.
 * A `level` tag per entry supports restriction to the finest level.
 */
struct TracedPose {
  int level = 0;
  SE3 pose;
};

LossReport triplet_loss(const std::vector<TracedPose>& trace_q_r0,
                        const std::vector<TracedPose>& trace_q_r1,
                        const std::vector<TracedPose>& trace_r1_r0,
                        const SE3& that_r0_r1, const LossConfig& cfg);

/**
 * Relative pose error: Euclidean norm, in meters, of the translation of
 *   that_r0_r1 * t_star_q_r1^-1 * t_star_q_r0,
 * i.e. the disagreement of two independent map registrations moved into
 * a shared frame.
 */
double relative_pose_error(const SE3& t_star_q_r0, const SE3& t_star_q_r1,
                           const SE3& that_r0_r1);

class EmptyTrace : public std::runtime_error {
 public:
  EmptyTrace() : std::runtime_error("triplet_loss: empty pose trace") {}
};

}  // namespace fmreg
