#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fmreg/features.hpp"
#include "fmreg/losses.hpp"
#include "fmreg/registration.hpp"

namespace fmreg {

class TrainingAborted : public std::runtime_error {
 public:
  explicit TrainingAborted(const std::string& what) : std::runtime_error(what) {}
};

struct TrainConfig {
  double lr_init = 1e-4;     // learning rate during epoch 1
  double lr_general = 1e-5;  // later epochs
  double lambda_init = 10.0;   // accuracy weight during epoch 1
  double lambda_general = 1.0;
  int batch_size = 16;  // one optimizer step per accumulated batch
  double fd_step = 1e-3;
  int epochs = 5;
  uint64_t seed = 0;
  int head_channels = 16;  // feature channels of the prediction head
  bool finest_level_only = false;
  RegistrationConfig registration;
};

/// One triplet prepared for training: fixed head inputs plus the
/// provided reference-to-reference transform.
struct TrainTriplet {
  std::string id;
  BasePyramid base_r0;  // with depth
  BasePyramid base_r1;  // with depth
  BasePyramid base_q;   // no depth
  SE3 that_r0_r1;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
};

/// Standard Adam update, beta = (0.9, 0.999), eps = 1e-8, with bias
/// correction. Moments are lazily sized on the first call.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
               AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

/**
 * Generic central-difference gradient with relative step
 * h_i = fd_step * max(1, |theta_i|), one coordinate at a time. Also the
 * test seam: any objective can be differentiated.
 */
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& theta, double fd_step);

/**
 * The pipeline loss of one triplet as a function of head parameters:
 * three registrations from identity (q->r0, q->r1, r1->r0) followed by
 * the combined consistency/accuracy objective. Returns NaN when any
 * registration fails or the loss is non-finite; callers skip the
 * sample.
 *
 * Keeps per-triplet workspaces so that coordinate perturbations only
 * recompute the affected channel plane, the affected level's reference
 * Jacobians, and the registration levels at and below the perturbed
 * one; coarser levels are replayed from the cached base run. The
 * shortcut is bit-identical to a full evaluation.
 */
class TripletObjective {
 public:
  TripletObjective(const TrainTriplet& triplet, const RegistrationConfig& reg,
                   bool finest_level_only);
  ~TripletObjective();
  TripletObjective(TripletObjective&&) noexcept;

  /// Full evaluation at `params`; caches the run as the base for
  /// perturbed evaluations. NaN on failure.
  double evaluate_base(const HeadParams& params, double lambda);

  bool base_ok() const;
  double base_loss() const;

  /// Loss at `perturbed`, which must differ from the base params only
  /// in coordinates covered by `where`. Restores the workspace.
  double evaluate_perturbed(const HeadParams& perturbed,
                            const ParamCoord& where, double lambda);

  /// Both sides of a central difference with one save/restore cycle.
  std::pair<double, double> evaluate_perturbed_pair(const HeadParams& plus,
                                                    const HeadParams& minus,
                                                    const ParamCoord& where,
                                                    double lambda);

  const std::string& id() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct BatchGradient {
  Eigen::VectorXd grad;
  double mean_loss = 0.0;  // mean base loss over usable triplets
  std::vector<std::string> skipped_ids;
};

/**
 * Central finite differences of the mean triplet loss over a batch.
 * Triplets with a non-finite base loss are reported and skipped; a
 * coordinate whose +/- evaluations fail for some triplet drops that
 * triplet from both sides of the quotient.
 */
BatchGradient loss_gradient_fd(const HeadParams& params,
                               std::vector<TripletObjective*>& batch,
                               double fd_step, double lambda);

struct TrainResult {
  HeadParams params;
  std::vector<double> epoch_mean_loss;
  std::string loss_curve_csv;  // epoch,step,lambda,lr,batch_loss,skipped
};

/**
 * Adam over the finite-difference gradient with the schedule: lambda
 * and learning rate take their init values during epoch 1 and the
 * general values afterwards. One step per batch, samples shuffled per
 * epoch with the config seed. Deterministic: identical seed, dataset
 * and config give a bitwise-identical loss curve. Aborts (after
 * finishing the epoch) if more than half of an epoch's samples were
 * skipped.
 */
TrainResult train_head(const std::vector<TrainTriplet>& dataset,
                       const TrainConfig& cfg);

/// Checkpoint: one JSON header line (shapes, config echo, seed), then
/// the flat parameter vector as little-endian doubles.
void save_checkpoint(const std::string& path, const HeadParams& params,
                     const TrainConfig& cfg);
HeadParams load_checkpoint(const std::string& path);

}  // namespace fmreg
