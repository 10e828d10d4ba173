#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fmreg/losses.hpp"
#include "fmreg/manifest.hpp"
#include "fmreg/pyramid.hpp"
#include "fmreg/registration.hpp"

namespace fmreg {

class EmptyInput : public std::runtime_error {
 public:
  explicit EmptyInput(const char* what) : std::runtime_error(what) {}
};

struct EvalRecord {
  std::string triplet_id;
  int ref_seq = 0;
  int query_seq = 0;
  bool failed = false;
  std::string failure_reason;
  double relative_pose_error_m = 0.0;  // E, valid when !failed
  // Per-direction errors against synthetic ground truth, when available.
  bool has_gt = false;
  double trans_err_r0 = 0.0, rot_err_r0 = 0.0;
  double trans_err_r1 = 0.0, rot_err_r1 = 0.0;
};

/**
 * Fraction of relocalizations within each threshold. Thresholds must be
 * ascending; failed runs are counted in the denominator, so the curve
 * is penalized by failures but never poisoned by their (absent) errors.
 */
std::vector<double> cumulative_accuracy(const std::vector<double>& errors,
                                        const std::vector<double>& thresholds,
                                        int failures = 0);

struct ConfusionCell {
  double median_e = 0.0;
  int count = 0;
};

/// median E per (reference sequence, query sequence) pair; cells with no
/// successful record are absent. Even counts take the mean of the two
/// middle values.
struct ConfusionMatrix {
  std::vector<int> ref_seqs;    // sorted, unique
  std::vector<int> query_seqs;  // sorted, unique
  std::map<std::pair<int, int>, ConfusionCell> cells;

  std::optional<ConfusionCell> cell(int ref_seq, int query_seq) const {
    auto it = cells.find({ref_seq, query_seq});
    if (it == cells.end()) return std::nullopt;
    return it->second;
  }
};

ConfusionMatrix confusion_matrix(const std::vector<EvalRecord>& records);

/**
 * Relative saliency weight of each class at each pyramid level: the
 * class's share of the total saliency mass divided by its share of the
 * pixels. 1 everywhere for uniform saliency; below 1 for ignored
 * classes. Segmentation is full resolution and is nearest-neighbor
 * downsampled (top-left sample) per level. Classes with no pixels at a
 * level are omitted.
 */
struct SaliencyWeight {
  int class_id = 0;
  int level = 0;
  double weight = 0.0;
};

std::vector<SaliencyWeight> relative_saliency_weights(
    const FramePyramid& pyr, const ImageBuffer& segmentation,
    const std::vector<int>& classes);

/// All class ids present in a segmentation map.
std::vector<int> segmentation_classes(const ImageBuffer& segmentation);

/// Feature provider: builds a frame pyramid from (image, depth, camera).
/// Pass an empty depth buffer for frames without depth.
using FeatureFn = std::function<FramePyramid(
    const ImageBuffer& image, const ImageBuffer& depth, const PinholeCamera&)>;

/// Triplet data already loaded in memory.
struct TripletFrames {
  std::string id;
  int ref_seq = 0;
  int query_seq = 0;
  PinholeCamera camera;
  ImageBuffer r0_image, r0_depth;
  ImageBuffer r1_image, r1_depth;
  ImageBuffer q_image;
  SE3 that_r0_r1;
  std::optional<SE3> gt_t_q_r0;
};

/// Loads the referenced PFM files of one manifest entry.
TripletFrames load_triplet_frames(const std::string& manifest_path,
                                  const TripletEntry& entry);

/**
 * Runs both query registrations (q against r0 and r1, identity init)
 * and reports E plus, when ground truth is present, per-direction
 * translation/rotation errors. Registration failures are recorded, not
 * thrown.
 */
EvalRecord evaluate_triplet(const TripletFrames& frames,
                            const FeatureFn& features,
                            const RegistrationConfig& cfg);

/// CSV artifact writers with fixed formatting, for bit-reproducibility.
void write_curves_csv(const std::string& path,
                      const std::vector<double>& thresholds,
                      const std::vector<double>& fractions);
void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm);
void write_saliency_csv(
    const std::string& path,
    const std::vector<std::tuple<int, int, double, double>>& rows);

}  // namespace fmreg
