#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <vector>

#include "fmreg/camera.hpp"
#include "fmreg/image.hpp"
#include "fmreg/se3.hpp"

namespace fmreg {

class DegenerateConfig : public std::runtime_error {
 public:
  explicit DegenerateConfig(const std::string& what) : std::runtime_error(what) {}
};

class OverlapUnsatisfied : public std::runtime_error {
 public:
  OverlapUnsatisfied()
      : std::runtime_error("make_triplet: overlap constraint unsatisfied after 100 resamples") {}
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  Range() = default;
  Range(double l, double h) : lo(l), hi(h) {}
  bool valid() const { return std::isfinite(lo) && std::isfinite(hi) && lo <= hi; }
};

/// Segmentation class ids. Planes take kFirstPlaneClass + index; all
/// distractor boxes share kDistractorClass.
constexpr int kBackgroundClass = 0;
constexpr int kFirstPlaneClass = 1;
constexpr int kDistractorClass = 99;

struct SceneConfig {
  uint64_t seed = 1;
  int width = 640;
  int height = 384;

  int plane_count = 3;             // background plane plus tilted foreground planes
  Range plane_extent{4.0, 8.0};    // full edge length of foreground planes, meters
  int texture_octaves = 3;

  int distractor_count = 2;
  Range distractor_size{0.6, 1.6};   // full edge length, meters
  Range distractor_speed{0.05, 0.35};  // meters per frame index

  Range gain{0.9, 1.1};   // per-sequence photometric gain
  Range bias{-0.05, 0.05};  // per-sequence photometric bias
  double depth_noise_sigma = 0.0;  // gaussian noise on reference depth, meters

  Range baseline{0.75, 1.75};  // r0-r1 translation norm; median 1.25
  Range query_offset_translation{0.1, 1.0};  // meters
  Range query_offset_rotation{0.0, 0.1745};  // radians

  double min_overlap = 0.6;  // fraction of reference pixels visible in q

  void validate() const;
  PinholeCamera camera() const;
};

struct ScenePlane {
  Eigen::Vector3d center;
  Eigen::Vector3d normal;  // unit
  Eigen::Vector3d e1, e2;  // in-plane orthonormal axes
  double half1 = 0.0, half2 = 0.0;
  uint64_t tex_seed = 0;
  double albedo_lo = 0.0, albedo_hi = 1.0;
  double tex_freq = 1.0;  // noise cycles per meter
  int octaves = 3;
  int class_id = kFirstPlaneClass;
};

struct SceneBox {
  Eigen::Vector3d center0;    // position at time 0
  Eigen::Vector3d velocity;   // meters per frame index
  Eigen::Vector3d half_size;
  uint64_t tex_seed = 0;
  double albedo_lo = 0.0, albedo_hi = 1.0;
  double tex_freq = 4.0;
  int octaves = 3;
};

struct Scene {
  SceneConfig config;
  std::vector<ScenePlane> planes;
  std::vector<SceneBox> boxes;
};

/// Deterministic procedural scene: value-noise textured static planes
/// and linearly moving textured distractor boxes.
Scene generate_scene(const SceneConfig& cfg);

struct RenderedFrame {
  ImageBuffer image;         // 1 channel, clamp(gain * albedo + bias, 0, 1)
  ImageBuffer depth;         // camera-frame z; 0 = no surface
  ImageBuffer segmentation;  // class ids as floats
};

/// Ray-casts all surfaces at frame index `time` from camera pose
/// t_world_cam (camera-to-world).
RenderedFrame render_frame(const Scene& scene, const SE3& t_world_cam,
                           const PinholeCamera& cam, double time, double gain,
                           double bias);

/// Depth-only pass for overlap tests; identical geometry to render_frame.
ImageBuffer render_depth(const Scene& scene, const SE3& t_world_cam,
                         const PinholeCamera& cam, double time);

struct Frame {
  ImageBuffer image;
  ImageBuffer depth;
  ImageBuffer segmentation;
  PinholeCamera camera;
  SE3 t_world_cam;
  double gain = 1.0;
  double bias = 0.0;
  double time = 0.0;
};

struct FrameTriplet {
  Frame r0, r1, q;
  SE3 that_r0_r1;  // exact relative transform from the stored world poses
  SE3 gt_t_q_r0;   // ground truth, evaluation only; never read by registration
  int ref_seq = 0;
  int query_seq = 0;
};

/**
 * Samples a training/evaluation triplet: r0 and r1 from sequence
 * `ref_seq` one frame index apart with a baseline drawn from config,
 * q from sequence `query_seq` with the configured pose offset from r0.
 * Sequences differ in photometric gain/bias and in capture time (so
 * distractors have moved). Rejects pose draws until at least
 * `min_overlap` of each reference's valid pixels project into q, then
 * renders; optional Gaussian noise is added to the reference depth
 * maps. Throws OverlapUnsatisfied after 100 attempts.
 */
FrameTriplet make_triplet(const Scene& scene, uint64_t seed, int ref_seq = 0,
                          int query_seq = 0);

/// Per-sequence photometric parameters, deterministic in the scene seed.
void sequence_photometrics(const Scene& scene, int seq, double* gain,
                           double* bias);

/// Zeroes depth within 2 px of a depth discontinuity, the way stereo
/// matchers drop silhouette and occlusion pixels. make_triplet applies
/// this to both reference depth maps.
void invalidate_depth_discontinuities(ImageBuffer& depth);

/// Fraction of pixels labelled kDistractorClass.
double distractor_fraction(const ImageBuffer& segmentation);

/// Multi-octave value noise in [0, 1], bit-stable across platforms.
double value_noise(double s, double t, uint64_t seed, int octaves);

/// Uniform double in [0, 1) from the top 53 bits; avoids
/// std::uniform_real_distribution for cross-platform determinism.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(std::mt19937_64& rng, const Range& r) {
  return r.lo + (r.hi - r.lo) * uniform01(rng);
}

/// Box-Muller, consuming two draws.
double gaussian(std::mt19937_64& rng);

}  // namespace fmreg
