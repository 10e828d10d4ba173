// Shared synthetic fixtures for registration/training tests.
#pragma once

#include "fmreg/features.hpp"
#include "fmreg/synth.hpp"

namespace fixtures {

inline fmreg::SceneConfig small_scene_config(uint64_t seed, int distractors = 0) {
  fmreg::SceneConfig cfg;
  cfg.seed = seed;
  cfg.width = 160;
  cfg.height = 96;
  cfg.distractor_count = distractors;
  cfg.gain = {1.0, 1.0};
  cfg.bias = {0.0, 0.0};
  return cfg;
}

inline fmreg::RegistrationConfig small_registration_config() {
  fmreg::RegistrationConfig cfg;
  cfg.min_valid_pixels = 40;
  return cfg;
}

/// Static frame pair with a known relative pose: reference rendered at
/// the world origin, query offset by `t_q_r.inverse()`. Depth carries
/// stereo-style holes like the triplet generator's output.
struct RenderedPair {
  fmreg::FramePyramid ref;    // handcrafted features, with depth
  fmreg::FramePyramid query;  // handcrafted features, no depth
  fmreg::SE3 gt_t_q_r;
  fmreg::PinholeCamera camera;
  fmreg::ImageBuffer ref_image, ref_depth, query_image;
};

inline RenderedPair make_pair(uint64_t seed, const fmreg::SE3& t_q_r,
                              int distractors = 0, double query_time = 0.0) {
  using namespace fmreg;
  SceneConfig cfg = small_scene_config(seed, distractors);
  const Scene scene = generate_scene(cfg);
  const PinholeCamera cam = cfg.camera();

  const SE3 pose_ref;  // identity
  const SE3 pose_query = t_q_r.inverse();

  RenderedPair pair;
  pair.camera = cam;
  pair.gt_t_q_r = t_q_r;
  RenderedFrame ref = render_frame(scene, pose_ref, cam, 0.0, 1.0, 0.0);
  RenderedFrame query = render_frame(scene, pose_query, cam, query_time, 1.0, 0.0);
  invalidate_depth_discontinuities(ref.depth);
  pair.ref_image = ref.image;
  pair.ref_depth = ref.depth;
  pair.query_image = query.image;
  pair.ref = handcrafted_features(ref.image, ref.depth, cam);
  pair.query = handcrafted_features(query.image, ImageBuffer(), cam);
  return pair;
}

}  // namespace fixtures
