#pragma once

#include <array>

#include "fmreg/camera.hpp"
#include "fmreg/image.hpp"

namespace fmreg {

constexpr int kPyramidLevels = 4;

/// One resolution level of a frame: C-channel feature map, 1-channel
/// saliency in (0,1), optional 1-channel depth (0 marks invalid), and
/// matching intrinsics.
struct PyramidLevel {
  ImageBuffer features;
  ImageBuffer saliency;
  ImageBuffer depth;  // empty() when the frame carries no depth
  PinholeCamera camera;

  bool has_depth() const { return !depth.empty(); }
};

/**
 * Four-level image pyramid, index 0 finest to 3 coarsest. Each level
 * halves the previous width and height (integer floor). Immutable
 * after construction; safe to share across registration threads.
 */
struct FramePyramid {
  std::array<PyramidLevel, kPyramidLevels> levels;

  const PyramidLevel& level(int l) const { return levels[l]; }
  PyramidLevel& level(int l) { return levels[l]; }
};

/**
 * Builds the pyramid from full-resolution maps: features and saliency
 * by 2x2 block averaging, depth by valid-aware averaging (holes do not
 * bleed into coarse levels), intrinsics via scale_camera. Pass an
 * empty depth buffer for frames without depth.
 */
FramePyramid build_pyramid(const ImageBuffer& features,
                           const ImageBuffer& saliency,
                           const ImageBuffer& depth, const PinholeCamera& cam);

/// Structural checks: level count, halving dimensions, saliency in
/// (0,1), nonnegative depth. Returns false with no diagnostics; test
/// helpers report the details.
bool pyramid_is_valid(const FramePyramid& pyr);

}  // namespace fmreg
