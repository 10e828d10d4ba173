#include "fmreg/pyramid.hpp"

#include <stdexcept>

namespace fmreg {

FramePyramid build_pyramid(const ImageBuffer& features,
                           const ImageBuffer& saliency,
                           const ImageBuffer& depth, const PinholeCamera& cam) {
  if (features.width() != cam.width || features.height() != cam.height) {
    throw std::invalid_argument("build_pyramid: features do not match camera size");
  }
  if (saliency.channels() != 1 || saliency.width() != features.width() ||
      saliency.height() != features.height()) {
    throw std::invalid_argument("build_pyramid: saliency must be 1-channel, same size");
  }
  if (!depth.empty() &&
      (depth.channels() != 1 || depth.width() != features.width() ||
       depth.height() != features.height())) {
    throw std::invalid_argument("build_pyramid: depth must be 1-channel, same size");
  }

  FramePyramid pyr;
  pyr.levels[0] = PyramidLevel{features, saliency, depth, cam};
  for (int l = 1; l < kPyramidLevels; ++l) {
    const PyramidLevel& prev = pyr.levels[l - 1];
    PyramidLevel& cur = pyr.levels[l];
    cur.features = downsample2x(prev.features);
    cur.saliency = downsample2x(prev.saliency);
    if (prev.has_depth()) cur.depth = downsample2x_valid(prev.depth);
    cur.camera = scale_camera(cam, l);
  }
  return pyr;
}

bool pyramid_is_valid(const FramePyramid& pyr) {
  for (int l = 0; l < kPyramidLevels; ++l) {
    const PyramidLevel& lv = pyr.levels[l];
    if (lv.features.empty() || lv.saliency.empty()) return false;
    if (!lv.camera.is_valid()) return false;
    if (lv.features.width() != lv.camera.width ||
        lv.features.height() != lv.camera.height) {
      return false;
    }
    if (l > 0) {
      if (lv.features.width() != pyr.levels[l - 1].features.width() / 2 ||
          lv.features.height() != pyr.levels[l - 1].features.height() / 2) {
        return false;
      }
    }
    for (float s : lv.saliency.data()) {
      if (!(s > 0.0f && s < 1.0f)) return false;
    }
    if (lv.has_depth()) {
      for (float d : lv.depth.data()) {
        if (!(d >= 0.0f) || !std::isfinite(d)) return false;
      }
    }
    if (!lv.features.all_finite()) return false;
  }
  return true;
}

}  // namespace fmreg
