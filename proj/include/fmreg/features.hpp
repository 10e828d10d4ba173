#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>

#include "fmreg/pyramid.hpp"

namespace fmreg {

class ShapeMismatch : public std::runtime_error {
 public:
  explicit ShapeMismatch(const char* what) : std::runtime_error(what) {}
};

/**
 * Non-learned feature provider: per level the channels are
 * [intensity, |gx|, |gy|], each affinely squeezed into (0,1), with
 * uniform saliency 0.5. Three-channel input is converted to luminance.
 * Pass an empty depth buffer for frames without depth.
 */
FramePyramid handcrafted_features(const ImageBuffer& image,
                                  const ImageBuffer& depth,
                                  const PinholeCamera& cam);

/**
 * Fixed input stack for the prediction head: the handcrafted channels
 * plus a 3x3 box-blurred copy (6 channels), each pyramid level computed
 * from that level's downsampled intensity. Depth and intrinsics ride
 * along so head outputs can be assembled into a FramePyramid.
 */
struct BasePyramid {
  std::array<ImageBuffer, kPyramidLevels> channels;
  std::array<ImageBuffer, kPyramidLevels> depth;  // may be empty
  std::array<PinholeCamera, kPyramidLevels> cameras;

  int in_channels() const { return channels[0].channels(); }
};

BasePyramid make_base_pyramid(const ImageBuffer& image,
                              const ImageBuffer& depth,
                              const PinholeCamera& cam);

/**
 * Per-level 1x1 convolution + sigmoid prediction head: C_out feature
 * channels and one saliency channel per level. Parameters flatten to a
 * fixed coordinate order (level 0..3; per level W_feat row-major,
 * b_feat, w_sal, b_sal) shared by the trainer and checkpoints.
 */
struct HeadParams {
  struct Level {
    Eigen::MatrixXd w_feat;  // out_channels x in_channels
    Eigen::VectorXd b_feat;  // out_channels
    Eigen::VectorXd w_sal;   // in_channels
    double b_sal = 0.0;
  };

  int in_channels = 0;
  int out_channels = 0;
  std::array<Level, kPyramidLevels> levels;

  int param_count() const {
    return kPyramidLevels *
           (out_channels * in_channels + out_channels + in_channels + 1);
  }

  Eigen::VectorXd flatten() const;
  static HeadParams unflatten(const Eigen::VectorXd& theta, int in_channels,
                              int out_channels);

  static HeadParams zeros(int in_channels, int out_channels);
  /// Small random weights, zero biases; deterministic in the seed.
  /// Zero init would make every output plane constant 0.5 and the
  /// registration Jacobians identically zero.
  static HeadParams random_init(int in_channels, int out_channels,
                                uint64_t seed);
  /// Identity-like init plus seeded noise: output channel c starts as a
  /// monotone sigmoid remap of base channel (c mod in_channels) and the
  /// saliency near-uniform, so the untrained head already registers
  /// about as well as the raw base channels and training refines from
  /// there instead of first escaping a random mixture.
  static HeadParams structured_init(int in_channels, int out_channels,
                                    uint64_t seed);
};

/// Which slice of the flat parameter vector a coordinate belongs to.
struct ParamCoord {
  int level = 0;
  bool saliency = false;
  int out_channel = -1;  // -1 for saliency coordinates
};

ParamCoord locate_param(const HeadParams& shape, int flat_index);

/// Full forward pass over all levels.
FramePyramid head_forward(const HeadParams& params, const BasePyramid& base);

/// Recompute a single feature channel plane of one level in place.
void head_forward_feature_channel(const HeadParams& params,
                                  const BasePyramid& base, int level,
                                  int out_channel, ImageBuffer& features);

/// Recompute one level's saliency plane in place.
void head_forward_saliency(const HeadParams& params, const BasePyramid& base,
                           int level, ImageBuffer& saliency);

}  // namespace fmreg
