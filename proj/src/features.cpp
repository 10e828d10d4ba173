#include "fmreg/features.hpp"

#include <cmath>
#include <random>

namespace fmreg {

namespace {

// Affine squeeze into (0,1); inputs are expected in [0,1].
inline float squeeze01(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<float>(0.02 + 0.96 * v);
}

ImageBuffer to_intensity(const ImageBuffer& image) {
  if (image.channels() == 1) return image;
  if (image.channels() != 3) {
    throw ShapeMismatch("features: input must have 1 or 3 channels");
  }
  ImageBuffer out(image.width(), image.height(), 1);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const float* p = image.pixel(x, y);
      out.at(x, y) = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    }
  }
  return out;
}

// [intensity, |gx|, |gy|] squeezed into (0,1).
ImageBuffer handcrafted_channels(const ImageBuffer& intensity) {
  ImageBuffer gx, gy;
  image_gradients(intensity, gx, gy);
  ImageBuffer out(intensity.width(), intensity.height(), 3);
  for (int y = 0; y < intensity.height(); ++y) {
    for (int x = 0; x < intensity.width(); ++x) {
      out.at(x, y, 0) = squeeze01(intensity.at(x, y));
      out.at(x, y, 1) = squeeze01(std::abs(gx.at(x, y)));
      out.at(x, y, 2) = squeeze01(std::abs(gy.at(x, y)));
    }
  }
  return out;
}

ImageBuffer concat_channels(const ImageBuffer& a, const ImageBuffer& b) {
  ImageBuffer out(a.width(), a.height(), a.channels() + b.channels());
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      float* dst = out.pixel(x, y);
      const float* pa = a.pixel(x, y);
      const float* pb = b.pixel(x, y);
      for (int k = 0; k < a.channels(); ++k) dst[k] = pa[k];
      for (int k = 0; k < b.channels(); ++k) dst[a.channels() + k] = pb[k];
    }
  }
  return out;
}

constexpr float kUnitLo = 1e-6f;
constexpr float kUnitHi = 1.0f - 1e-6f;

inline float sigmoid_unit(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return std::clamp(static_cast<float>(s), kUnitLo, kUnitHi);
}

}  // namespace

FramePyramid handcrafted_features(const ImageBuffer& image,
                                  const ImageBuffer& depth,
                                  const PinholeCamera& cam) {
  ImageBuffer intensity = to_intensity(image);

  FramePyramid pyr;
  ImageBuffer level_depth = depth;
  for (int l = 0; l < kPyramidLevels; ++l) {
    if (l > 0) {
      intensity = downsample2x(intensity);
      if (!level_depth.empty()) level_depth = downsample2x_valid(level_depth);
    }
    PyramidLevel& lv = pyr.levels[l];
    lv.features = handcrafted_channels(intensity);
    lv.saliency = ImageBuffer(intensity.width(), intensity.height(), 1, 0.5f);
    lv.depth = level_depth;
    lv.camera = scale_camera(cam, l);
  }
  return pyr;
}

BasePyramid make_base_pyramid(const ImageBuffer& image,
                              const ImageBuffer& depth,
                              const PinholeCamera& cam) {
  ImageBuffer intensity = to_intensity(image);

  BasePyramid base;
  ImageBuffer level_depth = depth;
  for (int l = 0; l < kPyramidLevels; ++l) {
    if (l > 0) {
      intensity = downsample2x(intensity);
      if (!level_depth.empty()) level_depth = downsample2x_valid(level_depth);
    }
    const ImageBuffer hc = handcrafted_channels(intensity);
    base.channels[l] = concat_channels(hc, box_blur3(hc));
    base.depth[l] = level_depth;
    base.cameras[l] = scale_camera(cam, l);
  }
  return base;
}

Eigen::VectorXd HeadParams::flatten() const {
  Eigen::VectorXd theta(param_count());
  int idx = 0;
  for (const Level& lv : levels) {
    for (int r = 0; r < out_channels; ++r) {
      for (int c = 0; c < in_channels; ++c) theta(idx++) = lv.w_feat(r, c);
    }
    for (int r = 0; r < out_channels; ++r) theta(idx++) = lv.b_feat(r);
    for (int c = 0; c < in_channels; ++c) theta(idx++) = lv.w_sal(c);
    theta(idx++) = lv.b_sal;
  }
  return theta;
}

HeadParams HeadParams::unflatten(const Eigen::VectorXd& theta, int in_channels,
                                 int out_channels) {
  HeadParams p = zeros(in_channels, out_channels);
  if (theta.size() != p.param_count()) {
    throw ShapeMismatch("HeadParams::unflatten: size mismatch");
  }
  int idx = 0;
  for (Level& lv : p.levels) {
    for (int r = 0; r < out_channels; ++r) {
      for (int c = 0; c < in_channels; ++c) lv.w_feat(r, c) = theta(idx++);
    }
    for (int r = 0; r < out_channels; ++r) lv.b_feat(r) = theta(idx++);
    for (int c = 0; c < in_channels; ++c) lv.w_sal(c) = theta(idx++);
    lv.b_sal = theta(idx++);
  }
  return p;
}

HeadParams HeadParams::zeros(int in_channels, int out_channels) {
  HeadParams p;
  p.in_channels = in_channels;
  p.out_channels = out_channels;
  for (Level& lv : p.levels) {
    lv.w_feat = Eigen::MatrixXd::Zero(out_channels, in_channels);
    lv.b_feat = Eigen::VectorXd::Zero(out_channels);
    lv.w_sal = Eigen::VectorXd::Zero(in_channels);
    lv.b_sal = 0.0;
  }
  return p;
}

HeadParams HeadParams::random_init(int in_channels, int out_channels,
                                   uint64_t seed) {
  HeadParams p = zeros(in_channels, out_channels);
  std::mt19937_64 rng(seed);
  const double scale = 1.5;
  auto draw = [&]() {
    // uniform in [-scale, scale], bit-stable across platforms
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return scale * (2.0 * u - 1.0);
  };
  for (Level& lv : p.levels) {
    for (int r = 0; r < out_channels; ++r) {
      for (int c = 0; c < in_channels; ++c) lv.w_feat(r, c) = draw();
    }
    for (int c = 0; c < in_channels; ++c) lv.w_sal(c) = draw();
  }
  return p;
}

HeadParams HeadParams::structured_init(int in_channels, int out_channels,
                                       uint64_t seed) {
  HeadParams p = zeros(in_channels, out_channels);
  std::mt19937_64 rng(seed);
  auto noise = [&](double scale) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return scale * (2.0 * u - 1.0);
  };
  for (Level& lv : p.levels) {
    for (int r = 0; r < out_channels; ++r) {
      for (int c = 0; c < in_channels; ++c) lv.w_feat(r, c) = noise(0.3);
      // sigmoid(4 x - 2) remaps (0,1) onto (0.12, 0.88) monotonically.
      lv.w_feat(r, r % in_channels) += 4.0;
      lv.b_feat(r) = -2.0 + noise(0.3);
    }
    for (int c = 0; c < in_channels; ++c) lv.w_sal(c) = noise(0.3);
    lv.b_sal = noise(0.1);
  }
  return p;
}

ParamCoord locate_param(const HeadParams& shape, int flat_index) {
  const int per_level = shape.out_channels * shape.in_channels +
                        shape.out_channels + shape.in_channels + 1;
  ParamCoord pc;
  pc.level = flat_index / per_level;
  int r = flat_index % per_level;
  if (r < shape.out_channels * shape.in_channels) {
    pc.out_channel = r / shape.in_channels;
    return pc;
  }
  r -= shape.out_channels * shape.in_channels;
  if (r < shape.out_channels) {
    pc.out_channel = r;
    return pc;
  }
  pc.saliency = true;
  return pc;
}

FramePyramid head_forward(const HeadParams& params, const BasePyramid& base) {
  if (base.in_channels() != params.in_channels) {
    throw ShapeMismatch("head_forward: base channel count != params.in_channels");
  }
  FramePyramid pyr;
  for (int l = 0; l < kPyramidLevels; ++l) {
    const ImageBuffer& x = base.channels[l];
    PyramidLevel& lv = pyr.levels[l];
    lv.features = ImageBuffer(x.width(), x.height(), params.out_channels);
    lv.saliency = ImageBuffer(x.width(), x.height(), 1);
    lv.depth = base.depth[l];
    lv.camera = base.cameras[l];
    for (int c = 0; c < params.out_channels; ++c) {
      head_forward_feature_channel(params, base, l, c, lv.features);
    }
    head_forward_saliency(params, base, l, lv.saliency);
  }
  return pyr;
}

void head_forward_feature_channel(const HeadParams& params,
                                  const BasePyramid& base, int level,
                                  int out_channel, ImageBuffer& features) {
  const ImageBuffer& x = base.channels[level];
  const HeadParams::Level& lv = params.levels[level];
  const int cin = params.in_channels;
  const int cout = params.out_channels;
  const double* w = lv.w_feat.data();  // column-major (cout x cin)
  const double b = lv.b_feat(out_channel);

  const int n = x.width() * x.height();
  const float* src = x.data().data();
  float* dst = features.data().data() + out_channel;
  for (int i = 0; i < n; ++i) {
    double acc = b;
    const float* px = src + static_cast<size_t>(i) * cin;
    for (int c = 0; c < cin; ++c) acc += w[out_channel + c * cout] * px[c];
    dst[static_cast<size_t>(i) * cout] = sigmoid_unit(acc);
  }
}

void head_forward_saliency(const HeadParams& params, const BasePyramid& base,
                           int level, ImageBuffer& saliency) {
  const ImageBuffer& x = base.channels[level];
  const HeadParams::Level& lv = params.levels[level];
  const int cin = params.in_channels;

  const int n = x.width() * x.height();
  const float* src = x.data().data();
  float* dst = saliency.data().data();
  for (int i = 0; i < n; ++i) {
    double acc = lv.b_sal;
    const float* px = src + static_cast<size_t>(i) * cin;
    for (int c = 0; c < cin; ++c) acc += lv.w_sal(c) * px[c];
    dst[i] = sigmoid_unit(acc);
  }
}

}  // namespace fmreg
