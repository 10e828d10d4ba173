#pragma once

#include <cassert>
#include <stdexcept>
#include <vector>

namespace fmreg {

class ImageTooSmall : public std::runtime_error {
 public:
  explicit ImageTooSmall(const char* what) : std::runtime_error(what) {}
};

/**
 * Dense multi-channel raster. Row-major, channel-interleaved float32.
 * Immutable by convention once filled: the processing pipeline never
 * writes into a buffer it did not create.
 */
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, int channels, float fill = 0.0f)
      : width_(width),
        height_(height),
        channels_(channels),
        data_(static_cast<size_t>(width) * height * channels, fill) {
    assert(width > 0 && height > 0 && channels > 0);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  float& at(int x, int y, int c = 0) {
    return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int x, int y, int c = 0) const {
    return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
  }

  /// Pointer to the first channel of pixel (x, y).
  const float* pixel(int x, int y) const {
    return data_.data() + (static_cast<size_t>(y) * width_ + x) * channels_;
  }
  float* pixel(int x, int y) {
    return data_.data() + (static_cast<size_t>(y) * width_ + x) * channels_;
  }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  bool in_bounds(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x <= width_ - 1 && y <= height_ - 1;
  }

  bool all_finite() const;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/**
 * Bilinear interpolation of all channels at a continuous coordinate,
 * computed in double precision. Writes channels() values into `out`
 * and returns true, or returns false when (x, y) lies outside
 * [0, w-1] x [0, h-1]; the caller drops the sample.
 */
bool bilinear_sample(const ImageBuffer& img, double x, double y, double* out);

/// Single-channel convenience overload.
bool bilinear_sample(const ImageBuffer& img, double x, double y, int channel,
                     double* out);

/**
 * Per-channel image gradients: central differences in the interior,
 * one-sided at the borders. Throws ImageTooSmall below 3x3.
 */
void image_gradients(const ImageBuffer& img, ImageBuffer& gx, ImageBuffer& gy);

/// 2x2 block average; output is floor(w/2) x floor(h/2).
ImageBuffer downsample2x(const ImageBuffer& img);

/**
 * Depth-aware variant: zeros mark invalid samples, the block mean is
 * taken over valid entries only and is 0 when the block has none.
 */
ImageBuffer downsample2x_valid(const ImageBuffer& img);

/// 3x3 box blur with clamped borders, per channel.
ImageBuffer box_blur3(const ImageBuffer& img);

}  // namespace fmreg
