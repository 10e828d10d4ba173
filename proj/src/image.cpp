#include "fmreg/image.hpp"

#include <algorithm>
#include <cmath>

namespace fmreg {

bool ImageBuffer::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

// Fractional weights below floating-point noise collapse to the node
// itself, so a warp that reproduces a pixel up to rounding returns the
// stored value exactly.
inline double snap_fraction(double f) {
  if (f < 1e-9) return 0.0;
  if (f > 1.0 - 1e-9) return 1.0;
  return f;
}

}  // namespace

bool bilinear_sample(const ImageBuffer& img, double x, double y, double* out) {
  if (!img.in_bounds(x, y)) return false;
  const int x0 = std::min(static_cast<int>(x), img.width() - 2);
  const int y0 = std::min(static_cast<int>(y), img.height() - 2);
  const double fx = snap_fraction(x - x0);
  const double fy = snap_fraction(y - y0);
  const double w00 = (1.0 - fx) * (1.0 - fy);
  const double w10 = fx * (1.0 - fy);
  const double w01 = (1.0 - fx) * fy;
  const double w11 = fx * fy;

  const float* p00 = img.pixel(x0, y0);
  const float* p10 = img.pixel(x0 + 1, y0);
  const float* p01 = img.pixel(x0, y0 + 1);
  const float* p11 = img.pixel(x0 + 1, y0 + 1);
  const int c = img.channels();
  for (int i = 0; i < c; ++i) {
    out[i] = w00 * p00[i] + w10 * p10[i] + w01 * p01[i] + w11 * p11[i];
  }
  return true;
}

bool bilinear_sample(const ImageBuffer& img, double x, double y, int channel,
                     double* out) {
  if (!img.in_bounds(x, y)) return false;
  const int x0 = std::min(static_cast<int>(x), img.width() - 2);
  const int y0 = std::min(static_cast<int>(y), img.height() - 2);
  const double fx = snap_fraction(x - x0);
  const double fy = snap_fraction(y - y0);
  *out = (1.0 - fx) * (1.0 - fy) * img.at(x0, y0, channel) +
         fx * (1.0 - fy) * img.at(x0 + 1, y0, channel) +
         (1.0 - fx) * fy * img.at(x0, y0 + 1, channel) +
         fx * fy * img.at(x0 + 1, y0 + 1, channel);
  return true;
}

void image_gradients(const ImageBuffer& img, ImageBuffer& gx, ImageBuffer& gy) {
  const int w = img.width();
  const int h = img.height();
  const int c = img.channels();
  if (w < 3 || h < 3) throw ImageTooSmall("image_gradients needs at least 3x3");

  gx = ImageBuffer(w, h, c);
  gy = ImageBuffer(w, h, c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) {
        if (x == 0) {
          gx.at(x, y, k) = img.at(1, y, k) - img.at(0, y, k);
        } else if (x == w - 1) {
          gx.at(x, y, k) = img.at(w - 1, y, k) - img.at(w - 2, y, k);
        } else {
          gx.at(x, y, k) = 0.5f * (img.at(x + 1, y, k) - img.at(x - 1, y, k));
        }
        if (y == 0) {
          gy.at(x, y, k) = img.at(x, 1, k) - img.at(x, 0, k);
        } else if (y == h - 1) {
          gy.at(x, y, k) = img.at(x, h - 1, k) - img.at(x, h - 2, k);
        } else {
          gy.at(x, y, k) = 0.5f * (img.at(x, y + 1, k) - img.at(x, y - 1, k));
        }
      }
    }
  }
}

ImageBuffer downsample2x(const ImageBuffer& img) {
  const int w = img.width();
  const int h = img.height();
  const int c = img.channels();
  if (w < 2 || h < 2) throw ImageTooSmall("downsample2x needs at least 2x2");

  ImageBuffer out(w / 2, h / 2, c);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      for (int k = 0; k < c; ++k) {
        const double sum = img.at(2 * x, 2 * y, k) + img.at(2 * x + 1, 2 * y, k) +
                           img.at(2 * x, 2 * y + 1, k) +
                           img.at(2 * x + 1, 2 * y + 1, k);
        out.at(x, y, k) = static_cast<float>(0.25 * sum);
      }
    }
  }
  return out;
}

ImageBuffer downsample2x_valid(const ImageBuffer& img) {
  const int w = img.width();
  const int h = img.height();
  const int c = img.channels();
  if (w < 2 || h < 2) throw ImageTooSmall("downsample2x needs at least 2x2");

  ImageBuffer out(w / 2, h / 2, c);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      for (int k = 0; k < c; ++k) {
        double sum = 0.0;
        int n = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const float v = img.at(2 * x + dx, 2 * y + dy, k);
            if (v != 0.0f) {
              sum += v;
              ++n;
            }
          }
        }
        out.at(x, y, k) = n > 0 ? static_cast<float>(sum / n) : 0.0f;
      }
    }
  }
  return out;
}

ImageBuffer box_blur3(const ImageBuffer& img) {
  const int w = img.width();
  const int h = img.height();
  const int c = img.channels();
  ImageBuffer out(w, h, c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) {
        double sum = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = std::clamp(x + dx, 0, w - 1);
            const int yy = std::clamp(y + dy, 0, h - 1);
            sum += img.at(xx, yy, k);
          }
        }
        out.at(x, y, k) = static_cast<float>(sum / 9.0);
      }
    }
  }
  return out;
}

}  // namespace fmreg
