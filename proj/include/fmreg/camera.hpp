#pragma once

#include <Eigen/Core>
#include <optional>

#include "fmreg/se3.hpp"

namespace fmreg {

/// Pinhole intrinsics. Pixel (x, y) refers to the center of the sample
/// at integer coordinates; valid continuous coordinates span
/// [0, width-1] x [0, height-1].
struct PinholeCamera {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  bool is_valid() const {
    return fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx >= 0.0 &&
           cx < width && cy >= 0.0 && cy < height;
  }
};

constexpr double kMinProjectDepth = 1e-6;

/// Perspective projection. Empty when p.z <= 1e-6 (behind the camera).
inline std::optional<Eigen::Vector2d> project(const PinholeCamera& cam,
                                              const Eigen::Vector3d& p) {
  if (p.z() <= kMinProjectDepth) return std::nullopt;
  const double inv_z = 1.0 / p.z();
  return Eigen::Vector2d(cam.fx * p.x() * inv_z + cam.cx,
                         cam.fy * p.y() * inv_z + cam.cy);
}

/// Back-projection of pixel u at depth d (camera-frame z, meters).
/// Requires d > 0.
inline Eigen::Vector3d unproject(const PinholeCamera& cam,
                                 const Eigen::Vector2d& u, double d) {
  return Eigen::Vector3d((u.x() - cam.cx) * d / cam.fx,
                         (u.y() - cam.cy) * d / cam.fy, d);
}

/**
 * Intrinsics of pyramid level `level` (0 = full resolution). Focal
 * lengths halve per level; the principal point follows the
 * pixel-center convention c -> (c + 0.5) / 2 - 0.5 so that warps stay
 * consistent across levels to sub-pixel accuracy.
 */
PinholeCamera scale_camera(const PinholeCamera& cam, int level);

enum class WarpStatus { kOk, kInvalidDepth, kBehindCamera, kOutOfBounds };

struct WarpResult {
  WarpStatus status = WarpStatus::kOk;
  Eigen::Vector2d uv = Eigen::Vector2d::Zero();
  bool ok() const { return status == WarpStatus::kOk; }
};

/**
 * Reprojects reference pixel u with depth d into the query image:
 * u' = project(query_cam, t_qr * unproject(ref_cam, u, d)).
 * Reports why a pixel is unusable instead of throwing; warp failures
 * are ordinary control flow in residual assembly.
 */
WarpResult warp_pixel(const PinholeCamera& ref_cam,
                      const PinholeCamera& query_cam, const SE3& t_qr,
                      const Eigen::Vector2d& u, double d);

}  // namespace fmreg
