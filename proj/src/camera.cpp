#include "fmreg/camera.hpp"

namespace fmreg {

PinholeCamera scale_camera(const PinholeCamera& cam, int level) {
  PinholeCamera out = cam;
  for (int l = 0; l < level; ++l) {
    out.fx *= 0.5;
    out.fy *= 0.5;
    out.cx = (out.cx + 0.5) * 0.5 - 0.5;
    out.cy = (out.cy + 0.5) * 0.5 - 0.5;
    out.width /= 2;
    out.height /= 2;
  }
  return out;
}

WarpResult warp_pixel(const PinholeCamera& ref_cam,
                      const PinholeCamera& query_cam, const SE3& t_qr,
                      const Eigen::Vector2d& u, double d) {
  WarpResult res;
  if (d <= 0.0) {
    res.status = WarpStatus::kInvalidDepth;
    return res;
  }
  const Eigen::Vector3d p_query = t_qr * unproject(ref_cam, u, d);
  const auto uv = project(query_cam, p_query);
  if (!uv) {
    res.status = WarpStatus::kBehindCamera;
    return res;
  }
  if (uv->x() < 0.0 || uv->y() < 0.0 || uv->x() > query_cam.width - 1 ||
      uv->y() > query_cam.height - 1) {
    res.status = WarpStatus::kOutOfBounds;
    res.uv = *uv;
    return res;
  }
  res.uv = *uv;
  return res;
}

}  // namespace fmreg
