#include <doctest.h>

#include <random>

#include <Eigen/Dense>

#include "fmreg/camera.hpp"
#include "fmreg/image.hpp"
#include "fmreg/pyramid.hpp"
#include "fmreg/synth.hpp"

using namespace fmreg;

namespace {

PinholeCamera test_camera() {
  PinholeCamera cam;
  cam.fx = cam.fy = 100.0;
  cam.cx = 320.0;
  cam.cy = 192.0;
  cam.width = 640;
  cam.height = 384;
  return cam;
}

}  // namespace

TEST_SUITE("camera_image") {

TEST_CASE("project on the optical axis and off-axis") {
  const PinholeCamera cam = test_camera();
  auto uv = project(cam, Eigen::Vector3d(0, 0, 1));
  REQUIRE(uv.has_value());
  CHECK(uv->x() == doctest::Approx(320.0));
  CHECK(uv->y() == doctest::Approx(192.0));

  uv = project(cam, Eigen::Vector3d(1, 0, 2));
  REQUIRE(uv.has_value());
  CHECK(uv->x() == doctest::Approx(370.0));
  CHECK(uv->y() == doctest::Approx(192.0));

  CHECK_FALSE(project(cam, Eigen::Vector3d(0, 0, 0)).has_value());
  CHECK_FALSE(project(cam, Eigen::Vector3d(0, 0, -1)).has_value());
}

TEST_CASE("unproject basics") {
  const PinholeCamera cam = test_camera();
  CHECK((unproject(cam, {320, 192}, 5.0) - Eigen::Vector3d(0, 0, 5)).norm() < 1e-15);
  CHECK((unproject(cam, {420, 192}, 2.0) - Eigen::Vector3d(2, 0, 2)).norm() < 1e-15);
}

TEST_CASE("project/unproject round trip") {
  const PinholeCamera cam = test_camera();
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector3d p(4.0 * uniform01(rng) - 2.0,
                            2.0 * uniform01(rng) - 1.0,
                            0.5 + 5.0 * uniform01(rng));
    const auto uv = project(cam, p);
    REQUIRE(uv.has_value());
    CHECK((unproject(cam, *uv, p.z()) - p).norm() < 1e-9);
  }
}

TEST_CASE("bilinear sampling at integer and midpoint coordinates") {
  ImageBuffer img(4, 3, 1);
  img.at(1, 1) = 0.0f;
  img.at(2, 1) = 1.0f;
  double v = -1.0;
  CHECK(bilinear_sample(img, 2.0, 1.0, &v));
  CHECK(v == 1.0);
  CHECK(bilinear_sample(img, 1.5, 1.0, &v));
  CHECK(v == doctest::Approx(0.5));
  CHECK_FALSE(bilinear_sample(img, -0.1, 0.0, &v));
  CHECK_FALSE(bilinear_sample(img, 3.01, 0.0, &v));
}

TEST_CASE("bilinear sampling reproduces a ramp exactly") {
  ImageBuffer img(16, 12, 2);
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 16; ++x) {
      img.at(x, y, 0) = static_cast<float>(2 * x + 3 * y);
      img.at(x, y, 1) = static_cast<float>(x - y);
    }
  }
  std::mt19937_64 rng(9);
  double out[2];
  for (int i = 0; i < 200; ++i) {
    const double x = 15.0 * uniform01(rng);
    const double y = 11.0 * uniform01(rng);
    REQUIRE(bilinear_sample(img, x, y, out));
    CHECK(out[0] == doctest::Approx(2 * x + 3 * y).epsilon(1e-9));
    CHECK(out[1] == doctest::Approx(x - y).epsilon(1e-9));
  }
}

TEST_CASE("gradients of constant and ramp images") {
  ImageBuffer constant(8, 8, 1, 3.5f);
  ImageBuffer gx, gy;
  image_gradients(constant, gx, gy);
  for (float v : gx.data()) CHECK(v == 0.0f);
  for (float v : gy.data()) CHECK(v == 0.0f);

  ImageBuffer ramp(8, 8, 1);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) ramp.at(x, y) = 2.0f * x;
  image_gradients(ramp, gx, gy);
  for (int y = 0; y < 8; ++y)
    for (int x = 1; x < 7; ++x) CHECK(gx.at(x, y) == doctest::Approx(2.0));
}

TEST_CASE("gradients match a brute-force differencing oracle") {
  std::mt19937_64 rng(11);
  ImageBuffer img(9, 7, 2);
  for (float& v : img.data()) v = static_cast<float>(uniform01(rng));
  ImageBuffer gx, gy;
  image_gradients(img, gx, gy);
  for (int y = 0; y < 7; ++y) {
    for (int x = 0; x < 9; ++x) {
      for (int c = 0; c < 2; ++c) {
        const float ex =
            x == 0   ? img.at(1, y, c) - img.at(0, y, c)
            : x == 8 ? img.at(8, y, c) - img.at(7, y, c)
                     : 0.5f * (img.at(x + 1, y, c) - img.at(x - 1, y, c));
        const float ey =
            y == 0   ? img.at(x, 1, c) - img.at(x, 0, c)
            : y == 6 ? img.at(x, 6, c) - img.at(x, 5, c)
                     : 0.5f * (img.at(x, y + 1, c) - img.at(x, y - 1, c));
        CHECK(gx.at(x, y, c) == ex);
        CHECK(gy.at(x, y, c) == ey);
      }
    }
  }
  CHECK_THROWS_AS(image_gradients(ImageBuffer(2, 5, 1), gx, gy), ImageTooSmall);
}

TEST_CASE("downsample2x averages blocks") {
  ImageBuffer constant(4, 4, 1, 7.0f);
  const ImageBuffer half = downsample2x(constant);
  CHECK(half.width() == 2);
  CHECK(half.height() == 2);
  for (float v : half.data()) CHECK(v == 7.0f);

  ImageBuffer blk(2, 2, 1);
  blk.at(0, 0) = 0.0f;
  blk.at(1, 0) = 0.0f;
  blk.at(0, 1) = 2.0f;
  blk.at(1, 1) = 2.0f;
  CHECK(downsample2x(blk).at(0, 0) == 1.0f);
}

TEST_CASE("depth downsampling averages only valid entries") {
  ImageBuffer depth(2, 2, 1);
  depth.at(0, 0) = 0.0f;
  depth.at(1, 0) = 0.0f;
  depth.at(0, 1) = 4.0f;
  depth.at(1, 1) = 2.0f;
  CHECK(downsample2x_valid(depth).at(0, 0) == 3.0f);

  ImageBuffer holes(2, 2, 1, 0.0f);
  CHECK(downsample2x_valid(holes).at(0, 0) == 0.0f);
}

TEST_CASE("scale_camera halves intrinsics with the pixel-center convention") {
  PinholeCamera cam = test_camera();
  cam.fx = 400.0;
  CHECK(scale_camera(cam, 0).fx == 400.0);
  CHECK(scale_camera(cam, 2).fx == 100.0);
  CHECK(scale_camera(cam, 1).cx == doctest::Approx((cam.cx + 0.5) / 2 - 0.5));
  CHECK(scale_camera(cam, 2).width == 160);
}

TEST_CASE("projection consistency across pyramid levels") {
  const PinholeCamera cam = test_camera();
  std::mt19937_64 rng(15);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d p(3.0 * uniform01(rng) - 1.5,
                            1.5 * uniform01(rng) - 0.75,
                            1.0 + 6.0 * uniform01(rng));
    const auto uv0 = project(cam, p);
    REQUIRE(uv0.has_value());
    for (int level = 1; level <= 3; ++level) {
      const auto uvl = project(scale_camera(cam, level), p);
      REQUIRE(uvl.has_value());
      const double scale = 1 << level;
      CHECK(std::abs(uvl->x() - uv0->x() / scale) < 0.5);
      CHECK(std::abs(uvl->y() - uv0->y() / scale) < 0.5);
    }
  }
}

TEST_CASE("warp_pixel identity is the identity map") {
  const PinholeCamera cam = test_camera();
  const auto res = warp_pixel(cam, cam, SE3(), Eigen::Vector2d(123, 45), 3.0);
  REQUIRE(res.ok());
  CHECK((res.uv - Eigen::Vector2d(123, 45)).norm() < 1e-12);
}

TEST_CASE("warp_pixel error reporting") {
  const PinholeCamera cam = test_camera();
  CHECK(warp_pixel(cam, cam, SE3(), {10, 10}, 0.0).status == WarpStatus::kInvalidDepth);

  const SE3 behind(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, -10));
  CHECK(warp_pixel(cam, cam, behind, {320, 192}, 2.0).status ==
        WarpStatus::kBehindCamera);

  const SE3 shift(Eigen::Matrix3d::Identity(), Eigen::Vector3d(50, 0, 0));
  CHECK(warp_pixel(cam, cam, shift, {320, 192}, 2.0).status ==
        WarpStatus::kOutOfBounds);
}

TEST_CASE("warp_pixel matches the plane-induced homography oracle") {
  const PinholeCamera cam = test_camera();
  // Fronto-parallel plane z = Z in the reference frame; for points on
  // it the warp is the homography K (R + t n^T / Z) K^-1.
  const double z_plane = 5.0;
  const SE3 t_qr = SE3::exp(Twist(Eigen::Vector3d(0.2, -0.1, 0.3),
                                  Eigen::Vector3d(0.02, -0.03, 0.01)));
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = cam.fx;
  k(1, 1) = cam.fy;
  k(0, 2) = cam.cx;
  k(1, 2) = cam.cy;
  const Eigen::Matrix3d h =
      k *
      (t_qr.rotation() +
       t_qr.translation() * Eigen::Vector3d(0, 0, 1).transpose() / z_plane) *
      k.inverse();

  std::mt19937_64 rng(21);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector2d u(10 + 620 * uniform01(rng), 10 + 364 * uniform01(rng));
    const auto res = warp_pixel(cam, cam, t_qr, u, z_plane);
    if (!res.ok()) continue;
    const Eigen::Vector3d hu = h * Eigen::Vector3d(u.x(), u.y(), 1.0);
    CHECK((res.uv - hu.head<2>() / hu.z()).norm() < 1e-9);
  }
}

TEST_CASE("pure z-translation toward a plane moves pixels radially") {
  const PinholeCamera cam = test_camera();
  // Query camera 1 m closer to the plane: reference points lose 1 m of
  // depth in the query frame, so the image magnifies about the center.
  const SE3 forward(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, -1.0));
  for (const Eigen::Vector2d& u :
       {Eigen::Vector2d(100, 100), Eigen::Vector2d(500, 300),
        Eigen::Vector2d(320, 50)}) {
    const auto res = warp_pixel(cam, cam, forward, u, 5.0);
    REQUIRE(res.ok());
    const Eigen::Vector2d center(cam.cx, cam.cy);
    const Eigen::Vector2d before = u - center;
    const Eigen::Vector2d after = res.uv - center;
    // Moving toward the scene magnifies: displacement is radially
    // outward and proportional to the offset from the principal point.
    CHECK(after.norm() > before.norm());
    CHECK(before.normalized().dot(after.normalized()) == doctest::Approx(1.0));
  }
}

TEST_CASE("pyramid structure and saliency bounds") {
  std::mt19937_64 rng(25);
  PinholeCamera cam;
  cam.fx = cam.fy = 60.0;
  cam.cx = 39.5;
  cam.cy = 23.5;
  cam.width = 80;
  cam.height = 48;
  ImageBuffer features(80, 48, 3);
  ImageBuffer saliency(80, 48, 1);
  ImageBuffer depth(80, 48, 1);
  for (float& v : features.data()) v = static_cast<float>(uniform01(rng));
  for (float& v : saliency.data()) v = static_cast<float>(0.01 + 0.98 * uniform01(rng));
  for (float& v : depth.data()) v = uniform01(rng) < 0.1 ? 0.0f : static_cast<float>(1.0 + uniform01(rng));

  const FramePyramid pyr = build_pyramid(features, saliency, depth, cam);
  CHECK(pyramid_is_valid(pyr));
  CHECK(pyr.level(3).features.width() == 10);
  CHECK(pyr.level(3).features.height() == 6);
  CHECK(pyr.level(1).camera.fx == doctest::Approx(30.0));

  FramePyramid no_depth = build_pyramid(features, saliency, ImageBuffer(), cam);
  CHECK(pyramid_is_valid(no_depth));
  CHECK_FALSE(no_depth.level(0).has_depth());
}

}  // TEST_SUITE
