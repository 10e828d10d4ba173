#include <doctest.h>

#include <random>

#include "fmreg/features.hpp"
#include "fmreg/registration.hpp"
#include "test_scenes.hpp"

using namespace fmreg;

TEST_SUITE("features") {

TEST_CASE("handcrafted features of a constant image have flat gradient channels") {
  PinholeCamera cam;
  cam.fx = cam.fy = 60.0;
  cam.cx = 39.5;
  cam.cy = 23.5;
  cam.width = 80;
  cam.height = 48;
  const FramePyramid pyr =
      handcrafted_features(ImageBuffer(80, 48, 1, 0.25f), ImageBuffer(), cam);
  CHECK(pyramid_is_valid(pyr));
  for (int l = 0; l < kPyramidLevels; ++l) {
    const ImageBuffer& f = pyr.level(l).features;
    REQUIRE(f.channels() == 3);
    for (int y = 0; y < f.height(); ++y) {
      for (int x = 0; x < f.width(); ++x) {
        CHECK(f.at(x, y, 1) == f.at(0, 0, 1));  // |gx| constant (zero level)
        CHECK(f.at(x, y, 2) == f.at(0, 0, 2));
      }
    }
    for (float s : pyr.level(l).saliency.data()) CHECK(s == 0.5f);
  }
}

TEST_CASE("handcrafted features of a ramp have constant gradient channels") {
  PinholeCamera cam;
  cam.fx = cam.fy = 60.0;
  cam.cx = 31.5;
  cam.cy = 15.5;
  cam.width = 64;
  cam.height = 32;
  ImageBuffer ramp(64, 32, 1);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 64; ++x) ramp.at(x, y) = 0.01f * x;
  const FramePyramid pyr = handcrafted_features(ramp, ImageBuffer(), cam);
  const ImageBuffer& f = pyr.level(0).features;
  for (int y = 1; y < 31; ++y) {
    for (int x = 1; x < 63; ++x) {
      CHECK(f.at(x, y, 1) == doctest::Approx(f.at(1, 1, 1)));
    }
  }
}

TEST_CASE("three-channel input is converted to luminance") {
  PinholeCamera cam;
  cam.fx = cam.fy = 30.0;
  cam.cx = 15.5;
  cam.cy = 15.5;
  cam.width = 32;
  cam.height = 32;
  ImageBuffer rgb(32, 32, 3);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      rgb.at(x, y, 0) = 0.5f;
      rgb.at(x, y, 1) = 0.5f;
      rgb.at(x, y, 2) = 0.5f;
    }
  }
  const FramePyramid pyr = handcrafted_features(rgb, ImageBuffer(), cam);
  CHECK(pyr.level(0).features.at(7, 7, 0) ==
        doctest::Approx(0.02f + 0.96f * 0.5f));
  CHECK_THROWS_AS(handcrafted_features(ImageBuffer(32, 32, 2), ImageBuffer(), cam),
                  ShapeMismatch);
}

TEST_CASE("self-registration fixed point holds on handcrafted features") {
  const auto pair = fixtures::make_pair(71, SE3());
  RegistrationConfig cfg = fixtures::small_registration_config();
  const FramePyramid query = pair.ref;
  const RegistrationResult res = register_frames(pair.ref, query, cfg);
  REQUIRE(res.ok());
  CHECK(pose_error_l1(res.final_pose) < 1e-10);
}

TEST_CASE("head parameter flattening round trips and counts") {
  HeadParams p = HeadParams::random_init(6, 4, 99);
  CHECK(p.param_count() == 4 * (4 * 6 + 4 + 6 + 1));
  const Eigen::VectorXd theta = p.flatten();
  const HeadParams q = HeadParams::unflatten(theta, 6, 4);
  CHECK((q.flatten() - theta).norm() == 0.0);
  CHECK_THROWS_AS(HeadParams::unflatten(theta.head(10), 6, 4), ShapeMismatch);

  // The default-width head stays within the trainable budget.
  CHECK(HeadParams::zeros(6, 16).param_count() <= 2048);
}

TEST_CASE("locate_param identifies level, channel and saliency slices") {
  const HeadParams p = HeadParams::zeros(6, 4);
  const int per_level = 4 * 6 + 4 + 6 + 1;
  ParamCoord pc = locate_param(p, 0);
  CHECK(pc.level == 0);
  CHECK(pc.out_channel == 0);
  CHECK_FALSE(pc.saliency);

  pc = locate_param(p, 4 * 6 + 2);  // bias of channel 2
  CHECK(pc.out_channel == 2);
  CHECK_FALSE(pc.saliency);

  pc = locate_param(p, 4 * 6 + 4);  // first saliency weight
  CHECK(pc.saliency);

  pc = locate_param(p, per_level - 1);  // saliency bias
  CHECK(pc.saliency);
  CHECK(pc.level == 0);

  pc = locate_param(p, 3 * per_level + 5);
  CHECK(pc.level == 3);
}

TEST_CASE("head forward with zero params outputs 0.5 everywhere") {
  const auto pair = fixtures::make_pair(72, SE3());
  const BasePyramid base = make_base_pyramid(pair.ref_image, pair.ref_depth, pair.camera);
  REQUIRE(base.in_channels() == 6);
  const HeadParams zeros = HeadParams::zeros(6, 4);
  const FramePyramid pyr = head_forward(zeros, base);
  CHECK(pyramid_is_valid(pyr));
  for (int l = 0; l < kPyramidLevels; ++l) {
    for (float v : pyr.level(l).features.data()) CHECK(v == 0.5f);
    for (float v : pyr.level(l).saliency.data()) CHECK(v == 0.5f);
  }
  CHECK(pyr.level(0).has_depth());
}

TEST_CASE("large saliency bias saturates toward one") {
  const auto pair = fixtures::make_pair(73, SE3());
  const BasePyramid base = make_base_pyramid(pair.ref_image, pair.ref_depth, pair.camera);
  HeadParams p = HeadParams::zeros(6, 4);
  for (auto& lv : p.levels) lv.b_sal = 10.0;
  const FramePyramid pyr = head_forward(p, base);
  for (int l = 0; l < kPyramidLevels; ++l) {
    for (float v : pyr.level(l).saliency.data()) {
      CHECK(v > 1.0f - 1e-4f);
      CHECK(v < 1.0f);  // still strictly inside (0,1)
    }
  }
}

TEST_CASE("head forward matches a per-pixel scalar oracle") {
  const auto pair = fixtures::make_pair(74, SE3());
  const BasePyramid base = make_base_pyramid(pair.ref_image, pair.ref_depth, pair.camera);
  const HeadParams p = HeadParams::random_init(6, 4, 1234);
  const FramePyramid pyr = head_forward(p, base);

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const int l = static_cast<int>(rng() % kPyramidLevels);
    const ImageBuffer& x = base.channels[l];
    const int px = static_cast<int>(rng() % x.width());
    const int py = static_cast<int>(rng() % x.height());
    const int c = static_cast<int>(rng() % 4);

    double acc = p.levels[l].b_feat(c);
    for (int k = 0; k < 6; ++k) acc += p.levels[l].w_feat(c, k) * x.at(px, py, k);
    const double expected = 1.0 / (1.0 + std::exp(-acc));
    CHECK(pyr.level(l).features.at(px, py, c) ==
          doctest::Approx(expected).epsilon(1e-6));

    double sacc = p.levels[l].b_sal;
    for (int k = 0; k < 6; ++k) sacc += p.levels[l].w_sal(k) * x.at(px, py, k);
    CHECK(pyr.level(l).saliency.at(px, py) ==
          doctest::Approx(1.0 / (1.0 + std::exp(-sacc))).epsilon(1e-6));
  }
}

TEST_CASE("partial channel/saliency recompute agrees with the full pass") {
  const auto pair = fixtures::make_pair(75, SE3());
  const BasePyramid base = make_base_pyramid(pair.ref_image, pair.ref_depth, pair.camera);
  HeadParams p = HeadParams::random_init(6, 4, 77);
  FramePyramid pyr = head_forward(p, base);

  p.levels[2].w_feat(1, 3) += 0.25;
  p.levels[2].b_sal -= 0.5;
  const FramePyramid full = head_forward(p, base);
  head_forward_feature_channel(p, base, 2, 1, pyr.level(2).features);
  head_forward_saliency(p, base, 2, pyr.level(2).saliency);

  CHECK(pyr.level(2).features.data() == full.level(2).features.data());
  CHECK(pyr.level(2).saliency.data() == full.level(2).saliency.data());
  CHECK(pyr.level(1).features.data() == head_forward(p, base).level(1).features.data());

  CHECK_THROWS_AS(head_forward(HeadParams::zeros(5, 4), base), ShapeMismatch);
}

TEST_CASE("head outputs stay strictly inside the unit interval") {
  const auto pair = fixtures::make_pair(76, SE3());
  const BasePyramid base = make_base_pyramid(pair.ref_image, pair.ref_depth, pair.camera);
  HeadParams p = HeadParams::zeros(6, 2);
  for (auto& lv : p.levels) {
    lv.b_feat.setConstant(500.0);  // would saturate to exactly 1 in float
    lv.b_sal = -500.0;
  }
  const FramePyramid pyr = head_forward(p, base);
  for (int l = 0; l < kPyramidLevels; ++l) {
    for (float v : pyr.level(l).features.data()) CHECK(v < 1.0f);
    for (float v : pyr.level(l).saliency.data()) CHECK(v > 0.0f);
  }
  CHECK(pyramid_is_valid(pyr));
}

}  // TEST_SUITE
