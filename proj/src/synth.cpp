#include "fmreg/synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>

namespace fmreg {

namespace {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline double lattice(int ix, int iy, uint64_t seed) {
  uint64_t h = splitmix64(seed ^ (static_cast<uint64_t>(static_cast<uint32_t>(ix)) |
                                  (static_cast<uint64_t>(static_cast<uint32_t>(iy)) << 32)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double fade(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise_octave(double s, double t, uint64_t seed) {
  const double fs = std::floor(s);
  const double ft = std::floor(t);
  const int ix = static_cast<int>(fs);
  const int iy = static_cast<int>(ft);
  const double u = fade(s - fs);
  const double v = fade(t - ft);
  const double v00 = lattice(ix, iy, seed);
  const double v10 = lattice(ix + 1, iy, seed);
  const double v01 = lattice(ix, iy + 1, seed);
  const double v11 = lattice(ix + 1, iy + 1, seed);
  return (1.0 - u) * (1.0 - v) * v00 + u * (1.0 - v) * v10 +
         (1.0 - u) * v * v01 + u * v * v11;
}

Eigen::Vector3d random_unit_vector(std::mt19937_64& rng) {
  const double z = 2.0 * uniform01(rng) - 1.0;
  const double phi = 2.0 * M_PI * uniform01(rng);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return Eigen::Vector3d(r * std::cos(phi), r * std::sin(phi), z);
}

struct Hit {
  double t = -1.0;
  int class_id = kBackgroundClass;
  double albedo = 0.0;
  bool valid() const { return t > 0.0; }
};

constexpr double kNearClip = 0.05;

bool intersect_plane(const ScenePlane& pl, const Eigen::Vector3d& origin,
                     const Eigen::Vector3d& dir, Hit* hit) {
  const double denom = dir.dot(pl.normal);
  if (std::abs(denom) < 1e-12) return false;
  const double t = (pl.center - origin).dot(pl.normal) / denom;
  if (t <= kNearClip) return false;
  const Eigen::Vector3d p = origin + t * dir;
  const Eigen::Vector3d rel = p - pl.center;
  const double s1 = rel.dot(pl.e1);
  const double s2 = rel.dot(pl.e2);
  if (std::abs(s1) > pl.half1 || std::abs(s2) > pl.half2) return false;
  hit->t = t;
  hit->class_id = pl.class_id;
  const double n = value_noise(s1 * pl.tex_freq, s2 * pl.tex_freq, pl.tex_seed, pl.octaves);
  hit->albedo = pl.albedo_lo + (pl.albedo_hi - pl.albedo_lo) * n;
  return true;
}

bool intersect_box(const SceneBox& box, double time,
                   const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                   Hit* hit) {
  const Eigen::Vector3d c = box.center0 + time * box.velocity;
  double t_enter = -1e30;
  double t_exit = 1e30;
  int enter_axis = -1;
  for (int a = 0; a < 3; ++a) {
    const double o = origin[a] - c[a];
    const double d = dir[a];
    const double h = box.half_size[a];
    if (std::abs(d) < 1e-12) {
      if (std::abs(o) > h) return false;
      continue;
    }
    double t0 = (-h - o) / d;
    double t1 = (h - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_enter) {
      t_enter = t0;
      enter_axis = a;
    }
    t_exit = std::min(t_exit, t1);
    if (t_enter > t_exit) return false;
  }
  if (t_enter <= kNearClip || enter_axis < 0) return false;
  const Eigen::Vector3d p = origin + t_enter * dir - c;  // box-local hit
  const int a1 = (enter_axis + 1) % 3;
  const int a2 = (enter_axis + 2) % 3;
  hit->t = t_enter;
  hit->class_id = kDistractorClass;
  const double n =
      value_noise(p[a1] * box.tex_freq, p[a2] * box.tex_freq, box.tex_seed, box.octaves);
  hit->albedo = box.albedo_lo + (box.albedo_hi - box.albedo_lo) * n;
  return true;
}

Hit cast_ray(const Scene& scene, double time, const Eigen::Vector3d& origin,
             const Eigen::Vector3d& dir) {
  Hit best;
  best.t = 1e30;
  bool any = false;
  Hit h;
  for (const ScenePlane& pl : scene.planes) {
    if (intersect_plane(pl, origin, dir, &h) && h.t < best.t) {
      best = h;
      any = true;
    }
  }
  for (const SceneBox& box : scene.boxes) {
    if (intersect_box(box, time, origin, dir, &h) && h.t < best.t) {
      best = h;
      any = true;
    }
  }
  if (!any) best.t = -1.0;
  return best;
}

}  // namespace

double value_noise(double s, double t, uint64_t seed, int octaves) {
  double sum = 0.0;
  double amp = 1.0;
  double total = 0.0;
  double freq = 1.0;
  for (int o = 0; o < octaves; ++o) {
    sum += amp * value_noise_octave(s * freq, t * freq, seed + 0x517CC1B7ull * o);
    total += amp;
    amp *= 0.5;
    freq *= 2.0;
  }
  return sum / total;
}

double gaussian(std::mt19937_64& rng) {
  const double u1 = std::max(uniform01(rng), 1e-300);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

void SceneConfig::validate() const {
  if (width < 16 || height < 16) throw DegenerateConfig("image size too small");
  if (plane_count < 1) throw DegenerateConfig("plane_count must be >= 1");
  if (distractor_count < 0) throw DegenerateConfig("distractor_count negative");
  if (texture_octaves < 1 || texture_octaves > 10) {
    throw DegenerateConfig("texture_octaves out of range");
  }
  for (const Range* r :
       {&plane_extent, &distractor_size, &distractor_speed, &gain, &bias,
        &baseline, &query_offset_translation, &query_offset_rotation}) {
    if (!r->valid()) throw DegenerateConfig("invalid range (lo > hi or non-finite)");
  }
  if (plane_extent.lo <= 0.0 || distractor_size.lo <= 0.0) {
    throw DegenerateConfig("sizes must be positive");
  }
  if (depth_noise_sigma < 0.0) throw DegenerateConfig("depth_noise_sigma negative");
  if (!(min_overlap > 0.0 && min_overlap <= 1.0)) {
    throw DegenerateConfig("min_overlap must be in (0, 1]");
  }
  if (baseline.lo < 0.0 || query_offset_translation.lo < 0.0 ||
      query_offset_rotation.lo < 0.0) {
    throw DegenerateConfig("pose offset ranges must be non-negative");
  }
}

PinholeCamera SceneConfig::camera() const {
  PinholeCamera cam;
  cam.width = width;
  cam.height = height;
  cam.fx = 0.75 * width;
  cam.fy = cam.fx;
  cam.cx = 0.5 * (width - 1);
  cam.cy = 0.5 * (height - 1);
  return cam;
}

Scene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  Scene scene;
  scene.config = cfg;
  std::mt19937_64 rng(cfg.seed);

  // Background: a large wall normal to the optical axis. Sized so both
  // reference and query frusta stay covered for the configured offsets.
  {
    ScenePlane bg;
    const double z = 7.0 + 2.0 * uniform01(rng);
    bg.center = Eigen::Vector3d(0.0, 0.0, z);
    bg.normal = Eigen::Vector3d(0, 0, -1);
    bg.e1 = Eigen::Vector3d(1, 0, 0);
    bg.e2 = Eigen::Vector3d(0, 1, 0);
    bg.half1 = 1.4 * z;
    bg.half2 = 1.1 * z;
    bg.tex_seed = splitmix64(cfg.seed ^ 0xB0ull);
    bg.albedo_lo = 0.08 + 0.06 * uniform01(rng);
    bg.albedo_hi = 0.52 + 0.14 * uniform01(rng);
    // Far surface: keep the finest octave's wavelength a few pixels
    // even at coarse render resolutions.
    bg.tex_freq = 0.30 + 0.20 * uniform01(rng);
    bg.octaves = cfg.texture_octaves;
    bg.class_id = kFirstPlaneClass;
    scene.planes.push_back(bg);
  }

  for (int i = 1; i < cfg.plane_count; ++i) {
    ScenePlane pl;
    pl.center = Eigen::Vector3d(-3.0 + 6.0 * uniform01(rng),
                                -2.0 + 4.0 * uniform01(rng),
                                3.5 + 2.5 * uniform01(rng));
    // Mostly camera-facing with a random tilt up to ~35 degrees.
    Eigen::Vector3d n(0.7 * (2.0 * uniform01(rng) - 1.0),
                      0.7 * (2.0 * uniform01(rng) - 1.0), -1.0);
    pl.normal = n.normalized();
    const Eigen::Vector3d up =
        std::abs(pl.normal.y()) < 0.9 ? Eigen::Vector3d(0, 1, 0) : Eigen::Vector3d(1, 0, 0);
    pl.e1 = up.cross(pl.normal).normalized();
    pl.e2 = pl.normal.cross(pl.e1);
    pl.half1 = 0.5 * uniform_in(rng, cfg.plane_extent);
    pl.half2 = 0.5 * uniform_in(rng, cfg.plane_extent);
    pl.tex_seed = splitmix64(cfg.seed ^ (0xA000ull + i));
    pl.albedo_lo = 0.08 + 0.10 * uniform01(rng);
    pl.albedo_hi = 0.52 + 0.16 * uniform01(rng);
    pl.tex_freq = 0.45 + 0.35 * uniform01(rng);
    pl.octaves = cfg.texture_octaves;
    pl.class_id = kFirstPlaneClass + i;
    scene.planes.push_back(pl);
  }

  for (int i = 0; i < cfg.distractor_count; ++i) {
    SceneBox box;
    box.center0 = Eigen::Vector3d(-2.5 + 5.0 * uniform01(rng),
                                  -1.5 + 3.0 * uniform01(rng),
                                  2.5 + 2.5 * uniform01(rng));
    box.half_size = 0.5 * Eigen::Vector3d(uniform_in(rng, cfg.distractor_size),
                                          uniform_in(rng, cfg.distractor_size),
                                          uniform_in(rng, cfg.distractor_size));
    Eigen::Vector3d dir = random_unit_vector(rng);
    dir.y() *= 0.4;  // mostly lateral motion
    dir.z() *= 0.25;
    if (dir.norm() < 1e-9) dir = Eigen::Vector3d(1, 0, 0);
    box.velocity = dir.normalized() * uniform_in(rng, cfg.distractor_speed);
    box.tex_seed = splitmix64(cfg.seed ^ (0xD000ull + i));
    box.albedo_lo = 0.72 + 0.05 * uniform01(rng);
    box.albedo_hi = 0.90 + 0.08 * uniform01(rng);
    box.tex_freq = 1.2 + 0.8 * uniform01(rng);
    box.octaves = std::min(cfg.texture_octaves, 3);
    scene.boxes.push_back(box);
  }

  return scene;
}

RenderedFrame render_frame(const Scene& scene, const SE3& t_world_cam,
                           const PinholeCamera& cam, double time, double gain,
                           double bias) {
  RenderedFrame frame;
  frame.image = ImageBuffer(cam.width, cam.height, 1);
  frame.depth = ImageBuffer(cam.width, cam.height, 1);
  frame.segmentation = ImageBuffer(cam.width, cam.height, 1);

  const Eigen::Vector3d origin = t_world_cam.translation();
  const Eigen::Matrix3d rot = t_world_cam.rotation();
  // 3x3 supersampling for the intensity channel keeps fine texture from
  // aliasing at small render resolutions. Depth and class come from the
  // center ray only: averaging across a silhouette would fabricate 3D
  // points that lie on no surface.
  constexpr int kSub = 3;
  constexpr double kSubOffset[kSub] = {-1.0 / 3.0, 0.0, 1.0 / 3.0};
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      double albedo_acc = 0.0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          // dir has unit z in the camera frame, so the ray parameter at
          // the hit equals the camera-frame depth.
          const Eigen::Vector3d dir_cam((x + kSubOffset[sx] - cam.cx) / cam.fx,
                                        (y + kSubOffset[sy] - cam.cy) / cam.fy,
                                        1.0);
          const Hit hit = cast_ray(scene, time, origin, rot * dir_cam);
          if (hit.valid()) albedo_acc += hit.albedo;
          if (sx == 1 && sy == 1 && hit.valid()) {
            frame.depth.at(x, y) = static_cast<float>(hit.t);
            frame.segmentation.at(x, y) = static_cast<float>(hit.class_id);
          }
        }
      }
      frame.image.at(x, y) = static_cast<float>(
          std::clamp(gain * albedo_acc / (kSub * kSub) + bias, 0.0, 1.0));
    }
  }
  return frame;
}

ImageBuffer render_depth(const Scene& scene, const SE3& t_world_cam,
                         const PinholeCamera& cam, double time) {
  ImageBuffer depth(cam.width, cam.height, 1);
  const Eigen::Vector3d origin = t_world_cam.translation();
  const Eigen::Matrix3d rot = t_world_cam.rotation();
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Eigen::Vector3d dir_cam((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
      const Hit hit = cast_ray(scene, time, origin, rot * dir_cam);
      if (hit.valid()) depth.at(x, y) = static_cast<float>(hit.t);
    }
  }
  return depth;
}

void sequence_photometrics(const Scene& scene, int seq, double* gain,
                           double* bias) {
  std::mt19937_64 rng(splitmix64(scene.config.seed ^ (0x5E0ull + 7ull * seq)));
  *gain = uniform_in(rng, scene.config.gain);
  *bias = uniform_in(rng, scene.config.bias);
}

double distractor_fraction(const ImageBuffer& segmentation) {
  size_t n = 0;
  for (float v : segmentation.data()) {
    if (static_cast<int>(v) == kDistractorClass) ++n;
  }
  return static_cast<double>(n) / segmentation.size();
}

namespace {

// Fraction of valid-depth reference pixels whose reprojection lands in
// the query frustum.
double overlap_fraction(const ImageBuffer& ref_depth, const PinholeCamera& cam,
                        const SE3& t_q_r) {
  int valid = 0;
  int inside = 0;
  for (int y = 0; y < ref_depth.height(); ++y) {
    for (int x = 0; x < ref_depth.width(); ++x) {
      const double d = ref_depth.at(x, y);
      if (d <= 0.0) continue;
      ++valid;
      if (warp_pixel(cam, cam, t_q_r, Eigen::Vector2d(x, y), d).ok()) ++inside;
    }
  }
  if (valid == 0) return 0.0;
  return static_cast<double>(inside) / valid;
}

SE3 sample_pose_offset(std::mt19937_64& rng, double translation,
                       double rotation_angle, bool lateral_bias) {
  Eigen::Vector3d dir = random_unit_vector(rng);
  if (lateral_bias) {
    dir.z() *= 0.35;
    if (dir.norm() < 1e-9) dir = Eigen::Vector3d(1, 0, 0);
    dir.normalize();
  }
  const Eigen::Vector3d axis = random_unit_vector(rng);
  return SE3::exp(Twist(translation * dir, rotation_angle * axis));
}

}  // namespace

void invalidate_depth_discontinuities(ImageBuffer& depth) {
  const int w = depth.width();
  const int h = depth.height();
  std::vector<uint8_t> edge(static_cast<size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float d = depth.at(x, y);
      if (d <= 0.0f) {
        edge[static_cast<size_t>(y) * w + x] = 1;
        continue;
      }
      const float jump = std::max(0.03f, 0.03f * d);
      auto differs = [&](int xx, int yy) {
        const float dn = depth.at(xx, yy);
        return dn <= 0.0f || std::abs(dn - d) > jump;
      };
      if ((x > 0 && differs(x - 1, y)) || (x + 1 < w && differs(x + 1, y)) ||
          (y > 0 && differs(x, y - 1)) || (y + 1 < h && differs(x, y + 1))) {
        edge[static_cast<size_t>(y) * w + x] = 1;
      }
    }
  }
  // Dilate by 2: the supersampled intensity and bilinear sampling mix
  // surfaces within ~2 px of a silhouette, so those pixels get no depth.
  constexpr int kRadius = 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool near_edge = false;
      for (int dy = -kRadius; dy <= kRadius && !near_edge; ++dy) {
        for (int dx = -kRadius; dx <= kRadius && !near_edge; ++dx) {
          const int xx = x + dx;
          const int yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          if (edge[static_cast<size_t>(yy) * w + xx]) near_edge = true;
        }
      }
      if (near_edge) depth.at(x, y) = 0.0f;
    }
  }
}

FrameTriplet make_triplet(const Scene& scene, uint64_t seed, int ref_seq,
                          int query_seq) {
  const SceneConfig& cfg = scene.config;
  const PinholeCamera cam = cfg.camera();
  std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(seed + 0x7157ull)));

  const double t_r0 = 4.0 * ref_seq;
  const double t_r1 = t_r0 + 1.0;
  const double t_q = 4.0 * query_seq + 2.0;

  SE3 pose_r0, pose_r1, pose_q;
  ImageBuffer depth_r0, depth_r1;
  bool found = false;
  for (int attempt = 0; attempt < 100 && !found; ++attempt) {
    // Base viewpoint near the origin looking down +z.
    const Eigen::Vector3d base_pos(-1.0 + 2.0 * uniform01(rng),
                                   -0.6 + 1.2 * uniform01(rng),
                                   -0.5 + 1.0 * uniform01(rng));
    const Eigen::Vector3d base_axis = random_unit_vector(rng);
    const double base_angle = 0.05 * uniform01(rng);
    pose_r0 = SE3(SE3::exp(Twist(Eigen::Vector3d::Zero(), base_angle * base_axis))
                      .rotation(),
                  base_pos);

    const SE3 baseline_offset =
        sample_pose_offset(rng, uniform_in(rng, cfg.baseline),
                           0.05 * uniform01(rng), true);
    pose_r1 = pose_r0 * baseline_offset;

    const SE3 query_offset = sample_pose_offset(
        rng, uniform_in(rng, cfg.query_offset_translation),
        uniform_in(rng, cfg.query_offset_rotation), true);
    pose_q = pose_r0 * query_offset;

    depth_r0 = render_depth(scene, pose_r0, cam, t_r0);
    depth_r1 = render_depth(scene, pose_r1, cam, t_r1);

    const SE3 t_q_r0 = pose_q.inverse() * pose_r0;
    const SE3 t_q_r1 = pose_q.inverse() * pose_r1;
    found = overlap_fraction(depth_r0, cam, t_q_r0) >= cfg.min_overlap &&
            overlap_fraction(depth_r1, cam, t_q_r1) >= cfg.min_overlap;
  }
  if (!found) throw OverlapUnsatisfied();

  double gain_ref, bias_ref, gain_query, bias_query;
  sequence_photometrics(scene, ref_seq, &gain_ref, &bias_ref);
  sequence_photometrics(scene, query_seq, &gain_query, &bias_query);

  FrameTriplet triplet;
  triplet.ref_seq = ref_seq;
  triplet.query_seq = query_seq;

  auto fill = [&](Frame& f, const SE3& pose, double time, double g, double b) {
    RenderedFrame r = render_frame(scene, pose, cam, time, g, b);
    f.image = std::move(r.image);
    f.depth = std::move(r.depth);
    f.segmentation = std::move(r.segmentation);
    f.camera = cam;
    f.t_world_cam = pose;
    f.gain = g;
    f.bias = b;
    f.time = time;
  };
  fill(triplet.r0, pose_r0, t_r0, gain_ref, bias_ref);
  fill(triplet.r1, pose_r1, t_r1, gain_ref, bias_ref);
  fill(triplet.q, pose_q, t_q, gain_query, bias_query);

  // Reference depth emulates stereo-matching output: no depth across
  // silhouettes and occlusions.
  invalidate_depth_discontinuities(triplet.r0.depth);
  invalidate_depth_discontinuities(triplet.r1.depth);

  if (cfg.depth_noise_sigma > 0.0) {
    for (Frame* f : {&triplet.r0, &triplet.r1}) {
      for (float& d : f->depth.data()) {
        if (d > 0.0f) {
          d = static_cast<float>(
              std::max(0.05, d + cfg.depth_noise_sigma * gaussian(rng)));
        }
      }
    }
  }

  triplet.that_r0_r1 = pose_r0.inverse() * pose_r1;
  triplet.gt_t_q_r0 = pose_q.inverse() * pose_r0;
  return triplet;
}

}  // namespace fmreg
