#include "fmreg/registration.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace fmreg {

namespace {

// One implementation feeds both the full per-level build and the
// single-channel refresh so that cached and recomputed Jacobians are
// bit-identical; the training-time fast path relies on that.

// Central differences in the interior, one-sided at borders, in double.
inline void feature_gradient(const ImageBuffer& feat, int x, int y, int channel,
                             double* gxv, double* gyv) {
  const int w = feat.width();
  const int h = feat.height();
  if (x == 0) {
    *gxv = static_cast<double>(feat.at(1, y, channel)) - feat.at(0, y, channel);
  } else if (x == w - 1) {
    *gxv = static_cast<double>(feat.at(w - 1, y, channel)) - feat.at(w - 2, y, channel);
  } else {
    *gxv = 0.5 * (static_cast<double>(feat.at(x + 1, y, channel)) -
                  feat.at(x - 1, y, channel));
  }
  if (y == 0) {
    *gyv = static_cast<double>(feat.at(x, 1, channel)) - feat.at(x, 0, channel);
  } else if (y == h - 1) {
    *gyv = static_cast<double>(feat.at(x, h - 1, channel)) - feat.at(x, h - 2, channel);
  } else {
    *gyv = 0.5 * (static_cast<double>(feat.at(x, y + 1, channel)) -
                  feat.at(x, y - 1, channel));
  }
}

// A = d(project)/dp * d(exp(delta) p)/d(delta) at delta = 0, with
// d(exp(delta) p)/d(delta) = [ I | -skew(p) ]; split into its two rows.
inline void warp_jacobian_rows(const PinholeCamera& cam,
                               const Eigen::Vector3d& p, double* ax,
                               double* ay) {
  const double inv_z = 1.0 / p.z();
  const double fxz = cam.fx * inv_z;
  const double fyz = cam.fy * inv_z;
  const double a02 = -fxz * p.x() * inv_z;
  const double a12 = -fyz * p.y() * inv_z;
  ax[0] = fxz;
  ax[1] = 0.0;
  ax[2] = a02;
  ax[3] = a02 * p.y();
  ax[4] = fxz * p.z() - a02 * p.x();
  ax[5] = -fxz * p.y();
  ay[0] = 0.0;
  ay[1] = fyz;
  ay[2] = a12;
  ay[3] = -fyz * p.z() + a12 * p.y();
  ay[4] = -a12 * p.x();
  ay[5] = fyz * p.x();
}

inline void fill_channel_row(const ImageBuffer& feat, int x, int y, int channel,
                             const double* ax, const double* ay, double* jrow) {
  double gxv, gyv;
  feature_gradient(feat, x, y, channel, &gxv, &gyv);
  for (int j = 0; j < 6; ++j) jrow[j] = gxv * ax[j] + gyv * ay[j];
}

inline void rebuild_gram(const double* jbase, int channels, double* g) {
  int idx = 0;
  for (int r = 0; r < 6; ++r) {
    for (int col = 0; col <= r; ++col) {
      double acc = 0.0;
      for (int k = 0; k < channels; ++k) {
        acc += jbase[k * 6 + r] * jbase[k * 6 + col];
      }
      g[idx++] = acc;
    }
  }
}

}  // namespace

LevelJacobians compute_level_jacobians(const PyramidLevel& ref) {
  if (!ref.has_depth()) {
    throw std::invalid_argument("registration: reference level has no depth");
  }
  const ImageBuffer& feat = ref.features;
  const int w = feat.width();
  const int h = feat.height();
  const int c = feat.channels();
  const PinholeCamera& cam = ref.camera;

  LevelJacobians out;
  out.channels = c;
  out.px.reserve(static_cast<size_t>(w) * h);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d = ref.depth.at(x, y);
      if (d <= 0.0) continue;

      const Eigen::Vector3d p = unproject(cam, Eigen::Vector2d(x, y), d);
      double ax[6], ay[6];
      warp_jacobian_rows(cam, p, ax, ay);

      const size_t base = out.jac.size();
      out.jac.resize(base + static_cast<size_t>(c) * 6);
      for (int k = 0; k < c; ++k) {
        fill_channel_row(feat, x, y, k, ax, ay, out.jac.data() + base + k * 6);
      }
      const size_t gbase = out.gram.size();
      out.gram.resize(gbase + 21);
      rebuild_gram(out.jac.data() + base, c, out.gram.data() + gbase);

      out.px.push_back(x);
      out.py.push_back(y);
      out.point.push_back(p);
    }
  }
  return out;
}

void update_level_jacobians_channel(LevelJacobians& jacs,
                                    const PyramidLevel& ref, int channel) {
  const ImageBuffer& feat = ref.features;
  const int c = jacs.channels;
  const PinholeCamera& cam = ref.camera;

  const size_t n = jacs.size();
  for (size_t i = 0; i < n; ++i) {
    double ax[6], ay[6];
    warp_jacobian_rows(cam, jacs.point[i], ax, ay);
    double* jbase = jacs.jac.data() + i * static_cast<size_t>(c) * 6;
    fill_channel_row(feat, jacs.px[i], jacs.py[i], channel, ax, ay,
                     jbase + channel * 6);
    rebuild_gram(jbase, c, jacs.gram.data() + i * 21);
  }
}

namespace {

// Shared pixel loop: warp each cached reference pixel, sample the query,
// and hand (index, residual norm, residual, s, u') to the visitor.
template <typename Visitor>
void for_each_residual(const LevelJacobians& jacs, const PyramidLevel& ref,
                       const PyramidLevel& query, const SE3& t_qr,
                       Visitor&& visit) {
  const int c = jacs.channels;
  const Eigen::Matrix3d r = t_qr.rotation();
  const Eigen::Vector3d t = t_qr.translation();
  const PinholeCamera& qcam = query.camera;
  const double max_x = qcam.width - 1;
  const double max_y = qcam.height - 1;

  Eigen::VectorXd sample(c);
  Eigen::VectorXd residual(c);

  const size_t n = jacs.size();
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d pq = r * jacs.point[i] + t;
    if (pq.z() <= kMinProjectDepth) continue;
    const double inv_z = 1.0 / pq.z();
    const double ux = qcam.fx * pq.x() * inv_z + qcam.cx;
    const double uy = qcam.fy * pq.y() * inv_z + qcam.cy;
    if (ux < 0.0 || uy < 0.0 || ux > max_x || uy > max_y) continue;

    if (!bilinear_sample(query.features, ux, uy, sample.data())) continue;
    double sq = 0.0;
    bilinear_sample(query.saliency, ux, uy, 0, &sq);

    const int x = jacs.px[i];
    const int y = jacs.py[i];
    const float* fr = ref.features.pixel(x, y);
    double norm2 = 0.0;
    for (int k = 0; k < c; ++k) {
      residual[k] = fr[k] - sample[k];
      norm2 += residual[k] * residual[k];
    }
    const double s = static_cast<double>(ref.saliency.at(x, y)) * sq;
    visit(i, std::sqrt(norm2), residual, s, Eigen::Vector2d(ux, uy));
  }
}

void check_compatible(const PyramidLevel& ref, const PyramidLevel& query) {
  if (ref.features.channels() != query.features.channels()) {
    throw std::invalid_argument("registration: channel counts differ");
  }
}

}  // namespace

NormalEquations assemble_normal_equations(const LevelJacobians& jacs,
                                          const PyramidLevel& ref,
                                          const PyramidLevel& query,
                                          const SE3& t_qr,
                                          const RegistrationConfig& cfg) {
  check_compatible(ref, query);
  NormalEquations ne;
  const int c = jacs.channels;
  const double gamma = cfg.huber_gamma;

  double h_acc[21] = {0.0};
  double b_acc[6] = {0.0};

  for_each_residual(
      jacs, ref, query, t_qr,
      [&](size_t i, double norm, const Eigen::VectorXd& residual, double s,
          const Eigen::Vector2d&) {
        const double w = s * huber_weight(norm, gamma);
        const double* g = jacs.gram.data() + i * 21;
        for (int j = 0; j < 21; ++j) h_acc[j] += w * g[j];
        const double* jrow = jacs.jac.data() + i * static_cast<size_t>(c) * 6;
        for (int k = 0; k < c; ++k) {
          const double wr = w * residual[k];
          const double* jk = jrow + k * 6;
          for (int j = 0; j < 6; ++j) b_acc[j] += wr * jk[j];
        }
        ne.cost += s * huber_cost(norm, gamma);
        ++ne.count;
      });

  int idx = 0;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j <= i; ++j) {
      ne.h(i, j) = h_acc[idx];
      ne.h(j, i) = h_acc[idx];
      ++idx;
    }
  }
  for (int j = 0; j < 6; ++j) ne.b(j) = b_acc[j];
  return ne;
}

std::optional<Twist> gauss_newton_step(const NormalEquations& ne, double eps) {
  const Matrix6d h = ne.h + eps * Matrix6d::Identity();
  Eigen::SelfAdjointEigenSolver<Matrix6d> eig(h);
  const auto& ev = eig.eigenvalues();
  const double lo = ev(0);
  const double hi = ev(5);
  if (!(lo > 0.0) || hi / lo > 1e12) return std::nullopt;
  const Vector6d delta =
      eig.eigenvectors() *
      (ev.cwiseInverse().asDiagonal() * (eig.eigenvectors().transpose() * -ne.b));
  return Twist(delta);
}

ResidualSet residuals_and_weights(const PyramidLevel& ref,
                                  const PyramidLevel& query, const SE3& t_qr,
                                  const RegistrationConfig& cfg) {
  const LevelJacobians jacs = compute_level_jacobians(ref);
  check_compatible(ref, query);
  ResidualSet set;
  for_each_residual(jacs, ref, query, t_qr,
                    [&](size_t i, double norm, const Eigen::VectorXd& residual,
                        double s, const Eigen::Vector2d& uv) {
                      PixelResidual pr;
                      pr.x = jacs.px[i];
                      pr.y = jacs.py[i];
                      pr.uv_query = uv;
                      pr.residual = residual;
                      pr.weight = s * huber_weight(norm, cfg.huber_gamma);
                      set.items.push_back(std::move(pr));
                      set.weighted_cost += s * huber_cost(norm, cfg.huber_gamma);
                    });
  return set;
}

RegistrationProblem::RegistrationProblem(const FramePyramid& ref,
                                         const RegistrationConfig& cfg)
    : ref_(&ref), cfg_(cfg) {
  for (int l = 0; l < kPyramidLevels; ++l) {
    if (cfg_.iterations_per_level[l] < 1) {
      throw std::invalid_argument("registration: iterations_per_level must be >= 1");
    }
    jacobians_[l] = compute_level_jacobians(ref.level(l));
  }
}

void RegistrationProblem::refresh_level(int level) {
  jacobians_[level] = compute_level_jacobians(ref_->level(level));
}

void RegistrationProblem::refresh_level_channel(int level, int channel) {
  update_level_jacobians_channel(jacobians_[level], ref_->level(level), channel);
}

RegistrationResult RegistrationProblem::run(const FramePyramid& query,
                                            const SE3& init) const {
  return run_from_level(query, kPyramidLevels - 1, init, {});
}

RegistrationResult RegistrationProblem::run_from_level(
    const FramePyramid& query, int start_level, const SE3& init,
    std::vector<TraceEntry> prefix) const {
  RegistrationResult res;
  res.trace = std::move(prefix);
  SE3 t = init;
  Vector6d last_delta = Vector6d::Constant(1.0);

  for (int level = start_level; level >= 0; --level) {
    const PyramidLevel& ref_level = ref_->level(level);
    const PyramidLevel& query_level = query.level(level);
    const int iters = cfg_.iterations_per_level[kPyramidLevels - 1 - level];

    NormalEquations ne =
        assemble_normal_equations(jacobians_[level], ref_level, query_level, t, cfg_);
    for (int k = 0; k < iters; ++k) {
      if (ne.count < cfg_.min_valid_pixels) {
        res.status = RegistrationStatus::kTooFewValidPixels;
        res.failure_level = level;
        res.failure_iteration = k;
        res.final_pose = t;
        return res;
      }
      const auto delta = gauss_newton_step(ne, cfg_.tikhonov_eps);
      if (!delta) {
        res.status = RegistrationStatus::kSingularSystem;
        res.failure_level = level;
        res.failure_iteration = k;
        res.final_pose = t;
        return res;
      }
      t = t * SE3::exp(*delta).inverse();
      last_delta = delta->coeffs();
      ne = assemble_normal_equations(jacobians_[level], ref_level, query_level, t, cfg_);
      res.trace.push_back(TraceEntry{level, k, t, ne.cost, ne.count});
    }
  }

  res.final_pose = t;
  res.converged = last_delta.cwiseAbs().maxCoeff() < 1e-7;
  return res;
}

RegistrationResult register_frames(const FramePyramid& ref,
                                   const FramePyramid& query,
                                   const RegistrationConfig& cfg,
                                   const SE3& init) {
  return RegistrationProblem(ref, cfg).run(query, init);
}

}  // namespace fmreg
