#include "fmreg/losses.hpp"

#include <algorithm>
#include <sstream>

namespace fmreg {

double consistency_loss(const SE3& t_q_r0, const SE3& t_q_r1,
                        const SE3& that_r0_r1) {
  return pose_error_l1(that_r0_r1 * t_q_r1.inverse() * t_q_r0);
}

double accuracy_loss(const SE3& t_r1_r0, const SE3& that_r0_r1) {
  return pose_error_l1(that_r0_r1 * t_r1_r0);
}

double relative_pose_error(const SE3& t_star_q_r0, const SE3& t_star_q_r1,
                           const SE3& that_r0_r1) {
  return (that_r0_r1 * t_star_q_r1.inverse() * t_star_q_r0)
      .translation()
      .norm();
}

namespace {

std::vector<const TracedPose*> selected(const std::vector<TracedPose>& trace,
                                        bool finest_only) {
  std::vector<const TracedPose*> out;
  out.reserve(trace.size());
  for (const TracedPose& e : trace) {
    if (!finest_only || e.level == 0) out.push_back(&e);
  }
  return out;
}

}  // namespace

LossReport triplet_loss(const std::vector<TracedPose>& trace_q_r0,
                        const std::vector<TracedPose>& trace_q_r1,
                        const std::vector<TracedPose>& trace_r1_r0,
                        const SE3& that_r0_r1, const LossConfig& cfg) {
  if (trace_q_r0.empty() || trace_q_r1.empty() || trace_r1_r0.empty()) {
    throw EmptyTrace();
  }
  // Final estimates are constants: they act as the target for the
  // opposing trace and are never themselves differentiated through.
  const SE3& star_q_r0 = trace_q_r0.back().pose;
  const SE3& star_q_r1 = trace_q_r1.back().pose;

  const auto k_q_r0 = selected(trace_q_r0, cfg.finest_level_only);
  const auto k_q_r1 = selected(trace_q_r1, cfg.finest_level_only);
  const auto k_r1_r0 = selected(trace_r1_r0, cfg.finest_level_only);

  LossReport rep;
  rep.lambda = cfg.lambda;
  const size_t rows = std::max({k_q_r0.size(), k_q_r1.size(), k_r1_r0.size()});
  rep.per_iteration.resize(rows);

  for (size_t k = 0; k < k_q_r1.size(); ++k) {
    const double lc = consistency_loss(star_q_r0, k_q_r1[k]->pose, that_r0_r1);
    rep.per_iteration[k].consistency_q_r0 = lc;
    rep.consistency_q_r0 += lc;
  }
  for (size_t k = 0; k < k_q_r0.size(); ++k) {
    const double lc = consistency_loss(k_q_r0[k]->pose, star_q_r1, that_r0_r1);
    rep.per_iteration[k].consistency_q_r1 = lc;
    rep.consistency_q_r1 += lc;
  }
  for (size_t k = 0; k < k_r1_r0.size(); ++k) {
    const double la = accuracy_loss(k_r1_r0[k]->pose, that_r0_r1);
    rep.per_iteration[k].accuracy = cfg.lambda * la;
    rep.accuracy += la;
  }
  rep.total = rep.consistency_q_r0 + rep.consistency_q_r1 +
              cfg.lambda * rep.accuracy;
  return rep;
}

std::string LossReport::csv_header() {
  return "consistency_q_r0,consistency_q_r1,accuracy,lambda,total";
}

std::string LossReport::csv_row() const {
  std::ostringstream os;
  os.precision(17);
  os << consistency_q_r0 << ',' << consistency_q_r1 << ',' << accuracy << ','
     << lambda << ',' << total;
  return os.str();
}

}  // namespace fmreg
