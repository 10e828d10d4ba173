#include "fmreg/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "fmreg/pfm.hpp"

namespace fmreg {

std::vector<double> cumulative_accuracy(const std::vector<double>& errors,
                                        const std::vector<double>& thresholds,
                                        int failures) {
  if (errors.empty() && failures == 0) {
    throw EmptyInput("cumulative_accuracy: no records");
  }
  for (size_t i = 1; i < thresholds.size(); ++i) {
    if (thresholds[i] < thresholds[i - 1]) {
      throw std::invalid_argument("cumulative_accuracy: thresholds must ascend");
    }
  }
  const double denom = static_cast<double>(errors.size()) + failures;
  std::vector<double> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    int n = 0;
    for (double e : errors) {
      if (e <= t) ++n;
    }
    out.push_back(n / denom);
  }
  return out;
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ConfusionMatrix confusion_matrix(const std::vector<EvalRecord>& records) {
  ConfusionMatrix cm;
  std::set<int> refs, queries;
  std::map<std::pair<int, int>, std::vector<double>> groups;
  for (const EvalRecord& r : records) {
    refs.insert(r.ref_seq);
    queries.insert(r.query_seq);
    if (!r.failed) groups[{r.ref_seq, r.query_seq}].push_back(r.relative_pose_error_m);
  }
  cm.ref_seqs.assign(refs.begin(), refs.end());
  cm.query_seqs.assign(queries.begin(), queries.end());
  for (auto& [key, errs] : groups) {
    cm.cells[key] = ConfusionCell{median_of(errs), static_cast<int>(errs.size())};
  }
  return cm;
}

std::vector<int> segmentation_classes(const ImageBuffer& segmentation) {
  std::set<int> classes;
  for (float v : segmentation.data()) classes.insert(static_cast<int>(v));
  return {classes.begin(), classes.end()};
}

std::vector<SaliencyWeight> relative_saliency_weights(
    const FramePyramid& pyr, const ImageBuffer& segmentation,
    const std::vector<int>& classes) {
  std::vector<SaliencyWeight> out;
  for (int l = 0; l < kPyramidLevels; ++l) {
    const ImageBuffer& sal = pyr.level(l).saliency;
    const int scale = 1 << l;
    const size_t npix = static_cast<size_t>(sal.width()) * sal.height();

    std::map<int, double> class_mass;
    std::map<int, size_t> class_pixels;
    double total_mass = 0.0;
    for (int y = 0; y < sal.height(); ++y) {
      for (int x = 0; x < sal.width(); ++x) {
        const int c = static_cast<int>(segmentation.at(x * scale, y * scale));
        const double s = sal.at(x, y);
        class_mass[c] += s;
        class_pixels[c] += 1;
        total_mass += s;
      }
    }
    for (int c : classes) {
      auto it = class_pixels.find(c);
      if (it == class_pixels.end() || it->second == 0) continue;
      const double mass_share = class_mass[c] / total_mass;
      const double pixel_share = static_cast<double>(it->second) / npix;
      out.push_back(SaliencyWeight{c, l, mass_share / pixel_share});
    }
  }
  return out;
}

TripletFrames load_triplet_frames(const std::string& manifest_path,
                                  const TripletEntry& entry) {
  const std::filesystem::path base =
      std::filesystem::path(manifest_path).parent_path();
  auto load = [&](const std::string& rel) { return read_pfm((base / rel).string()); };

  TripletFrames f;
  f.id = entry.id;
  f.ref_seq = entry.ref_seq;
  f.query_seq = entry.query_seq;
  f.camera = entry.camera;
  f.r0_image = load(entry.r0_image);
  f.r0_depth = load(entry.r0_depth);
  f.r1_image = load(entry.r1_image);
  f.r1_depth = load(entry.r1_depth);
  f.q_image = load(entry.q_image);
  f.that_r0_r1 = entry.that_r0_r1;
  f.gt_t_q_r0 = entry.gt_t_q_r0;
  return f;
}

EvalRecord evaluate_triplet(const TripletFrames& frames,
                            const FeatureFn& features,
                            const RegistrationConfig& cfg) {
  EvalRecord rec;
  rec.triplet_id = frames.id;
  rec.ref_seq = frames.ref_seq;
  rec.query_seq = frames.query_seq;

  const FramePyramid pyr_r0 = features(frames.r0_image, frames.r0_depth, frames.camera);
  const FramePyramid pyr_r1 = features(frames.r1_image, frames.r1_depth, frames.camera);
  const FramePyramid pyr_q = features(frames.q_image, ImageBuffer(), frames.camera);

  auto describe = [](const RegistrationResult& r) {
    if (r.status == RegistrationStatus::kTooFewValidPixels) {
      return "too_few_valid_pixels@level" + std::to_string(r.failure_level);
    }
    return "singular_system@level" + std::to_string(r.failure_level);
  };

  const RegistrationResult res_r0 = register_frames(pyr_r0, pyr_q, cfg);
  if (!res_r0.ok()) {
    rec.failed = true;
    rec.failure_reason = "q_r0:" + describe(res_r0);
    return rec;
  }
  const RegistrationResult res_r1 = register_frames(pyr_r1, pyr_q, cfg);
  if (!res_r1.ok()) {
    rec.failed = true;
    rec.failure_reason = "q_r1:" + describe(res_r1);
    return rec;
  }

  rec.relative_pose_error_m = relative_pose_error(
      res_r0.final_pose, res_r1.final_pose, frames.that_r0_r1);

  if (frames.gt_t_q_r0) {
    rec.has_gt = true;
    const SE3 gt_q_r0 = *frames.gt_t_q_r0;
    const SE3 gt_q_r1 = gt_q_r0 * frames.that_r0_r1;
    const SE3 err_r0 = res_r0.final_pose.inverse() * gt_q_r0;
    const SE3 err_r1 = res_r1.final_pose.inverse() * gt_q_r1;
    rec.trans_err_r0 = err_r0.translation().norm();
    rec.rot_err_r0 = err_r0.rotation_angle();
    rec.trans_err_r1 = err_r1.translation().norm();
    rec.rot_err_r1 = err_r1.rotation_angle();
  }
  return rec;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  return out;
}

}  // namespace

void write_curves_csv(const std::string& path,
                      const std::vector<double>& thresholds,
                      const std::vector<double>& fractions) {
  auto out = open_csv(path);
  out << "threshold,fraction\n";
  for (size_t i = 0; i < thresholds.size(); ++i) {
    out << fmt(thresholds[i]) << ',' << fmt(fractions[i]) << '\n';
  }
}

void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm) {
  auto out = open_csv(path);
  out << "ref_seq,query_seq,median_E,count\n";
  for (int r : cm.ref_seqs) {
    for (int q : cm.query_seqs) {
      const auto cell = cm.cell(r, q);
      out << r << ',' << q << ',';
      if (cell) {
        out << fmt(cell->median_e) << ',' << cell->count << '\n';
      } else {
        out << "missing,0\n";
      }
    }
  }
}

void write_saliency_csv(
    const std::string& path,
    const std::vector<std::tuple<int, int, double, double>>& rows) {
  auto out = open_csv(path);
  out << "class,level,mean,std\n";
  for (const auto& [cls, level, mean, sd] : rows) {
    out << cls << ',' << level << ',' << fmt(mean) << ',' << fmt(sd) << '\n';
  }
}

}  // namespace fmreg
