// Command-line surface: synthetic dataset generation, single-triplet
// registration, dataset evaluation, head training, and saliency reports.
// Exit codes: 0 success, 1 validation/usage error, 2 numerical failure.

#include <CLI11.hpp>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include "fmreg/eval.hpp"
#include "fmreg/features.hpp"
#include "fmreg/kvconfig.hpp"
#include "fmreg/manifest.hpp"
#include "fmreg/pfm.hpp"
#include "fmreg/synth.hpp"
#include "fmreg/train.hpp"

namespace fs = std::filesystem;
using namespace fmreg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

FeatureFn make_feature_fn(const std::string& spec) {
  if (spec == "handcrafted") {
    return [](const ImageBuffer& image, const ImageBuffer& depth,
              const PinholeCamera& cam) {
      return handcrafted_features(image, depth, cam);
    };
  }
  if (spec.rfind("head:", 0) == 0) {
    HeadParams params = load_checkpoint(spec.substr(5));
    return [params = std::move(params)](const ImageBuffer& image,
                                        const ImageBuffer& depth,
                                        const PinholeCamera& cam) {
      return head_forward(params, make_base_pyramid(image, depth, cam));
    };
  }
  throw CLI::ValidationError("--features must be 'handcrafted' or 'head:<checkpoint>'");
}

struct RegistrationFlags {
  std::vector<int> iterations = {16, 12, 8, 4};
  double gamma = 0.1;
  int min_pixels = 100;

  RegistrationConfig to_config() const {
    RegistrationConfig cfg;
    if (iterations.size() != kPyramidLevels) {
      throw CLI::ValidationError("--iterations needs 4 values (coarse to fine)");
    }
    for (int i = 0; i < kPyramidLevels; ++i) {
      cfg.iterations_per_level[i] = iterations[i];
    }
    cfg.huber_gamma = gamma;
    cfg.min_valid_pixels = min_pixels;
    return cfg;
  }
};

void add_registration_flags(CLI::App* cmd, RegistrationFlags& flags) {
  cmd->add_option("--iterations", flags.iterations,
                  "iterations per level, coarse to fine")
      ->expected(4);
  cmd->add_option("--gamma", flags.gamma, "Huber scale on feature residuals");
  cmd->add_option("--min-pixels", flags.min_pixels,
                  "minimum valid pixels per level");
}

std::string triplet_file(int index, const char* frame, const char* kind) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "triplet_%05d_%s_%s.pfm", index, frame, kind);
  return buf;
}

int run_synth(const std::string& config_path, const std::string& out_dir,
              int count, int sequences, int scenes, uint64_t seed_override,
              bool has_seed) {
  SceneConfig cfg =
      config_path.empty() ? SceneConfig{} : parse_scene_config(config_path);
  if (has_seed) cfg.seed = seed_override;
  cfg.validate();
  if (count < 0 || sequences < 1 || scenes < 1) {
    std::cerr << "synth: count/sequences/scenes must be positive\n";
    return kExitValidation;
  }

  fs::create_directories(out_dir);
  std::vector<Scene> scene_pool;
  for (int s = 0; s < scenes; ++s) {
    SceneConfig sc = cfg;
    sc.seed = cfg.seed + static_cast<uint64_t>(s);
    scene_pool.push_back(generate_scene(sc));
  }

  TripletManifest manifest;
  for (int i = 0; i < count; ++i) {
    const Scene& scene = scene_pool[i % scenes];
    const int pair = (i / scenes) % (sequences * sequences);
    const int ref_seq = pair / sequences;
    const int query_seq = pair % sequences;
    const FrameTriplet t = make_triplet(scene, static_cast<uint64_t>(i),
                                        ref_seq, query_seq);

    TripletEntry e;
    char id[32];
    std::snprintf(id, sizeof(id), "t%05d", i);
    e.id = id;
    e.ref_seq = ref_seq;
    e.query_seq = query_seq;
    e.camera = scene.config.camera();
    e.r0_image = triplet_file(i, "r0", "image");
    e.r0_depth = triplet_file(i, "r0", "depth");
    e.r0_seg = triplet_file(i, "r0", "seg");
    e.r1_image = triplet_file(i, "r1", "image");
    e.r1_depth = triplet_file(i, "r1", "depth");
    e.r1_seg = triplet_file(i, "r1", "seg");
    e.q_image = triplet_file(i, "q", "image");
    e.q_seg = triplet_file(i, "q", "seg");
    e.that_r0_r1 = t.that_r0_r1;
    e.gt_t_q_r0 = t.gt_t_q_r0;

    const fs::path dir(out_dir);
    write_pfm((dir / e.r0_image).string(), t.r0.image);
    write_pfm((dir / e.r0_depth).string(), t.r0.depth);
    write_pfm((dir / e.r0_seg).string(), t.r0.segmentation);
    write_pfm((dir / e.r1_image).string(), t.r1.image);
    write_pfm((dir / e.r1_depth).string(), t.r1.depth);
    write_pfm((dir / e.r1_seg).string(), t.r1.segmentation);
    write_pfm((dir / e.q_image).string(), t.q.image);
    write_pfm((dir / e.q_seg).string(), t.q.segmentation);
    manifest.entries.push_back(std::move(e));
  }
  save_manifest((fs::path(out_dir) / "manifest.jsonl").string(), manifest);
  std::cout << "wrote " << count << " triplet(s) to " << out_dir << '\n';
  return kExitOk;
}

void print_pose(const SE3& pose) {
  const Eigen::Matrix4d m = pose.matrix();
  for (int r = 0; r < 4; ++r) {
    std::printf("  %+.12f %+.12f %+.12f %+.12f\n", m(r, 0), m(r, 1), m(r, 2),
                m(r, 3));
  }
}

int run_register(const std::string& manifest_path, const std::string& triplet_id,
                 const std::string& features_spec,
                 const RegistrationFlags& flags) {
  const TripletManifest manifest = load_manifest(manifest_path);
  const TripletEntry* entry = nullptr;
  for (const TripletEntry& e : manifest.entries) {
    if (e.id == triplet_id) entry = &e;
  }
  if (!entry) {
    std::cerr << "register: no triplet '" << triplet_id << "' in manifest\n";
    return kExitValidation;
  }

  const TripletFrames frames = load_triplet_frames(manifest_path, *entry);
  const FeatureFn features = make_feature_fn(features_spec);
  const RegistrationConfig cfg = flags.to_config();

  const FramePyramid pyr_r0 = features(frames.r0_image, frames.r0_depth, frames.camera);
  const FramePyramid pyr_r1 = features(frames.r1_image, frames.r1_depth, frames.camera);
  const FramePyramid pyr_q = features(frames.q_image, ImageBuffer(), frames.camera);

  auto report = [](const char* name, const RegistrationResult& res) {
    std::printf("# registration %s\n", name);
    std::printf("level iter residual_sum pixels tx ty tz rot_deg\n");
    for (const TraceEntry& e : res.trace) {
      const Eigen::Vector3d t = e.pose.translation();
      std::printf("%d %d %.9g %d %+.6f %+.6f %+.6f %.5f\n", e.level,
                  e.iteration, e.weighted_residual_sum, e.valid_pixels, t.x(),
                  t.y(), t.z(), e.pose.rotation_angle() * 180.0 / M_PI);
    }
    if (!res.ok()) {
      std::printf("FAILED at level %d iteration %d (%s)\n", res.failure_level,
                  res.failure_iteration,
                  res.status == RegistrationStatus::kTooFewValidPixels
                      ? "too few valid pixels"
                      : "singular system");
    }
    std::printf("final %s pose:\n", name);
    print_pose(res.final_pose);
  };

  const RegistrationResult res_r0 = register_frames(pyr_r0, pyr_q, cfg);
  report("q_r0", res_r0);
  const RegistrationResult res_r1 = register_frames(pyr_r1, pyr_q, cfg);
  report("q_r1", res_r1);
  if (!res_r0.ok() || !res_r1.ok()) return kExitNumerical;

  const double e = relative_pose_error(res_r0.final_pose, res_r1.final_pose,
                                       frames.that_r0_r1);
  std::printf("relative_pose_error_m %.12g\n", e);
  return kExitOk;
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 1; i <= 40; ++i) t.push_back(0.05 * i);
  return t;
}

int run_eval(const std::string& manifest_path, const std::string& out_dir,
             const std::string& features_spec, const RegistrationFlags& flags,
             int jobs) {
  const TripletManifest manifest = load_manifest(manifest_path);
  if (manifest.entries.empty()) {
    std::cerr << "eval: manifest has no triplets\n";
    return kExitValidation;
  }
  if (jobs < 1) jobs = 1;
  const FeatureFn features = make_feature_fn(features_spec);
  const RegistrationConfig cfg = flags.to_config();
  fs::create_directories(out_dir);

  const size_t n = manifest.entries.size();
  std::vector<EvalRecord> records(n);
  // Saliency stats come from the r0 frame of every triplet.
  std::vector<std::vector<SaliencyWeight>> saliency(n);

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      const TripletEntry& entry = manifest.entries[i];
      const TripletFrames frames = load_triplet_frames(manifest_path, entry);
      records[i] = evaluate_triplet(frames, features, cfg);
      const FramePyramid pyr =
          features(frames.r0_image, frames.r0_depth, frames.camera);
      const ImageBuffer seg = read_pfm(
          (fs::path(manifest_path).parent_path() / entry.r0_seg).string());
      saliency[i] = relative_saliency_weights(pyr, seg, segmentation_classes(seg));
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // records/saliency are merged by index, i.e. by manifest order (ids).
  std::vector<double> errors;
  int failures = 0;
  for (const EvalRecord& r : records) {
    if (r.failed) {
      ++failures;
    } else {
      errors.push_back(r.relative_pose_error_m);
    }
  }
  if (errors.empty()) {
    std::cerr << "eval: every registration failed\n";
    return kExitNumerical;
  }

  const std::vector<double> thresholds = default_thresholds();
  write_curves_csv((fs::path(out_dir) / "curves.csv").string(), thresholds,
                   cumulative_accuracy(errors, thresholds, failures));
  write_confusion_csv((fs::path(out_dir) / "confusion.csv").string(),
                      confusion_matrix(records));

  std::map<std::pair<int, int>, std::vector<double>> by_class_level;
  for (const auto& per_image : saliency) {
    for (const SaliencyWeight& w : per_image) {
      by_class_level[{w.class_id, w.level}].push_back(w.weight);
    }
  }
  std::vector<std::tuple<int, int, double, double>> rows;
  for (const auto& [key, values] : by_class_level) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= values.size();
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    rows.emplace_back(key.first, key.second, mean,
                      std::sqrt(var / values.size()));
  }
  write_saliency_csv((fs::path(out_dir) / "saliency.csv").string(), rows);

  std::cout << "eval: " << errors.size() << " ok, " << failures
            << " failed; artifacts in " << out_dir << '\n';
  return kExitOk;
}

int run_train(const std::string& manifest_path, const std::string& out_dir,
              TrainConfig cfg, const RegistrationFlags& flags) {
  cfg.registration = flags.to_config();
  const TripletManifest manifest = load_manifest(manifest_path);
  if (manifest.entries.empty()) {
    std::cerr << "train-head: manifest has no triplets\n";
    return kExitValidation;
  }

  std::vector<TrainTriplet> dataset;
  dataset.reserve(manifest.entries.size());
  for (const TripletEntry& entry : manifest.entries) {
    const TripletFrames f = load_triplet_frames(manifest_path, entry);
    TrainTriplet t;
    t.id = f.id;
    t.base_r0 = make_base_pyramid(f.r0_image, f.r0_depth, f.camera);
    t.base_r1 = make_base_pyramid(f.r1_image, f.r1_depth, f.camera);
    t.base_q = make_base_pyramid(f.q_image, ImageBuffer(), f.camera);
    t.that_r0_r1 = f.that_r0_r1;
    dataset.push_back(std::move(t));
  }

  const TrainResult result = train_head(dataset, cfg);
  fs::create_directories(out_dir);
  save_checkpoint((fs::path(out_dir) / "head.ckpt").string(), result.params, cfg);
  std::ofstream curve((fs::path(out_dir) / "loss_curve.csv").string());
  curve << result.loss_curve_csv;
  for (size_t e = 0; e < result.epoch_mean_loss.size(); ++e) {
    std::printf("epoch %zu mean_loss %.9g\n", e + 1, result.epoch_mean_loss[e]);
  }
  std::cout << "train-head: checkpoint and loss curve in " << out_dir << '\n';
  return kExitOk;
}

int run_saliency_report(const std::string& manifest_path,
                        const std::string& out_path,
                        const std::string& features_spec) {
  const TripletManifest manifest = load_manifest(manifest_path);
  if (manifest.entries.empty()) {
    std::cerr << "saliency-report: manifest has no triplets\n";
    return kExitValidation;
  }
  const FeatureFn features = make_feature_fn(features_spec);

  std::map<std::pair<int, int>, std::vector<double>> by_class_level;
  for (const TripletEntry& entry : manifest.entries) {
    const TripletFrames frames = load_triplet_frames(manifest_path, entry);
    const FramePyramid pyr =
        features(frames.r0_image, frames.r0_depth, frames.camera);
    const ImageBuffer seg = read_pfm(
        (fs::path(manifest_path).parent_path() / entry.r0_seg).string());
    for (const SaliencyWeight& w :
         relative_saliency_weights(pyr, seg, segmentation_classes(seg))) {
      by_class_level[{w.class_id, w.level}].push_back(w.weight);
    }
  }
  std::vector<std::tuple<int, int, double, double>> rows;
  for (const auto& [key, values] : by_class_level) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= values.size();
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    rows.emplace_back(key.first, key.second, mean, std::sqrt(var / values.size()));
  }
  write_saliency_csv(out_path, rows);
  std::cout << "saliency-report: wrote " << out_path << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feature-metric SE(3) registration toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic triplet dataset");
  std::string synth_config, synth_out;
  int synth_count = 0, synth_sequences = 1, synth_scenes = 1;
  uint64_t synth_seed = 0;
  synth->add_option("--config", synth_config, "scene config file (key = value)");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--count", synth_count, "number of triplets")->required();
  synth->add_option("--sequences", synth_sequences, "sequences per scene");
  synth->add_option("--scenes", synth_scenes, "number of scenes");
  auto* seed_opt = synth->add_option("--seed", synth_seed, "override config seed");

  // register
  auto* reg = app.add_subcommand("register", "register one triplet's query frame");
  std::string reg_manifest, reg_triplet, reg_features = "handcrafted";
  RegistrationFlags reg_flags;
  reg->add_option("--manifest", reg_manifest, "manifest path")->required();
  reg->add_option("--triplet", reg_triplet, "triplet id")->required();
  reg->add_option("--features", reg_features, "handcrafted | head:<checkpoint>");
  add_registration_flags(reg, reg_flags);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a dataset, emit CSV artifacts");
  std::string eval_manifest, eval_out, eval_features = "handcrafted";
  int eval_jobs = 1;
  RegistrationFlags eval_flags;
  ev->add_option("--manifest", eval_manifest, "manifest path")->required();
  ev->add_option("--out", eval_out, "output directory")->required();
  ev->add_option("--features", eval_features, "handcrafted | head:<checkpoint>");
  ev->add_option("--jobs", eval_jobs, "worker threads");
  add_registration_flags(ev, eval_flags);

  // train-head
  auto* tr = app.add_subcommand("train-head", "train the prediction head");
  std::string train_manifest, train_out;
  TrainConfig train_cfg;
  RegistrationFlags train_flags;
  tr->add_option("--manifest", train_manifest, "manifest path")->required();
  tr->add_option("--out", train_out, "output directory")->required();
  tr->add_option("--epochs", train_cfg.epochs, "training epochs");
  tr->add_option("--seed", train_cfg.seed, "rng seed");
  tr->add_option("--channels", train_cfg.head_channels, "feature channels");
  tr->add_option("--lr-init", train_cfg.lr_init, "learning rate, epoch 1");
  tr->add_option("--lr-general", train_cfg.lr_general, "learning rate afterwards");
  tr->add_option("--lambda-init", train_cfg.lambda_init, "accuracy weight, epoch 1");
  tr->add_option("--lambda-general", train_cfg.lambda_general,
                 "accuracy weight afterwards");
  tr->add_option("--batch", train_cfg.batch_size, "effective batch size");
  tr->add_option("--fd-step", train_cfg.fd_step, "finite difference step");
  add_registration_flags(tr, train_flags);

  // saliency-report
  auto* sal = app.add_subcommand("saliency-report",
                                 "relative saliency weights per class and level");
  std::string sal_manifest, sal_out, sal_features = "handcrafted";
  sal->add_option("--manifest", sal_manifest, "manifest path")->required();
  sal->add_option("--out", sal_out, "output CSV path")->required();
  sal->add_option("--features", sal_features, "handcrafted | head:<checkpoint>");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      return run_synth(synth_config, synth_out, synth_count, synth_sequences,
                       synth_scenes, synth_seed, seed_opt->count() > 0);
    }
    if (reg->parsed()) {
      return run_register(reg_manifest, reg_triplet, reg_features, reg_flags);
    }
    if (ev->parsed()) {
      return run_eval(eval_manifest, eval_out, eval_features, eval_flags, eval_jobs);
    }
    if (tr->parsed()) {
      return run_train(train_manifest, train_out, train_cfg, train_flags);
    }
    if (sal->parsed()) {
      return run_saliency_report(sal_manifest, sal_out, sal_features);
    }
  } catch (const OverlapUnsatisfied& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitNumerical;
  } catch (const TrainingAborted& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitNumerical;
  } catch (const AngleNearPi& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}
