#include "fmreg/train.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

namespace fmreg {

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
               AdamState& state, double lr, double beta1, double beta2,
               double eps) {
  if (state.m.size() == 0) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
  }
  if (grad.size() != params.size() || state.m.size() != params.size()) {
    throw ShapeMismatch("adam_step: size mismatch");
  }
  state.step += 1;
  state.m = beta1 * state.m + (1.0 - beta1) * grad;
  state.v = beta2 * state.v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  params -= (lr / bc1) * state.m.cwiseQuotient(
                             ((state.v / bc2).cwiseSqrt().array() + eps).matrix());
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& theta, double fd_step) {
  Eigen::VectorXd grad(theta.size());
  Eigen::VectorXd probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double h = fd_step * std::max(1.0, std::abs(theta(i)));
    probe(i) = theta(i) + h;
    const double fp = f(probe);
    probe(i) = theta(i) - h;
    const double fm = f(probe);
    probe(i) = theta(i);
    grad(i) = (fp - fm) / (2.0 * h);
  }
  return grad;
}

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::vector<TracedPose> to_traced(const std::vector<TraceEntry>& trace) {
  std::vector<TracedPose> out;
  out.reserve(trace.size());
  for (const TraceEntry& e : trace) out.push_back(TracedPose{e.level, e.pose});
  return out;
}

}  // namespace

struct TripletObjective::Impl {
  const TrainTriplet* triplet;
  RegistrationConfig reg;
  bool finest_only;

  FramePyramid pyr_r0, pyr_r1, pyr_q;
  std::unique_ptr<RegistrationProblem> prob_r0, prob_r1;

  struct CachedRun {
    RegistrationResult result;
    // Pose entering each level (index by level; [3] is the identity init).
    std::array<SE3, kPyramidLevels> entry_pose;
  };
  CachedRun run_q_r0, run_q_r1, run_r1_r0;
  HeadParams base_params;
  double base_loss = kNan;
  bool has_base = false;

  void cache_entry_poses(CachedRun& run, const SE3& init) {
    run.entry_pose[kPyramidLevels - 1] = init;
    for (int level = kPyramidLevels - 2; level >= 0; --level) {
      // Pose entering `level` = last recorded pose of level + 1.
      SE3 pose = init;
      for (const TraceEntry& e : run.result.trace) {
        if (e.level > level) pose = e.pose;
      }
      run.entry_pose[level] = pose;
    }
  }

  double loss_from_runs(const RegistrationResult& q_r0,
                        const RegistrationResult& q_r1,
                        const RegistrationResult& r1_r0, double lambda) const {
    if (!q_r0.ok() || !q_r1.ok() || !r1_r0.ok()) return kNan;
    try {
      LossConfig lc;
      lc.lambda = lambda;
      lc.finest_level_only = finest_only;
      const double loss =
          triplet_loss(to_traced(q_r0.trace), to_traced(q_r1.trace),
                       to_traced(r1_r0.trace), triplet->that_r0_r1, lc)
              .total;
      return std::isfinite(loss) ? loss : kNan;
    } catch (const AngleNearPi&) {
      return kNan;
    }
  }

  double run_all_from(int start_level, double lambda,
                      RegistrationResult* out_q_r0 = nullptr) {
    auto partial = [&](const CachedRun& base, const RegistrationProblem& prob,
                       const FramePyramid& query) {
      std::vector<TraceEntry> prefix;
      for (const TraceEntry& e : base.result.trace) {
        if (e.level > start_level) prefix.push_back(e);
      }
      return prob.run_from_level(query, start_level,
                                 base.entry_pose[start_level], std::move(prefix));
    };
    const RegistrationResult q_r0 = partial(run_q_r0, *prob_r0, pyr_q);
    const RegistrationResult q_r1 = partial(run_q_r1, *prob_r1, pyr_q);
    const RegistrationResult r1_r0 = partial(run_r1_r0, *prob_r0, pyr_r1);
    if (out_q_r0) *out_q_r0 = q_r0;
    return loss_from_runs(q_r0, q_r1, r1_r0, lambda);
  }
};

TripletObjective::TripletObjective(const TrainTriplet& triplet,
                                   const RegistrationConfig& reg,
                                   bool finest_level_only)
    : impl_(std::make_unique<Impl>()) {
  impl_->triplet = &triplet;
  impl_->reg = reg;
  impl_->finest_only = finest_level_only;
}

TripletObjective::~TripletObjective() = default;
TripletObjective::TripletObjective(TripletObjective&&) noexcept = default;

double TripletObjective::evaluate_base(const HeadParams& params, double lambda) {
  Impl& im = *impl_;
  im.pyr_r0 = head_forward(params, im.triplet->base_r0);
  im.pyr_r1 = head_forward(params, im.triplet->base_r1);
  im.pyr_q = head_forward(params, im.triplet->base_q);
  im.prob_r0 = std::make_unique<RegistrationProblem>(im.pyr_r0, im.reg);
  im.prob_r1 = std::make_unique<RegistrationProblem>(im.pyr_r1, im.reg);

  im.run_q_r0.result = im.prob_r0->run(im.pyr_q, SE3());
  im.run_q_r1.result = im.prob_r1->run(im.pyr_q, SE3());
  im.run_r1_r0.result = im.prob_r0->run(im.pyr_r1, SE3());
  im.cache_entry_poses(im.run_q_r0, SE3());
  im.cache_entry_poses(im.run_q_r1, SE3());
  im.cache_entry_poses(im.run_r1_r0, SE3());

  im.base_params = params;
  im.base_loss = im.loss_from_runs(im.run_q_r0.result, im.run_q_r1.result,
                                   im.run_r1_r0.result, lambda);
  im.has_base = true;
  return im.base_loss;
}

bool TripletObjective::base_ok() const {
  return impl_->has_base && std::isfinite(impl_->base_loss);
}

double TripletObjective::base_loss() const { return impl_->base_loss; }

const std::string& TripletObjective::id() const { return impl_->triplet->id; }

double TripletObjective::evaluate_perturbed(const HeadParams& perturbed,
                                            const ParamCoord& where,
                                            double lambda) {
  return evaluate_perturbed_pair(perturbed, perturbed, where, lambda).first;
}

std::pair<double, double> TripletObjective::evaluate_perturbed_pair(
    const HeadParams& plus, const HeadParams& minus, const ParamCoord& where,
    double lambda) {
  Impl& im = *impl_;
  if (!base_ok()) return {kNan, kNan};
  const int level = where.level;

  if (where.saliency) {
    // Saliency only re-weights residuals; Jacobians are untouched.
    auto apply = [&](const HeadParams& p) {
      head_forward_saliency(p, im.triplet->base_r0, level,
                            im.pyr_r0.level(level).saliency);
      head_forward_saliency(p, im.triplet->base_r1, level,
                            im.pyr_r1.level(level).saliency);
      head_forward_saliency(p, im.triplet->base_q, level,
                            im.pyr_q.level(level).saliency);
    };
    apply(plus);
    const double loss_plus = im.run_all_from(level, lambda);
    apply(minus);
    const double loss_minus = im.run_all_from(level, lambda);
    apply(im.base_params);
    return {loss_plus, loss_minus};
  }

  const int channel = where.out_channel;
  LevelJacobians saved_r0 = im.prob_r0->jacobians(level);
  LevelJacobians saved_r1 = im.prob_r1->jacobians(level);

  auto apply = [&](const HeadParams& p) {
    head_forward_feature_channel(p, im.triplet->base_r0, level, channel,
                                 im.pyr_r0.level(level).features);
    head_forward_feature_channel(p, im.triplet->base_r1, level, channel,
                                 im.pyr_r1.level(level).features);
    head_forward_feature_channel(p, im.triplet->base_q, level, channel,
                                 im.pyr_q.level(level).features);
    im.prob_r0->refresh_level_channel(level, channel);
    im.prob_r1->refresh_level_channel(level, channel);
  };
  apply(plus);
  const double loss_plus = im.run_all_from(level, lambda);
  apply(minus);
  const double loss_minus = im.run_all_from(level, lambda);

  // Restore the feature planes from base parameters and the cached
  // Jacobians by swap; a recompute would only replicate the copy.
  head_forward_feature_channel(im.base_params, im.triplet->base_r0, level,
                               channel, im.pyr_r0.level(level).features);
  head_forward_feature_channel(im.base_params, im.triplet->base_r1, level,
                               channel, im.pyr_r1.level(level).features);
  head_forward_feature_channel(im.base_params, im.triplet->base_q, level,
                               channel, im.pyr_q.level(level).features);
  im.prob_r0->swap_jacobians(level, saved_r0);
  im.prob_r1->swap_jacobians(level, saved_r1);
  return {loss_plus, loss_minus};
}

BatchGradient loss_gradient_fd(const HeadParams& params,
                               std::vector<TripletObjective*>& batch,
                               double fd_step, double lambda) {
  BatchGradient bg;
  std::vector<TripletObjective*> usable;
  double loss_sum = 0.0;
  for (TripletObjective* obj : batch) {
    obj->evaluate_base(params, lambda);
    if (obj->base_ok()) {
      usable.push_back(obj);
      loss_sum += obj->base_loss();
    } else {
      bg.skipped_ids.push_back(obj->id());
    }
  }
  bg.mean_loss = usable.empty() ? kNan : loss_sum / usable.size();

  const Eigen::VectorXd theta = params.flatten();
  bg.grad = Eigen::VectorXd::Zero(theta.size());
  if (usable.empty()) return bg;

  Eigen::VectorXd probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const ParamCoord where = locate_param(params, static_cast<int>(i));
    const double h = fd_step * std::max(1.0, std::abs(theta(i)));

    probe(i) = theta(i) + h;
    const HeadParams plus =
        HeadParams::unflatten(probe, params.in_channels, params.out_channels);
    probe(i) = theta(i) - h;
    const HeadParams minus =
        HeadParams::unflatten(probe, params.in_channels, params.out_channels);
    probe(i) = theta(i);

    double sum_plus = 0.0, sum_minus = 0.0;
    int n_valid = 0;
    for (TripletObjective* obj : usable) {
      const auto [lp, lm] = obj->evaluate_perturbed_pair(plus, minus, where, lambda);
      if (std::isfinite(lp) && std::isfinite(lm)) {
        sum_plus += lp;
        sum_minus += lm;
        ++n_valid;
      }
    }
    bg.grad(i) = n_valid > 0 ? (sum_plus - sum_minus) / (2.0 * h * n_valid) : 0.0;
  }
  return bg;
}

TrainResult train_head(const std::vector<TrainTriplet>& dataset,
                       const TrainConfig& cfg) {
  if (dataset.empty()) throw TrainingAborted("train_head: empty dataset");
  const int in_channels = dataset[0].base_r0.in_channels();

  HeadParams params =
      HeadParams::structured_init(in_channels, cfg.head_channels, cfg.seed);
  if (params.param_count() > 2048) {
    throw TrainingAborted("train_head: parameter count exceeds 2048");
  }

  std::vector<TripletObjective> objectives;
  objectives.reserve(dataset.size());
  for (const TrainTriplet& t : dataset) {
    objectives.emplace_back(t, cfg.registration, cfg.finest_level_only);
  }

  Eigen::VectorXd theta = params.flatten();
  AdamState adam;
  std::mt19937_64 rng(cfg.seed ^ 0x7261696Eull);

  TrainResult result;
  std::ostringstream csv;
  csv << "epoch,step,lambda,lr,batch_loss,skipped\n";
  csv.precision(17);

  std::vector<size_t> order(dataset.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  int step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lambda = epoch == 1 ? cfg.lambda_init : cfg.lambda_general;
    const double lr = epoch == 1 ? cfg.lr_init : cfg.lr_general;

    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }

    double epoch_loss_sum = 0.0;
    int epoch_batches = 0;
    size_t epoch_skipped = 0;
    for (size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<TripletObjective*> batch;
      for (size_t i = begin; i < end; ++i) batch.push_back(&objectives[order[i]]);

      const BatchGradient bg =
          loss_gradient_fd(params, batch, cfg.fd_step, lambda);
      epoch_skipped += bg.skipped_ids.size();
      if (std::isfinite(bg.mean_loss)) {
        epoch_loss_sum += bg.mean_loss;
        ++epoch_batches;
        adam_step(theta, bg.grad, adam, lr);
        params = HeadParams::unflatten(theta, in_channels, cfg.head_channels);
      }
      ++step;
      csv << epoch << ',' << step << ',' << lambda << ',' << lr << ','
          << bg.mean_loss << ',' << bg.skipped_ids.size() << '\n';
    }

    if (2 * epoch_skipped > order.size()) {
      throw TrainingAborted("train_head: more than half of epoch " +
                            std::to_string(epoch) + " samples failed");
    }
    result.epoch_mean_loss.push_back(
        epoch_batches > 0 ? epoch_loss_sum / epoch_batches : kNan);
  }

  result.params = params;
  result.loss_curve_csv = csv.str();
  return result;
}

void save_checkpoint(const std::string& path, const HeadParams& params,
                     const TrainConfig& cfg) {
  nlohmann::json header{
      {"magic", "fmreg.head.v1"},
      {"in_channels", params.in_channels},
      {"out_channels", params.out_channels},
      {"levels", kPyramidLevels},
      {"param_count", params.param_count()},
      {"seed", cfg.seed},
      {"config",
       {{"lr_init", cfg.lr_init},
        {"lr_general", cfg.lr_general},
        {"lambda_init", cfg.lambda_init},
        {"lambda_general", cfg.lambda_general},
        {"batch_size", cfg.batch_size},
        {"fd_step", cfg.fd_step},
        {"epochs", cfg.epochs}}}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << header.dump() << '\n';
  const Eigen::VectorXd theta = params.flatten();
  out.write(reinterpret_cast<const char*>(theta.data()),
            static_cast<std::streamsize>(theta.size() * sizeof(double)));
  if (!out) throw std::runtime_error("save_checkpoint: write failed");
}

HeadParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("load_checkpoint: missing header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& err) {
    throw std::runtime_error(std::string("load_checkpoint: bad header: ") + err.what());
  }
  if (header.value("magic", "") != std::string("fmreg.head.v1")) {
    throw std::runtime_error("load_checkpoint: wrong magic");
  }
  const int in_c = header.at("in_channels").get<int>();
  const int out_c = header.at("out_channels").get<int>();
  const int n = header.at("param_count").get<int>();
  Eigen::VectorXd theta(n);
  in.read(reinterpret_cast<char*>(theta.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(n * sizeof(double))) {
    throw std::runtime_error("load_checkpoint: truncated parameter block");
  }
  return HeadParams::unflatten(theta, in_c, out_c);
}

}  // namespace fmreg
