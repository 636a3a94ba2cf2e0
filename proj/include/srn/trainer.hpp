#ifndef SRN_TRAINER_HPP_
#define SRN_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "srn/data.hpp"
#include "srn/image.hpp"
#include "srn/kv.hpp"
#include "srn/model.hpp"
#include "srn/rng.hpp"

namespace srn {

struct TrainConfig {
  int batch_size = 16;          // full-scale runs use 96
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lr_init = 1e-3;
  double lr_floor = 1e-5;
  double lr_decay_factor = 0.1;
  int plateau_patience = 3;
  double plateau_min_delta = 1e-4;
  int max_epochs = 30;          // per stage
  std::uint64_t seed = 0;
  int aug_base = 0;             // 0: use the stored image side

  void validate() const {
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("TrainConfig: momentum outside [0, 1)");
    if (weight_decay < 0.0) throw ConfigError("TrainConfig: negative weight_decay");
    if (lr_floor > lr_init) throw ConfigError("TrainConfig: lr_floor exceeds lr_init");
    if (lr_init <= 0.0 || lr_floor <= 0.0) throw ConfigError("TrainConfig: lr must be positive");
    if (lr_decay_factor <= 0.0 || lr_decay_factor >= 1.0)
      throw ConfigError("TrainConfig: lr_decay_factor outside (0, 1)");
    if (plateau_patience < 1) throw ConfigError("TrainConfig: plateau_patience must be >= 1");
    if (plateau_min_delta < 0.0) throw ConfigError("TrainConfig: negative plateau_min_delta");
    if (max_epochs < 1) throw ConfigError("TrainConfig: max_epochs must be >= 1");
  }

  static TrainConfig from_kv(const KvFile& kv) {
    TrainConfig c;
    c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
    c.momentum = kv.get_real("momentum", c.momentum);
    c.weight_decay = kv.get_real("weight_decay", c.weight_decay);
    c.lr_init = kv.get_real("lr_init", c.lr_init);
    c.lr_floor = kv.get_real("lr_floor", c.lr_floor);
    c.lr_decay_factor = kv.get_real("lr_decay_factor", c.lr_decay_factor);
    c.plateau_patience = static_cast<int>(kv.get_int("plateau_patience", c.plateau_patience));
    c.plateau_min_delta = kv.get_real("plateau_min_delta", c.plateau_min_delta);
    c.max_epochs = static_cast<int>(kv.get_int("max_epochs", c.max_epochs));
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long>(c.seed)));
    c.aug_base = static_cast<int>(kv.get_int("aug_base", c.aug_base));
    c.validate();
    return c;
  }
  static TrainConfig from_file(const std::string& path) {
    return from_kv(KvFile::parse_file(path));
  }
};

/// One SGD update with momentum and decoupled-from-nothing classic weight
/// decay folded into the velocity:
///   v <- momentum * v + grad + weight_decay * param
///   param <- param - lr * v
/// Frozen groups are skipped entirely (their velocity stays put too).
template <typename Scalar>
void sgd_step(ParamStore<Scalar>& params, double lr, double momentum, double weight_decay) {
  for (auto& e : params.entries()) {
    if (params.frozen(e)) continue;
    for (int i = 0; i < e.value.size(); ++i) {
      const double v = momentum * static_cast<double>(e.velocity[i]) +
                       static_cast<double>(e.grad[i]) +
                       weight_decay * static_cast<double>(e.value[i]);
      e.velocity[i] = static_cast<Scalar>(v);
      e.value[i] = static_cast<Scalar>(static_cast<double>(e.value[i]) - lr * v);
    }
  }
}

/// Validation-plateau learning-rate ladder. Decays by lr_decay_factor after
/// plateau_patience consecutive epochs without an improvement larger than
/// plateau_min_delta; once at lr_floor, the next plateau marks the stage
/// complete. The patience counter resets after every decay.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(const TrainConfig& cfg)
      : cfg_(cfg), lr_(cfg.lr_init) {}

  double lr() const { return lr_; }
  bool stage_complete() const { return complete_; }

  /// Feed one epoch's validation loss; returns the lr for the next epoch.
  double observe(double val_loss) {
    if (val_loss < best_ - cfg_.plateau_min_delta) {
      best_ = val_loss;
      bad_epochs_ = 0;
      return lr_;
    }
    if (++bad_epochs_ < cfg_.plateau_patience) return lr_;
    bad_epochs_ = 0;
    if (lr_ <= cfg_.lr_floor) {
      complete_ = true;
    } else {
      lr_ = std::max(lr_ * cfg_.lr_decay_factor, cfg_.lr_floor);
    }
    return lr_;
  }

 private:
  TrainConfig cfg_;
  double lr_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
  bool complete_ = false;
};

/// Pure replay of the ladder over a full loss history: the lr that would be
/// in force after observing every entry.
inline double lr_schedule(const std::vector<double>& val_loss_history, const TrainConfig& cfg) {
  if (val_loss_history.empty()) throw ConfigError("lr_schedule: empty history");
  PlateauScheduler sched(cfg);
  for (double v : val_loss_history) sched.observe(v);
  return sched.lr();
}

/// Record of one crop draw: ladder index, resolved window geometry.
struct CropChoice {
  int size_index = 0;   // k in 0..4
  int position = 0;     // 0..3 corners (tl, tr, bl, br), 4 center
  int side = 0;
  int top = 0;
  int left = 0;
};

/// Training-time crop. The image is resized to base x base, a square window
/// whose side comes from the 5-step geometric ladder
///   side_k = round(base * 2^(-k/4)), k = 0..4
/// is cut at one of {4 corners, center}, and the window is resized to the
/// network input. Ladder index and position are drawn uniformly (size first,
/// then position). Evaluation uses plain_resize instead.
template <typename Scalar>
Tensor<Scalar> augment(const Tensor<Scalar>& image, int base, int out_h, int out_w,
                       std::mt19937_64& rng, CropChoice* choice = nullptr) {
  if (base < 2) throw ConfigError("augment: base side must be >= 2");
  const Tensor<Scalar> resized = bilinear_resize(image, base, base);
  std::uniform_int_distribution<int> pick(0, 4);
  const int k = pick(rng);
  const int side = std::max(1, static_cast<int>(std::lround(base * std::pow(2.0, -k / 4.0))));
  const int pos = pick(rng);
  const int lo = 0, hi = base - side, mid = (base - side) / 2;
  int top = 0, left = 0;
  switch (pos) {
    case 0: top = lo; left = lo; break;
    case 1: top = lo; left = hi; break;
    case 2: top = hi; left = lo; break;
    case 3: top = hi; left = hi; break;
    default: top = mid; left = mid; break;
  }
  if (choice) *choice = CropChoice{k, pos, side, top, left};
  return bilinear_resize(crop(resized, top, left, side, side), out_h, out_w);
}

template <typename Scalar>
Tensor<Scalar> plain_resize(const Tensor<Scalar>& image, int out_h, int out_w) {
  return bilinear_resize(image, out_h, out_w);
}

struct EpochRecord {
  int epoch = 0;
  int stage = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct StageReport {
  int stage = 0;
  std::vector<EpochRecord> epochs;
  bool completed_by_plateau = false;
  double final_val_loss() const {
    return epochs.empty() ? std::numeric_limits<double>::quiet_NaN() : epochs.back().val_loss;
  }
};

inline void write_epoch_log_header(std::ostream& os) {
  os << "epoch stage lr train_loss val_loss\n";
}
inline void write_epoch_record(std::ostream& os, const EpochRecord& r) {
  os << r.epoch << " " << r.stage << " " << exact_decimal(r.lr) << " "
     << exact_decimal(r.train_loss) << " " << exact_decimal(r.val_loss) << "\n";
}

namespace detail {

template <typename Scalar>
double mean_split_loss(SrnModel<Scalar>& model, const Dataset& data, const std::string& split,
                       const std::string& loss_output) {
  const ModelConfig& mc = model.config();
  const int begin = data.split_begin(split), count = data.split_count(split);
  if (count == 0) throw DataError("dataset has no " + split + " samples");
  double sum = 0.0;
  for (int i = 0; i < count; ++i) {
    const Sample& s = data.samples[static_cast<std::size_t>(begin + i)];
    const Tensor<Scalar> img =
        plain_resize(s.image.template cast<Scalar>(), mc.image_h, mc.image_w);
    const Tensor<Scalar> tg = targets_tensor<Scalar>(s);
    model.forward(img, &tg);
    sum += static_cast<double>(model.value(loss_output)[0]);
  }
  return sum / count;
}

}  // namespace detail

/// Trains one stage: freezes everything outside the stage's groups, optimizes
/// its loss head with SGD over shuffled mini-batches of augmented crops, and
/// steps the lr ladder on the validation loss after every epoch.
template <typename Scalar>
StageReport run_stage(SrnModel<Scalar>& model, const Dataset& data, const TrainConfig& cfg,
                      const StagePlan::Stage& stage, std::ostream* log = nullptr) {
  cfg.validate();
  const ModelConfig& mc = model.config();
  if (data.num_labels != mc.num_labels)
    throw DataError("dataset has " + std::to_string(data.num_labels) + " labels, model expects " +
                    std::to_string(mc.num_labels));

  Graph& g = model.graph();
  g.set_loss(g.output(stage.loss_output));
  auto& params = model.store();
  params.freeze_all();
  for (const auto& grp : stage.trainable_groups) params.set_group_frozen(grp, false);
  params.zero_velocity();
  auto& exec = model.exec();

  const int base = cfg.aug_base > 0 ? cfg.aug_base : std::min(data.height, data.width);
  const Tensor<Scalar> ones_mask = Tensor<Scalar>::ones({mc.num_labels});
  const int n_train = data.split_count("train");
  if (n_train == 0) throw DataError("dataset has no train samples");

  std::vector<int> order(static_cast<std::size_t>(n_train));
  std::iota(order.begin(), order.end(), 0);

  PlateauScheduler sched(cfg);
  StageReport report;
  report.stage = stage.number;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(stage.number) * 1000003u +
                                                  static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = sched.lr();
    double train_sum = 0.0;

    for (int start = 0; start < n_train; start += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, n_train - start);
      params.zero_grads();
      for (int b = 0; b < bsz; ++b) {
        const Sample& s = data.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(start + b)])];
        const Tensor<Scalar> img =
            augment(s.image.template cast<Scalar>(), base, mc.image_h, mc.image_w, rng);
        const Tensor<Scalar> tg = targets_tensor<Scalar>(s);
        exec.forward({&img, &tg, &ones_mask});
        train_sum += static_cast<double>(exec.value(g.loss_node())[0]);
        exec.backward(g.loss_node(), static_cast<Scalar>(1.0 / bsz));
      }
      sgd_step(params, lr, cfg.momentum, cfg.weight_decay);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.stage = stage.number;
    rec.lr = lr;
    rec.train_loss = train_sum / n_train;
    rec.val_loss = detail::mean_split_loss(model, data, "val", stage.loss_output);
    report.epochs.push_back(rec);
    if (log) write_epoch_record(*log, rec);

    sched.observe(rec.val_loss);
    if (sched.stage_complete()) {
      report.completed_by_plateau = true;
      break;
    }
  }
  params.unfreeze_all();
  return report;
}

struct TrainRunReport {
  std::vector<StageReport> stages;
};

/// Runs the requested stages in order. Stages must be contiguous and start
/// no later than one past the model's last completed stage (prior-stage
/// parameters have to exist before a later stage may run). Writes one
/// checkpoint per completed stage when out_prefix is nonempty.
template <typename Scalar>
TrainRunReport train_stages(SrnModel<Scalar>& model, const Dataset& data, const TrainConfig& cfg,
                            const std::vector<int>& stage_numbers,
                            const std::string& out_prefix = "", std::ostream* log = nullptr) {
  if (stage_numbers.empty()) throw ConfigError("train_stages: no stages requested");
  const StagePlan plan = StagePlan::standard();
  for (std::size_t i = 0; i + 1 < stage_numbers.size(); ++i)
    if (stage_numbers[i + 1] != stage_numbers[i] + 1)
      throw ConfigError("train_stages: stages must be consecutive");
  if (stage_numbers.front() > model.stage_loaded() + 1)
    throw ConfigError("train_stages: stage " + std::to_string(stage_numbers.front()) +
                      " needs a checkpoint of stage " + std::to_string(stage_numbers.front() - 1));
  if (log) write_epoch_log_header(*log);
  TrainRunReport run;
  for (int number : stage_numbers) {
    run.stages.push_back(run_stage(model, data, cfg, plan.stage(number), log));
    model.set_stage_loaded(number);
    if (!out_prefix.empty())
      save_checkpoint_file(out_prefix + "stage" + std::to_string(number) + ".ckpt",
                           model.config(), model.store(), number);
  }
  return run;
}

}  // namespace srn

#endif  // SRN_TRAINER_HPP_
