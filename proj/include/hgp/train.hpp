#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hgp/config.hpp"
#include "hgp/model.hpp"

namespace hgp {

/// Mean cross-entropy over non-pad target rows. Returns 0 (and prints a
/// warning to stderr) when every row is padding.
Tensor ce_loss(const Tensor& logits, std::span<const int> targets, int pad_id);

struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<Real>> m;
  std::vector<std::vector<Real>> v;

  bool operator==(const AdamState&) const = default;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam_state(const ParamList& params);

/// One bias-corrected Adam update from the gradients stored on `params`.
/// Parameters without a gradient are treated as having a zero gradient.
/// Throws NumericError naming the parameter if a gradient is not finite.
void adam_step(const ParamList& params, AdamState& state, double lr, const AdamHyper& hyper = {});

/// Cosine warm-up from peak*floor_frac to peak over warmup_frac*total steps,
/// then cosine decay back to peak*floor_frac at `total`.
double one_cycle_lr(std::size_t step, std::size_t total, double peak = 7e-4, double warmup_frac = 0.1,
                    double floor_frac = 0.01);

/// A prepared training example.
struct TrainExample {
  ModelInput input;
  std::string label;
};

struct TrainState {
  TrainConfig config;
  ParamList params;  // values only; names and shapes follow Model::params()
  AdamState adam;
  std::string rng_state;  // permutation sampler engine, textual form
};

/// Losses of one optimizer step.
struct StepRecord {
  std::size_t step = 0;
  double lr = 0;
  double loss = 0;
};

std::string format_step(const StepRecord& r);

/// Single-threaded deterministic trainer.
///
/// Epoch e visits the examples in an order drawn from (seed, e); batch b of
/// that epoch is optimizer step e * steps_per_epoch + b, so a resumed run
/// revisits exactly the batches an uninterrupted run would.
class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<TrainExample> data);
  /// Continues from a saved state; the data must be the same set.
  Trainer(const TrainState& state, std::vector<TrainExample> data);

  std::size_t steps_per_epoch() const;
  /// Optimizer steps the run will take in total.
  std::size_t total_steps() const;
  std::size_t step() const { return static_cast<std::size_t>(adam_.step); }
  bool done() const { return step() >= total_steps(); }

  /// Runs one optimizer step. Throws NumericError if the loss is not finite;
  /// parameters are left untouched in that case.
  StepRecord train_step();

  TrainState state() const;
  Model& model() { return model_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  std::vector<std::size_t> epoch_order(std::size_t epoch) const;
  double sample_loss(const TrainExample& ex, std::size_t batch_len, const std::vector<AttentionMask>& masks,
                     double weight, bool backward);

  TrainConfig cfg_;
  std::vector<TrainExample> data_;
  Model model_;
  ParamList params_;
  AdamState adam_;
  std::mt19937_64 perm_rng_;
  std::size_t cached_epoch_ = static_cast<std::size_t>(-1);
  std::vector<std::size_t> order_;
};

struct TrainRunOptions {
  std::ostream* log = nullptr;        // receives one format_step() line per step
  std::filesystem::path checkpoint;   // final (and periodic) checkpoint path; empty = none
  std::function<void(const StepRecord&)> on_step;
};

/// Trains to completion (or max_steps) and writes the final checkpoint.
/// Periodic checkpoints replace `checkpoint` atomically every
/// checkpoint_every steps. On a non-finite loss the last checkpoint on disk is
/// left in place and NumericError propagates.
std::vector<StepRecord> run_training(Trainer& trainer, const TrainRunOptions& opts);

}  // namespace hgp
