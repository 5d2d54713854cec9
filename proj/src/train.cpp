#include "hgp/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <sstream>

#include "hgp/checkpoint.hpp"
#include "hgp/error.hpp"
#include "hgp/ops.hpp"

namespace hgp {

Tensor ce_loss(const Tensor& logits, std::span<const int> targets, int pad_id) {
  std::vector<std::uint8_t> include(targets.size());
  bool any = false;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    include[i] = targets[i] != pad_id;
    any = any || include[i];
  }
  if (!any) std::cerr << "warning: every target row is padding; loss defined as 0\n";
  return ops::cross_entropy(logits, targets, include);
}

AdamState make_adam_state(const ParamList& params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor.numel(), 0.0);
    s.v.emplace_back(p.tensor.numel(), 0.0);
  }
  return s;
}

void adam_step(const ParamList& params, AdamState& state, double lr, const AdamHyper& hyper) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ConfigError("optimizer state does not match the parameter list");
  }
  for (const auto& p : params) {
    for (Real g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + p.name + "'");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor w = params[i].tensor;
    const auto g = w.grad();
    auto val = w.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != val.size()) throw ConfigError("optimizer state size mismatch for '" + params[i].name + "'");
    for (std::size_t j = 0; j < val.size(); ++j) {
      const Real gj = g.empty() ? 0.0 : g[j];
      m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * gj;
      v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * gj * gj;
      val[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + hyper.eps);
    }
  }
}

double one_cycle_lr(std::size_t step, std::size_t total, double peak, double warmup_frac,
                    double floor_frac) {
  const double low = peak * floor_frac;
  const double warm = warmup_frac * static_cast<double>(total);
  const double s = static_cast<double>(std::min(step, total));
  if (s <= warm && warm > 0) {
    const double frac = s / warm;
    return low + (peak - low) * 0.5 * (1.0 - std::cos(std::numbers::pi * frac));
  }
  const double rest = static_cast<double>(total) - warm;
  const double frac = rest > 0 ? (s - warm) / rest : 1.0;
  return low + (peak - low) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

std::string format_step(const StepRecord& r) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "step=%zu lr=%.9e loss=%.9f", r.step, r.lr, r.loss);
  return buf;
}

Trainer::Trainer(TrainConfig cfg, std::vector<TrainExample> data)
    : cfg_(std::move(cfg)), data_(std::move(data)), model_(cfg_.model, cfg_.seed), perm_rng_(cfg_.seed) {
  cfg_.validate();
  if (data_.empty()) throw ConfigError("training set is empty");
  params_ = model_.params();
  adam_ = make_adam_state(params_);
}

Trainer::Trainer(const TrainState& state, std::vector<TrainExample> data) : Trainer(state.config, std::move(data)) {
  model_.load_params(state.params);
  if (state.adam.m.size() != params_.size()) throw ConfigError("checkpoint optimizer state does not fit the model");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (state.adam.m[i].size() != params_[i].tensor.numel() || state.adam.v[i].size() != params_[i].tensor.numel()) {
      throw ConfigError("checkpoint optimizer state does not fit parameter '" + params_[i].name + "'");
    }
  }
  adam_ = state.adam;
  std::istringstream is(state.rng_state);
  is >> perm_rng_;
  if (!is) throw ParseError("malformed RNG state in checkpoint", 0);
}

std::size_t Trainer::steps_per_epoch() const { return (data_.size() + cfg_.batch_size - 1) / cfg_.batch_size; }

std::size_t Trainer::total_steps() const {
  const std::size_t full = cfg_.epochs * steps_per_epoch();
  return cfg_.max_steps ? std::min(full, cfg_.max_steps) : full;
}

std::vector<std::size_t> Trainer::epoch_order(std::size_t epoch) const {
  std::vector<std::size_t> order(data_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5u};
  std::mt19937_64 rng(seq);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  return order;
}

double Trainer::sample_loss(const TrainExample& ex, std::size_t batch_len, const std::vector<AttentionMask>& masks,
                            double weight, bool backward) {
  const Charset& cs = model_.charset();
  const EncodedLabel label = encode_label(ex.label, cs, batch_len);
  const AttentionMask stacked = AttentionMask::stack(masks);
  std::vector<int> targets;
  targets.reserve(masks.size() * label.targets.size());
  for (std::size_t k = 0; k < masks.size(); ++k) targets.insert(targets.end(), label.targets.begin(), label.targets.end());

  GradTape tape;
  TapeScope scope(tape);
  const Tensor z = model_.encode(ex.input);
  const Tensor loss = ce_loss(model_.decode(z, label.context, stacked), targets, cs.pad());
  if (backward) tape.backward(ops::scale(loss, weight));
  return loss.item();
}

StepRecord Trainer::train_step() {
  if (done()) throw ConfigError("training already finished");
  const std::size_t spe = steps_per_epoch();
  const std::size_t s = step();
  const std::size_t epoch = s / spe, b = s % spe;
  if (epoch != cached_epoch_) {
    order_ = epoch_order(epoch);
    cached_epoch_ = epoch;
  }
  const std::size_t first = b * cfg_.batch_size;
  const std::size_t last = std::min(first + cfg_.batch_size, data_.size());

  std::size_t batch_len = 1;
  for (std::size_t i = first; i < last; ++i) batch_len = std::max(batch_len, data_[order_[i]].label.size());
  const std::size_t k = static_cast<std::size_t>(factorial_capped(batch_len, cfg_.permutations));
  const PermutationSet perms = sample_permutations(batch_len, std::min(k, cfg_.permutations), perm_rng_());

  const double weight = 1.0 / static_cast<double>(last - first);
  double total = 0;
  try {
    for (std::size_t i = first; i < last; ++i) {
      total += weight * sample_loss(data_[order_[i]], batch_len, perms.masks, weight, true);
    }
    if (!std::isfinite(total)) throw NumericError("loss became non-finite at step " + std::to_string(s + 1));
    const std::size_t schedule = cfg_.schedule_steps ? cfg_.schedule_steps : cfg_.epochs * spe;
    const double lr = one_cycle_lr(s, schedule, cfg_.lr_peak, cfg_.warmup_frac, cfg_.floor_frac);
    adam_step(params_, adam_, lr, {cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps});
    for (auto& p : params_) p.tensor.zero_grad();
    return {s + 1, lr, total};
  } catch (...) {
    for (auto& p : params_) p.tensor.zero_grad();
    throw;
  }
}

TrainState Trainer::state() const {
  TrainState st;
  st.config = cfg_;
  st.params = clone_params(params_);
  st.adam = adam_;
  std::ostringstream os;
  os << perm_rng_;
  st.rng_state = os.str();
  return st;
}

std::vector<StepRecord> run_training(Trainer& trainer, const TrainRunOptions& opts) {
  std::vector<StepRecord> records;
  const std::size_t every = trainer.config().checkpoint_every;
  while (!trainer.done()) {
    const StepRecord r = trainer.train_step();
    records.push_back(r);
    if (opts.log) *opts.log << format_step(r) << '\n' << std::flush;
    if (opts.on_step) opts.on_step(r);
    if (!opts.checkpoint.empty() && every && r.step % every == 0 && !trainer.done()) {
      save_checkpoint(opts.checkpoint, trainer.state());
    }
  }
  if (!opts.checkpoint.empty()) save_checkpoint(opts.checkpoint, trainer.state());
  return records;
}

}  // namespace hgp
