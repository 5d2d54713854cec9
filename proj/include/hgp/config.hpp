#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "hgp/model.hpp"

namespace hgp {

/// Everything that determines a training run.
struct TrainConfig {
  ModelConfig model;
  double lr_peak = 7e-4;
  double warmup_frac = 0.1;
  double floor_frac = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  /// Stops after this many optimizer steps when non-zero; the schedule still
  /// spans the full epoch budget unless `schedule_steps` overrides it.
  std::size_t max_steps = 0;
  std::size_t schedule_steps = 0;
  std::size_t permutations = 6;
  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 0;  // steps; 0 disables periodic checkpoints

  void validate() const;
};

/// Flat `key = value` view of a config; keys are the field names above with
/// model fields unprefixed (d_model, enc_layers, fusion, ...).
std::map<std::string, std::string> to_key_values(const TrainConfig& cfg);

/// Sets one field from its textual value. Throws ConfigError for an unknown
/// key or a malformed value.
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Canonical text form: one `key = value` line per field in sorted key order.
std::string config_to_text(const TrainConfig& cfg);

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
/// Fields that are not mentioned keep the values already in `base`.
TrainConfig config_from_text(const std::string& text, TrainConfig base = {});
TrainConfig load_config_file(const std::filesystem::path& path, TrainConfig base = {});

}  // namespace hgp
