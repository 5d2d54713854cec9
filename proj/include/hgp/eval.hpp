#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hgp/train.hpp"

namespace hgp {

struct EvalReport {
  std::string mode;
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy = 0;
  double cer = 0;  // total edit distance / total label characters
  /// label length -> (correct, total)
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> per_length;
  double wall_seconds = 0;
  std::vector<std::string> predictions;  // in sample order
};

/// Levenshtein distance with unit costs.
std::size_t edit_distance(const std::string& a, const std::string& b);

/// Scores predictions against labels by exact match; both lists are in sample order.
EvalReport score_predictions(const std::vector<std::string>& predictions, const std::vector<std::string>& labels);

/// Greedy-decodes every sample on up to `threads` workers.
EvalReport run_eval(const Model& model, const std::vector<SamplePair>& samples, Modality mode,
                    std::size_t threads = 0);

/// Flat `key = value` text; per-length entries appear as `acc_len_<n> = c/t`.
std::string format_report(const EvalReport& r);

/// Training examples from loaded sample pairs.
std::vector<TrainExample> make_examples(const std::vector<SamplePair>& samples, const ModelConfig& cfg);

}  // namespace hgp
