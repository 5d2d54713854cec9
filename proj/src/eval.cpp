#include "hgp/eval.hpp"

#include <chrono>
#include <cstdio>

#include "hgp/dataset.hpp"
#include "hgp/error.hpp"
#include "hgp/train.hpp"

namespace hgp {

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] != b[j - 1])});
      diag = up;
    }
  }
  return row[b.size()];
}

EvalReport score_predictions(const std::vector<std::string>& predictions, const std::vector<std::string>& labels) {
  if (predictions.size() != labels.size()) throw ConfigError("prediction and label counts differ");
  EvalReport r;
  r.count = labels.size();
  std::size_t edits = 0, chars = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool ok = predictions[i] == labels[i];
    r.correct += ok;
    auto& bucket = r.per_length[labels[i].size()];
    bucket.first += ok;
    ++bucket.second;
    edits += edit_distance(predictions[i], labels[i]);
    chars += labels[i].size();
  }
  r.accuracy = r.count ? static_cast<double>(r.correct) / static_cast<double>(r.count) : 0.0;
  r.cer = chars ? static_cast<double>(edits) / static_cast<double>(chars) : 0.0;
  r.predictions = predictions;
  return r;
}

EvalReport run_eval(const Model& model, const std::vector<SamplePair>& samples, Modality mode, std::size_t threads) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> preds(samples.size()), labels(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    preds[i] = model.recognize(make_input(samples[i], model.config()), mode);
    labels[i] = samples[i].label;
  });
  EvalReport r = score_predictions(preds, labels);
  r.mode = to_string(mode);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string format_report(const EvalReport& r) {
  char buf[128];
  std::string out = "mode = " + r.mode + "\n";
  out += "count = " + std::to_string(r.count) + "\n";
  out += "correct = " + std::to_string(r.correct) + "\n";
  std::snprintf(buf, sizeof buf, "accuracy = %.6f\ncer = %.6f\nwall_seconds = %.3f\n", r.accuracy, r.cer,
                r.wall_seconds);
  out += buf;
  for (const auto& [len, ct] : r.per_length) {
    out += "acc_len_" + std::to_string(len) + " = " + std::to_string(ct.first) + "/" + std::to_string(ct.second) + "\n";
  }
  return out;
}

std::vector<TrainExample> make_examples(const std::vector<SamplePair>& samples, const ModelConfig& cfg) {
  std::vector<TrainExample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({make_input(s, cfg), s.label});
  return out;
}

}  // namespace hgp
