#include "hgp/ablation.hpp"

#include <chrono>
#include <cstdio>
#include <ostream>

#include "hgp/eval.hpp"
#include "hgp/ops.hpp"
#include "hgp/train.hpp"

namespace hgp {

namespace {

Real sequence_loss(const Model& model, const Tensor& z, const EncodedLabel& label, const AttentionMask& mask) {
  const Charset& cs = model.charset();
  std::vector<std::uint8_t> include(label.targets.size());
  for (std::size_t i = 0; i < include.size(); ++i) include[i] = label.targets[i] != cs.pad();
  return ops::cross_entropy(model.decode(z, label.context, mask), label.targets, include).item();
}

bool k1_matches_causal(const Model& model, const std::vector<SamplePair>& test, std::uint64_t seed) {
  const std::size_t t = model.config().max_len;
  const PermutationSet one = sample_permutations(t, 1, seed);
  const AttentionMask k1 = AttentionMask::stack(one.masks);
  const AttentionMask causal = AttentionMask::causal(t);
  for (const auto& s : test) {
    const Tensor z = model.encode(make_input(s, model.config()));
    const EncodedLabel label = encode_label(s.label, model.charset(), t);
    if (sequence_loss(model, z, label, k1) != sequence_loss(model, z, label, causal)) return false;
  }
  return true;
}

}  // namespace

std::vector<AblationRow> run_ablation(const AblationOptions& opts, const std::vector<SamplePair>& train,
                                      const std::vector<SamplePair>& test) {
  const std::vector<FusionKind>& fusions = opts.fusions.empty() ? all_fusion_kinds() : opts.fusions;
  std::vector<AblationRow> rows;
  for (FusionKind fusion : fusions) {
    for (const auto& inject : opts.injects) {
      for (std::size_t k : opts.ks) {
        AblationRow row;
        row.fusion = fusion;
        row.inject = inject;
        row.permutations = k;
        const auto t0 = std::chrono::steady_clock::now();
        try {
          TrainConfig cfg = opts.base;
          cfg.model.fusion = fusion;
          cfg.model.inject_layers = inject;
          cfg.permutations = k;
          Trainer trainer(cfg, make_examples(train, cfg.model));
          while (!trainer.done()) row.final_loss = trainer.train_step().loss;
          row.steps = trainer.step();
          row.accuracy = run_eval(trainer.model(), test, Modality::fused).accuracy;
          if (k == 1) row.ar_equal = k1_matches_causal(trainer.model(), test, cfg.seed) ? "yes" : "no";
        } catch (const std::exception& e) {
          row.status = e.what();
        }
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rows.push_back(row);
        if (opts.progress) *opts.progress << format_ablation_table({row}).substr(format_ablation_table({}).size());
      }
    }
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-18s %-6s %3s %6s %12s %9s %9s %-8s %s\n", "fusion", "inject", "K", "steps",
                "final_loss", "accuracy", "seconds", "k1_ar_eq", "status");
  std::string out = buf;
  out += std::string(out.size() - 1, '-') + "\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-18s %-6s %3zu %6zu %12.6f %9.4f %9.1f %-8s %s\n", to_string(r.fusion).c_str(),
                  r.inject.c_str(), r.permutations, r.steps, r.final_loss, r.accuracy, r.seconds,
                  r.ar_equal.empty() ? "-" : r.ar_equal.c_str(), r.status.c_str());
    out += buf;
  }
  return out;
}

}  // namespace hgp
