#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hgp/config.hpp"
#include "hgp/render.hpp"

namespace hgp {

struct AblationRow {
  FusionKind fusion = FusionKind::hypergraph_prompt;
  std::string inject;  // "last" or "all"
  std::size_t permutations = 0;
  std::size_t steps = 0;
  double final_loss = 0;
  double accuracy = 0;
  double seconds = 0;
  /// K = 1 rows: whether the permutation-mask loss equals the causal AR loss
  /// bitwise on every test sample. Empty for K > 1.
  std::string ar_equal;
  std::string status = "ok";  // or the error message of a failed run
};

struct AblationOptions {
  TrainConfig base;  // model dims, schedule, batch size, epochs, seed
  std::vector<FusionKind> fusions;
  std::vector<std::string> injects = {"last", "all"};
  std::vector<std::size_t> ks = {1, 6};
  std::ostream* progress = nullptr;
};

/// Trains and evaluates every (fusion, inject, K) combination on the same
/// data. A failing run is reported in its row and the sweep continues.
std::vector<AblationRow> run_ablation(const AblationOptions& opts, const std::vector<SamplePair>& train,
                                      const std::vector<SamplePair>& test);

/// Plain-text table: a header line, a rule, one line per row.
std::string format_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace hgp
