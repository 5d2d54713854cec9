#pragma once

#include <string>
#include <vector>

#include "hgp/nn.hpp"

namespace hgp {

/// K-NN hypergraph over token features with its cached propagation matrix.
struct Hypergraph {
  std::size_t n_vertices = 0;
  /// Member vertices of each hyperedge, anchor first, then neighbours by
  /// increasing distance.
  std::vector<std::vector<std::size_t>> hyperedges;
  Tensor incidence;                 // n_vertices x n_edges, entries 0/1
  std::vector<Real> vertex_degree;  // diagonal of Dv
  std::vector<Real> edge_degree;    // diagonal of De
  Tensor propagation;               // G, n_vertices x n_vertices

  std::size_t n_edges() const { return hyperedges.size(); }
};

/// k nearest neighbours of every row by Euclidean distance, self excluded,
/// ties broken towards the lower index. k is clamped to rows - 1.
std::vector<std::vector<std::size_t>> knn_indices(const Tensor& features, std::size_t k);

/// One hyperedge per vertex: {vertex} + its k nearest neighbours.
Hypergraph build_knn_hypergraph(const Tensor& features, std::size_t k);

/// G = Dv^{-1/2} H De^{-1} H^T Dv^{-1/2}. Throws StructuralError on a
/// zero-degree vertex or hyperedge.
Tensor propagation_matrix(const Tensor& incidence);

/// Hypergraph convolution X' = G (X W + b), optionally followed by GELU.
struct HgcnLayer {
  Linear linear;
  bool activation = false;

  HgcnLayer() = default;
  HgcnLayer(std::size_t d_in, std::size_t d_out, bool gelu, Rng& rng);
  void collect(ParamList& out, const std::string& prefix) const;
};

/// G is treated as a constant: no gradient flows into it.
Tensor hgcn_forward(const Tensor& x, const HgcnLayer& layer, const Tensor& g);

enum class FusionKind { addition, concatenate, hypergraph_fusion, hypergraph_prompt };

std::string to_string(FusionKind kind);
/// Accepts the names produced by to_string(). Throws ConfigError otherwise.
FusionKind parse_fusion_kind(const std::string& name);
const std::vector<FusionKind>& all_fusion_kinds();

/// Two-layer HGCN over the channel-concatenated RGB and event tokens.
struct HypergraphPrompt {
  HgcnLayer first;   // 2C' -> 2C', GELU
  HgcnLayer second;  // 2C' -> C'
  std::size_t k = 10;

  HypergraphPrompt() = default;
  HypergraphPrompt(std::size_t d_model, std::size_t knn_k, Rng& rng);

  /// Builds the hypergraph on concat(rgb_tokens, event_features) unless
  /// `fixed_graph` is given, and returns the N x C' prompt. The graph used is
  /// copied to `graph_out` when non-null.
  Tensor operator()(const Tensor& rgb_tokens, const Tensor& event_features,
                    const Hypergraph* fixed_graph = nullptr, Hypergraph* graph_out = nullptr) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

}  // namespace hgp
