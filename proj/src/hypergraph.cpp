#include "hgp/hypergraph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hgp/error.hpp"

namespace hgp {

std::vector<std::vector<std::size_t>> knn_indices(const Tensor& features, std::size_t k) {
  if (k < 1) throw ConfigError("knn: k must be at least 1");
  check_finite(features, "knn features");
  const std::size_t n = features.rows(), d = features.cols();
  const std::size_t keff = std::min(k, n - 1);
  const Real* x = features.ptr();

  std::vector<Real> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      Real acc = 0;
      for (std::size_t c = 0; c < d; ++c) {
        const Real diff = x[i * d + c] - x[j * d + c];
        acc += diff * diff;
      }
      dist[i * n + j] = dist[j * n + i] = acc;
    }
  }

  std::vector<std::vector<std::size_t>> out(n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    order.erase(order.begin() + static_cast<std::ptrdiff_t>(i));
    const auto closer = [&](std::size_t a, std::size_t b) {
      const Real da = dist[i * n + a], db = dist[i * n + b];
      return da < db || (da == db && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keff), order.end(),
                      closer);
    out[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keff));
  }
  return out;
}

Tensor propagation_matrix(const Tensor& incidence) {
  if (incidence.rank() != 2) throw DimensionError("incidence must be a matrix");
  const std::size_t n = incidence.dim(0), e = incidence.dim(1);
  std::vector<std::vector<std::size_t>> members(e);
  std::vector<Real> dv(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < e; ++i) {
      const Real h = incidence.at(j, i);
      if (h != 0.0 && h != 1.0) throw StructuralError("incidence entries must be 0 or 1");
      if (h == 1.0) {
        members[i].push_back(j);
        dv[j] += 1.0;
      }
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (dv[j] == 0) throw StructuralError("vertex " + std::to_string(j) + " has degree zero");
  }
  std::vector<Real> inv_sqrt_dv(n);
  for (std::size_t j = 0; j < n; ++j) inv_sqrt_dv[j] = 1.0 / std::sqrt(dv[j]);

  Tensor g({n, n}, 0.0);
  auto gv = g.mutable_data();
  for (std::size_t i = 0; i < e; ++i) {
    if (members[i].empty()) throw StructuralError("hyperedge " + std::to_string(i) + " is empty");
    const Real w = 1.0 / static_cast<Real>(members[i].size());
    for (std::size_t a : members[i]) {
      for (std::size_t b : members[i]) {
        // (inv_a * inv_b) is commutative, which keeps G exactly symmetric.
        gv[a * n + b] += w * (inv_sqrt_dv[a] * inv_sqrt_dv[b]);
      }
    }
  }
  return g;
}

Hypergraph build_knn_hypergraph(const Tensor& features, std::size_t k) {
  const auto nn = knn_indices(features, k);
  const std::size_t n = features.rows();
  Hypergraph hg;
  hg.n_vertices = n;
  hg.hyperedges.resize(n);
  Tensor h({n, n}, 0.0);
  auto hv = h.mutable_data();
  for (std::size_t i = 0; i < n; ++i) {
    hg.hyperedges[i].push_back(i);
    hg.hyperedges[i].insert(hg.hyperedges[i].end(), nn[i].begin(), nn[i].end());
    for (std::size_t v : hg.hyperedges[i]) hv[v * n + i] = 1.0;
  }
  hg.vertex_degree.assign(n, 0.0);
  hg.edge_degree.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    hg.edge_degree[i] = static_cast<Real>(hg.hyperedges[i].size());
    for (std::size_t v : hg.hyperedges[i]) hg.vertex_degree[v] += 1.0;
  }
  hg.propagation = propagation_matrix(h);
  hg.incidence = std::move(h);
  return hg;
}

HgcnLayer::HgcnLayer(std::size_t d_in, std::size_t d_out, bool gelu, Rng& rng)
    : linear(d_in, d_out, rng), activation(gelu) {}

void HgcnLayer::collect(ParamList& out, const std::string& prefix) const {
  linear.collect(out, prefix);
}

Tensor hgcn_forward(const Tensor& x, const HgcnLayer& layer, const Tensor& g) {
  if (g.rank() != 2 || g.dim(0) != x.rows() || g.dim(1) != x.rows()) {
    throw DimensionError("hgcn: propagation " + shape_str(g.shape()) + " for input " +
                         shape_str(x.shape()));
  }
  Tensor out = ops::matmul(g, layer.linear(x));
  return layer.activation ? ops::gelu(out) : out;
}

std::string to_string(FusionKind kind) {
  switch (kind) {
    case FusionKind::addition: return "addition";
    case FusionKind::concatenate: return "concatenate";
    case FusionKind::hypergraph_fusion: return "hypergraph_fusion";
    case FusionKind::hypergraph_prompt: return "hypergraph_prompt";
  }
  return "unknown";
}

FusionKind parse_fusion_kind(const std::string& name) {
  for (auto k : all_fusion_kinds()) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown fusion strategy '" + name + "'");
}

const std::vector<FusionKind>& all_fusion_kinds() {
  static const std::vector<FusionKind> kinds = {FusionKind::addition, FusionKind::concatenate,
                                                FusionKind::hypergraph_fusion,
                                                FusionKind::hypergraph_prompt};
  return kinds;
}

HypergraphPrompt::HypergraphPrompt(std::size_t d_model, std::size_t knn_k, Rng& rng)
    : first(2 * d_model, 2 * d_model, true, rng), second(2 * d_model, d_model, false, rng), k(knn_k) {}

Tensor HypergraphPrompt::operator()(const Tensor& rgb_tokens, const Tensor& event_features,
                                    const Hypergraph* fixed_graph, Hypergraph* graph_out) const {
  const Tensor joint = ops::concat_cols(rgb_tokens, event_features);
  Hypergraph built;
  const Hypergraph* graph = fixed_graph;
  if (!graph) {
    built = build_knn_hypergraph(joint, k);
    graph = &built;
  }
  if (graph->n_vertices != joint.rows()) {
    throw DimensionError("hypergraph has " + std::to_string(graph->n_vertices) +
                         " vertices for " + std::to_string(joint.rows()) + " tokens");
  }
  const Tensor hidden = hgcn_forward(joint, first, graph->propagation);
  Tensor prompt = hgcn_forward(hidden, second, graph->propagation);
  if (graph_out) *graph_out = *graph;
  return prompt;
}

void HypergraphPrompt::collect(ParamList& out, const std::string& prefix) const {
  first.collect(out, prefix + ".hgcn1");
  second.collect(out, prefix + ".hgcn2");
}

}  // namespace hgp
