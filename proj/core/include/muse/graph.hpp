#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "muse/types.hpp"

namespace muse {

enum class Split : std::uint8_t { none = 0, train = 1, val = 2, test = 3 };

// Read-only view over a CSR adjacency. Laplacian operators work on views so
// they apply to full graphs and induced subgraphs alike.
struct CsrView {
  std::int64_t n = 0;
  std::span<const std::int64_t> offsets;  // size n+1, nondecreasing
  std::span<const std::int64_t> targets;  // size offsets[n]

  std::int64_t degree(std::int64_t v) const { return offsets[v + 1] - offsets[v]; }
  std::span<const std::int64_t> neighbors(std::int64_t v) const {
    return targets.subspan(static_cast<std::size_t>(offsets[v]),
                           static_cast<std::size_t>(degree(v)));
  }
  std::int64_t num_edges() const { return static_cast<std::int64_t>(targets.size()) / 2; }
  std::int64_t max_degree() const;
  bool has_edge(std::int64_t u, std::int64_t v) const;  // binary search, rows sorted
};

// Immutable full graph: symmetric deduplicated CSR without self-loops,
// node features, integer labels and disjoint split masks.
class Graph {
 public:
  Graph() = default;

  std::int64_t num_nodes() const { return n_; }
  std::int64_t num_edges() const { return static_cast<std::int64_t>(csr_targets_.size()) / 2; }
  std::int64_t feature_dim() const { return features_.cols(); }
  std::int64_t num_classes() const { return num_classes_; }

  CsrView csr() const { return {n_, csr_offsets_, csr_targets_}; }
  const std::vector<std::int64_t>& csr_offsets() const { return csr_offsets_; }
  const std::vector<std::int64_t>& csr_targets() const { return csr_targets_; }

  const Mat& features() const { return features_; }
  const std::vector<std::int32_t>& labels() const { return labels_; }
  const std::vector<Split>& splits() const { return splits_; }

  std::vector<std::int64_t> split_nodes(Split s) const;

  std::int64_t degree(std::int64_t v) const { return csr().degree(v); }

  friend Graph build_graph(const std::vector<std::pair<std::int64_t, std::int64_t>>& edges,
                           std::int64_t n, Mat features, std::vector<std::int32_t> labels,
                           std::vector<Split> splits);

 private:
  std::int64_t n_ = 0;
  std::int64_t num_classes_ = 0;
  std::vector<std::int64_t> csr_offsets_;
  std::vector<std::int64_t> csr_targets_;
  Mat features_;
  std::vector<std::int32_t> labels_;
  std::vector<Split> splits_;
};

// One offline sample: induced CSR over global_ids, target nodes first.
// Immutable after construction; n == 0 only for the degenerate empty draw
// of the iid sampler, which is never serialized.
struct SubgraphSample {
  std::vector<std::int64_t> global_ids;  // local index -> full-graph id, entries distinct
  std::int64_t n_targets = 0;            // targets occupy local indices [0, n_targets)
  std::vector<std::int64_t> csr_offsets;
  std::vector<std::int64_t> csr_targets;

  std::int64_t num_nodes() const { return static_cast<std::int64_t>(global_ids.size()); }
  std::int64_t num_edges() const { return static_cast<std::int64_t>(csr_targets.size()) / 2; }
  CsrView csr() const { return {num_nodes(), csr_offsets, csr_targets}; }

  bool operator==(const SubgraphSample&) const = default;
};

// Symmetrizes, deduplicates and drops self-loops; neighbor lists ascending.
// Labels may be empty (label-free graphs used in verification instances);
// otherwise values must lie in [0, num_classes).
Graph build_graph(const std::vector<std::pair<std::int64_t, std::int64_t>>& edges, std::int64_t n,
                  Mat features, std::vector<std::int32_t> labels, std::vector<Split> splits);

// (D - A) Y computed from CSR in a fixed summation order; never forms L.
Mat laplacian_apply(const CsrView& g, const Mat& Y);

// tr(Y^T L Y) via the edgewise sum 1/2 * sum_{(i,j)} ||Y_i - Y_j||^2 over the
// symmetric stored edge set.
double smooth_trace(const CsrView& g, const Mat& Y);

// Node-induced subgraph: edge kept iff both endpoints are in node_ids.
// The first n_targets entries of node_ids become local targets 0..n_targets-1.
SubgraphSample induced_subgraph(const Graph& g, const std::vector<std::int64_t>& node_ids,
                                std::int64_t n_targets);

// Rows of m selected by ids.
Mat gather_rows(const Mat& m, const std::vector<std::int64_t>& ids);

}  // namespace muse
