#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "muse/digest.hpp"
#include "muse/graph.hpp"

namespace muse {

struct BundleProvenance {
  std::string sampler;                 // "shadow_khop" | "iid"
  std::vector<std::int64_t> fanouts;   // empty for iid
  std::uint64_t seed = 0;
  Digest graph_digest{};

  bool operator==(const BundleProvenance&) const = default;
};

// The fixed offline sample set: sampled once, reused every epoch.
struct SampleBundle {
  std::vector<SubgraphSample> subgraphs;
  BundleProvenance provenance;

  std::int64_t size() const { return static_cast<std::int64_t>(subgraphs.size()); }
  bool operator==(const SampleBundle&) const = default;
};

// Node-wise neighbor sampling without replacement (all neighbors when the
// degree is at most the fanout), one fanout per hop, then the node-induced
// subgraph over the union. Seeds occupy local indices 0..|seeds|-1; the
// remaining nodes follow in ascending global order.
SubgraphSample shadow_khop(const Graph& g, const std::vector<std::int64_t>& seed_nodes,
                           const std::vector<std::int64_t>& fanouts, std::uint64_t rng_seed);

// Random permutation of the split's nodes chunked into batches of
// batch_size; the last batch may be smaller.
std::vector<std::vector<std::int64_t>> partition_targets(const Graph& g, std::int64_t batch_size,
                                                         std::uint64_t rng_seed,
                                                         Split split = Split::train);

// m independent subgraphs, each including every node with probability p;
// edges node-induced; every sampled node is a target. A draw may come back
// empty; empty subgraphs are usable in memory but rejected by save_bundle.
SampleBundle iid_node_sample(const Graph& g, double p, std::int64_t m, std::uint64_t rng_seed);

// partition_targets + shadow_khop per batch. Every node of the split is a
// target in exactly one subgraph.
SampleBundle shadow_bundle(const Graph& g, Split split, std::int64_t batch_size,
                           const std::vector<std::int64_t>& fanouts, std::uint64_t rng_seed);

// Bundle file: magic "MUSB1", graph digest, m, per-subgraph blocks
// (n_s, n_s', global_ids, CSR arrays), then the provenance trailer.
// Round-trips bit-exactly.
void save_bundle(const SampleBundle& b, const std::filesystem::path& path);
SampleBundle load_bundle(const std::filesystem::path& path);
// Load plus digest validation against the graph the bundle will be used with.
SampleBundle load_bundle(const std::filesystem::path& path, const Graph& g);

bool bundle_matches_graph(const SampleBundle& b, const Graph& g);

// Checks that bundle targets are exactly the split's nodes, each exactly once.
void require_target_cover(const SampleBundle& b, const Graph& g, Split split);

}  // namespace muse
