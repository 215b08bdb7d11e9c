#include "muse/sampler.hpp"

#include <algorithm>
#include <cstring>
#include <unordered_set>

#include "muse/io.hpp"
#include "muse/rng.hpp"

namespace muse {

namespace {

// Sample k entries without replacement via partial Fisher-Yates; returns
// all entries when k >= size. Output order is the draw order.
std::vector<std::int64_t> sample_without_replacement(std::span<const std::int64_t> pool,
                                                     std::int64_t k, std::mt19937_64& rng) {
  std::vector<std::int64_t> items(pool.begin(), pool.end());
  const std::int64_t n = static_cast<std::int64_t>(items.size());
  if (k >= n) return items;
  for (std::int64_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::int64_t> pick(i, n - 1);
    std::swap(items[static_cast<std::size_t>(i)], items[static_cast<std::size_t>(pick(rng))]);
  }
  items.resize(static_cast<std::size_t>(k));
  return items;
}

}  // namespace

SubgraphSample shadow_khop(const Graph& g, const std::vector<std::int64_t>& seed_nodes,
                           const std::vector<std::int64_t>& fanouts, std::uint64_t rng_seed) {
  require(!seed_nodes.empty(), "shadow_khop: empty seed set");
  require(!fanouts.empty(), "shadow_khop: fanouts must be nonempty");
  for (auto f : fanouts) require(f >= 1, "shadow_khop: fanouts must be >= 1");

  std::unordered_set<std::int64_t> visited(seed_nodes.begin(), seed_nodes.end());
  require(visited.size() == seed_nodes.size(), "shadow_khop: duplicate seed node");

  auto rng = make_stream(rng_seed, "shadow_khop");
  auto csr = g.csr();

  std::vector<std::int64_t> frontier(seed_nodes);
  std::sort(frontier.begin(), frontier.end());
  for (std::int64_t fanout : fanouts) {
    std::vector<std::int64_t> next;
    for (std::int64_t u : frontier) {
      for (std::int64_t w : sample_without_replacement(csr.neighbors(u), fanout, rng)) {
        if (visited.insert(w).second) next.push_back(w);
      }
    }
    std::sort(next.begin(), next.end());
    frontier = std::move(next);
    if (frontier.empty()) break;
  }

  std::vector<std::int64_t> nodes(seed_nodes);
  std::vector<std::int64_t> extras;
  extras.reserve(visited.size() - seed_nodes.size());
  std::unordered_set<std::int64_t> seeds(seed_nodes.begin(), seed_nodes.end());
  for (std::int64_t v : visited)
    if (!seeds.contains(v)) extras.push_back(v);
  std::sort(extras.begin(), extras.end());
  nodes.insert(nodes.end(), extras.begin(), extras.end());

  return induced_subgraph(g, nodes, static_cast<std::int64_t>(seed_nodes.size()));
}

std::vector<std::vector<std::int64_t>> partition_targets(const Graph& g, std::int64_t batch_size,
                                                         std::uint64_t rng_seed, Split split) {
  require(batch_size >= 1, "partition_targets: batch_size must be >= 1");
  std::vector<std::int64_t> nodes = g.split_nodes(split);
  require(!nodes.empty(), "partition_targets: split has no nodes");

  auto rng = make_stream(rng_seed, "partition", static_cast<std::uint64_t>(split));
  std::shuffle(nodes.begin(), nodes.end(), rng);

  std::vector<std::vector<std::int64_t>> batches;
  for (std::size_t start = 0; start < nodes.size(); start += static_cast<std::size_t>(batch_size)) {
    std::size_t end = std::min(nodes.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(nodes.begin() + static_cast<std::ptrdiff_t>(start),
                         nodes.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

SampleBundle iid_node_sample(const Graph& g, double p, std::int64_t m, std::uint64_t rng_seed) {
  require(p > 0.0 && p <= 1.0, "iid_node_sample: p must lie in (0,1]");
  require(m >= 1, "iid_node_sample: subgraph count must be >= 1");

  SampleBundle b;
  b.provenance = {"iid", {}, rng_seed, graph_digest(g)};
  b.subgraphs.reserve(static_cast<std::size_t>(m));
  for (std::int64_t s = 0; s < m; ++s) {
    auto rng = make_stream(rng_seed, "iid", static_cast<std::uint64_t>(s));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::int64_t> nodes;
    for (std::int64_t v = 0; v < g.num_nodes(); ++v)
      if (unif(rng) < p) nodes.push_back(v);
    b.subgraphs.push_back(induced_subgraph(g, nodes, static_cast<std::int64_t>(nodes.size())));
  }
  return b;
}

SampleBundle shadow_bundle(const Graph& g, Split split, std::int64_t batch_size,
                           const std::vector<std::int64_t>& fanouts, std::uint64_t rng_seed) {
  auto batches = partition_targets(g, batch_size, rng_seed, split);
  SampleBundle b;
  b.provenance = {"shadow_khop", fanouts, rng_seed, graph_digest(g)};
  b.subgraphs.reserve(batches.size());
  for (std::size_t i = 0; i < batches.size(); ++i)
    b.subgraphs.push_back(
        shadow_khop(g, batches[i], fanouts, stream_key(rng_seed, "subgraph", i)));
  require_target_cover(b, g, split);
  return b;
}

namespace {

constexpr char kBundleMagic[] = "MUSB1";

void validate_bundle(const SampleBundle& b) {
  require(!b.subgraphs.empty(), "bundle: must contain at least one subgraph");
  for (std::size_t s = 0; s < b.subgraphs.size(); ++s) {
    const auto& sg = b.subgraphs[s];
    std::string at = "bundle subgraph " + std::to_string(s) + ": ";
    require(sg.num_nodes() >= 1, at + "empty subgraph");
    require(sg.n_targets >= 1 && sg.n_targets <= sg.num_nodes(), at + "invalid target count");
    require(static_cast<std::int64_t>(sg.csr_offsets.size()) == sg.num_nodes() + 1,
            at + "bad CSR offsets length");
    require(sg.csr_offsets.front() == 0 &&
                sg.csr_offsets.back() == static_cast<std::int64_t>(sg.csr_targets.size()),
            at + "inconsistent CSR offsets");
    std::unordered_set<std::int64_t> seen(sg.global_ids.begin(), sg.global_ids.end());
    require(seen.size() == sg.global_ids.size(), at + "duplicate global ids");
  }
}

}  // namespace

void save_bundle(const SampleBundle& b, const std::filesystem::path& path) {
  validate_bundle(b);
  BinWriter w;
  w.bytes(kBundleMagic, 5);
  w.bytes(b.provenance.graph_digest.data(), b.provenance.graph_digest.size());
  w.u64(b.subgraphs.size());
  for (const auto& sg : b.subgraphs) {
    w.u64(static_cast<std::uint64_t>(sg.num_nodes()));
    w.u64(static_cast<std::uint64_t>(sg.n_targets));
    for (auto v : sg.global_ids) w.i64(v);
    w.u64(sg.csr_targets.size());
    for (auto o : sg.csr_offsets) w.i64(o);
    for (auto t : sg.csr_targets) w.i64(t);
  }
  w.str(b.provenance.sampler);
  w.u64(b.provenance.fanouts.size());
  for (auto f : b.provenance.fanouts) w.i64(f);
  w.u64(b.provenance.seed);
  w.write_file(path);
}

SampleBundle load_bundle(const std::filesystem::path& path) {
  auto r = BinReader::from_file(path);
  char magic[5];
  r.bytes(magic, 5);
  require(std::memcmp(magic, kBundleMagic, 5) == 0, path.string() + ": not a bundle file");

  SampleBundle b;
  r.bytes(b.provenance.graph_digest.data(), b.provenance.graph_digest.size());
  std::uint64_t m = r.u64();
  require(m >= 1 && m < (1ULL << 32), path.string() + ": implausible subgraph count");
  b.subgraphs.resize(m);
  for (auto& sg : b.subgraphs) {
    std::uint64_t ns = r.u64();
    sg.n_targets = static_cast<std::int64_t>(r.u64());
    sg.global_ids.resize(ns);
    for (auto& v : sg.global_ids) v = r.i64();
    std::uint64_t nnz = r.u64();
    sg.csr_offsets.resize(ns + 1);
    for (auto& o : sg.csr_offsets) o = r.i64();
    sg.csr_targets.resize(nnz);
    for (auto& t : sg.csr_targets) t = r.i64();
  }
  b.provenance.sampler = r.str();
  std::uint64_t nf = r.u64();
  require(nf < 64, path.string() + ": implausible fanout count");
  b.provenance.fanouts.resize(nf);
  for (auto& f : b.provenance.fanouts) f = r.i64();
  b.provenance.seed = r.u64();
  require(r.exhausted(), path.string() + ": trailing bytes in bundle file");
  validate_bundle(b);
  return b;
}

SampleBundle load_bundle(const std::filesystem::path& path, const Graph& g) {
  SampleBundle b = load_bundle(path);
  require(bundle_matches_graph(b, g),
          path.string() + ": bundle digest does not match this graph");
  return b;
}

bool bundle_matches_graph(const SampleBundle& b, const Graph& g) {
  return b.provenance.graph_digest == graph_digest(g);
}

void require_target_cover(const SampleBundle& b, const Graph& g, Split split) {
  std::vector<std::int64_t> count(static_cast<std::size_t>(g.num_nodes()), 0);
  for (const auto& sg : b.subgraphs)
    for (std::int64_t i = 0; i < sg.n_targets; ++i)
      ++count[static_cast<std::size_t>(sg.global_ids[static_cast<std::size_t>(i)])];
  for (std::int64_t v = 0; v < g.num_nodes(); ++v) {
    bool in_split = g.splits()[static_cast<std::size_t>(v)] == split;
    std::int64_t c = count[static_cast<std::size_t>(v)];
    require(!in_split || c == 1, "bundle: split node " + std::to_string(v) +
                                     " appears as target " + std::to_string(c) + " times");
    require(in_split || c == 0,
            "bundle: node " + std::to_string(v) + " outside the split is a target");
  }
}

}  // namespace muse
