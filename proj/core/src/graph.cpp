#include "muse/graph.hpp"

#include <algorithm>
#include <unordered_map>
#include <utility>

namespace muse {

std::int64_t CsrView::max_degree() const {
  std::int64_t d = 0;
  for (std::int64_t v = 0; v < n; ++v) d = std::max(d, degree(v));
  return d;
}

bool CsrView::has_edge(std::int64_t u, std::int64_t v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<std::int64_t> Graph::split_nodes(Split s) const {
  std::vector<std::int64_t> out;
  for (std::int64_t v = 0; v < n_; ++v)
    if (splits_[v] == s) out.push_back(v);
  return out;
}

Graph build_graph(const std::vector<std::pair<std::int64_t, std::int64_t>>& edges, std::int64_t n,
                  Mat features, std::vector<std::int32_t> labels, std::vector<Split> splits) {
  require(n >= 0, "build_graph: negative node count");
  require(features.rows() == n, "build_graph: feature row count " +
                                    std::to_string(features.rows()) + " != node count " +
                                    std::to_string(n));
  if (labels.empty()) labels.assign(static_cast<std::size_t>(n), 0);
  require(static_cast<std::int64_t>(labels.size()) == n, "build_graph: label count mismatch");
  if (splits.empty()) splits.assign(static_cast<std::size_t>(n), Split::none);
  require(static_cast<std::int64_t>(splits.size()) == n, "build_graph: split mask count mismatch");

  for (std::size_t k = 0; k < edges.size(); ++k) {
    auto [u, v] = edges[k];
    require(u >= 0 && u < n && v >= 0 && v < n,
            "build_graph: edge " + std::to_string(k) + " (" + std::to_string(u) + "," +
                std::to_string(v) + ") has node id out of range [0," + std::to_string(n) + ")");
  }

  // Symmetrize, drop self-loops, dedup, then sort each row ascending.
  std::vector<std::pair<std::int64_t, std::int64_t>> sym;
  sym.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    if (u == v) continue;
    sym.emplace_back(u, v);
    sym.emplace_back(v, u);
  }
  std::sort(sym.begin(), sym.end());
  sym.erase(std::unique(sym.begin(), sym.end()), sym.end());

  Graph g;
  g.n_ = n;
  g.csr_offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
  g.csr_targets_.reserve(sym.size());
  for (auto [u, v] : sym) {
    ++g.csr_offsets_[static_cast<std::size_t>(u) + 1];
    g.csr_targets_.push_back(v);
  }
  for (std::int64_t v = 0; v < n; ++v)
    g.csr_offsets_[static_cast<std::size_t>(v) + 1] += g.csr_offsets_[static_cast<std::size_t>(v)];

  std::int32_t max_label = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0, "build_graph: negative label at node " + std::to_string(i));
    max_label = std::max(max_label, labels[i]);
  }
  g.num_classes_ = labels.empty() ? 0 : max_label + 1;
  g.features_ = std::move(features);
  g.labels_ = std::move(labels);
  g.splits_ = std::move(splits);
  return g;
}

Mat laplacian_apply(const CsrView& g, const Mat& Y) {
  require(Y.rows() == g.n, "laplacian_apply: Y has " + std::to_string(Y.rows()) +
                               " rows, graph has " + std::to_string(g.n) + " nodes");
  Mat out(Y.rows(), Y.cols());
  for (std::int64_t i = 0; i < g.n; ++i) {
    out.row(i) = static_cast<double>(g.degree(i)) * Y.row(i);
    for (std::int64_t j : g.neighbors(i)) out.row(i) -= Y.row(j);
  }
  return out;
}

double smooth_trace(const CsrView& g, const Mat& Y) {
  require(Y.rows() == g.n, "smooth_trace: row count mismatch");
  double acc = 0.0;
  for (std::int64_t i = 0; i < g.n; ++i)
    for (std::int64_t j : g.neighbors(i)) acc += (Y.row(i) - Y.row(j)).squaredNorm();
  return 0.5 * acc;
}

SubgraphSample induced_subgraph(const Graph& g, const std::vector<std::int64_t>& node_ids,
                                std::int64_t n_targets) {
  const std::int64_t ns = static_cast<std::int64_t>(node_ids.size());
  require(n_targets >= 0 && n_targets <= ns, "induced_subgraph: invalid target count");
  std::unordered_map<std::int64_t, std::int64_t> local;
  local.reserve(node_ids.size() * 2);
  for (std::int64_t i = 0; i < ns; ++i) {
    std::int64_t v = node_ids[static_cast<std::size_t>(i)];
    require(v >= 0 && v < g.num_nodes(), "induced_subgraph: node id out of range");
    bool inserted = local.emplace(v, i).second;
    require(inserted, "induced_subgraph: duplicate node id " + std::to_string(v));
  }

  SubgraphSample s;
  s.global_ids = node_ids;
  s.n_targets = n_targets;
  s.csr_offsets.assign(static_cast<std::size_t>(ns) + 1, 0);

  std::vector<std::vector<std::int64_t>> rows(static_cast<std::size_t>(ns));
  auto csr = g.csr();
  for (std::int64_t i = 0; i < ns; ++i) {
    for (std::int64_t w : csr.neighbors(node_ids[static_cast<std::size_t>(i)])) {
      auto it = local.find(w);
      if (it != local.end()) rows[static_cast<std::size_t>(i)].push_back(it->second);
    }
  }
  for (std::int64_t i = 0; i < ns; ++i) {
    auto& r = rows[static_cast<std::size_t>(i)];
    std::sort(r.begin(), r.end());
    s.csr_offsets[static_cast<std::size_t>(i) + 1] =
        s.csr_offsets[static_cast<std::size_t>(i)] + static_cast<std::int64_t>(r.size());
    s.csr_targets.insert(s.csr_targets.end(), r.begin(), r.end());
  }
  return s;
}

Mat gather_rows(const Mat& m, const std::vector<std::int64_t>& ids) {
  Mat out(static_cast<std::int64_t>(ids.size()), m.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<std::int64_t>(i)) = m.row(ids[i]);
  return out;
}

}  // namespace muse
