#include "muse/synth.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "muse/io.hpp"
#include "muse/rng.hpp"

namespace muse {

namespace {

std::vector<Split> random_split(std::int64_t n, double train_frac, double val_frac,
                                std::mt19937_64& rng) {
  require(train_frac > 0.0 && val_frac >= 0.0 && train_frac + val_frac <= 1.0,
          "gen: invalid split fractions");
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::int64_t>(static_cast<double>(n) * train_frac);
  const auto n_val = static_cast<std::int64_t>(static_cast<double>(n) * val_frac);
  std::vector<Split> splits(static_cast<std::size_t>(n), Split::test);
  for (std::int64_t i = 0; i < n; ++i) {
    Split s = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
    splits[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = s;
  }
  return splits;
}

Mat class_mean_features(const std::vector<std::int32_t>& labels, std::int64_t num_classes,
                        std::int64_t dim, double noise, std::mt19937_64& rng) {
  std::normal_distribution<double> std_normal(0.0, 1.0);
  Mat means(num_classes, dim);
  for (std::int64_t c = 0; c < num_classes; ++c)
    for (std::int64_t j = 0; j < dim; ++j) means(c, j) = std_normal(rng);
  Mat x(static_cast<std::int64_t>(labels.size()), dim);
  for (std::int64_t v = 0; v < x.rows(); ++v)
    for (std::int64_t j = 0; j < dim; ++j)
      x(v, j) = means(labels[static_cast<std::size_t>(v)], j) + noise * std_normal(rng);
  return x;
}

}  // namespace

Graph SynthDataset::to_graph() const {
  return build_graph(edges, features.rows(), features, labels, splits);
}

SynthDataset gen_sbm(const SbmParams& p, std::uint64_t seed) {
  require(p.n >= 2 && p.blocks >= 2 && p.blocks <= p.n, "gen_sbm: bad sizes");
  require(p.p_in >= 0.0 && p.p_in <= 1.0 && p.p_out >= 0.0 && p.p_out <= 1.0,
          "gen_sbm: probabilities must lie in [0,1]");
  auto rng = make_stream(seed, "sbm");
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  SynthDataset d;
  d.labels.resize(static_cast<std::size_t>(p.n));
  for (std::int64_t v = 0; v < p.n; ++v)
    d.labels[static_cast<std::size_t>(v)] = static_cast<std::int32_t>(v * p.blocks / p.n);

  for (std::int64_t i = 0; i < p.n; ++i)
    for (std::int64_t j = i + 1; j < p.n; ++j) {
      const bool same =
          d.labels[static_cast<std::size_t>(i)] == d.labels[static_cast<std::size_t>(j)];
      if (unif(rng) < (same ? p.p_in : p.p_out)) d.edges.emplace_back(i, j);
    }

  d.features = class_mean_features(d.labels, p.blocks, p.feature_dim, p.feature_noise, rng);
  d.splits = random_split(p.n, p.train_frac, p.val_frac, rng);
  return d;
}

SynthDataset gen_regular(const RegularParams& p, std::uint64_t seed) {
  require(p.n >= 2 && p.degree >= 1 && p.degree < p.n, "gen_regular: bad sizes");
  require(p.n * p.degree % 2 == 0, "gen_regular: n * degree must be even");
  auto rng = make_stream(seed, "regular");

  std::vector<std::int64_t> stubs;
  stubs.reserve(static_cast<std::size_t>(p.n * p.degree));
  for (std::int64_t v = 0; v < p.n; ++v)
    for (std::int64_t k = 0; k < p.degree; ++k) stubs.push_back(v);

  SynthDataset d;
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::shuffle(stubs.begin(), stubs.end(), rng);
    std::vector<std::int64_t> leftover;
    for (std::size_t i = 0; i + 1 < stubs.size(); i += 2) {
      std::int64_t u = stubs[i], v = stubs[i + 1];
      auto key = std::minmax(u, v);
      if (u == v || seen.contains(key)) {
        leftover.push_back(u);
        leftover.push_back(v);
        continue;
      }
      seen.insert(key);
      d.edges.emplace_back(u, v);
    }
    stubs = std::move(leftover);
    if (stubs.empty()) break;
  }
  // Any stubs still unmatched after the retries are dropped; the graph is
  // then only near-regular, which is fine for a control dataset.

  std::uniform_int_distribution<std::int32_t> cls(0, static_cast<std::int32_t>(p.num_classes) - 1);
  d.labels.resize(static_cast<std::size_t>(p.n));
  for (auto& l : d.labels) l = cls(rng);
  d.features = class_mean_features(d.labels, p.num_classes, p.feature_dim, p.feature_noise, rng);
  d.splits = random_split(p.n, p.train_frac, p.val_frac, rng);
  return d;
}

void write_dataset(const SynthDataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_edge_file(dir / "edges.tsv", d.edges);
  write_feature_file(dir / "features.bin", d.features);
  write_label_file(dir / "labels.txt", d.labels);
  write_mask_file(dir / "masks.txt", d.splits);
}

}  // namespace muse
