#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "muse/graph.hpp"
#include "muse/types.hpp"

namespace muse {

// In-memory synthetic dataset in the ingest text/binary layout.
struct SynthDataset {
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  Mat features;
  std::vector<std::int32_t> labels;
  std::vector<Split> splits;

  Graph to_graph() const;
};

// Planted-community stochastic block model with Gaussian class-mean
// features: structure is informative (p_in >> p_out), features noisy.
struct SbmParams {
  std::int64_t n = 2000;
  std::int64_t blocks = 2;
  double p_in = 0.012;
  double p_out = 0.0012;
  std::int64_t feature_dim = 16;
  double feature_noise = 3.0;  // std of the per-node noise around the class mean
  double train_frac = 0.6;
  double val_frac = 0.2;  // remainder is test
};
SynthDataset gen_sbm(const SbmParams& p, std::uint64_t seed);

// Random near-regular graph by stub pairing (self-loops and duplicate pairs
// re-drawn, leftovers dropped) with random class labels: the
// structure-uninformative control.
struct RegularParams {
  std::int64_t n = 1000;
  std::int64_t degree = 8;
  std::int64_t num_classes = 2;
  std::int64_t feature_dim = 16;
  double feature_noise = 3.0;
  double train_frac = 0.6;
  double val_frac = 0.2;
};
SynthDataset gen_regular(const RegularParams& p, std::uint64_t seed);

// Writes edges.tsv, features.bin, labels.txt, masks.txt under dir.
void write_dataset(const SynthDataset& d, const std::filesystem::path& dir);

}  // namespace muse
