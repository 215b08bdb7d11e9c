#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "muse/energy.hpp"
#include "muse/graph.hpp"
#include "muse/types.hpp"

namespace muse {

// Global summary embeddings M with per-node visit counters. A node with
// counter zero has a zero summary row; the first visit overwrites it.
struct SummaryState {
  Mat M;
  std::vector<std::int64_t> counters;

  static SummaryState zeros(std::int64_t n, std::int64_t d);
  bool operator==(const SummaryState&) const = default;
};

using ReluMask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Record of one unfolded forward pass: per-layer energies (K+1 entries),
// the final iterate, and the ReLU masks needed by reverse mode.
struct UnfoldTrace {
  std::vector<EnergyTerms> energies;
  Mat y_final;
  std::vector<ReluMask> relu_masks;  // K masks when penalty = nonneg, else empty
  double alpha_used = 0.0;
};

enum class StepRule : std::uint8_t {
  gershgorin,  // 1 / ((1+gamma) + 2 lambda d_max): O(edges), always safe
  spectral,    // 1 / sigma_max, dense; verification-scale only
};

double step_bound(const CsrView& g, const EnergyConfig& cfg,
                  StepRule rule = StepRule::gershgorin);

// K proximal gradient steps on the per-subgraph energy from Y(0) = fX_s,
// with the anchor rows gathered from state.M once at pass start. Rejects
// alpha above the step bound of the chosen rule.
UnfoldTrace forward_unfold(const SubgraphSample& s, const Mat& fX_s, const SummaryState& state,
                           const EnergyConfig& cfg, StepRule rule = StepRule::gershgorin);

// Forgetting-factor online mean: applied once per forward pass to every
// subgraph row, then the counters advance.
void online_mean_update(SummaryState& state, const SubgraphSample& s, const Mat& y_final,
                        double rho);

// One exact alternating-minimization sweep (penalty = none): every Y_s is
// replaced by its closed-form minimizer at the current M, then every visited
// summary row by the mean of its subgraph copies. Factorizations are cached
// across steps.
class AltMinSolver {
 public:
  AltMinSolver(const std::vector<SubgraphSample>& subs, std::vector<Mat> fXs, std::int64_t n,
               const EnergyConfig& cfg);
  ~AltMinSolver();
  AltMinSolver(AltMinSolver&&) noexcept;
  AltMinSolver& operator=(AltMinSolver&&) noexcept;

  // Mutates Ys and M in place; returns the energy after the sweep.
  double step(std::vector<Mat>& Ys, Mat& M) const;

  double energy(const std::vector<Mat>& Ys, const Mat& M) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot convenience wrapper around AltMinSolver.
std::pair<std::vector<Mat>, Mat> alt_min_step(const std::vector<Mat>& Ys, const Mat& M,
                                              const std::vector<SubgraphSample>& subs,
                                              const std::vector<Mat>& fXs,
                                              const EnergyConfig& cfg);

// Joint minimizer of the sampling-based energy over (all Y_s, M) by one
// sparse SPD solve; penalty must be none and the variable count small.
struct JointOptimum {
  std::vector<Mat> Ys;
  Mat M;  // unvisited rows zero
  double energy = 0.0;
};
JointOptimum joint_optimum_oracle(const std::vector<SubgraphSample>& subs,
                                  const std::vector<Mat>& fXs, std::int64_t n,
                                  const EnergyConfig& cfg);

}  // namespace muse
