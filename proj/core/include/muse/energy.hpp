#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "muse/graph.hpp"
#include "muse/types.hpp"

namespace muse {

enum class Penalty : std::uint8_t { none = 0, nonneg_indicator = 1 };

// Hyperparameters of the lower-level energy and its descent iterations.
struct EnergyConfig {
  double lambda = 20.0;  // graph smoothness weight, >= 0
  double gamma = 1.0;    // anchor penalty weight, >= 0
  double alpha = 0.05;   // descent step size, > 0
  double rho = 0.9;      // online-mean forgetting factor, in [0,1]
  std::int64_t K = 8;    // unfolded layer count, >= 1
  Penalty penalty = Penalty::nonneg_indicator;

  void validate() const;
};

// One energy evaluation split into its terms. zeta is 0 or +infinity; the
// finite terms stay plottable even when an iterate grazes the boundary.
struct EnergyTerms {
  double fit = 0.0;     // ||Y - fX||_F^2
  double smooth = 0.0;  // lambda * tr(Y^T L Y)
  double anchor = 0.0;  // gamma * ||Y - mu||_F^2
  double zeta = 0.0;    // penalty sentinel: 0 or +inf

  double total() const { return fit + smooth + anchor + zeta; }
  double finite_total() const { return fit + smooth + anchor; }
};

// Penalty sum over rows: 0 when feasible, +inf otherwise.
double zeta_value(const Mat& Y, Penalty penalty);

// Proximal operator of the penalty: identity, or elementwise max(U, 0).
Mat prox_zeta(Mat U, Penalty penalty);

// ||Y - fX||^2 + lambda tr(Y^T L Y) + sum_i zeta(Y_i) on one graph/subgraph.
EnergyTerms full_energy_terms(const CsrView& g, const Mat& Y, const Mat& fX,
                              const EnergyConfig& cfg);
double full_energy(const CsrView& g, const Mat& Y, const Mat& fX, const EnergyConfig& cfg);

// Per-subgraph term of the sampling-based energy; mu_s may be empty when
// gamma == 0.
EnergyTerms subgraph_energy_terms(const SubgraphSample& s, const Mat& Y_s, const Mat& fX_s,
                                  const Mat& mu_s, const EnergyConfig& cfg);

// Sampling-based energy over all subgraphs, anchored to summary rows of M.
double muse_energy(std::span<const Mat> Ys, const Mat& M, const std::vector<SubgraphSample>& subs,
                   std::span<const Mat> fXs, const EnergyConfig& cfg);

// The fixed-M reexpression with f' = f/(1+gamma), gamma' = gamma/(1+gamma),
// lambda' = lambda/(1+gamma), zeta' = zeta/(1+gamma). Used to test the
// equivalence identity against muse_energy.
double reformulated_energy(std::span<const Mat> Ys, const Mat& M_fixed,
                           const std::vector<SubgraphSample>& subs, std::span<const Mat> fXs,
                           const EnergyConfig& cfg);

// The gamma -> infinity energy: every Y_s pinned to the gathered summary
// rows. fX_full has one row per full-graph node.
double gamma_inf_energy(const Mat& M, const std::vector<SubgraphSample>& subs, const Mat& fX_full,
                        const EnergyConfig& cfg);

// Exact subgraph minimizer [(1+gamma)I + lambda L_s]^{-1} [fX_s + gamma mu_s]
// by dense factorization. Verification-scale only (n_s <= 4096); requires
// penalty == none. mu_s may be empty when gamma == 0.
Mat closed_form_minimizer(const SubgraphSample& s, const Mat& fX_s, const Mat& mu_s,
                          const EnergyConfig& cfg);

// Extremal eigenvalues of (1+gamma)I + lambda L: smoothness sigma and strong
// convexity tau of the per-subgraph energy. Dense, n <= 4096.
struct SpectralBounds {
  double sigma = 0.0;
  double tau = 0.0;
};
SpectralBounds smoothness_constants(const CsrView& g, double lambda, double gamma = 0.0);

// Dense (1+gamma)I + lambda L, for oracles and spectral diagnostics.
Mat dense_energy_operator(const CsrView& g, double lambda, double gamma);

// Energy-trace CSV: "step,subgraph,energy_total,term_fit,term_smooth,term_anchor".
struct EnergyTraceRow {
  std::int64_t step = 0;
  std::int64_t subgraph = 0;
  EnergyTerms terms;
};
void write_energy_trace_csv(std::ostream& out, std::span<const EnergyTraceRow> rows);

}  // namespace muse
