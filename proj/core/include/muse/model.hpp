#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "muse/digest.hpp"
#include "muse/energy.hpp"
#include "muse/graph.hpp"
#include "muse/unfold.hpp"

namespace muse {

struct AffineLayer {
  Mat W;  // in x out
  Mat b;  // 1 x out
};

// Three affine layers with ReLU after the first two, residual skips around
// the hidden activations (skipped when the widths differ), and dropout on
// the transform branch in train mode.
struct MlpParams {
  std::array<AffineLayer, 3> layers;
};

struct ModelParams {
  MlpParams f;  // d_in -> d -> d -> d
  MlpParams g;  // d -> d -> d -> d_out
  double dropout_rate = 0.2;
  std::int64_t d_in = 0;
  std::int64_t d_hidden = 0;
  std::int64_t d_out = 0;

  // Uniform fan-in initialization from named seed streams.
  static ModelParams init(std::int64_t d_in, std::int64_t d_hidden, std::int64_t d_out,
                          double dropout_rate, std::uint64_t seed);
};

// Gradients in the exact shape of the parameters, plus the loss value.
struct GradientBundle {
  MlpParams f;
  MlpParams g;
  double loss = 0.0;

  static GradientBundle zeros_like(const ModelParams& p);
};

// Visits every parameter block as (path, matrix); the visiting order is
// fixed and shared by optimizers, checkpoints and gradient checks.
void for_each_param(MlpParams& f, MlpParams& g, const std::string& prefix_f,
                    const std::string& prefix_g,
                    const std::function<void(const std::string&, Mat&)>& fn);
void for_each_param(ModelParams& p, const std::function<void(const std::string&, Mat&)>& fn);
void for_each_param(const ModelParams& p,
                    const std::function<void(const std::string&, const Mat&)>& fn);

// Activation record of one MLP application, retained for reverse mode.
struct MlpCache {
  Mat input;
  std::array<ReluMask, 2> relu;  // masks of the two hidden activations
  std::array<ReluMask, 2> drop;  // dropout keep masks; empty in eval mode
  std::array<Mat, 2> hidden;     // h1, h2: inputs to layers 2 and 3
  double drop_scale = 1.0;       // inverted-dropout scale on kept units
};

// rng is consulted only in train mode with a positive dropout rate.
Mat mlp_forward(const MlpParams& p, const Mat& X, double dropout_rate, bool train_mode,
                std::mt19937_64* rng, MlpCache* cache);

// Reverse pass; returns d(input) and accumulates weight gradients.
Mat mlp_backward(const MlpParams& p, const MlpCache& cache, const Mat& d_out, MlpParams& grads);

Mat f_forward(const Mat& X_s, const ModelParams& params, bool train_mode,
              std::mt19937_64* rng = nullptr, MlpCache* cache = nullptr);

// Sum of softmax cross-entropies; d_logits (softmax - onehot) is optionally
// returned for reverse mode.
double cross_entropy(const Mat& logits, std::span<const std::int32_t> labels,
                     Mat* d_logits = nullptr);

// Upper-level sampled loss: per-subgraph logits on target rows only, summed
// over subgraphs.
double loss_muse(const std::vector<SubgraphSample>& subs, std::span<const Mat> Ys_final,
                 const std::vector<std::int32_t>& full_labels, const ModelParams& params);

// Complete forward record of one subgraph for training: f, K unfolded
// layers against the summary snapshot, g on target rows and the loss.
// K == 0 degenerates to the plain MLP classifier g(f(X)).
struct SubgraphForward {
  double loss = 0.0;
  Mat y_final;
  std::vector<EnergyTerms> energies;  // K+1 per-layer energies (1 when K == 0)
  MlpCache f_cache;
  std::vector<ReluMask> unfold_masks;
  double alpha_used = 0.0;
  MlpCache g_cache;
  Mat logits;    // target rows only
  Mat d_logits;  // softmax - onehot
  std::vector<std::int32_t> labels;
};

SubgraphForward subgraph_forward(const SubgraphSample& s, const Mat& X_s,
                                 const std::vector<std::int32_t>& labels_s,
                                 const ModelParams& params, const SummaryState& state,
                                 const EnergyConfig& cfg, StepRule rule, bool train_mode,
                                 std::mt19937_64* dropout_rng);

// Exact reverse-mode gradient of the sampled loss for a batch of forward
// records. The unfolded recursion is differentiated with the anchor rows
// held constant; ReLU masks from the forward pass are required when the
// penalty is the nonnegativity indicator.
GradientBundle backward(const std::vector<const SubgraphSample*>& batch,
                        const std::vector<const SubgraphForward*>& fwds,
                        const ModelParams& params, const EnergyConfig& cfg);

// --- optimizers ----------------------------------------------------------

// Diminishing-step SGD, eta_t = eta0 / sqrt(t).
struct SgdState {
  double eta0 = 0.01;
  std::int64_t t = 0;
};
void sgd_step(ModelParams& params, const GradientBundle& grads, SgdState& state);

struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  MlpParams m_f, v_f, m_g, v_g;

  static AdamState init(const ModelParams& p, double lr);
};
void adam_step(ModelParams& params, const GradientBundle& grads, AdamState& state);

// --- checkpoint ------------------------------------------------------------

enum class OptimizerKind : std::uint8_t { adam = 0, sgd = 1 };

// Everything needed to evaluate or trace a trained model.
struct Checkpoint {
  ModelParams params;
  SummaryState state;
  EnergyConfig cfg;  // cfg.K == 0 marks a plain-MLP (no unfolding) model
  bool alpha_auto = true;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::optional<AdamState> adam;
  std::optional<SgdState> sgd;
  Digest graph_digest{};
  std::uint64_t run_seed = 0;
  std::int64_t completed_epochs = 0;
};

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace muse
