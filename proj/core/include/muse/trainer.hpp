#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "muse/energy.hpp"
#include "muse/model.hpp"
#include "muse/sampler.hpp"

namespace muse {

enum class ModelKind : std::uint8_t {
  muse = 0,  // K unfolded layers between f and g
  mlp = 1,   // structure-blind baseline: g(f(X)), no propagation
};

struct TrainRunConfig {
  EnergyConfig energy;
  bool alpha_auto = true;  // per-subgraph alpha from the Gershgorin step bound
  std::int64_t epochs = 30;
  std::int64_t hidden_dim = 32;
  double dropout = 0.2;
  ModelKind model = ModelKind::muse;
  OptimizerKind optimizer = OptimizerKind::adam;
  double lr = 0.001;    // adam
  double eta0 = 0.01;   // sgd, eta_t = eta0/sqrt(t)
  std::int64_t eval_every = 1;
  std::uint64_t seed = 0;
  bool eval_mutates_summary = false;
  // > 1 runs that many subgraph forwards concurrently against a summary
  // snapshot, then applies mean updates and one accumulated optimizer step.
  // This deviates from the strictly sequential loop and is excluded from
  // theorem-verification runs.
  std::int64_t batch_subgraphs = 1;
  std::int64_t workers = 1;
  bool dry_run = false;  // evaluate the initialized model only
  std::filesystem::path checkpoint_path;  // empty: no checkpointing

  void validate() const;
};

struct StepRow {
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  double loss = 0.0;
};

struct EvalRow {
  std::int64_t epoch = 0;
  double acc_train = -1.0;  // negative: not evaluated
  double acc_val = -1.0;
  double acc_test = -1.0;
};

struct MetricsLog {
  std::vector<StepRow> steps;
  std::vector<EvalRow> evals;
  std::vector<double> epoch_seconds;  // wall clock; never serialized

  // Deterministic CSV: "kind,epoch,step,loss,acc_train,acc_val,acc_test".
  void write_csv(std::ostream& out) const;
  std::string to_csv() const;
};

struct EvalBundles {
  const SampleBundle* train = nullptr;  // optional, train-split accuracy
  const SampleBundle* val = nullptr;
  const SampleBundle* test = nullptr;
};

struct TrainOutput {
  MetricsLog metrics;
  Checkpoint checkpoint;
};

struct TrainCallbacks {
  std::function<void(const StepRow&)> on_step;
  std::function<void(const EvalRow&)> on_eval;
};

// Runs the training loop: zero-initialized summary state, per-subgraph
// anchor gather, f, K unfolded layers, online mean update, then one
// optimizer step per subgraph. Subgraph order reshuffles per epoch from the
// run seed. Aborts on a non-finite loss, referencing the last checkpoint.
TrainOutput train(const Graph& g, const SampleBundle& train_bundle, const EvalBundles& eval,
                  const TrainRunConfig& cfg, const TrainCallbacks& callbacks = {});

// Forward-only accuracy over the bundle's targets; does not touch the
// summary state unless mutate_summary is set.
double evaluate(const Graph& g, const SampleBundle& bundle, const ModelParams& params,
                SummaryState& state, const EnergyConfig& energy, bool alpha_auto,
                ModelKind model = ModelKind::muse, std::int64_t workers = 1,
                bool mutate_summary = false);

// Fraction of rows whose argmax equals the label.
double accuracy_from_logits(const Mat& logits, std::span<const std::int32_t> labels);

// Per-layer energies for every subgraph of a bundle under a trained model,
// in the energy-trace CSV row layout.
std::vector<EnergyTraceRow> trace_bundle(const Graph& g, const SampleBundle& bundle,
                                         const ModelParams& params, const SummaryState& state,
                                         const EnergyConfig& energy, bool alpha_auto,
                                         std::int64_t workers = 1);

}  // namespace muse
