#include "muse/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "muse/io.hpp"
#include "muse/parallel.hpp"
#include "muse/rng.hpp"

namespace muse {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::int32_t> target_labels(const Graph& g, const SubgraphSample& s) {
  std::vector<std::int32_t> labels(static_cast<std::size_t>(s.n_targets));
  for (std::int64_t i = 0; i < s.n_targets; ++i)
    labels[static_cast<std::size_t>(i)] =
        g.labels()[static_cast<std::size_t>(s.global_ids[static_cast<std::size_t>(i)])];
  return labels;
}

EnergyConfig resolve_alpha(EnergyConfig cfg, const SubgraphSample& s, bool alpha_auto,
                           ModelKind model) {
  if (alpha_auto && model == ModelKind::muse) cfg.alpha = step_bound(s.csr(), cfg);
  return cfg;
}

EnergyConfig effective_energy(const TrainRunConfig& cfg) {
  EnergyConfig e = cfg.energy;
  if (cfg.model == ModelKind::mlp) e.K = 0;
  return e;
}

}  // namespace

void TrainRunConfig::validate() const {
  require(epochs >= 1, "TrainRunConfig: epochs must be >= 1");
  require(hidden_dim >= 1, "TrainRunConfig: hidden_dim must be >= 1");
  require(dropout >= 0.0 && dropout < 1.0, "TrainRunConfig: dropout must lie in [0,1)");
  require(eval_every >= 1, "TrainRunConfig: eval_every must be >= 1");
  require(batch_subgraphs >= 1, "TrainRunConfig: batch_subgraphs must be >= 1");
  require(workers >= 1, "TrainRunConfig: workers must be >= 1");
  require(lr >= 0.0, "TrainRunConfig: lr must be >= 0");
  require(eta0 >= 0.0, "TrainRunConfig: eta0 must be >= 0");
  energy.validate();
}

void MetricsLog::write_csv(std::ostream& out) const {
  out << "kind,epoch,step,loss,acc_train,acc_val,acc_test\n";
  std::size_t next_eval = 0;
  auto eval_line = [&](const EvalRow& e) {
    out << "eval," << e.epoch << ",,,";
    if (e.acc_train >= 0.0) out << fmt_double(e.acc_train);
    out << ',';
    if (e.acc_val >= 0.0) out << fmt_double(e.acc_val);
    out << ',';
    if (e.acc_test >= 0.0) out << fmt_double(e.acc_test);
    out << '\n';
  };
  // Rows stay monotone in (epoch, step): evals for an epoch follow its steps.
  for (const auto& srow : steps) {
    while (next_eval < evals.size() && evals[next_eval].epoch < srow.epoch)
      eval_line(evals[next_eval++]);
    out << "step," << srow.epoch << ',' << srow.step << ',' << fmt_double(srow.loss) << ",,,\n";
  }
  while (next_eval < evals.size()) eval_line(evals[next_eval++]);
}

std::string MetricsLog::to_csv() const {
  std::ostringstream ss;
  write_csv(ss);
  return ss.str();
}

double accuracy_from_logits(const Mat& logits, std::span<const std::int32_t> labels) {
  require(static_cast<std::size_t>(logits.rows()) == labels.size(),
          "accuracy_from_logits: label count mismatch");
  require(logits.rows() > 0, "accuracy_from_logits: no rows");
  std::int64_t correct = 0;
  for (std::int64_t i = 0; i < logits.rows(); ++i) {
    Eigen::Index best;
    logits.row(i).maxCoeff(&best);
    if (static_cast<std::int32_t>(best) == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

double evaluate(const Graph& g, const SampleBundle& bundle, const ModelParams& params,
                SummaryState& state, const EnergyConfig& energy, bool alpha_auto,
                ModelKind model, std::int64_t workers, bool mutate_summary) {
  require(bundle_matches_graph(bundle, g), "evaluate: bundle digest does not match the graph");
  EnergyConfig base = energy;
  if (model == ModelKind::mlp) base.K = 0;

  const std::int64_t m = bundle.size();
  std::vector<std::int64_t> correct(static_cast<std::size_t>(m), 0);
  std::vector<std::int64_t> total(static_cast<std::size_t>(m), 0);

  auto run_one = [&](std::int64_t i, bool update) {
    const auto& s = bundle.subgraphs[static_cast<std::size_t>(i)];
    Mat X_s = gather_rows(g.features(), s.global_ids);
    auto labels = target_labels(g, s);
    EnergyConfig cfg = resolve_alpha(base, s, alpha_auto, model);
    auto fwd = subgraph_forward(s, X_s, labels, params, state, cfg, StepRule::gershgorin,
                                /*train_mode=*/false, nullptr);
    std::int64_t c = 0;
    for (std::int64_t r = 0; r < fwd.logits.rows(); ++r) {
      Eigen::Index best;
      fwd.logits.row(r).maxCoeff(&best);
      if (static_cast<std::int32_t>(best) == labels[static_cast<std::size_t>(r)]) ++c;
    }
    correct[static_cast<std::size_t>(i)] = c;
    total[static_cast<std::size_t>(i)] = s.n_targets;
    if (update) online_mean_update(state, s, fwd.y_final, cfg.rho);
  };

  if (mutate_summary) {
    // Mirrors the training pipeline: sequential, mean update after each pass.
    for (std::int64_t i = 0; i < m; ++i) run_one(i, true);
  } else {
    parallel_for(m, workers, [&](std::int64_t i) { run_one(i, false); });
  }

  std::int64_t c = 0, t = 0;
  for (std::int64_t i = 0; i < m; ++i) {
    c += correct[static_cast<std::size_t>(i)];
    t += total[static_cast<std::size_t>(i)];
  }
  require(t > 0, "evaluate: bundle has no target nodes");
  return static_cast<double>(c) / static_cast<double>(t);
}

std::vector<EnergyTraceRow> trace_bundle(const Graph& g, const SampleBundle& bundle,
                                         const ModelParams& params, const SummaryState& state,
                                         const EnergyConfig& energy, bool alpha_auto,
                                         std::int64_t workers) {
  require(bundle_matches_graph(bundle, g), "trace: bundle digest does not match the graph");
  const std::int64_t m = bundle.size();
  std::vector<std::vector<EnergyTerms>> per(static_cast<std::size_t>(m));
  parallel_for(m, workers, [&](std::int64_t i) {
    const auto& s = bundle.subgraphs[static_cast<std::size_t>(i)];
    Mat X_s = gather_rows(g.features(), s.global_ids);
    Mat fX = f_forward(X_s, params, false);
    EnergyConfig cfg = resolve_alpha(energy, s, alpha_auto, ModelKind::muse);
    per[static_cast<std::size_t>(i)] = forward_unfold(s, fX, state, cfg).energies;
  });
  std::vector<EnergyTraceRow> rows;
  for (std::int64_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < per[static_cast<std::size_t>(i)].size(); ++k)
      rows.push_back({static_cast<std::int64_t>(k), i, per[static_cast<std::size_t>(i)][k]});
  return rows;
}

TrainOutput train(const Graph& g, const SampleBundle& train_bundle, const EvalBundles& eval,
                  const TrainRunConfig& cfg, const TrainCallbacks& callbacks) {
  cfg.validate();
  require(bundle_matches_graph(train_bundle, g), "train: train bundle does not match the graph");
  require_target_cover(train_bundle, g, Split::train);
  if (eval.train) require(bundle_matches_graph(*eval.train, g), "train: stale train eval bundle");
  if (eval.val) {
    require(bundle_matches_graph(*eval.val, g), "train: stale val bundle");
    require_target_cover(*eval.val, g, Split::val);
  }
  if (eval.test) {
    require(bundle_matches_graph(*eval.test, g), "train: stale test bundle");
    require_target_cover(*eval.test, g, Split::test);
  }
  require(g.num_classes() >= 2, "train: need at least two classes");

  const EnergyConfig energy = effective_energy(cfg);
  ModelParams params = ModelParams::init(g.feature_dim(), cfg.hidden_dim, g.num_classes(),
                                         cfg.dropout, cfg.seed);
  SummaryState state = SummaryState::zeros(g.num_nodes(), cfg.hidden_dim);

  std::optional<AdamState> adam;
  std::optional<SgdState> sgd;
  if (cfg.optimizer == OptimizerKind::adam)
    adam = AdamState::init(params, cfg.lr);
  else
    sgd = SgdState{cfg.eta0, 0};

  Digest gd = graph_digest(g);
  auto make_checkpoint = [&](std::int64_t completed) {
    Checkpoint c;
    c.params = params;
    c.state = state;
    c.cfg = energy;
    c.alpha_auto = cfg.alpha_auto;
    c.optimizer = cfg.optimizer;
    c.adam = adam;
    c.sgd = sgd;
    c.graph_digest = gd;
    c.run_seed = cfg.seed;
    c.completed_epochs = completed;
    return c;
  };

  MetricsLog log;
  auto run_eval = [&](std::int64_t epoch) {
    EvalRow row;
    row.epoch = epoch;
    if (eval.train)
      row.acc_train = evaluate(g, *eval.train, params, state, energy, cfg.alpha_auto, cfg.model,
                               cfg.workers);
    if (eval.val)
      row.acc_val = evaluate(g, *eval.val, params, state, energy, cfg.alpha_auto, cfg.model,
                             cfg.workers, cfg.eval_mutates_summary);
    if (eval.test)
      row.acc_test = evaluate(g, *eval.test, params, state, energy, cfg.alpha_auto, cfg.model,
                              cfg.workers, cfg.eval_mutates_summary);
    log.evals.push_back(row);
    if (callbacks.on_eval) callbacks.on_eval(row);
  };

  if (cfg.dry_run) {
    run_eval(0);
    return {std::move(log), make_checkpoint(0)};
  }

  const std::int64_t m = train_bundle.size();
  std::string last_checkpoint = "(none)";
  std::int64_t global_step = 0;

  for (std::int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();

    std::vector<std::int64_t> order(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
    auto shuffle_rng = make_stream(cfg.seed, "epoch_order", static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(cfg.batch_subgraphs)) {
      const std::size_t end =
          std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch_subgraphs));
      const std::int64_t bsz = static_cast<std::int64_t>(end - pos);

      std::vector<const SubgraphSample*> batch(static_cast<std::size_t>(bsz));
      std::vector<SubgraphForward> fwds(static_cast<std::size_t>(bsz));
      parallel_for(bsz, cfg.workers, [&](std::int64_t i) {
        const auto& s =
            train_bundle.subgraphs[static_cast<std::size_t>(order[pos + static_cast<std::size_t>(i)])];
        batch[static_cast<std::size_t>(i)] = &s;
        Mat X_s = gather_rows(g.features(), s.global_ids);
        auto labels = target_labels(g, s);
        EnergyConfig ecfg = resolve_alpha(energy, s, cfg.alpha_auto, cfg.model);
        // Stream keyed by the forward's position in the run, so results do
        // not depend on batching or worker count.
        auto rng = make_stream(cfg.seed, "dropout",
                               static_cast<std::uint64_t>((epoch - 1) * m) +
                                   static_cast<std::uint64_t>(pos) + static_cast<std::uint64_t>(i));
        fwds[static_cast<std::size_t>(i)] = subgraph_forward(
            s, X_s, labels, params, state, ecfg, StepRule::gershgorin, /*train_mode=*/true, &rng);
      });

      for (std::int64_t i = 0; i < bsz; ++i)
        online_mean_update(state, *batch[static_cast<std::size_t>(i)],
                           fwds[static_cast<std::size_t>(i)].y_final, energy.rho);

      std::vector<const SubgraphForward*> fptrs(static_cast<std::size_t>(bsz));
      for (std::int64_t i = 0; i < bsz; ++i)
        fptrs[static_cast<std::size_t>(i)] = &fwds[static_cast<std::size_t>(i)];
      GradientBundle grads = backward(batch, fptrs, params, energy);

      if (!std::isfinite(grads.loss))
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch) + " step " +
                    std::to_string(global_step + 1) + "; last good checkpoint: " +
                    last_checkpoint);

      if (cfg.optimizer == OptimizerKind::adam)
        adam_step(params, grads, *adam);
      else
        sgd_step(params, grads, *sgd);

      ++global_step;
      StepRow row{epoch, global_step, grads.loss};
      log.steps.push_back(row);
      if (callbacks.on_step) callbacks.on_step(row);
    }

    auto t1 = std::chrono::steady_clock::now();
    log.epoch_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());

    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      run_eval(epoch);
      if (!cfg.checkpoint_path.empty()) {
        save_checkpoint(make_checkpoint(epoch), cfg.checkpoint_path);
        last_checkpoint = cfg.checkpoint_path.string();
      }
    }
  }

  return {std::move(log), make_checkpoint(cfg.epochs)};
}

}  // namespace muse
