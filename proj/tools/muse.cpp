// Command-line front end: ingestion, offline sampling, training, evaluation,
// energy tracing, theorem verification and synthetic dataset generation.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>

#include "muse/config.hpp"
#include "muse/digest.hpp"
#include "muse/io.hpp"
#include "muse/rng.hpp"
#include "muse/sampler.hpp"
#include "muse/synth.hpp"
#include "muse/trainer.hpp"
#include "muse/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitVerifyFailed = 3;

std::int64_t env_workers(std::int64_t fallback) {
  const char* v = std::getenv("MUSE_WORKERS");
  if (!v) return fallback;
  try {
    std::int64_t w = std::stoll(v);
    return w >= 1 ? w : fallback;
  } catch (const std::exception&) {
    return fallback;
  }
}

std::vector<std::int64_t> parse_int_list(const std::string& csv, const std::string& what) {
  std::vector<std::int64_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoll(item));
    } catch (const std::exception&) {
      throw muse::Error(what + ": expected a comma-separated integer list, got '" + csv + "'");
    }
  }
  if (out.empty()) throw muse::Error(what + ": empty list");
  return out;
}

muse::Split parse_split(const std::string& s) {
  if (s == "train") return muse::Split::train;
  if (s == "val") return muse::Split::val;
  if (s == "test") return muse::Split::test;
  throw muse::Error("split: expected train|val|test, got '" + s + "'");
}

int cmd_ingest(const std::string& edges, const std::string& features, const std::string& labels,
               const std::string& masks, const std::string& out) {
  muse::Mat x = muse::read_feature_file(features);
  const std::int64_t n = x.rows();
  auto edge_list = muse::parse_edge_file(edges, n);
  auto label_vec = muse::parse_label_file(labels, n);
  auto mask_vec = muse::parse_mask_file(masks, n);
  muse::Graph g = muse::build_graph(edge_list, n, std::move(x), std::move(label_vec),
                                    std::move(mask_vec));
  muse::save_graph(g, out);
  std::cout << "n=" << g.num_nodes() << " edges=" << g.num_edges() << " d_in=" << g.feature_dim()
            << " classes=" << g.num_classes() << " digest=" << muse::digest_hex(muse::graph_digest(g))
            << "\n";
  return kExitOk;
}

int cmd_sample(const std::string& graph_path, const std::string& sampler,
               const std::string& split, const std::string& fanouts_csv, std::int64_t batch_size,
               double p, std::int64_t m, std::uint64_t seed, const std::string& out) {
  muse::Graph g = muse::load_graph(graph_path);
  muse::SampleBundle bundle;
  if (sampler == "shadow_khop") {
    bundle = muse::shadow_bundle(g, parse_split(split), batch_size,
                                 parse_int_list(fanouts_csv, "fanouts"), seed);
  } else if (sampler == "iid") {
    bundle = muse::iid_node_sample(g, p, m, seed);
  } else {
    throw muse::Error("sampler: expected shadow_khop|iid, got '" + sampler + "'");
  }
  muse::save_bundle(bundle, out);
  double mean_n = 0, mean_e = 0;
  for (const auto& s : bundle.subgraphs) {
    mean_n += static_cast<double>(s.num_nodes());
    mean_e += static_cast<double>(s.num_edges());
  }
  mean_n /= static_cast<double>(bundle.size());
  mean_e /= static_cast<double>(bundle.size());
  std::cout << "m=" << bundle.size() << " mean_nodes=" << mean_n << " mean_edges=" << mean_e
            << "\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path) {
  muse::RunConfig cfg = muse::parse_run_config_file(config_path);
  cfg.train.workers = env_workers(cfg.train.workers);

  // Echo the effective configuration; the block re-parses to the same run.
  std::cout << "# effective configuration\n" << muse::render_run_config(cfg) << std::flush;

  muse::Graph g = muse::load_graph(cfg.graph);
  muse::SampleBundle train_bundle = muse::load_bundle(cfg.train_bundle, g);
  std::optional<muse::SampleBundle> val_bundle, test_bundle;
  if (!cfg.val_bundle.empty()) val_bundle = muse::load_bundle(cfg.val_bundle, g);
  if (!cfg.test_bundle.empty()) test_bundle = muse::load_bundle(cfg.test_bundle, g);

  muse::EvalBundles eval;
  if (cfg.eval_train) eval.train = &train_bundle;
  if (val_bundle) eval.val = &*val_bundle;
  if (test_bundle) eval.test = &*test_bundle;

  double last_val = std::nan("");
  double last_loss = std::nan("");
  muse::TrainCallbacks callbacks;
  callbacks.on_step = [&](const muse::StepRow& row) {
    last_loss = row.loss;
    std::cout << "epoch=" << row.epoch << " step=" << row.step << " loss=" << row.loss
              << " acc_val=" << last_val << "\n";
  };
  callbacks.on_eval = [&](const muse::EvalRow& row) {
    if (row.acc_val >= 0) last_val = row.acc_val;
    std::cout << "epoch=" << row.epoch << " step=eval loss=" << last_loss
              << " acc_val=" << last_val;
    if (row.acc_train >= 0) std::cout << " acc_train=" << row.acc_train;
    if (row.acc_test >= 0) std::cout << " acc_test=" << row.acc_test;
    std::cout << "\n";
  };

  muse::TrainOutput out = muse::train(g, train_bundle, eval, cfg.train, callbacks);

  std::ofstream metrics(cfg.metrics, std::ios::trunc);
  muse::require(metrics.good(), "cannot open for writing: " + cfg.metrics);
  out.metrics.write_csv(metrics);
  muse::require(metrics.good(), "write failed: " + cfg.metrics);
  if (!cfg.checkpoint.empty()) muse::save_checkpoint(out.checkpoint, cfg.checkpoint);
  std::cout << "done epochs=" << cfg.train.epochs << " metrics=" << cfg.metrics
            << " checkpoint=" << cfg.checkpoint << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& graph_path,
             const std::string& bundle_path, bool mutate_summary, std::int64_t workers) {
  muse::Graph g = muse::load_graph(graph_path);
  muse::Checkpoint c = muse::load_checkpoint(checkpoint_path);
  muse::require(c.graph_digest == muse::graph_digest(g),
                "checkpoint was trained on a different graph");
  muse::SampleBundle bundle = muse::load_bundle(bundle_path, g);
  muse::ModelKind kind = c.cfg.K == 0 ? muse::ModelKind::mlp : muse::ModelKind::muse;
  double acc = muse::evaluate(g, bundle, c.params, c.state, c.cfg, c.alpha_auto, kind,
                              env_workers(workers), mutate_summary);
  std::cout << "accuracy=" << acc << "\n";
  return kExitOk;
}

int cmd_trace(const std::string& checkpoint_path, const std::string& graph_path,
              const std::string& bundle_path, const std::string& out, std::int64_t workers) {
  muse::Graph g = muse::load_graph(graph_path);
  muse::Checkpoint c = muse::load_checkpoint(checkpoint_path);
  muse::require(c.graph_digest == muse::graph_digest(g),
                "checkpoint was trained on a different graph");
  muse::require(c.cfg.K >= 1, "trace: checkpoint has no unfolded layers");
  muse::SampleBundle bundle = muse::load_bundle(bundle_path, g);
  auto rows = muse::trace_bundle(g, bundle, c.params, c.state, c.cfg, c.alpha_auto,
                                 env_workers(workers));
  std::ofstream f(out, std::ios::trunc);
  muse::require(f.good(), "cannot open for writing: " + out);
  muse::write_energy_trace_csv(f, rows);
  muse::require(f.good(), "write failed: " + out);
  std::cout << "rows=" << rows.size() << " out=" << out << "\n";
  return kExitOk;
}

struct VerifyArgs {
  std::string check;
  std::uint64_t seed = 1;
  std::int64_t n = 50;
  std::int64_t m = 5;
  double edge_prob = 0.1;
  double include_prob = 0.6;
  double p = 0.3;
  std::int64_t trials = 10000;
  double lambda = 1.0;
  bool lambda_set = false;
  double gamma = 1.0;
  std::int64_t dim = 4;
  std::int64_t k = 8;
  std::int64_t max_iters = 500;
  double tol = 1e-6;
  double alpha_scale = 1.0;
  std::string k_values = "2,4,8,16";
  std::string t_values = "100,1000,10000";
  std::int64_t replicates = 20;
  double eta0 = 0.05;
  double noise = 0.05;
  std::int64_t d_in = 6;
  std::int64_t d_out = 3;
};

int cmd_verify(const VerifyArgs& a) {
  std::vector<muse::VerificationReport> reports;

  if (a.check == "prop31") {
    auto rng = muse::make_stream(a.seed, "prop31_setup");
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::pair<std::int64_t, std::int64_t>> edges;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::int64_t i = 0; i < a.n; ++i)
      for (std::int64_t j = i + 1; j < a.n; ++j)
        if (unif(rng) < a.edge_prob) edges.emplace_back(i, j);
    muse::Graph g = muse::build_graph(edges, a.n, muse::Mat::Zero(a.n, 1), {}, {});
    muse::Mat M(a.n, a.dim), fX(a.n, a.dim);
    for (std::int64_t i = 0; i < a.n; ++i)
      for (std::int64_t j = 0; j < a.dim; ++j) {
        M(i, j) = gauss(rng);
        fX(i, j) = gauss(rng);
      }
    muse::EnergyConfig cfg;
    cfg.lambda = a.lambda;
    cfg.penalty = muse::Penalty::none;
    reports.push_back(muse::verify_prop31(g, M, fX, a.p, a.m, a.trials, a.seed, cfg));
  } else if (a.check == "descent") {
    auto inst = muse::make_energy_instance(a.n, a.m, a.edge_prob, a.include_prob, a.dim, a.seed);
    muse::EnergyConfig cfg;
    cfg.lambda = a.lambda;
    cfg.K = a.k;
    reports.push_back(muse::verify_descent(inst.subs, inst.fXs, inst.n, cfg, a.trials, a.seed,
                                           a.alpha_scale));
  } else if (a.check == "thm53") {
    auto inst = muse::make_energy_instance(a.n, a.m, a.edge_prob, a.include_prob, a.dim, a.seed);
    muse::EnergyConfig cfg;
    cfg.lambda = a.lambda;
    cfg.gamma = a.gamma;
    cfg.penalty = muse::Penalty::none;
    reports.push_back(
        muse::verify_thm53(inst.subs, inst.fXs, inst.n, cfg, a.max_iters, a.tol, a.seed));
  } else if (a.check == "thm52") {
    // The linear instance wants weak per-step contraction so the depth bias
    // dominates SGD noise; 0.4 is that default unless the user overrides.
    double lambda = a.lambda_set ? a.lambda : 0.4;
    auto inst = muse::make_linear_instance(a.n, a.m, a.d_in, a.d_out, lambda, a.edge_prob,
                                           a.include_prob, a.noise, a.seed);
    muse::Thm52Options opt;
    opt.k_values = parse_int_list(a.k_values, "k-values");
    opt.t_checkpoints = parse_int_list(a.t_values, "t-values");
    opt.replicates = a.replicates;
    opt.eta0 = a.eta0;
    reports.push_back(muse::verify_thm52(inst, opt, a.seed));
  } else {
    throw muse::Error("check: expected prop31|thm52|thm53|descent, got '" + a.check + "'");
  }

  muse::write_reports(std::cout, reports);
  if (muse::any_failed(reports)) return kExitVerifyFailed;
  if (muse::any_inconclusive(reports))
    std::cerr << "warning: inconclusive check (oracle did not reach its own tolerance)\n";
  return kExitOk;
}

struct GenArgs {
  std::string kind = "sbm";
  std::string out_dir;
  std::int64_t n = 2000;
  std::int64_t blocks = 2;
  double p_in = 0.012;
  double p_out = 0.0012;
  std::int64_t feature_dim = 16;
  double noise = 3.0;
  std::int64_t degree = 8;
  std::int64_t classes = 2;
  double train_frac = 0.6;
  double val_frac = 0.2;
  std::uint64_t seed = 1;
};

int cmd_gen(const GenArgs& a) {
  muse::SynthDataset d;
  if (a.kind == "sbm") {
    muse::SbmParams p;
    p.n = a.n;
    p.blocks = a.blocks;
    p.p_in = a.p_in;
    p.p_out = a.p_out;
    p.feature_dim = a.feature_dim;
    p.feature_noise = a.noise;
    p.train_frac = a.train_frac;
    p.val_frac = a.val_frac;
    d = muse::gen_sbm(p, a.seed);
  } else if (a.kind == "regular") {
    muse::RegularParams p;
    p.n = a.n;
    p.degree = a.degree;
    p.num_classes = a.classes;
    p.feature_dim = a.feature_dim;
    p.feature_noise = a.noise;
    p.train_frac = a.train_frac;
    p.val_frac = a.val_frac;
    d = muse::gen_regular(p, a.seed);
  } else {
    throw muse::Error("kind: expected sbm|regular, got '" + a.kind + "'");
  }
  muse::write_dataset(d, a.out_dir);
  std::cout << "n=" << d.features.rows() << " edges=" << d.edges.size()
            << " d_in=" << d.features.cols() << " out_dir=" << a.out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MuseGNN: unfolded graph neural network over offline-sampled subgraphs"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate text/binary dataset files into a graph store");
  std::string in_edges, in_features, in_labels, in_masks, in_out;
  ingest->add_option("--edges", in_edges, "edge list file (src<TAB>dst per line)")->required();
  ingest->add_option("--features", in_features, "binary feature file")->required();
  ingest->add_option("--labels", in_labels, "label file, one integer per line")->required();
  ingest->add_option("--masks", in_masks, "mask file, one of train|val|test|none per line")->required();
  ingest->add_option("--out", in_out, "output graph store path")->required();

  // sample
  auto* sample = app.add_subcommand("sample", "Draw a fixed offline subgraph bundle");
  std::string sm_graph, sm_sampler = "shadow_khop", sm_split = "train", sm_fanouts = "10,15",
              sm_out;
  std::int64_t sm_batch = 64, sm_m = 5;
  double sm_p = 0.5;
  std::uint64_t sm_seed = 1;
  sample->add_option("--graph", sm_graph, "graph store path")->required();
  sample->add_option("--out", sm_out, "output bundle path")->required();
  sample->add_option("--sampler", sm_sampler, "shadow_khop|iid");
  sample->add_option("--split", sm_split, "train|val|test (shadow_khop)");
  sample->add_option("--fanouts", sm_fanouts, "per-hop fanouts, e.g. 10,15 (shadow_khop)");
  sample->add_option("--batch-size", sm_batch, "targets per subgraph (shadow_khop)");
  sample->add_option("--p", sm_p, "node inclusion probability (iid)");
  sample->add_option("--m", sm_m, "subgraph count (iid)");
  sample->add_option("--seed", sm_seed, "sampling seed");

  // train
  auto* train = app.add_subcommand("train", "Train from a key = value config file");
  std::string tr_config;
  train->add_option("--config", tr_config, "run configuration file")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a bundle");
  std::string ev_checkpoint, ev_graph, ev_bundle;
  bool ev_mutate = false;
  std::int64_t ev_workers = 1;
  eval->add_option("--checkpoint", ev_checkpoint)->required();
  eval->add_option("--graph", ev_graph)->required();
  eval->add_option("--bundle", ev_bundle)->required();
  eval->add_flag("--mutate-summary", ev_mutate, "update summary embeddings during evaluation");
  eval->add_option("--workers", ev_workers, "forward-pass worker count");

  // trace
  auto* trace = app.add_subcommand("trace", "Export per-layer energy traces as CSV");
  std::string tc_checkpoint, tc_graph, tc_bundle, tc_out;
  std::int64_t tc_workers = 1;
  trace->add_option("--checkpoint", tc_checkpoint)->required();
  trace->add_option("--graph", tc_graph)->required();
  trace->add_option("--bundle", tc_bundle)->required();
  trace->add_option("--out", tc_out, "output CSV path")->required();
  trace->add_option("--workers", tc_workers, "forward-pass worker count");

  // verify
  auto* verify = app.add_subcommand("verify", "Run an executable certificate against its oracle");
  VerifyArgs va;
  verify->add_option("--check", va.check, "prop31|thm52|thm53|descent")->required();
  verify->add_option("--seed", va.seed);
  verify->add_option("--n", va.n, "instance node count");
  verify->add_option("--m", va.m, "subgraph count");
  verify->add_option("--edge-prob", va.edge_prob, "instance edge probability");
  verify->add_option("--include-prob", va.include_prob, "subgraph node inclusion probability");
  verify->add_option("--p", va.p, "iid inclusion probability (prop31)");
  verify->add_option("--trials", va.trials, "Monte-Carlo trials / config sweeps");
  verify->add_option("--lambda", va.lambda)->each([&va](const std::string&) {
    va.lambda_set = true;
  });
  verify->add_option("--gamma", va.gamma);
  verify->add_option("--dim", va.dim, "embedding width of the instance");
  verify->add_option("--k", va.k, "unfolded layers (descent)");
  verify->add_option("--max-iters", va.max_iters, "alternation budget (thm53)");
  verify->add_option("--tol", va.tol, "relative gap tolerance (thm53)");
  verify->add_option("--alpha-scale", va.alpha_scale,
                     "step-size multiple of the bound; >1 is the violation demo (descent)");
  verify->add_option("--k-values", va.k_values, "layer sweep (thm52)");
  verify->add_option("--t-values", va.t_values, "SGD step checkpoints (thm52)");
  verify->add_option("--replicates", va.replicates, "SGD replicates (thm52)");
  verify->add_option("--eta0", va.eta0, "SGD base step (thm52)");
  verify->add_option("--noise", va.noise, "target noise (thm52)");
  verify->add_option("--d-in", va.d_in, "input width (thm52)");
  verify->add_option("--d-out", va.d_out, "output width (thm52)");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  GenArgs ga;
  gen->add_option("--kind", ga.kind, "sbm|regular")->required();
  gen->add_option("--out-dir", ga.out_dir, "output directory")->required();
  gen->add_option("--n", ga.n);
  gen->add_option("--blocks", ga.blocks, "community count (sbm)");
  gen->add_option("--p-in", ga.p_in, "within-block edge probability (sbm)");
  gen->add_option("--p-out", ga.p_out, "cross-block edge probability (sbm)");
  gen->add_option("--feature-dim", ga.feature_dim);
  gen->add_option("--noise", ga.noise, "feature noise std around the class mean");
  gen->add_option("--degree", ga.degree, "node degree (regular)");
  gen->add_option("--classes", ga.classes, "class count (regular)");
  gen->add_option("--train-frac", ga.train_frac);
  gen->add_option("--val-frac", ga.val_frac);
  gen->add_option("--seed", ga.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*ingest) return cmd_ingest(in_edges, in_features, in_labels, in_masks, in_out);
    if (*sample)
      return cmd_sample(sm_graph, sm_sampler, sm_split, sm_fanouts, sm_batch, sm_p, sm_m, sm_seed,
                        sm_out);
    if (*train) return cmd_train(tr_config);
    if (*eval) return cmd_eval(ev_checkpoint, ev_graph, ev_bundle, ev_mutate, ev_workers);
    if (*trace) return cmd_trace(tc_checkpoint, tc_graph, tc_bundle, tc_out, tc_workers);
    if (*verify) return cmd_verify(va);
    if (*gen) return cmd_gen(ga);
  } catch (const muse::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
