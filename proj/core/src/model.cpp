#include "muse/model.hpp"

#include <cmath>
#include <cstring>

#include "muse/io.hpp"
#include "muse/rng.hpp"

namespace muse {

namespace {

Mat uniform_fan_in(std::int64_t rows, std::int64_t cols, std::int64_t fan_in,
                   std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Mat m(rows, cols);
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

MlpParams init_mlp(std::int64_t d_in, std::int64_t d_hidden, std::int64_t d_out,
                   std::uint64_t seed, std::string_view tag) {
  MlpParams p;
  const std::int64_t dims[4] = {d_in, d_hidden, d_hidden, d_out};
  for (int l = 0; l < 3; ++l) {
    auto rng = make_stream(seed, tag, static_cast<std::uint64_t>(l));
    p.layers[static_cast<std::size_t>(l)].W =
        uniform_fan_in(dims[l], dims[l + 1], dims[l], rng);
    p.layers[static_cast<std::size_t>(l)].b = uniform_fan_in(1, dims[l + 1], dims[l], rng);
  }
  return p;
}

MlpParams zeros_like(const MlpParams& p) {
  MlpParams z;
  for (std::size_t l = 0; l < 3; ++l) {
    z.layers[l].W = Mat::Zero(p.layers[l].W.rows(), p.layers[l].W.cols());
    z.layers[l].b = Mat::Zero(1, p.layers[l].b.cols());
  }
  return z;
}

Mat apply_mask(const ReluMask& mask, const Mat& m) {
  return (mask.cast<double>().array() * m.array()).matrix();
}

}  // namespace

ModelParams ModelParams::init(std::int64_t d_in, std::int64_t d_hidden, std::int64_t d_out,
                              double dropout_rate, std::uint64_t seed) {
  require(d_in >= 1 && d_hidden >= 1 && d_out >= 1, "ModelParams: dimensions must be >= 1");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, "ModelParams: dropout must lie in [0,1)");
  ModelParams p;
  p.f = init_mlp(d_in, d_hidden, d_hidden, seed, "init_f");
  p.g = init_mlp(d_hidden, d_hidden, d_out, seed, "init_g");
  p.dropout_rate = dropout_rate;
  p.d_in = d_in;
  p.d_hidden = d_hidden;
  p.d_out = d_out;
  return p;
}

GradientBundle GradientBundle::zeros_like(const ModelParams& p) {
  return GradientBundle{muse::zeros_like(p.f), muse::zeros_like(p.g), 0.0};
}

void for_each_param(MlpParams& f, MlpParams& g, const std::string& prefix_f,
                    const std::string& prefix_g,
                    const std::function<void(const std::string&, Mat&)>& fn) {
  for (std::size_t l = 0; l < 3; ++l) {
    fn(prefix_f + ".layer" + std::to_string(l + 1) + ".W", f.layers[l].W);
    fn(prefix_f + ".layer" + std::to_string(l + 1) + ".b", f.layers[l].b);
  }
  for (std::size_t l = 0; l < 3; ++l) {
    fn(prefix_g + ".layer" + std::to_string(l + 1) + ".W", g.layers[l].W);
    fn(prefix_g + ".layer" + std::to_string(l + 1) + ".b", g.layers[l].b);
  }
}

void for_each_param(ModelParams& p, const std::function<void(const std::string&, Mat&)>& fn) {
  for_each_param(p.f, p.g, "f", "g", fn);
}

void for_each_param(const ModelParams& p,
                    const std::function<void(const std::string&, const Mat&)>& fn) {
  auto& mut = const_cast<ModelParams&>(p);
  for_each_param(mut, [&](const std::string& name, Mat& m) { fn(name, m); });
}

Mat mlp_forward(const MlpParams& p, const Mat& X, double dropout_rate, bool train_mode,
                std::mt19937_64* rng, MlpCache* cache) {
  require(X.cols() == p.layers[0].W.rows(), "mlp_forward: input width " +
                                                std::to_string(X.cols()) + " != layer width " +
                                                std::to_string(p.layers[0].W.rows()));
  const bool dropping = train_mode && dropout_rate > 0.0;
  if (dropping) require(rng != nullptr, "mlp_forward: dropout requires an rng in train mode");
  const double scale = dropping ? 1.0 / (1.0 - dropout_rate) : 1.0;
  if (cache) {
    cache->input = X;
    cache->drop_scale = scale;
  }

  std::bernoulli_distribution keep(1.0 - dropout_rate);
  Mat h = X;
  for (std::size_t l = 0; l < 2; ++l) {
    Mat z = h * p.layers[l].W;
    z.rowwise() += p.layers[l].b.row(0);
    ReluMask relu = (z.array() > 0.0).cast<std::uint8_t>();
    Mat branch = z.cwiseMax(0.0);
    if (dropping) {
      ReluMask dm(z.rows(), z.cols());
      for (std::int64_t i = 0; i < z.rows(); ++i)
        for (std::int64_t j = 0; j < z.cols(); ++j) dm(i, j) = keep(*rng) ? 1 : 0;
      branch = scale * apply_mask(dm, branch);
      if (cache) cache->drop[l] = std::move(dm);
    }
    // Residual skip only where the widths line up.
    Mat next = (h.cols() == branch.cols()) ? Mat(h + branch) : branch;
    if (cache) {
      cache->relu[l] = std::move(relu);
      cache->hidden[l] = next;
    }
    h = std::move(next);
  }
  Mat out = h * p.layers[2].W;
  out.rowwise() += p.layers[2].b.row(0);
  return out;
}

Mat mlp_backward(const MlpParams& p, const MlpCache& cache, const Mat& d_out, MlpParams& grads) {
  // Output layer.
  grads.layers[2].W += cache.hidden[1].transpose() * d_out;
  grads.layers[2].b += d_out.colwise().sum();
  Mat dh = d_out * p.layers[2].W.transpose();

  for (int l = 1; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    const Mat& in = (l == 0) ? cache.input : cache.hidden[0];
    const bool skipped = in.cols() == dh.cols();
    Mat dbranch = dh;
    if (cache.drop[lu].size() > 0)
      dbranch = cache.drop_scale * apply_mask(cache.drop[lu], dbranch);
    Mat dz = apply_mask(cache.relu[lu], dbranch);
    grads.layers[lu].W += in.transpose() * dz;
    grads.layers[lu].b += dz.colwise().sum();
    Mat din = dz * p.layers[lu].W.transpose();
    if (skipped) din += dh;
    dh = std::move(din);
  }
  return dh;
}

Mat f_forward(const Mat& X_s, const ModelParams& params, bool train_mode, std::mt19937_64* rng,
              MlpCache* cache) {
  return mlp_forward(params.f, X_s, params.dropout_rate, train_mode, rng, cache);
}

double cross_entropy(const Mat& logits, std::span<const std::int32_t> labels, Mat* d_logits) {
  require(static_cast<std::size_t>(logits.rows()) == labels.size(),
          "cross_entropy: label count mismatch");
  const std::int64_t d_out = logits.cols();
  double loss = 0.0;
  if (d_logits) d_logits->resize(logits.rows(), d_out);
  for (std::int64_t i = 0; i < logits.rows(); ++i) {
    const std::int32_t t = labels[static_cast<std::size_t>(i)];
    require(t >= 0 && t < d_out, "cross_entropy: label " + std::to_string(t) +
                                     " out of range [0," + std::to_string(d_out) + ")");
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    loss += lse - logits(i, t);
    if (d_logits) {
      d_logits->row(i) = (logits.row(i).array() - lse).exp();
      (*d_logits)(i, t) -= 1.0;
    }
  }
  return loss;
}

double loss_muse(const std::vector<SubgraphSample>& subs, std::span<const Mat> Ys_final,
                 const std::vector<std::int32_t>& full_labels, const ModelParams& params) {
  require(Ys_final.size() == subs.size(), "loss_muse: per-subgraph count mismatch");
  double loss = 0.0;
  for (std::size_t s = 0; s < subs.size(); ++s) {
    const auto& sg = subs[s];
    require(Ys_final[s].rows() == sg.num_nodes(), "loss_muse: Y row count mismatch");
    std::vector<std::int32_t> labels(static_cast<std::size_t>(sg.n_targets));
    for (std::int64_t i = 0; i < sg.n_targets; ++i)
      labels[static_cast<std::size_t>(i)] =
          full_labels[static_cast<std::size_t>(sg.global_ids[static_cast<std::size_t>(i)])];
    Mat logits = mlp_forward(params.g, Ys_final[s].topRows(sg.n_targets), 0.0, false, nullptr,
                             nullptr);
    loss += cross_entropy(logits, labels, nullptr);
  }
  return loss;
}

SubgraphForward subgraph_forward(const SubgraphSample& s, const Mat& X_s,
                                 const std::vector<std::int32_t>& labels_s,
                                 const ModelParams& params, const SummaryState& state,
                                 const EnergyConfig& cfg, StepRule rule, bool train_mode,
                                 std::mt19937_64* dropout_rng) {
  require(static_cast<std::int64_t>(labels_s.size()) == s.n_targets,
          "subgraph_forward: label count must equal target count");
  SubgraphForward out;
  out.labels = labels_s;

  Mat fX = f_forward(X_s, params, train_mode, dropout_rng, &out.f_cache);

  if (cfg.K >= 1) {
    UnfoldTrace trace = forward_unfold(s, fX, state, cfg, rule);
    out.y_final = std::move(trace.y_final);
    out.energies = std::move(trace.energies);
    out.unfold_masks = std::move(trace.relu_masks);
    out.alpha_used = trace.alpha_used;
  } else {
    // Degenerate K = 0: the classifier reduces to the plain MLP g(f(X)).
    Mat mu;
    if (cfg.gamma > 0.0 && state.M.rows() > 0) mu = gather_rows(state.M, s.global_ids);
    out.y_final = fX;
    out.energies = {subgraph_energy_terms(s, fX, fX, mu, cfg)};
  }

  out.logits = mlp_forward(params.g, out.y_final.topRows(s.n_targets), params.dropout_rate,
                           train_mode, dropout_rng, &out.g_cache);
  out.loss = cross_entropy(out.logits, labels_s, &out.d_logits);
  return out;
}

GradientBundle backward(const std::vector<const SubgraphSample*>& batch,
                        const std::vector<const SubgraphForward*>& fwds,
                        const ModelParams& params, const EnergyConfig& cfg) {
  require(batch.size() == fwds.size(), "backward: batch size mismatch");
  GradientBundle grads = GradientBundle::zeros_like(params);

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const SubgraphSample& s = *batch[b];
    const SubgraphForward& fwd = *fwds[b];
    grads.loss += fwd.loss;

    Mat d_target = mlp_backward(params.g, fwd.g_cache, fwd.d_logits, grads.g);

    Mat dY = Mat::Zero(s.num_nodes(), d_target.cols());
    dY.topRows(s.n_targets) = d_target;

    const std::int64_t K = static_cast<std::int64_t>(fwd.energies.size()) - 1;
    Mat dfX;
    if (K >= 1) {
      const bool masked = cfg.penalty == Penalty::nonneg_indicator;
      require(!masked || static_cast<std::int64_t>(fwd.unfold_masks.size()) == K,
              "backward: missing ReLU masks for the unfolded layers");
      const double a = fwd.alpha_used;
      auto csr = s.csr();
      Mat dSource = Mat::Zero(dY.rows(), dY.cols());
      Mat U = std::move(dY);
      for (std::int64_t k = K - 1; k >= 0; --k) {
        Mat G = masked ? apply_mask(fwd.unfold_masks[static_cast<std::size_t>(k)], U) : U;
        dSource += a * G;
        // Propagate through the symmetric operator I - a[(1+gamma) I + lambda L].
        U = G - a * ((1.0 + cfg.gamma) * G + cfg.lambda * laplacian_apply(csr, G));
      }
      dfX = dSource + U;
    } else {
      dfX = std::move(dY);
    }
    mlp_backward(params.f, fwd.f_cache, dfX, grads.f);
  }
  return grads;
}

// --- optimizers ----------------------------------------------------------

namespace {

void check_finite(const GradientBundle& grads) {
  auto visit = [](const MlpParams& p, const std::string& prefix) {
    for (std::size_t l = 0; l < 3; ++l) {
      const auto& blk = p.layers[l];
      require(blk.W.allFinite() && blk.b.allFinite(),
              "optimizer: non-finite gradient in " + prefix + ".layer" + std::to_string(l + 1));
    }
  };
  visit(grads.f, "f");
  visit(grads.g, "g");
}

template <typename Fn>
void zip_layers(MlpParams& a, const MlpParams& b, Fn&& fn) {
  for (std::size_t l = 0; l < 3; ++l) {
    fn(a.layers[l].W, b.layers[l].W);
    fn(a.layers[l].b, b.layers[l].b);
  }
}

}  // namespace

void sgd_step(ModelParams& params, const GradientBundle& grads, SgdState& state) {
  check_finite(grads);
  state.t += 1;
  const double eta = state.eta0 / std::sqrt(static_cast<double>(state.t));
  zip_layers(params.f, grads.f, [&](Mat& p, const Mat& g) { p -= eta * g; });
  zip_layers(params.g, grads.g, [&](Mat& p, const Mat& g) { p -= eta * g; });
}

AdamState AdamState::init(const ModelParams& p, double lr) {
  AdamState s;
  s.lr = lr;
  s.m_f = zeros_like(p.f);
  s.v_f = zeros_like(p.f);
  s.m_g = zeros_like(p.g);
  s.v_g = zeros_like(p.g);
  return s;
}

void adam_step(ModelParams& params, const GradientBundle& grads, AdamState& state) {
  check_finite(grads);
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  auto update = [&](MlpParams& p, const MlpParams& g, MlpParams& m, MlpParams& v) {
    for (std::size_t l = 0; l < 3; ++l) {
      auto step_one = [&](Mat& pp, const Mat& gg, Mat& mm, Mat& vv) {
        mm = state.beta1 * mm + (1.0 - state.beta1) * gg;
        vv = state.beta2 * vv + (1.0 - state.beta2) * gg.cwiseProduct(gg);
        pp.array() -=
            state.lr * (mm.array() / bc1) / ((vv.array() / bc2).sqrt() + state.eps);
      };
      step_one(p.layers[l].W, g.layers[l].W, m.layers[l].W, v.layers[l].W);
      step_one(p.layers[l].b, g.layers[l].b, m.layers[l].b, v.layers[l].b);
    }
  };
  update(params.f, grads.f, state.m_f, state.v_f);
  update(params.g, grads.g, state.m_g, state.v_g);
}

// --- checkpoint ------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[] = "MUSC1";

void write_mat(BinWriter& w, const Mat& m) {
  w.i64(m.rows());
  w.i64(m.cols());
  for (std::int64_t i = 0; i < m.rows(); ++i)
    for (std::int64_t j = 0; j < m.cols(); ++j) w.f64(m(i, j));
}

Mat read_mat(BinReader& r) {
  std::int64_t rows = r.i64();
  std::int64_t cols = r.i64();
  require(rows >= 0 && cols >= 0 && rows < (1LL << 32) && cols < (1LL << 20),
          "checkpoint: implausible matrix shape");
  Mat m(rows, cols);
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) m(i, j) = r.f64();
  return m;
}

void write_mlp(BinWriter& w, const MlpParams& p) {
  for (std::size_t l = 0; l < 3; ++l) {
    write_mat(w, p.layers[l].W);
    write_mat(w, p.layers[l].b);
  }
}

MlpParams read_mlp(BinReader& r) {
  MlpParams p;
  for (std::size_t l = 0; l < 3; ++l) {
    p.layers[l].W = read_mat(r);
    p.layers[l].b = read_mat(r);
  }
  return p;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  BinWriter w;
  w.bytes(kCheckpointMagic, 5);
  w.u8(1);  // version
  w.bytes(c.graph_digest.data(), c.graph_digest.size());
  w.u64(c.run_seed);
  w.i64(c.completed_epochs);

  w.i64(c.params.d_in);
  w.i64(c.params.d_hidden);
  w.i64(c.params.d_out);
  w.f64(c.params.dropout_rate);
  write_mlp(w, c.params.f);
  write_mlp(w, c.params.g);

  w.f64(c.cfg.lambda);
  w.f64(c.cfg.gamma);
  w.f64(c.cfg.alpha);
  w.f64(c.cfg.rho);
  w.i64(c.cfg.K);
  w.u8(static_cast<std::uint8_t>(c.cfg.penalty));
  w.u8(c.alpha_auto ? 1 : 0);

  w.u8(static_cast<std::uint8_t>(c.optimizer));
  if (c.optimizer == OptimizerKind::adam) {
    require(c.adam.has_value(), "save_checkpoint: adam state missing");
    w.f64(c.adam->lr);
    w.f64(c.adam->beta1);
    w.f64(c.adam->beta2);
    w.f64(c.adam->eps);
    w.i64(c.adam->t);
    write_mlp(w, c.adam->m_f);
    write_mlp(w, c.adam->v_f);
    write_mlp(w, c.adam->m_g);
    write_mlp(w, c.adam->v_g);
  } else {
    require(c.sgd.has_value(), "save_checkpoint: sgd state missing");
    w.f64(c.sgd->eta0);
    w.i64(c.sgd->t);
  }

  write_mat(w, c.state.M);
  w.u64(c.state.counters.size());
  for (auto v : c.state.counters) w.i64(v);

  w.write_file(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto r = BinReader::from_file(path);
  char magic[5];
  r.bytes(magic, 5);
  require(std::memcmp(magic, kCheckpointMagic, 5) == 0, path.string() + ": not a checkpoint");
  require(r.u8() == 1, path.string() + ": unsupported checkpoint version");

  Checkpoint c;
  r.bytes(c.graph_digest.data(), c.graph_digest.size());
  c.run_seed = r.u64();
  c.completed_epochs = r.i64();

  c.params.d_in = r.i64();
  c.params.d_hidden = r.i64();
  c.params.d_out = r.i64();
  c.params.dropout_rate = r.f64();
  c.params.f = read_mlp(r);
  c.params.g = read_mlp(r);

  c.cfg.lambda = r.f64();
  c.cfg.gamma = r.f64();
  c.cfg.alpha = r.f64();
  c.cfg.rho = r.f64();
  c.cfg.K = r.i64();
  c.cfg.penalty = static_cast<Penalty>(r.u8());
  c.alpha_auto = r.u8() != 0;

  c.optimizer = static_cast<OptimizerKind>(r.u8());
  if (c.optimizer == OptimizerKind::adam) {
    AdamState a;
    a.lr = r.f64();
    a.beta1 = r.f64();
    a.beta2 = r.f64();
    a.eps = r.f64();
    a.t = r.i64();
    a.m_f = read_mlp(r);
    a.v_f = read_mlp(r);
    a.m_g = read_mlp(r);
    a.v_g = read_mlp(r);
    c.adam = std::move(a);
  } else {
    SgdState s;
    s.eta0 = r.f64();
    s.t = r.i64();
    c.sgd = s;
  }

  c.state.M = read_mat(r);
  std::uint64_t nc = r.u64();
  c.state.counters.resize(nc);
  for (auto& v : c.state.counters) v = r.i64();
  require(r.exhausted(), path.string() + ": trailing bytes in checkpoint");
  return c;
}

}  // namespace muse
