#include "muse/unfold.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Sparse>
#include <algorithm>

namespace muse {

SummaryState SummaryState::zeros(std::int64_t n, std::int64_t d) {
  SummaryState s;
  s.M = Mat::Zero(n, d);
  s.counters.assign(static_cast<std::size_t>(n), 0);
  return s;
}

double step_bound(const CsrView& g, const EnergyConfig& cfg, StepRule rule) {
  if (rule == StepRule::gershgorin)
    return 1.0 / (1.0 + cfg.gamma + 2.0 * cfg.lambda * static_cast<double>(g.max_degree()));
  return 1.0 / smoothness_constants(g, cfg.lambda, cfg.gamma).sigma;
}

UnfoldTrace forward_unfold(const SubgraphSample& s, const Mat& fX_s, const SummaryState& state,
                           const EnergyConfig& cfg, StepRule rule) {
  cfg.validate();
  require(fX_s.rows() == s.num_nodes(), "forward_unfold: fX_s row count mismatch");
  const double bound = step_bound(s.csr(), cfg, rule);
  require(cfg.alpha <= bound, "forward_unfold: alpha " + std::to_string(cfg.alpha) +
                                  " exceeds the step bound " + std::to_string(bound));

  auto csr = s.csr();
  // Anchor snapshot: gathered once per pass, before the layer loop.
  Mat mu;
  if (cfg.gamma > 0.0) {
    require(state.M.rows() > 0, "forward_unfold: summary state required when gamma > 0");
    mu = gather_rows(state.M, s.global_ids);
  }

  UnfoldTrace trace;
  trace.alpha_used = cfg.alpha;
  trace.energies.reserve(static_cast<std::size_t>(cfg.K) + 1);

  Mat Y = fX_s;
  trace.energies.push_back(subgraph_energy_terms(s, Y, fX_s, mu, cfg));

  Mat source = fX_s;
  if (cfg.gamma > 0.0) source += cfg.gamma * mu;

  for (std::int64_t k = 0; k < cfg.K; ++k) {
    Mat grad = (1.0 + cfg.gamma) * Y + cfg.lambda * laplacian_apply(csr, Y) - source;
    Mat U = Y - cfg.alpha * grad;
    if (cfg.penalty == Penalty::nonneg_indicator) {
      trace.relu_masks.push_back((U.array() > 0.0).cast<std::uint8_t>());
      Y = U.cwiseMax(0.0);
    } else {
      Y = std::move(U);
    }
    trace.energies.push_back(subgraph_energy_terms(s, Y, fX_s, mu, cfg));
  }
  trace.y_final = std::move(Y);
  return trace;
}

void online_mean_update(SummaryState& state, const SubgraphSample& s, const Mat& y_final,
                        double rho) {
  require(y_final.rows() == s.num_nodes(), "online_mean_update: row count mismatch");
  require(rho >= 0.0 && rho <= 1.0, "online_mean_update: rho must lie in [0,1]");
  for (std::int64_t i = 0; i < s.num_nodes(); ++i) {
    const std::int64_t v = s.global_ids[static_cast<std::size_t>(i)];
    const double c = static_cast<double>(state.counters[static_cast<std::size_t>(v)]);
    const double keep = rho * c / (c + 1.0);
    const double take = ((1.0 - rho) * c + 1.0) / (c + 1.0);
    state.M.row(v) = keep * state.M.row(v) + take * y_final.row(i);
    ++state.counters[static_cast<std::size_t>(v)];
  }
}

// --- alternating minimization ---------------------------------------------

struct AltMinSolver::Impl {
  const std::vector<SubgraphSample>& subs;
  std::vector<Mat> fXs;
  std::int64_t n;
  EnergyConfig cfg;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> factors;
  std::vector<std::int64_t> occurrences;  // r_v, over all subgraph rows
};

AltMinSolver::AltMinSolver(const std::vector<SubgraphSample>& subs, std::vector<Mat> fXs,
                           std::int64_t n, const EnergyConfig& cfg)
    : impl_(new Impl{subs, std::move(fXs), n, cfg, {}, {}}) {
  require(cfg.penalty == Penalty::none, "alt_min: defined only for penalty = none");
  require(impl_->fXs.size() == subs.size(), "alt_min: fXs count mismatch");
  impl_->occurrences.assign(static_cast<std::size_t>(n), 0);
  impl_->factors.reserve(subs.size());
  for (const auto& sg : subs) {
    require(sg.num_nodes() <= 4096, "alt_min: subgraph exceeds the dense guard");
    impl_->factors.emplace_back(
        Eigen::MatrixXd(dense_energy_operator(sg.csr(), cfg.lambda, cfg.gamma)));
    require(impl_->factors.back().info() == Eigen::Success, "alt_min: factorization failed");
    for (auto v : sg.global_ids) ++impl_->occurrences[static_cast<std::size_t>(v)];
  }
}

AltMinSolver::~AltMinSolver() = default;
AltMinSolver::AltMinSolver(AltMinSolver&&) noexcept = default;
AltMinSolver& AltMinSolver::operator=(AltMinSolver&&) noexcept = default;

double AltMinSolver::step(std::vector<Mat>& Ys, Mat& M) const {
  const auto& subs = impl_->subs;
  const auto& cfg = impl_->cfg;
  require(Ys.size() == subs.size(), "alt_min: Ys count mismatch");
  require(M.rows() == impl_->n, "alt_min: M row count mismatch");

  for (std::size_t s = 0; s < subs.size(); ++s) {
    Mat rhs = impl_->fXs[s];
    if (cfg.gamma > 0.0) rhs += cfg.gamma * gather_rows(M, subs[s].global_ids);
    Ys[s] = impl_->factors[s].solve(rhs);
  }

  Mat sums = Mat::Zero(impl_->n, M.cols());
  for (std::size_t s = 0; s < subs.size(); ++s) {
    const auto& ids = subs[s].global_ids;
    for (std::size_t i = 0; i < ids.size(); ++i)
      sums.row(ids[i]) += Ys[s].row(static_cast<std::int64_t>(i));
  }
  for (std::int64_t v = 0; v < impl_->n; ++v) {
    const std::int64_t r = impl_->occurrences[static_cast<std::size_t>(v)];
    if (r > 0) M.row(v) = sums.row(v) / static_cast<double>(r);
    // r == 0: the row does not appear in the energy; leave it fixed.
  }
  return energy(Ys, M);
}

double AltMinSolver::energy(const std::vector<Mat>& Ys, const Mat& M) const {
  return muse_energy(Ys, M, impl_->subs, impl_->fXs, impl_->cfg);
}

std::pair<std::vector<Mat>, Mat> alt_min_step(const std::vector<Mat>& Ys, const Mat& M,
                                              const std::vector<SubgraphSample>& subs,
                                              const std::vector<Mat>& fXs,
                                              const EnergyConfig& cfg) {
  AltMinSolver solver(subs, fXs, M.rows(), cfg);
  std::vector<Mat> ys = Ys;
  Mat m = M;
  solver.step(ys, m);
  return {std::move(ys), std::move(m)};
}

// --- joint optimum ---------------------------------------------------------

JointOptimum joint_optimum_oracle(const std::vector<SubgraphSample>& subs,
                                  const std::vector<Mat>& fXs, std::int64_t n,
                                  const EnergyConfig& cfg) {
  require(cfg.penalty == Penalty::none, "joint_optimum: defined only for penalty = none");
  require(!subs.empty() && fXs.size() == subs.size(), "joint_optimum: bad inputs");
  const std::int64_t d = fXs[0].cols();
  std::int64_t total_rows = n;
  for (const auto& sg : subs) total_rows += sg.num_nodes();
  require(total_rows * d <= 200000, "joint_optimum: variable count " +
                                        std::to_string(total_rows * d) +
                                        " exceeds the oracle guard 200000");

  JointOptimum out;
  out.Ys.resize(subs.size());

  if (cfg.gamma == 0.0) {
    // Decoupled: per-subgraph closed forms; M is the per-node mean (it does
    // not enter the energy, the mean is just the canonical representative).
    std::vector<std::int64_t> r(static_cast<std::size_t>(n), 0);
    Mat sums = Mat::Zero(n, d);
    for (std::size_t s = 0; s < subs.size(); ++s) {
      out.Ys[s] = closed_form_minimizer(subs[s], fXs[s], Mat(), cfg);
      const auto& ids = subs[s].global_ids;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        sums.row(ids[i]) += out.Ys[s].row(static_cast<std::int64_t>(i));
        ++r[static_cast<std::size_t>(ids[i])];
      }
    }
    out.M = Mat::Zero(n, d);
    for (std::int64_t v = 0; v < n; ++v)
      if (r[static_cast<std::size_t>(v)] > 0)
        out.M.row(v) = sums.row(v) / static_cast<double>(r[static_cast<std::size_t>(v)]);
    out.energy = muse_energy(out.Ys, out.M, subs, fXs, cfg);
    return out;
  }

  // Variable layout: [Y_1; ...; Y_m; M restricted to visited nodes], one
  // solve shared by all d embedding columns.
  std::vector<std::int64_t> offset(subs.size());
  std::int64_t y_vars = 0;
  for (std::size_t s = 0; s < subs.size(); ++s) {
    offset[s] = y_vars;
    y_vars += subs[s].num_nodes();
  }
  std::vector<std::int64_t> m_index(static_cast<std::size_t>(n), -1);
  std::vector<std::int64_t> visited;
  std::vector<std::int64_t> r(static_cast<std::size_t>(n), 0);
  for (const auto& sg : subs)
    for (auto v : sg.global_ids) {
      if (r[static_cast<std::size_t>(v)] == 0) {
        m_index[static_cast<std::size_t>(v)] = static_cast<std::int64_t>(visited.size());
        visited.push_back(v);
      }
      ++r[static_cast<std::size_t>(v)];
    }
  const std::int64_t dim = y_vars + static_cast<std::int64_t>(visited.size());

  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t s = 0; s < subs.size(); ++s) {
    const auto& sg = subs[s];
    auto csr = sg.csr();
    const std::int64_t o = offset[s];
    for (std::int64_t i = 0; i < sg.num_nodes(); ++i) {
      trips.emplace_back(o + i, o + i,
                         1.0 + cfg.gamma + cfg.lambda * static_cast<double>(csr.degree(i)));
      for (std::int64_t j : csr.neighbors(i)) trips.emplace_back(o + i, o + j, -cfg.lambda);
      const std::int64_t mv = y_vars + m_index[static_cast<std::size_t>(
                                           sg.global_ids[static_cast<std::size_t>(i)])];
      trips.emplace_back(o + i, mv, -cfg.gamma);
      trips.emplace_back(mv, o + i, -cfg.gamma);
    }
  }
  for (std::size_t k = 0; k < visited.size(); ++k)
    trips.emplace_back(y_vars + static_cast<std::int64_t>(k),
                       y_vars + static_cast<std::int64_t>(k),
                       cfg.gamma * static_cast<double>(r[static_cast<std::size_t>(visited[k])]));

  Eigen::SparseMatrix<double> H(dim, dim);
  H.setFromTriplets(trips.begin(), trips.end());
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(H);
  require(llt.info() == Eigen::Success, "joint_optimum: sparse factorization failed");

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(dim, d);
  for (std::size_t s = 0; s < subs.size(); ++s)
    rhs.middleRows(offset[s], subs[s].num_nodes()) = fXs[s];
  Eigen::MatrixXd z = llt.solve(rhs);

  for (std::size_t s = 0; s < subs.size(); ++s)
    out.Ys[s] = z.middleRows(offset[s], subs[s].num_nodes());
  out.M = Mat::Zero(n, d);
  for (std::size_t k = 0; k < visited.size(); ++k)
    out.M.row(visited[k]) = z.row(y_vars + static_cast<std::int64_t>(k));
  out.energy = muse_energy(out.Ys, out.M, subs, fXs, cfg);
  return out;
}

}  // namespace muse
