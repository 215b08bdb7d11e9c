#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "muse/unfold.hpp"
#include "muse/verify.hpp"
#include "oracles.hpp"

using muse::EnergyConfig;
using muse::Mat;
using muse::Penalty;
using muse::StepRule;
using muse::SummaryState;

namespace {

muse::SubgraphSample path2_sample() {
  muse::Graph g = muse::build_graph({{0, 1}}, 2, Mat::Zero(2, 1), {}, {});
  return muse::induced_subgraph(g, {0, 1}, 2);
}

EnergyConfig cfg_none(double lambda, double gamma, double alpha, std::int64_t K) {
  EnergyConfig c;
  c.lambda = lambda;
  c.gamma = gamma;
  c.alpha = alpha;
  c.K = K;
  c.penalty = Penalty::none;
  return c;
}

}  // namespace

TEST_CASE("step bound values") {
  muse::Graph edgeless = muse::build_graph({}, 3, Mat::Zero(3, 1), {}, {});
  auto e = muse::induced_subgraph(edgeless, {0, 1, 2}, 3);
  CHECK(muse::step_bound(e.csr(), cfg_none(7.0, 0.0, 1, 1)) == doctest::Approx(1.0));

  auto s = path2_sample();
  CHECK(muse::step_bound(s.csr(), cfg_none(1.0, 0.0, 1, 1)) == doctest::Approx(1.0 / 3.0));
  CHECK(muse::step_bound(s.csr(), cfg_none(0.0, 1.0, 1, 1)) == doctest::Approx(0.5));

  // On the two-node path Gershgorin is tight: the spectral rule agrees.
  CHECK(muse::step_bound(s.csr(), cfg_none(1.0, 0.0, 1, 1), StepRule::spectral) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("lambda = gamma = 0 makes the initialization a fixed point") {
  std::mt19937_64 rng(3);
  auto inst = muse::make_energy_instance(12, 1, 0.25, 1.0, 3, 5);
  const auto& s = inst.subs[0];
  EnergyConfig c = cfg_none(0.0, 0.0, 1.0, 6);
  SummaryState state = SummaryState::zeros(inst.n, 3);
  auto trace = muse::forward_unfold(s, inst.fXs[0], state, c);
  CHECK((trace.y_final - inst.fXs[0]).cwiseAbs().maxCoeff() == 0.0);
  for (const auto& terms : trace.energies) CHECK(terms.total() == 0.0);
}

TEST_CASE("one unfolded step on the path matches the hand iterate") {
  auto s = path2_sample();
  Mat fX(2, 1);
  fX << 1, 0;
  SummaryState state = SummaryState::zeros(2, 1);
  auto trace = muse::forward_unfold(s, fX, state, cfg_none(1.0, 0.0, 1.0 / 3.0, 1));
  CHECK(trace.y_final(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(trace.y_final(1, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("long unfolding converges to the closed-form minimizer") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    auto inst = muse::make_energy_instance(30, 1, 0.15, 1.0, 4, rng());
    const auto& s = inst.subs[0];
    EnergyConfig c = cfg_none(0.4, 0.8, 0.0, 400);
    c.alpha = muse::step_bound(s.csr(), c, StepRule::spectral);
    SummaryState state = SummaryState::zeros(inst.n, 4);
    state.M = oracles::gaussian(inst.n, 4, rng);
    auto trace = muse::forward_unfold(s, inst.fXs[0], state, c, StepRule::spectral);
    Mat mu = muse::gather_rows(state.M, s.global_ids);
    Mat star = muse::closed_form_minimizer(s, inst.fXs[0], mu, c);
    CHECK((trace.y_final - star).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("alpha above the bound is rejected with the bound in the message") {
  auto s = path2_sample();
  SummaryState state = SummaryState::zeros(2, 1);
  EnergyConfig c = cfg_none(1.0, 0.0, 0.5, 2);  // bound is 1/3
  try {
    muse::forward_unfold(s, Mat::Zero(2, 1), state, c);
    FAIL("expected rejection");
  } catch (const muse::Error& e) {
    CHECK(std::string(e.what()).find("0.333333") != std::string::npos);
  }
}

TEST_CASE("traces are monotone at the step bound for both penalties") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = muse::make_energy_instance(25, 2, 0.2, 0.8, 3, rng());
    EnergyConfig c = cfg_none(0.5 + (trial % 5) * 0.3, (trial % 4) * 0.7, 0.0, 10);
    c.penalty = (trial % 2 == 0) ? Penalty::none : Penalty::nonneg_indicator;
    SummaryState state = SummaryState::zeros(inst.n, 3);
    state.M = oracles::gaussian(inst.n, 3, rng);
    for (std::size_t si = 0; si < inst.subs.size(); ++si) {
      c.alpha = muse::step_bound(inst.subs[si].csr(), c);
      auto trace = muse::forward_unfold(inst.subs[si], inst.fXs[si], state, c);
      for (std::size_t k = 0; k + 1 < trace.energies.size(); ++k) {
        double prev = trace.energies[k].total();
        double next = trace.energies[k + 1].total();
        if (std::isinf(prev)) continue;  // infeasible start under the indicator
        CHECK(next <= prev + 1e-10 * std::max(1.0, std::abs(prev)));
      }
    }
  }
}

TEST_CASE("geometric convergence envelope with the spectral step") {
  std::mt19937_64 rng(13);
  auto inst = muse::make_energy_instance(20, 1, 0.3, 1.0, 3, 99);
  const auto& s = inst.subs[0];
  EnergyConfig c = cfg_none(0.6, 0.0, 0.0, 1);
  auto bounds = muse::smoothness_constants(s.csr(), c.lambda, c.gamma);
  c.alpha = 1.0 / bounds.sigma;
  SummaryState state = SummaryState::zeros(inst.n, 3);
  Mat star = muse::closed_form_minimizer(s, inst.fXs[0], Mat(), c);
  const double d0 = (inst.fXs[0] - star).norm();
  for (std::int64_t k = 1; k <= 30; k += 4) {
    c.K = k;
    auto trace = muse::forward_unfold(s, inst.fXs[0], state, c, StepRule::spectral);
    double dk = (trace.y_final - star).norm();
    CHECK(dk <= std::exp(-(bounds.tau / bounds.sigma) * static_cast<double>(k) / 2.0) * d0 +
                    1e-12);
  }
}

TEST_CASE("online mean: first visit overwrites for any forgetting factor") {
  auto s = path2_sample();
  for (double rho : {0.0, 0.3, 1.0}) {
    SummaryState state = SummaryState::zeros(2, 2);
    Mat y(2, 2);
    y << 1, 2, 3, 4;
    muse::online_mean_update(state, s, y, rho);
    CHECK((state.M - y).cwiseAbs().maxCoeff() == 0.0);
    CHECK(state.counters == std::vector<std::int64_t>{1, 1});
  }
}

TEST_CASE("online mean hand values") {
  auto s = path2_sample();
  SummaryState state = SummaryState::zeros(2, 1);
  state.M(0, 0) = 2.0;
  state.counters[0] = 1;
  Mat y(2, 1);
  y << 4, 0;
  muse::online_mean_update(state, s, y, 1.0);
  CHECK(state.M(0, 0) == doctest::Approx(3.0));  // exact running mean

  SummaryState forget = SummaryState::zeros(2, 1);
  forget.M(0, 0) = 123.0;
  forget.counters[0] = 5;
  Mat y2(2, 1);
  y2 << 7, 0;
  muse::online_mean_update(forget, s, y2, 0.0);
  CHECK(forget.M(0, 0) == doctest::Approx(7.0));  // rho = 0 discards history
}

TEST_CASE("rho = 1 reproduces exact per-node arithmetic means under interleaving") {
  std::mt19937_64 rng(17);
  muse::Graph g = oracles::random_graph(10, 0.3, rng);
  SummaryState state = SummaryState::zeros(10, 2);
  Mat sums = Mat::Zero(10, 2);
  std::vector<std::int64_t> counts(10, 0);
  for (int round = 0; round < 25; ++round) {
    std::vector<std::int64_t> nodes;
    for (std::int64_t v = 0; v < 10; ++v)
      if (rng() % 2 == 0) nodes.push_back(v);
    if (nodes.empty()) continue;
    auto s = muse::induced_subgraph(g, nodes, static_cast<std::int64_t>(nodes.size()));
    Mat y = oracles::gaussian(s.num_nodes(), 2, rng);
    muse::online_mean_update(state, s, y, 1.0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      sums.row(nodes[i]) += y.row(static_cast<std::int64_t>(i));
      ++counts[static_cast<std::size_t>(nodes[i])];
    }
  }
  for (std::int64_t v = 0; v < 10; ++v) {
    CHECK(state.counters[static_cast<std::size_t>(v)] == counts[static_cast<std::size_t>(v)]);
    if (counts[static_cast<std::size_t>(v)] > 0) {
      Mat mean = sums.row(v) / static_cast<double>(counts[static_cast<std::size_t>(v)]);
      CHECK((state.M.row(v) - mean).cwiseAbs().maxCoeff() <= 1e-12);
    } else {
      CHECK(state.M.row(v).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("alternation with lambda = gamma = 0 returns fX and per-node means") {
  auto inst = muse::make_energy_instance(12, 3, 0.2, 0.7, 2, 31);
  EnergyConfig c = cfg_none(0.0, 0.0, 1.0, 1);
  std::vector<Mat> Ys;
  for (const auto& s : inst.subs) Ys.push_back(Mat::Zero(s.num_nodes(), 2));
  Mat M = Mat::Zero(12, 2);
  auto [ys, m] = muse::alt_min_step(Ys, M, inst.subs, inst.fXs, c);
  Mat sums = Mat::Zero(12, 2);
  std::vector<std::int64_t> counts(12, 0);
  for (std::size_t s = 0; s < inst.subs.size(); ++s) {
    CHECK((ys[s] - inst.fXs[s]).cwiseAbs().maxCoeff() <= 1e-12);
    const auto& ids = inst.subs[s].global_ids;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      sums.row(ids[i]) += inst.fXs[s].row(static_cast<std::int64_t>(i));
      ++counts[static_cast<std::size_t>(ids[i])];
    }
  }
  for (std::int64_t v = 0; v < 12; ++v)
    if (counts[static_cast<std::size_t>(v)] > 0)
      CHECK((m.row(v) - sums.row(v) / static_cast<double>(counts[static_cast<std::size_t>(v)]))
                .cwiseAbs()
                .maxCoeff() <= 1e-12);
}

TEST_CASE("the joint optimum is a fixed point of the alternation") {
  auto inst = muse::make_energy_instance(16, 3, 0.25, 0.7, 3, 37);
  EnergyConfig c = cfg_none(0.8, 1.3, 1.0, 1);
  auto opt = muse::joint_optimum_oracle(inst.subs, inst.fXs, inst.n, c);
  auto [ys, m] = muse::alt_min_step(opt.Ys, opt.M, inst.subs, inst.fXs, c);
  for (std::size_t s = 0; s < inst.subs.size(); ++s)
    CHECK((ys[s] - opt.Ys[s]).cwiseAbs().maxCoeff() <= 1e-10);
  // Rows of nodes that appear in some subgraph must be unchanged.
  std::vector<bool> visited(16, false);
  for (const auto& sg : inst.subs)
    for (auto v : sg.global_ids) visited[static_cast<std::size_t>(v)] = true;
  for (std::int64_t v = 0; v < 16; ++v)
    if (visited[static_cast<std::size_t>(v)])
      CHECK((m.row(v) - opt.M.row(v)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("each alternation sweep is nonincreasing in energy") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = muse::make_energy_instance(4 + static_cast<std::int64_t>(rng() % 12), 2, 0.3,
                                           0.7, 2, rng());
    EnergyConfig c = cfg_none(0.2 + (trial % 7) * 0.2, (trial % 5) * 0.6, 1.0, 1);
    muse::AltMinSolver solver(inst.subs, inst.fXs, inst.n, c);
    std::vector<Mat> Ys;
    for (const auto& s : inst.subs) Ys.push_back(oracles::gaussian(s.num_nodes(), 2, rng));
    Mat M = oracles::gaussian(inst.n, 2, rng);
    double prev = solver.energy(Ys, M);
    for (int it = 0; it < 5; ++it) {
      double next = solver.step(Ys, M);
      CHECK(next <= prev + 1e-12 * std::max(1.0, std::abs(prev)));
      prev = next;
    }
  }
}

TEST_CASE("gamma = 0 joint optimum decouples into closed forms") {
  auto inst = muse::make_energy_instance(14, 2, 0.3, 0.8, 2, 43);
  EnergyConfig c = cfg_none(0.7, 0.0, 1.0, 1);
  auto opt = muse::joint_optimum_oracle(inst.subs, inst.fXs, inst.n, c);
  double direct = 0.0;
  for (std::size_t s = 0; s < inst.subs.size(); ++s) {
    Mat star = muse::closed_form_minimizer(inst.subs[s], inst.fXs[s], Mat(), c);
    CHECK((opt.Ys[s] - star).cwiseAbs().maxCoeff() <= 1e-10);
    direct += muse::subgraph_energy_terms(inst.subs[s], star, inst.fXs[s], Mat(), c).total();
  }
  CHECK(opt.energy == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("single full-graph subgraph with huge gamma approaches the full-graph minimum") {
  std::mt19937_64 rng(47);
  muse::Graph g = oracles::random_graph(12, 0.3, rng, 3);
  std::vector<std::int64_t> all(12);
  for (std::int64_t i = 0; i < 12; ++i) all[static_cast<std::size_t>(i)] = i;
  auto s = muse::induced_subgraph(g, all, 12);
  Mat fX = oracles::gaussian(12, 3, rng);
  EnergyConfig c = cfg_none(0.9, 1e7, 1.0, 1);
  auto opt = muse::joint_optimum_oracle({s}, {fX}, 12, c);

  EnergyConfig full = cfg_none(0.9, 0.0, 1.0, 1);
  Mat star = muse::closed_form_minimizer(s, fX, Mat(), full);
  double full_min = muse::full_energy(g.csr(), star, fX, full);
  CHECK(opt.energy == doctest::Approx(full_min).epsilon(1e-4));
  CHECK((opt.M - star).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("symmetric twin subgraphs share one optimum") {
  std::mt19937_64 rng(53);
  muse::Graph g = oracles::random_graph(10, 0.35, rng);
  std::vector<std::int64_t> all(10);
  for (std::int64_t i = 0; i < 10; ++i) all[static_cast<std::size_t>(i)] = i;
  auto s = muse::induced_subgraph(g, all, 10);
  Mat fX = oracles::gaussian(10, 2, rng);
  EnergyConfig c = cfg_none(0.5, 1.2, 1.0, 1);
  auto opt = muse::joint_optimum_oracle({s, s}, {fX, fX}, 10, c);
  CHECK((opt.Ys[0] - opt.Ys[1]).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((opt.Ys[0] - opt.M).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("alternation reaches the joint infimum on random instances") {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = muse::make_energy_instance(4 + static_cast<std::int64_t>(rng() % 47), 3, 0.15,
                                           0.6, 2, rng());
    EnergyConfig c = cfg_none(0.5, 0.5 + (trial % 3) * 0.75, 1.0, 1);
    auto opt = muse::joint_optimum_oracle(inst.subs, inst.fXs, inst.n, c);
    muse::AltMinSolver solver(inst.subs, inst.fXs, inst.n, c);
    std::vector<Mat> Ys;
    for (const auto& s : inst.subs) Ys.push_back(oracles::gaussian(s.num_nodes(), 2, rng));
    Mat M = oracles::gaussian(inst.n, 2, rng);
    double e = solver.energy(Ys, M);
    int iters = 0;
    while (iters < 500 && (e - opt.energy) > 1e-6 * std::abs(opt.energy)) {
      e = solver.step(Ys, M);
      ++iters;
    }
    CHECK((e - opt.energy) <= 1e-6 * std::abs(opt.energy));
    CHECK(iters < 500);
  }
}

TEST_CASE("guards reject oversized oracle problems and the indicator penalty") {
  auto inst = muse::make_energy_instance(10, 1, 0.3, 1.0, 2, 61);
  EnergyConfig c = cfg_none(1.0, 1.0, 1.0, 1);
  c.penalty = Penalty::nonneg_indicator;
  CHECK_THROWS_AS(muse::joint_optimum_oracle(inst.subs, inst.fXs, inst.n, c), muse::Error);
  CHECK_THROWS_AS(muse::alt_min_step({Mat::Zero(inst.subs[0].num_nodes(), 2)}, Mat::Zero(10, 2),
                                     inst.subs, inst.fXs, c),
                  muse::Error);

  EnergyConfig ok = cfg_none(1.0, 1.0, 1.0, 1);
  std::vector<Mat> huge_fx{Mat::Zero(inst.subs[0].num_nodes(), 100000)};
  CHECK_THROWS_AS(muse::joint_optimum_oracle(inst.subs, huge_fx, inst.n, ok), muse::Error);
}
