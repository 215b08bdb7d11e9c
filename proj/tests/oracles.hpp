// Test-only oracles, independent of the library's computation paths:
// dense Laplacian algebra, brute-force adjacency scans, finite differences
// and a separately written reference MLP.
#pragma once

#include <random>
#include <set>
#include <vector>

#include "muse/graph.hpp"
#include "muse/model.hpp"
#include "muse/types.hpp"

namespace oracles {

// Dense D - A straight from the stored adjacency.
inline muse::Mat dense_laplacian(const muse::CsrView& g) {
  muse::Mat L = muse::Mat::Zero(g.n, g.n);
  for (std::int64_t i = 0; i < g.n; ++i) {
    L(i, i) = static_cast<double>(g.degree(i));
    for (std::int64_t j : g.neighbors(i)) L(i, j) -= 1.0;
  }
  return L;
}

// tr(Y^T L Y) through the dense matrix product, the other algebraic route.
inline double dense_trace_quadratic(const muse::CsrView& g, const muse::Mat& Y) {
  muse::Mat L = dense_laplacian(g);
  return (Y.transpose() * L * Y).trace();
}

inline muse::Mat gaussian(std::int64_t rows, std::int64_t cols, std::mt19937_64& rng,
                          double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  muse::Mat m(rows, cols);
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

inline std::vector<std::pair<std::int64_t, std::int64_t>> random_edges(std::int64_t n,
                                                                       double p,
                                                                       std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = i + 1; j < n; ++j)
      if (u(rng) < p) edges.emplace_back(i, j);
  return edges;
}

inline muse::Graph random_graph(std::int64_t n, double p, std::mt19937_64& rng,
                                std::int64_t d_feat = 1) {
  return muse::build_graph(random_edges(n, p, rng), n, gaussian(n, d_feat, rng), {}, {});
}

// Central finite difference of a scalar function over every parameter
// entry, written into a parameter-shaped bundle.
template <typename LossFn>
muse::GradientBundle finite_difference(const muse::ModelParams& params, LossFn&& loss,
                                       double h = 1e-5) {
  muse::ModelParams work = params;
  muse::GradientBundle fd = muse::GradientBundle::zeros_like(params);
  std::vector<muse::Mat*> grad_blocks;
  muse::for_each_param(fd.f, fd.g, "f", "g",
                       [&](const std::string&, muse::Mat& m) { grad_blocks.push_back(&m); });
  std::size_t which = 0;
  muse::for_each_param(work, [&](const std::string&, muse::Mat& block) {
    muse::Mat& out = *grad_blocks[which++];
    for (std::int64_t i = 0; i < block.rows(); ++i)
      for (std::int64_t j = 0; j < block.cols(); ++j) {
        const double saved = block(i, j);
        block(i, j) = saved + h;
        const double up = loss(work);
        block(i, j) = saved - h;
        const double down = loss(work);
        block(i, j) = saved;
        out(i, j) = (up - down) / (2.0 * h);
      }
  });
  return fd;
}

// Reference 3-layer MLP with the same wiring (ReLU after the first two
// layers, residual skips where widths match, no dropout), written
// independently with scalar loops.
inline muse::Mat ref_mlp_forward(const muse::MlpParams& p, const muse::Mat& X) {
  auto affine = [](const muse::Mat& in, const muse::AffineLayer& l) {
    muse::Mat z(in.rows(), l.W.cols());
    for (std::int64_t i = 0; i < in.rows(); ++i)
      for (std::int64_t j = 0; j < l.W.cols(); ++j) {
        double acc = l.b(0, j);
        for (std::int64_t k = 0; k < in.cols(); ++k) acc += in(i, k) * l.W(k, j);
        z(i, j) = acc;
      }
    return z;
  };
  muse::Mat h = X;
  for (int l = 0; l < 2; ++l) {
    muse::Mat z = affine(h, p.layers[static_cast<std::size_t>(l)]);
    muse::Mat a = z.cwiseMax(0.0);
    h = (h.cols() == a.cols()) ? muse::Mat(h + a) : a;
  }
  return affine(h, p.layers[2]);
}

}  // namespace oracles
