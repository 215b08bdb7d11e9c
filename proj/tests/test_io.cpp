#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "muse/config.hpp"
#include "muse/io.hpp"
#include "oracles.hpp"

using muse::Mat;
using muse::Split;

namespace {

std::filesystem::path tmp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "muse_io_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

void write_text(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::trunc);
  out << body;
}

}  // namespace

TEST_CASE("graph store round-trips and its digest is deterministic") {
  std::mt19937_64 rng(1);
  auto edges = oracles::random_edges(30, 0.15, rng);
  std::vector<std::int32_t> labels(30);
  for (auto& l : labels) l = static_cast<std::int32_t>(rng() % 4);
  std::vector<Split> splits(30, Split::train);
  splits[3] = Split::val;
  splits[7] = Split::test;
  splits[9] = Split::none;
  muse::Graph g = muse::build_graph(edges, 30, oracles::gaussian(30, 5, rng), labels, splits);

  auto path = tmp_dir() / "roundtrip.store";
  muse::save_graph(g, path);
  muse::Graph back = muse::load_graph(path);
  CHECK(back.num_nodes() == g.num_nodes());
  CHECK(back.csr_offsets() == g.csr_offsets());
  CHECK(back.csr_targets() == g.csr_targets());
  CHECK(back.labels() == g.labels());
  CHECK(back.splits() == g.splits());
  CHECK((back.features() - g.features()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(muse::graph_digest(back) == muse::graph_digest(g));

  // Corruption is detected.
  auto bytes = muse::BinReader::from_file(path).rest();
  bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
  auto bad = tmp_dir() / "corrupt.store";
  muse::BinWriter w;
  w.bytes(bytes.data(), bytes.size());
  w.write_file(bad);
  CHECK_THROWS_AS(muse::load_graph(bad), muse::Error);
}

TEST_CASE("edge files parse with comments and report offending lines") {
  auto p = tmp_dir() / "edges.tsv";
  write_text(p, "# comment\n0\t1\n2\t0 # trailing comment\n\n1\t2\n");
  auto edges = muse::parse_edge_file(p, 3);
  CHECK(edges.size() == 3);

  write_text(p, "0\t1\nbroken line\n");
  try {
    muse::parse_edge_file(p, 3);
    FAIL("expected rejection");
  } catch (const muse::Error& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  write_text(p, "0\t1\n0\t9\n");
  try {
    muse::parse_edge_file(p, 3);
    FAIL("expected rejection");
  } catch (const muse::Error& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    CHECK(std::string(e.what()).find("out of range") != std::string::npos);
  }
}

TEST_CASE("label and mask files validate counts and tokens") {
  auto lp = tmp_dir() / "labels.txt";
  write_text(lp, "0\n2\n1\n");
  CHECK(muse::parse_label_file(lp, 3) == std::vector<std::int32_t>{0, 2, 1});
  CHECK_THROWS_AS(muse::parse_label_file(lp, 4), muse::Error);
  write_text(lp, "0\noops\n");
  CHECK_THROWS_AS(muse::parse_label_file(lp, 2), muse::Error);

  auto mp = tmp_dir() / "masks.txt";
  write_text(mp, "train\nval\ntest\nnone\n");
  auto masks = muse::parse_mask_file(mp, 4);
  CHECK(masks == std::vector<Split>{Split::train, Split::val, Split::test, Split::none});
  write_text(mp, "train\nvalidation\n");
  try {
    muse::parse_mask_file(mp, 2);
    FAIL("expected rejection");
  } catch (const muse::Error& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("feature files round-trip through the f32 representation") {
  std::mt19937_64 rng(3);
  Mat x = oracles::gaussian(12, 6, rng);
  // Quantize to f32 first so the round trip is exact.
  for (std::int64_t i = 0; i < x.rows(); ++i)
    for (std::int64_t j = 0; j < x.cols(); ++j) x(i, j) = static_cast<float>(x(i, j));
  auto p = tmp_dir() / "features.bin";
  muse::write_feature_file(p, x);
  Mat back = muse::read_feature_file(p);
  CHECK((back - x).cwiseAbs().maxCoeff() == 0.0);

  // Truncated payloads are rejected.
  auto bytes = muse::BinReader::from_file(p).rest();
  muse::BinWriter w;
  w.bytes(bytes.data(), bytes.size() - 4);
  auto bad = tmp_dir() / "features_trunc.bin";
  w.write_file(bad);
  CHECK_THROWS_AS(muse::read_feature_file(bad), muse::Error);
}

TEST_CASE("run configs parse, validate and enumerate every problem at once") {
  std::string good =
      "graph = g.store\n"
      "train_bundle = t.bundle\n"
      "checkpoint = out.ckpt\n"
      "metrics = out.csv\n"
      "epochs = 5\n"
      "lambda = 3.5\n"
      "alpha = auto\n"
      "penalty = none\n";
  auto cfg = muse::parse_run_config(good);
  CHECK(cfg.train.epochs == 5);
  CHECK(cfg.train.energy.lambda == 3.5);
  CHECK(cfg.train.alpha_auto);
  CHECK(cfg.train.energy.penalty == muse::Penalty::none);
  CHECK(cfg.train.checkpoint_path == std::filesystem::path("out.ckpt"));

  std::string bad =
      "graph = g.store\n"
      "rho = 1.5\n"
      "optimizer = sgdd\n"
      "mystery_key = 1\n"
      "epochs = -2\n";
  try {
    muse::parse_run_config(bad);
    FAIL("expected rejection");
  } catch (const muse::Error& e) {
    std::string msg = e.what();
    CHECK(msg.find("rho") != std::string::npos);
    CHECK(msg.find("optimizer") != std::string::npos);
    CHECK(msg.find("mystery_key") != std::string::npos);
    CHECK(msg.find("epochs") != std::string::npos);
    CHECK(msg.find("train_bundle") != std::string::npos);  // missing required
  }
}

TEST_CASE("the effective config echo re-parses to an equal config") {
  std::string text =
      "graph = a\n"
      "train_bundle = b\n"
      "val_bundle = v\n"
      "checkpoint = c\n"
      "metrics = m\n"
      "epochs = 7\n"
      "gamma = 0.25\n"
      "alpha = 0.125\n"
      "optimizer = sgd\n"
      "eta0 = 0.75\n"
      "seed = 12345\n"
      "model = mlp\n";
  auto cfg = muse::parse_run_config(text);
  auto rendered = muse::render_run_config(cfg);
  auto reparsed = muse::parse_run_config(rendered);
  CHECK(muse::render_run_config(reparsed) == rendered);
  CHECK(reparsed.train.energy.alpha == 0.125);
  CHECK(!reparsed.train.alpha_auto);
  CHECK(reparsed.train.model == muse::ModelKind::mlp);
  CHECK(reparsed.train.optimizer == muse::OptimizerKind::sgd);
}
