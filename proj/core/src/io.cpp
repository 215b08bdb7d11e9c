#include "muse/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace muse {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; byte-swapping writes are not implemented");

void BinWriter::u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }

void BinWriter::u64(std::uint64_t v) { bytes(&v, sizeof v); }
void BinWriter::i64(std::int64_t v) { bytes(&v, sizeof v); }
void BinWriter::i32(std::int32_t v) { bytes(&v, sizeof v); }
void BinWriter::f64(double v) { bytes(&v, sizeof v); }
void BinWriter::f32(float v) { bytes(&v, sizeof v); }

void BinWriter::bytes(const void* p, std::size_t len) {
  buf_.append(static_cast<const char*>(p), len);
}

void BinWriter::str(const std::string& s) {
  u64(s.size());
  bytes(s.data(), s.size());
}

void BinWriter::write_file(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot open for writing: " + path.string());
  out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
  require(out.good(), "write failed: " + path.string());
}

BinReader BinReader::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return BinReader(std::move(ss).str());
}

void BinReader::need(std::size_t n) {
  require(pos_ + n <= buf_.size(), "truncated file: wanted " + std::to_string(n) +
                                       " bytes at offset " + std::to_string(pos_));
}

std::uint8_t BinReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(buf_[pos_++]);
}

#define MUSE_READ_POD(name, T)              \
  T BinReader::name() {                     \
    need(sizeof(T));                        \
    T v;                                    \
    std::memcpy(&v, buf_.data() + pos_, sizeof(T)); \
    pos_ += sizeof(T);                      \
    return v;                               \
  }

MUSE_READ_POD(u64, std::uint64_t)
MUSE_READ_POD(i64, std::int64_t)
MUSE_READ_POD(i32, std::int32_t)
MUSE_READ_POD(f64, double)
MUSE_READ_POD(f32, float)
#undef MUSE_READ_POD

void BinReader::bytes(void* p, std::size_t len) {
  need(len);
  std::memcpy(p, buf_.data() + pos_, len);
  pos_ += len;
}

std::string BinReader::str() {
  std::uint64_t len = u64();
  need(len);
  std::string s = buf_.substr(pos_, len);
  pos_ += len;
  return s;
}

std::string BinReader::rest() {
  std::string s = buf_.substr(pos_);
  pos_ = buf_.size();
  return s;
}

// --- text dataset files ------------------------------------------------

namespace {

std::ifstream open_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open: " + path.string());
  return in;
}

[[noreturn]] void line_error(const std::filesystem::path& path, std::size_t line,
                             const std::string& msg) {
  throw Error(path.string() + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

std::vector<std::pair<std::int64_t, std::int64_t>> parse_edge_file(
    const std::filesystem::path& path, std::int64_t n) {
  auto in = open_text(path);
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv(line);
    if (auto h = sv.find('#'); h != std::string_view::npos) sv = sv.substr(0, h);
    while (!sv.empty() && (sv.back() == ' ' || sv.back() == '\t' || sv.back() == '\r'))
      sv.remove_suffix(1);
    if (sv.empty()) continue;
    std::istringstream ss{std::string(sv)};
    std::int64_t u, v;
    if (!(ss >> u >> v)) line_error(path, lineno, "expected 'src<TAB>dst'");
    std::string extra;
    if (ss >> extra) line_error(path, lineno, "trailing content '" + extra + "'");
    if (u < 0 || u >= n || v < 0 || v >= n)
      line_error(path, lineno, "node id out of range [0," + std::to_string(n) + ")");
    edges.emplace_back(u, v);
  }
  return edges;
}

std::vector<std::int32_t> parse_label_file(const std::filesystem::path& path, std::int64_t n) {
  auto in = open_text(path);
  std::vector<std::int32_t> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::int64_t v;
    if (!(ss >> v) || v < 0 || v > INT32_MAX) line_error(path, lineno, "expected a label in [0, 2^31)");
    labels.push_back(static_cast<std::int32_t>(v));
  }
  require(static_cast<std::int64_t>(labels.size()) == n,
          path.string() + ": expected " + std::to_string(n) + " labels, got " +
              std::to_string(labels.size()));
  return labels;
}

std::vector<Split> parse_mask_file(const std::filesystem::path& path, std::int64_t n) {
  auto in = open_text(path);
  std::vector<Split> splits;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == "train")
      splits.push_back(Split::train);
    else if (line == "val")
      splits.push_back(Split::val);
    else if (line == "test")
      splits.push_back(Split::test);
    else if (line == "none")
      splits.push_back(Split::none);
    else
      line_error(path, lineno, "expected one of train|val|test|none, got '" + line + "'");
  }
  require(static_cast<std::int64_t>(splits.size()) == n,
          path.string() + ": expected " + std::to_string(n) + " mask lines, got " +
              std::to_string(splits.size()));
  return splits;
}

Mat read_feature_file(const std::filesystem::path& path) {
  auto r = BinReader::from_file(path);
  std::uint64_t n = r.u64();
  std::uint64_t d = r.u64();
  require(n < (1ULL << 32) && d < (1ULL << 20), path.string() + ": implausible feature header");
  Mat m(static_cast<std::int64_t>(n), static_cast<std::int64_t>(d));
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < d; ++j)
      m(static_cast<std::int64_t>(i), static_cast<std::int64_t>(j)) = r.f32();
  require(r.exhausted(), path.string() + ": trailing bytes after feature payload");
  return m;
}

void write_edge_file(const std::filesystem::path& path,
                     const std::vector<std::pair<std::int64_t, std::int64_t>>& edges) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), "cannot open for writing: " + path.string());
  for (auto [u, v] : edges) out << u << '\t' << v << '\n';
  require(out.good(), "write failed: " + path.string());
}

void write_feature_file(const std::filesystem::path& path, const Mat& features) {
  BinWriter w;
  w.u64(static_cast<std::uint64_t>(features.rows()));
  w.u64(static_cast<std::uint64_t>(features.cols()));
  for (std::int64_t i = 0; i < features.rows(); ++i)
    for (std::int64_t j = 0; j < features.cols(); ++j) w.f32(static_cast<float>(features(i, j)));
  w.write_file(path);
}

void write_label_file(const std::filesystem::path& path, const std::vector<std::int32_t>& labels) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), "cannot open for writing: " + path.string());
  for (auto l : labels) out << l << '\n';
  require(out.good(), "write failed: " + path.string());
}

void write_mask_file(const std::filesystem::path& path, const std::vector<Split>& splits) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), "cannot open for writing: " + path.string());
  for (auto s : splits) {
    switch (s) {
      case Split::train: out << "train\n"; break;
      case Split::val: out << "val\n"; break;
      case Split::test: out << "test\n"; break;
      case Split::none: out << "none\n"; break;
    }
  }
  require(out.good(), "write failed: " + path.string());
}

// --- graph store ---------------------------------------------------------

namespace {

constexpr char kGraphMagic[] = "MUSG1";

std::string graph_payload(const Graph& g) {
  BinWriter w;
  w.u64(static_cast<std::uint64_t>(g.num_nodes()));
  w.u64(static_cast<std::uint64_t>(g.feature_dim()));
  w.u64(static_cast<std::uint64_t>(g.num_classes()));
  w.u64(g.csr_targets().size());
  for (auto o : g.csr_offsets()) w.i64(o);
  for (auto t : g.csr_targets()) w.i64(t);
  const Mat& f = g.features();
  for (std::int64_t i = 0; i < f.rows(); ++i)
    for (std::int64_t j = 0; j < f.cols(); ++j) w.f64(f(i, j));
  for (auto l : g.labels()) w.i32(l);
  for (auto s : g.splits()) w.u8(static_cast<std::uint8_t>(s));
  return w.buffer();
}

}  // namespace

Digest graph_digest(const Graph& g) {
  std::string payload = graph_payload(g);
  return sha256(payload.data(), payload.size());
}

void save_graph(const Graph& g, const std::filesystem::path& path) {
  std::string payload = graph_payload(g);
  Digest d = sha256(payload.data(), payload.size());
  BinWriter w;
  w.bytes(kGraphMagic, 5);
  w.bytes(d.data(), d.size());
  w.bytes(payload.data(), payload.size());
  w.write_file(path);
}

Graph load_graph(const std::filesystem::path& path) {
  auto r = BinReader::from_file(path);
  char magic[5];
  r.bytes(magic, 5);
  require(std::memcmp(magic, kGraphMagic, 5) == 0, path.string() + ": not a graph store file");
  Digest stored;
  r.bytes(stored.data(), stored.size());
  std::string payload = r.rest();
  Digest actual = sha256(payload.data(), payload.size());
  require(stored == actual, path.string() + ": digest mismatch (corrupt or truncated store)");

  BinReader p(std::move(payload));
  std::int64_t n = static_cast<std::int64_t>(p.u64());
  std::int64_t d_in = static_cast<std::int64_t>(p.u64());
  p.u64();  // class count, re-derived from labels
  std::uint64_t nnz = p.u64();
  std::vector<std::int64_t> offsets(static_cast<std::size_t>(n) + 1);
  for (auto& o : offsets) o = p.i64();
  std::vector<std::int64_t> targets(nnz);
  for (auto& t : targets) t = p.i64();
  Mat features(n, d_in);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d_in; ++j) features(i, j) = p.f64();
  std::vector<std::int32_t> labels(static_cast<std::size_t>(n));
  for (auto& l : labels) l = p.i32();
  std::vector<Split> splits(static_cast<std::size_t>(n));
  for (auto& s : splits) s = static_cast<Split>(p.u8());
  require(p.exhausted(), path.string() + ": trailing bytes in graph store");

  // Rebuild through the validating constructor; CSR comes back identical
  // because the stored form is already canonical.
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  edges.reserve(nnz);
  for (std::int64_t u = 0; u < n; ++u)
    for (std::int64_t k = offsets[static_cast<std::size_t>(u)];
         k < offsets[static_cast<std::size_t>(u) + 1]; ++k)
      edges.emplace_back(u, targets[static_cast<std::size_t>(k)]);
  return build_graph(edges, n, std::move(features), std::move(labels), std::move(splits));
}

}  // namespace muse
