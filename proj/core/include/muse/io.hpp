#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "muse/digest.hpp"
#include "muse/graph.hpp"
#include "muse/types.hpp"

namespace muse {

// Little-endian append-only buffer used by every binary file format, so
// serialized bytes are identical across platforms.
class BinWriter {
 public:
  void u8(std::uint8_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v);
  void i32(std::int32_t v);
  void f64(double v);
  void f32(float v);
  void bytes(const void* p, std::size_t len);
  void str(const std::string& s);  // u64 length prefix + bytes

  const std::string& buffer() const { return buf_; }
  void write_file(const std::filesystem::path& path) const;

 private:
  std::string buf_;
};

class BinReader {
 public:
  explicit BinReader(std::string data) : buf_(std::move(data)) {}
  static BinReader from_file(const std::filesystem::path& path);

  std::uint8_t u8();
  std::uint64_t u64();
  std::int64_t i64();
  std::int32_t i32();
  double f64();
  float f32();
  void bytes(void* p, std::size_t len);
  std::string str();
  std::string rest();

  bool exhausted() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n);
  std::string buf_;
  std::size_t pos_ = 0;
};

// --- text dataset files ------------------------------------------------
// Edge list: one "src<TAB>dst" per line, '#' comments. Ids validated
// against n; errors carry the offending line number.
std::vector<std::pair<std::int64_t, std::int64_t>> parse_edge_file(
    const std::filesystem::path& path, std::int64_t n);

// One integer label per line, exactly n lines.
std::vector<std::int32_t> parse_label_file(const std::filesystem::path& path, std::int64_t n);

// One of train|val|test|none per line, exactly n lines.
std::vector<Split> parse_mask_file(const std::filesystem::path& path, std::int64_t n);

// Binary feature file: header (u64 n, u64 d_in), then n*d_in f32 row-major.
// Values widen to f64 on load.
Mat read_feature_file(const std::filesystem::path& path);

void write_edge_file(const std::filesystem::path& path,
                     const std::vector<std::pair<std::int64_t, std::int64_t>>& edges);
void write_feature_file(const std::filesystem::path& path, const Mat& features);
void write_label_file(const std::filesystem::path& path, const std::vector<std::int32_t>& labels);
void write_mask_file(const std::filesystem::path& path, const std::vector<Split>& splits);

// --- graph store ---------------------------------------------------------
// Binary store: magic "MUSG1", payload digest (32 bytes), payload. The
// digest doubles as the graph identity that sample bundles and checkpoints
// are validated against.
Digest graph_digest(const Graph& g);
void save_graph(const Graph& g, const std::filesystem::path& path);
Graph load_graph(const std::filesystem::path& path);

}  // namespace muse
