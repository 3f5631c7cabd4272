#pragma once

// Binary model file, all integers and floats little-endian:
//
//   offset  type        field
//   0       char[4]     magic "IDNE"
//   4       u32         format version (1)
//   8       u64         H   (layer-1 hidden size)
//   16      u64         K   (vocabulary size)
//   24      u32         n   (hidden layer count, >= 1)
//   28      u8          softmax mode (0 full, 1 tree)
//   29      u8          bidirectional (0/1)
//   30      u8          activation (0 sigmoid, 1 tanh)
//   31      u8          embedding prior present (0/1)
//   32      u64         tree seed
//   40      f64         lambda (0 when no prior)
//   48      u64[n-1]    sizes H_2..H_n of the deep layers
//   ...     f64 tensors, matrices in column-major order:
//           W (H x K), U (R x H_n), b_fwd (R), [b_bwd (R)], c_fwd (H), [c_bwd (H)],
//           for d = 2..n: W_d (H_d x H_{d-1}), c_fwd_d (H_d), [c_bwd_d (H_d)],
//           [E (H x K)]
//
// R = K for full softmax and K-1 for tree softmax. Bracketed tensors are
// present only for bidirectional models / models with a prior. The tree is
// rebuilt from (K, seed).

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "idne/error.hpp"
#include "idne/model.hpp"

namespace idne {

inline constexpr std::array<char, 4> kModelMagic{'I', 'D', 'N', 'E'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }

  template <typename Derived>
  void tensor(const Eigen::DenseBase<Derived>& t) {
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      for (Eigen::Index i = 0; i < t.rows(); ++i) f64(t(i, j));
  }

  const std::vector<char>& bytes() const { return bytes_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }

  Eigen::MatrixXd matrix(std::uint64_t rows, std::uint64_t cols) {
    if (rows != 0 && cols > (remaining() / 8) / rows) throw DataError("model file truncated");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = f64();
    return m;
  }

  Eigen::VectorXd vector(std::uint64_t n) {
    if (n > remaining() / 8) throw DataError("model file truncated");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f64();
    return v;
  }

  const char* take(std::size_t n) {
    if (n > remaining()) throw DataError("model file truncated");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::uint64_t get(int n) {
    const char* p = take(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<char> serialize_model(const Model& model) {
  validate_model(model);
  const auto& p = model.params;
  detail::ByteWriter w;
  w.raw(kModelMagic.data(), kModelMagic.size());
  w.u32(kModelFormatVersion);
  w.u64(p.hidden);
  w.u64(p.vocab_size);
  w.u32(static_cast<std::uint32_t>(model.deep.layer_count()));
  w.u8(static_cast<std::uint8_t>(p.softmax));
  w.u8(p.bidirectional ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(p.activation));
  w.u8(p.prior ? 1 : 0);
  w.u64(p.tree_seed);
  w.f64(p.prior ? p.prior->lambda : 0.0);
  for (const auto& layer : model.deep.layers) w.u64(static_cast<std::uint64_t>(layer.W.rows()));

  w.tensor(p.W);
  w.tensor(p.U);
  w.tensor(p.b_fwd);
  if (p.bidirectional) w.tensor(p.b_bwd);
  w.tensor(p.c_fwd);
  if (p.bidirectional) w.tensor(p.c_bwd);
  for (const auto& layer : model.deep.layers) {
    w.tensor(layer.W);
    w.tensor(layer.c_fwd);
    if (p.bidirectional) w.tensor(layer.c_bwd);
  }
  if (p.prior) w.tensor(p.prior->E);
  return w.bytes();
}

inline Model deserialize_model(std::vector<char> bytes) {
  detail::ByteReader r(std::move(bytes));
  const char* magic = r.take(4);
  if (std::memcmp(magic, kModelMagic.data(), 4) != 0) throw DataError("not a model file (bad magic)");
  const auto version = r.u32();
  if (version != kModelFormatVersion) throw DataError("unsupported model format version " + std::to_string(version));

  Architecture arch;
  arch.hidden = r.u64();
  arch.vocab_size = r.u64();
  const auto layers = r.u32();
  const auto softmax = r.u8();
  const auto bidir = r.u8();
  const auto activation = r.u8();
  const auto has_prior = r.u8();
  if (layers < 1 || softmax > 1 || bidir > 1 || activation > 1 || has_prior > 1)
    throw DataError("corrupt model header");
  arch.softmax = static_cast<SoftmaxMode>(softmax);
  arch.bidirectional = bidir == 1;
  arch.activation = static_cast<Activation>(activation);
  arch.tree_seed = r.u64();
  const double lambda = r.f64();
  for (std::uint32_t d = 1; d < layers; ++d) arch.deep_hidden.push_back(r.u64());
  if (arch.vocab_size < 2 || arch.hidden == 0 || arch.vocab_size > r.remaining() || arch.hidden > r.remaining())
    throw DataError("corrupt model header");
  for (auto size : arch.deep_hidden)
    if (size == 0 || size > r.remaining()) throw DataError("corrupt model header");

  Model m = zero_model(arch);
  auto& p = m.params;
  const auto R = p.output_rows();
  p.W = r.matrix(arch.hidden, arch.vocab_size);
  p.U = r.matrix(R, m.last_hidden());
  p.b_fwd = r.vector(R);
  if (p.bidirectional) p.b_bwd = r.vector(R);
  p.c_fwd = r.vector(arch.hidden);
  if (p.bidirectional) p.c_bwd = r.vector(arch.hidden);
  std::uint64_t prev = arch.hidden;
  for (auto& layer : m.deep.layers) {
    const auto rows = static_cast<std::uint64_t>(layer.W.rows());
    layer.W = r.matrix(rows, prev);
    layer.c_fwd = r.vector(rows);
    if (p.bidirectional) layer.c_bwd = r.vector(rows);
    prev = rows;
  }
  if (has_prior) {
    EmbeddingPrior prior;
    prior.lambda = lambda;
    prior.E = r.matrix(arch.hidden, arch.vocab_size);
    Eigen::Index covered = 0;
    for (Eigen::Index j = 0; j < prior.E.cols(); ++j) covered += (prior.E.col(j).array() != 0.0).any() ? 1 : 0;
    prior.coverage = static_cast<double>(covered) / static_cast<double>(prior.E.cols());
    p.prior = std::move(prior);
  }
  if (r.remaining() != 0) throw DataError("trailing bytes after model tensors");
  validate_model(m);
  return m;
}

inline void save_model(const Model& model, const std::string& path) {
  auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path + "'");
}

inline std::vector<char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Model load_model(const std::string& path) { return deserialize_model(read_file_bytes(path)); }

}  // namespace idne
