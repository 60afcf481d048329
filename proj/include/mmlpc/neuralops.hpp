#pragma once

// Inference kernels for the sample-rate network: dense and 16x1 block-sparse
// GEMV, GRU cell, dual fully-connected output layer, embedding lookups and
// categorical sampling. All arithmetic is float32.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "mmlpc/error.hpp"
#include "mmlpc/mulaw.hpp"
#include "mmlpc/rng.hpp"

namespace mmlpc {

// Column-major dense matrix. Column storage lets y = M x run as a sequence of
// axpy updates, which vectorize without reassociating sums.
template <typename T>
class BasicDenseMatrix {
 public:
  BasicDenseMatrix() = default;
  BasicDenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, T{}) {}

  static BasicDenseMatrix from_row_major(std::size_t rows, std::size_t cols, std::span<const T> values) {
    if (values.size() != rows * cols) throw ParameterError("dense matrix: value count does not match shape");
    BasicDenseMatrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) m.at(r, c) = values[r * cols + c];
    }
    return m;
  }

  static BasicDenseMatrix identity(std::size_t n) {
    BasicDenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = T{1};
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  T& at(std::size_t r, std::size_t c) { return data_[c * rows_ + r]; }
  const T& at(std::size_t r, std::size_t c) const { return data_[c * rows_ + r]; }
  std::span<const T> column(std::size_t c) const { return {data_.data() + c * rows_, rows_}; }
  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  std::vector<T> to_row_major() const {
    std::vector<T> out(rows_ * cols_);
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t c = 0; c < cols_; ++c) out[r * cols_ + c] = at(r, c);
    }
    return out;
  }

  friend bool operator==(const BasicDenseMatrix&, const BasicDenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using DenseMatrix = BasicDenseMatrix<float>;

// y = M x, accumulated column by column.
inline void gemv_dense(const DenseMatrix& m, std::span<const float> x, std::span<float> y) {
  if (x.size() != m.cols() || y.size() != m.rows()) {
    throw ParameterError("gemv_dense: shape mismatch (" + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + " by " + std::to_string(x.size()) + ")");
  }
  std::fill(y.begin(), y.end(), 0.0f);
  const std::size_t rows = m.rows();
  float* out = y.data();
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const float xc = x[c];
    const float* col = m.column(c).data();
    for (std::size_t r = 0; r < rows; ++r) out[r] += col[r] * xc;
  }
}

inline std::vector<float> gemv_dense(const DenseMatrix& m, std::span<const float> x) {
  std::vector<float> y(m.rows());
  gemv_dense(m, x, y);
  return y;
}

// Sparse matrix stored as 16x1 blocks: 16 consecutive rows of one column.
class BlockSparseMatrix {
 public:
  static constexpr std::size_t kBlockRows = 16;

  struct Block {
    std::uint32_t row_block = 0;
    std::uint32_t col = 0;
    std::array<float, kBlockRows> values{};
  };

  BlockSparseMatrix() = default;
  BlockSparseMatrix(std::size_t rows, std::size_t cols, std::vector<Block> blocks)
      : rows_(rows), cols_(cols) {
    if (rows == 0 || cols == 0 || rows % kBlockRows != 0) {
      throw ParameterError("block-sparse matrix: rows must be a positive multiple of 16");
    }
    std::sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b) {
      return std::tie(a.col, a.row_block) < std::tie(b.col, b.row_block);
    });
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& b = blocks[i];
      if (b.row_block >= rows / kBlockRows || b.col >= cols) {
        throw ParameterError("block-sparse matrix: block (" + std::to_string(b.row_block) + ", " +
                             std::to_string(b.col) + ") out of range");
      }
      if (i > 0 && blocks[i - 1].row_block == b.row_block && blocks[i - 1].col == b.col) {
        throw ParameterError("block-sparse matrix: duplicate block (" + std::to_string(b.row_block) + ", " +
                             std::to_string(b.col) + ")");
      }
    }
    row_block_.reserve(blocks.size());
    col_.reserve(blocks.size());
    values_.reserve(blocks.size() * kBlockRows);
    for (const auto& b : blocks) {
      row_block_.push_back(b.row_block);
      col_.push_back(b.col);
      values_.insert(values_.end(), b.values.begin(), b.values.end());
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t block_count() const { return col_.size(); }
  double density() const {
    return static_cast<double>(block_count() * kBlockRows) / static_cast<double>(rows_ * cols_);
  }

  Block block(std::size_t i) const {
    Block b;
    b.row_block = row_block_[i];
    b.col = col_[i];
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(i * kBlockRows), kBlockRows, b.values.begin());
    return b;
  }

  std::vector<Block> blocks() const {
    std::vector<Block> out;
    out.reserve(block_count());
    for (std::size_t i = 0; i < block_count(); ++i) out.push_back(block(i));
    return out;
  }

  DenseMatrix densify() const {
    DenseMatrix m(rows_, cols_);
    for (std::size_t i = 0; i < block_count(); ++i) {
      for (std::size_t r = 0; r < kBlockRows; ++r) {
        m.at(row_block_[i] * kBlockRows + r, col_[i]) = values_[i * kBlockRows + r];
      }
    }
    return m;
  }

  std::span<const std::uint32_t> block_rows() const { return row_block_; }
  std::span<const std::uint32_t> block_cols() const { return col_; }
  std::span<const float> block_values() const { return values_; }

  friend bool operator==(const BlockSparseMatrix&, const BlockSparseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint32_t> row_block_;
  std::vector<std::uint32_t> col_;
  std::vector<float> values_;
};

inline void gemv_block_sparse(const BlockSparseMatrix& m, std::span<const float> x, std::span<float> y) {
  if (x.size() != m.cols() || y.size() != m.rows()) {
    throw ParameterError("gemv_block_sparse: shape mismatch (" + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + " by " + std::to_string(x.size()) + ")");
  }
  std::fill(y.begin(), y.end(), 0.0f);
  constexpr std::size_t kB = BlockSparseMatrix::kBlockRows;
  const float* vals = m.block_values().data();
  const std::uint32_t* rows = m.block_rows().data();
  const std::uint32_t* cols = m.block_cols().data();
  float* out = y.data();
  for (std::size_t i = 0; i < m.block_count(); ++i) {
    const float xc = x[cols[i]];
    float* dst = out + rows[i] * kB;
    const float* v = vals + i * kB;
    for (std::size_t r = 0; r < kB; ++r) dst[r] += v[r] * xc;
  }
}

inline std::vector<float> gemv_block_sparse(const BlockSparseMatrix& m, std::span<const float> x) {
  std::vector<float> y(m.rows());
  gemv_block_sparse(m, x, y);
  return y;
}

// ---------------------------------------------------------------------------
// Activations. Plain arithmetic (no libm calls) so loops over them vectorize
// and give identical results on every IEEE-754 platform.

namespace detail {

// Cephes-style expf: range reduction by ln2 and a degree-5 minimax polynomial.
inline float exp_approx(float x) {
  x = std::min(std::max(x, -87.0f), 88.0f);
  const float t = x * 1.44269504088896341f;
  const int n = static_cast<int>(t + (t >= 0.0f ? 0.5f : -0.5f));
  const float fn = static_cast<float>(n);
  float r = x - fn * 0.693359375f;
  r = r + fn * 2.12194440e-4f;
  float p = 1.9875691500e-4f;
  p = p * r + 1.3981999507e-3f;
  p = p * r + 8.3334519073e-3f;
  p = p * r + 4.1665795894e-2f;
  p = p * r + 1.6666665459e-1f;
  p = p * r + 5.0000001201e-1f;
  const float y = p * r * r + r + 1.0f;
  return y * std::bit_cast<float>(static_cast<std::uint32_t>(n + 127) << 23);
}

inline float sigmoid(float x) { return 1.0f / (1.0f + exp_approx(-x)); }

inline float tanh_approx(float x) {
  const float ax = std::min(std::abs(x), 9.0f);
  const float e = exp_approx(2.0f * ax);
  const float t = (e - 1.0f) / (e + 1.0f);
  return x < 0.0f ? -t : t;
}

}  // namespace detail

// ---------------------------------------------------------------------------

using RecurrentWeights = std::variant<DenseMatrix, BlockSparseMatrix>;

inline std::size_t rows_of(const RecurrentWeights& w) {
  return std::visit([](const auto& m) { return m.rows(); }, w);
}
inline std::size_t cols_of(const RecurrentWeights& w) {
  return std::visit([](const auto& m) { return m.cols(); }, w);
}

inline void gemv(const RecurrentWeights& w, std::span<const float> x, std::span<float> y) {
  if (const auto* d = std::get_if<DenseMatrix>(&w)) {
    gemv_dense(*d, x, y);
  } else {
    gemv_block_sparse(std::get<BlockSparseMatrix>(w), x, y);
  }
}

// Gate layout everywhere is [update z | reset r | candidate h], each of width
// `size`. Input contributions arrive already multiplied (embedding tables,
// condition projections), so the cell only owns the recurrent product.
struct GruParams {
  RecurrentWeights recurrent;  // (3*size) x size
  std::vector<float> bias;     // 3*size

  std::size_t size() const { return cols_of(recurrent); }

  void validate() const {
    const std::size_t n = size();
    if (n == 0 || rows_of(recurrent) != 3 * n || bias.size() != 3 * n) {
      throw ParameterError("GRU: recurrent weights must be 3N x N with a 3N bias");
    }
  }
};

// scratch must hold 3*size floats. h_out may alias h_prev.
inline void gru_cell(std::span<const float> h_prev, std::span<const float> input_contrib, const GruParams& p,
                     std::span<float> h_out, std::span<float> scratch) {
  const std::size_t n = p.size();
  if (h_prev.size() != n || h_out.size() != n || input_contrib.size() != 3 * n || scratch.size() < 3 * n ||
      p.bias.size() != 3 * n) {
    throw ParameterError("gru_cell: shape mismatch");
  }
  auto rh = scratch.first(3 * n);
  gemv(p.recurrent, h_prev, rh);
  const float* in = input_contrib.data();
  const float* b = p.bias.data();
  float* r = rh.data();
  // z and r gates in place, then the candidate.
  for (std::size_t i = 0; i < 2 * n; ++i) r[i] = detail::sigmoid(in[i] + r[i] + b[i]);
  for (std::size_t i = 0; i < n; ++i) {
    const float z = r[i];
    const float cand = detail::tanh_approx(in[2 * n + i] + r[n + i] * r[2 * n + i] + b[2 * n + i]);
    h_out[i] = (1.0f - z) * h_prev[i] + z * cand;
  }
}

inline std::vector<float> gru_cell(std::span<const float> h_prev, std::span<const float> input_contrib,
                                   const GruParams& p) {
  std::vector<float> out(p.size()), scratch(3 * p.size());
  gru_cell(h_prev, input_contrib, p, out, scratch);
  return out;
}

// out = a1 * tanh(W1 x) + a2 * tanh(W2 x) + b
struct DualFcParams {
  DenseMatrix w1, w2;  // Q x in
  std::vector<float> a1, a2, b;

  std::size_t outputs() const { return w1.rows(); }
  std::size_t inputs() const { return w1.cols(); }

  void validate() const {
    const std::size_t q = w1.rows();
    if (q == 0 || w2.rows() != q || w2.cols() != w1.cols() || a1.size() != q || a2.size() != q ||
        b.size() != q) {
      throw ParameterError("dual FC: inconsistent parameter shapes");
    }
  }
};

// scratch must hold 2*Q floats.
inline void dual_fc(std::span<const float> x, const DualFcParams& p, std::span<float> logits,
                    std::span<float> scratch) {
  const std::size_t q = p.outputs();
  if (x.size() != p.inputs() || logits.size() != q || scratch.size() < 2 * q) {
    throw ParameterError("dual_fc: shape mismatch");
  }
  auto t1 = scratch.first(q);
  auto t2 = scratch.subspan(q, q);
  gemv_dense(p.w1, x, t1);
  gemv_dense(p.w2, x, t2);
  for (std::size_t i = 0; i < q; ++i) {
    logits[i] = p.a1[i] * detail::tanh_approx(t1[i]) + p.a2[i] * detail::tanh_approx(t2[i]) + p.b[i];
  }
}

inline std::vector<float> dual_fc(std::span<const float> x, const DualFcParams& p) {
  std::vector<float> logits(p.outputs()), scratch(2 * p.outputs());
  dual_fc(x, p, logits, scratch);
  return logits;
}

// 256 rows, one per mu-law index; each row is an input contribution already
// projected to the consumer's width.
struct EmbeddingTable {
  std::size_t width = 0;
  std::vector<float> data;  // row-major, 256 x width

  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t w) : width(w), data(kMuLawLevels * w, 0.0f) {}

  std::span<const float> row(std::size_t i) const { return {data.data() + i * width, width}; }
  std::span<float> row(std::size_t i) { return {data.data() + i * width, width}; }

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;
};

struct RoleIndex {
  std::size_t role = 0;
  MuLawIndex index = kMuLawZero;
};

// out += sum over lookups of tables[role].row(index).
inline void embed_lookup_sum_into(std::span<const RoleIndex> lookups, std::span<const EmbeddingTable> tables,
                                  std::span<float> out) {
  for (const auto& l : lookups) {
    if (l.role >= tables.size() || tables[l.role].data.empty()) {
      throw ParameterError("embed_lookup_sum: no table for role " + std::to_string(l.role));
    }
    const auto& t = tables[l.role];
    if (t.width != out.size()) throw ParameterError("embed_lookup_sum: table width mismatch");
    const float* row = t.row(l.index).data();
    float* dst = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) dst[i] += row[i];
  }
}

inline std::vector<float> embed_lookup_sum(std::span<const RoleIndex> lookups,
                                           std::span<const EmbeddingTable> tables, std::size_t width) {
  std::vector<float> out(width, 0.0f);
  embed_lookup_sum_into(lookups, tables, out);
  return out;
}

// Below this temperature sampling is replaced by an exact argmax.
inline constexpr float kArgmaxTemperature = 1e-6f;

// Exact argmax. Ties go to the index nearest the centre (the mu-law zero for
// a 256-way alphabet), then to the lower index.
inline std::size_t argmax_centred(std::span<const float> logits) {
  const std::size_t centre = logits.size() / 2;
  const auto dist = [&](std::size_t i) { return i > centre ? i - centre : centre - i; };
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best] || (logits[i] == logits[best] && dist(i) < dist(best))) best = i;
  }
  return best;
}

// Inverse-CDF draw from softmax(logits / temperature). scratch: logits.size() floats.
inline std::size_t sample_categorical(std::span<const float> logits, float temperature, CounterRng& rng,
                                      std::span<float> scratch) {
  if (logits.empty() || scratch.size() < logits.size()) throw ParameterError("sample_categorical: bad sizes");
  if (!(temperature >= 0.0f) || !std::isfinite(temperature)) {
    throw ParameterError("sample_categorical: temperature must be finite and >= 0");
  }
  float mx = logits[0];
  for (float l : logits) {
    if (!std::isfinite(l)) throw NumericError("sample_categorical: non-finite logit");
    mx = std::max(mx, l);
  }
  if (temperature < kArgmaxTemperature) return argmax_centred(logits);

  const float inv_t = 1.0f / temperature;
  const std::size_t n = logits.size();
  float* w = scratch.data();
  for (std::size_t i = 0; i < n; ++i) w[i] = detail::exp_approx((logits[i] - mx) * inv_t);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += w[i];
  const double target = rng.uniform() * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += w[i];
    if (target < cum) return i;
  }
  // Rounding can leave target == total; fall back to the last nonzero weight.
  for (std::size_t i = n; i-- > 0;) {
    if (w[i] > 0.0f) return i;
  }
  return n - 1;
}

inline MuLawIndex sample_categorical(std::span<const float> logits, float temperature, CounterRng& rng) {
  if (logits.size() > kMuLawLevels) throw ParameterError("sample_categorical: more than 256 categories");
  std::vector<float> scratch(logits.size());
  return static_cast<MuLawIndex>(sample_categorical(logits, temperature, rng, scratch));
}

}  // namespace mmlpc
