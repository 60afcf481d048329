#pragma once

// MMLP weights container, all fields little-endian:
//
//   "MMLP" | u32 version=1 | u32 mode | u32 dims[9] | u32 section_count | sections
//   dims = G_A, G_B, Q, N_B, N_T, embedding width, feature dim, FRN hidden, condition dim
//   section = u32 name_len | name | u32 rows | u32 cols | u8 kind | payload
//     kind 0: rows*cols f32, row-major
//     kind 1: u32 block_count, then per block u32 row_block, u32 col, 16 f32
//
// Every section named by section_names() must appear exactly once with the
// shape implied by the header; nothing else may appear.

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mmlpc/detail/bytes.hpp"
#include "mmlpc/error.hpp"
#include "mmlpc/neuralops.hpp"
#include "mmlpc/vocoder.hpp"

namespace mmlpc {

inline constexpr std::uint32_t kWeightsVersion = 1;
inline constexpr std::size_t kWeightsHeaderBytes = 4 + 4 + 4 + 9 * 4 + 4;
inline constexpr std::uint32_t kMaxWeightsDim = 1u << 14;

namespace detail {

enum class SectionKind : std::uint8_t { dense = 0, block_sparse = 1 };

struct SectionShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  SectionKind kind = SectionKind::dense;
};

// Canonical section order and shapes for a configuration.
inline std::vector<std::pair<std::string, SectionShape>> section_layout(const ModelConfig& c) {
  std::vector<std::pair<std::string, SectionShape>> s;
  const auto dense = [&](std::string name, std::size_t r, std::size_t k) {
    s.push_back({std::move(name), {r, k, SectionKind::dense}});
  };
  const std::size_t h = c.frn_hidden;
  dense("frn.conv1.weight", h, 3 * c.feature_dim);
  dense("frn.conv1.bias", h, 1);
  dense("frn.conv2.weight", h, 3 * h);
  dense("frn.conv2.bias", h, 1);
  dense("frn.dense1.weight", h, h);
  dense("frn.dense1.bias", h, 1);
  dense("frn.dense2.weight", c.cond_dim, h);
  dense("frn.dense2.bias", c.cond_dim, 1);
  dense("gru_a.cond", 3 * c.gru_a, c.cond_dim);
  for (std::size_t r = 0; r < c.roles(); ++r) dense("embed." + role_name(c, r), kMuLawLevels, c.embed_width());
  s.push_back({"gru_a.recurrent", {3 * c.gru_a, c.gru_a, SectionKind::block_sparse}});
  dense("gru_a.bias", 3 * c.gru_a, 1);
  dense("gru_b.input", 3 * c.gru_b, c.gru_a);
  dense("gru_b.cond", 3 * c.gru_b, c.cond_dim);
  dense("gru_b.recurrent", 3 * c.gru_b, c.gru_b);
  dense("gru_b.bias", 3 * c.gru_b, 1);
  for (std::size_t i = 0; i < c.heads(); ++i) {
    const std::string p = "fc" + std::to_string(i) + ".";
    dense(p + "w1", c.levels, c.gru_b);
    dense(p + "w2", c.levels, c.gru_b);
    dense(p + "a1", c.levels, 1);
    dense(p + "a2", c.levels, 1);
    dense(p + "b", c.levels, 1);
  }
  return s;
}

// Mutable views of every tensor in section_layout() order.
struct TensorRef {
  DenseMatrix* matrix = nullptr;
  std::vector<float>* vector = nullptr;
  BlockSparseMatrix* sparse = nullptr;
};

inline std::vector<TensorRef> tensor_refs(ModelWeights& w) {
  std::vector<TensorRef> t;
  const auto layer = [&](DenseLayer& l) {
    t.push_back({&l.weight, nullptr, nullptr});
    t.push_back({nullptr, &l.bias, nullptr});
  };
  layer(w.frn.conv1);
  layer(w.frn.conv2);
  layer(w.frn.dense1);
  layer(w.frn.dense2);
  t.push_back({&w.cond_to_gru_a, nullptr, nullptr});
  for (auto& e : w.embeddings) t.push_back({nullptr, &e.data, nullptr});
  t.push_back({nullptr, nullptr, &std::get<BlockSparseMatrix>(w.gru_a.recurrent)});
  t.push_back({nullptr, &w.gru_a.bias, nullptr});
  t.push_back({&w.gru_b_input, nullptr, nullptr});
  t.push_back({&w.cond_to_gru_b, nullptr, nullptr});
  t.push_back({&std::get<DenseMatrix>(w.gru_b.recurrent), nullptr, nullptr});
  t.push_back({nullptr, &w.gru_b.bias, nullptr});
  for (auto& fc : w.dual_fcs) {
    t.push_back({&fc.w1, nullptr, nullptr});
    t.push_back({&fc.w2, nullptr, nullptr});
    t.push_back({nullptr, &fc.a1, nullptr});
    t.push_back({nullptr, &fc.a2, nullptr});
    t.push_back({nullptr, &fc.b, nullptr});
  }
  return t;
}

class ByteReader {
 public:
  ByteReader(std::span<const std::byte> data, std::string source) : data_(data), source_(std::move(source)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  [[noreturn]] void fail(const std::string& what, std::size_t at) const {
    throw MalformedInputError(source_ + ": MMLP parse error at byte " + std::to_string(at) + ": " + what);
  }
  [[noreturn]] void invalid(const std::string& what, std::size_t at) const {
    throw ValidationError(source_ + ": MMLP validation error at byte " + std::to_string(at) + ": " + what);
  }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      fail(std::string("truncated ") + what + " (need " + std::to_string(n) + " bytes, " +
               std::to_string(remaining()) + " left)",
           pos_);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    const auto v = get_u32(data_, pos_);
    pos_ += 4;
    return v;
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  float f32(const char* what) {
    need(4, what);
    const float v = get_f32(data_, pos_);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::byte> data_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::string> section_names(const ModelConfig& cfg) {
  std::vector<std::string> names;
  for (const auto& [n, s] : detail::section_layout(cfg)) names.push_back(n);
  return names;
}

inline std::vector<std::byte> serialize_weights(const ModelWeights& w) {
  w.validate();
  const ModelConfig& c = w.config;
  std::vector<std::byte> out;
  for (char ch : std::string("MMLP")) out.push_back(static_cast<std::byte>(ch));
  detail::put_u32(out, kWeightsVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(c.mode));
  for (std::size_t d : {c.gru_a, c.gru_b, c.levels, c.bands, c.time_span, c.embed_width(), c.feature_dim,
                        c.frn_hidden, c.cond_dim}) {
    detail::put_u32(out, static_cast<std::uint32_t>(d));
  }
  const auto layout = detail::section_layout(c);
  auto refs = detail::tensor_refs(const_cast<ModelWeights&>(w));
  detail::put_u32(out, static_cast<std::uint32_t>(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& [name, shape] = layout[i];
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    for (char ch : name) out.push_back(static_cast<std::byte>(ch));
    detail::put_u32(out, static_cast<std::uint32_t>(shape.rows));
    detail::put_u32(out, static_cast<std::uint32_t>(shape.cols));
    out.push_back(static_cast<std::byte>(shape.kind));
    const detail::TensorRef& t = refs[i];
    if (t.sparse) {
      detail::put_u32(out, static_cast<std::uint32_t>(t.sparse->block_count()));
      for (std::size_t b = 0; b < t.sparse->block_count(); ++b) {
        const auto blk = t.sparse->block(b);
        detail::put_u32(out, blk.row_block);
        detail::put_u32(out, blk.col);
        for (float v : blk.values) detail::put_f32(out, v);
      }
    } else if (t.matrix) {
      for (float v : t.matrix->to_row_major()) detail::put_f32(out, v);
    } else {
      for (float v : *t.vector) detail::put_f32(out, v);
    }
  }
  return out;
}

// `source` names the input in error messages.
inline ModelWeights parse_weights(std::span<const std::byte> bytes, const std::string& source = "<memory>") {
  detail::ByteReader in(bytes, source);
  if (in.remaining() < 4 || in.str(4, "magic") != "MMLP") in.fail("bad magic (expected \"MMLP\")", 0);
  const std::size_t version_at = in.offset();
  const std::uint32_t version = in.u32("version");
  if (version != kWeightsVersion) in.fail("unsupported version " + std::to_string(version), version_at);

  const std::size_t mode_at = in.offset();
  const std::uint32_t mode = in.u32("mode");
  if (mode > static_cast<std::uint32_t>(Mode::mmt)) in.fail("unknown mode tag " + std::to_string(mode), mode_at);
  const std::size_t dims_at = in.offset();
  std::array<std::uint32_t, 9> dims{};
  for (auto& d : dims) {
    d = in.u32("dimension header");
    if (d == 0 || d > kMaxWeightsDim) in.invalid("dimension " + std::to_string(d) + " out of range", dims_at);
  }
  ModelConfig cfg;
  cfg.mode = static_cast<Mode>(mode);
  cfg.gru_a = dims[0];
  cfg.gru_b = dims[1];
  cfg.levels = dims[2];
  cfg.bands = dims[3];
  cfg.time_span = dims[4];
  cfg.feature_dim = dims[6];
  cfg.frn_hidden = dims[7];
  cfg.cond_dim = dims[8];
  try {
    cfg.validate();
  } catch (const ParameterError& e) {
    in.invalid(e.what(), dims_at);
  }
  if (dims[5] != cfg.embed_width()) in.invalid("embedding width must be 3 * G_A", dims_at);

  // Refuse to allocate for tensors the remaining bytes cannot hold.
  const auto layout = detail::section_layout(cfg);
  std::size_t min_payload = 0;
  for (const auto& [name, shape] : layout) {
    if (shape.kind == detail::SectionKind::dense) min_payload += 4 * shape.rows * shape.cols;
  }
  const std::size_t count_at = in.offset();
  const std::uint32_t count = in.u32("section count");
  if (count != layout.size()) {
    in.invalid("expected " + std::to_string(layout.size()) + " sections, header says " + std::to_string(count),
               count_at);
  }
  if (in.remaining() < min_payload) {
    in.fail("truncated: tensors need at least " + std::to_string(min_payload) + " bytes, " +
                std::to_string(in.remaining()) + " left",
            in.offset());
  }

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < layout.size(); ++i) index[layout[i].first] = i;
  ModelWeights w = ModelWeights::zeros(cfg);
  auto refs = detail::tensor_refs(w);
  std::vector<bool> seen(layout.size(), false);

  for (std::uint32_t s = 0; s < count; ++s) {
    const std::size_t at = in.offset();
    const std::uint32_t name_len = in.u32("section name length");
    if (name_len == 0 || name_len > 256) in.fail("section name length " + std::to_string(name_len), at);
    const std::string name = in.str(name_len, "section name");
    const auto it = index.find(name);
    if (it == index.end()) in.invalid("unknown section '" + name + "'", at);
    if (seen[it->second]) in.invalid("duplicate section '" + name + "'", at);
    seen[it->second] = true;
    const auto& shape = layout[it->second].second;
    const std::size_t rows = in.u32("section rows"), cols = in.u32("section cols");
    const auto kind = in.u8("section kind");
    if (rows != shape.rows || cols != shape.cols || kind != static_cast<std::uint8_t>(shape.kind)) {
      in.invalid("section '" + name + "' has shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " kind " + std::to_string(kind) + ", expected " + std::to_string(shape.rows) + "x" +
                     std::to_string(shape.cols) + " kind " + std::to_string(static_cast<int>(shape.kind)),
                 at);
    }
    detail::TensorRef& t = refs[it->second];
    if (t.sparse) {
      const std::size_t blocks_at = in.offset();
      const std::uint32_t n = in.u32("block count");
      constexpr std::size_t kRecord = 8 + 4 * BlockSparseMatrix::kBlockRows;
      const std::size_t max_blocks = rows / BlockSparseMatrix::kBlockRows * cols;
      if (n > max_blocks) in.invalid("block count " + std::to_string(n) + " exceeds matrix capacity", blocks_at);
      in.need(static_cast<std::size_t>(n) * kRecord, "block records");
      std::vector<BlockSparseMatrix::Block> blocks(n);
      for (auto& b : blocks) {
        b.row_block = in.u32("block row");
        b.col = in.u32("block col");
        for (float& v : b.values) v = in.f32("block values");
      }
      try {
        *t.sparse = BlockSparseMatrix(rows, cols, std::move(blocks));
      } catch (const ParameterError& e) {
        in.invalid("section '" + name + "': " + e.what(), blocks_at);
      }
    } else {
      in.need(4 * rows * cols, "tensor payload");
      std::vector<float> values(rows * cols);
      for (float& v : values) v = in.f32("tensor payload");
      if (t.matrix) {
        *t.matrix = DenseMatrix::from_row_major(rows, cols, values);
      } else {
        *t.vector = std::move(values);
      }
    }
  }
  if (in.remaining() != 0) in.fail(std::to_string(in.remaining()) + " trailing bytes after last section", in.offset());
  try {
    w.validate();
  } catch (const ValidationError& e) {
    in.invalid(e.what(), in.offset());
  }
  return w;
}

inline ModelWeights load_weights(const std::string& path) { return parse_weights(detail::read_file(path), path); }

inline void save_weights(const std::string& path, const ModelWeights& w) {
  detail::write_file(path, serialize_weights(w));
}

inline bool weights_equal(const ModelWeights& a, const ModelWeights& b) {
  if (!(a.config == b.config)) return false;
  auto ra = detail::tensor_refs(const_cast<ModelWeights&>(a));
  auto rb = detail::tensor_refs(const_cast<ModelWeights&>(b));
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].matrix && !(*ra[i].matrix == *rb[i].matrix)) return false;
    if (ra[i].vector && *ra[i].vector != *rb[i].vector) return false;
    if (ra[i].sparse && !(*ra[i].sparse == *rb[i].sparse)) return false;
  }
  return true;
}

}  // namespace mmlpc
