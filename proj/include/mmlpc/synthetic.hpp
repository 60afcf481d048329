#pragma once

// Deterministic random features and weights, for exercising the pipeline
// without trained models. Audio quality is meaningless by construction.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "mmlpc/features.hpp"
#include "mmlpc/neuralops.hpp"
#include "mmlpc/rng.hpp"
#include "mmlpc/vocoder.hpp"

namespace mmlpc {

inline constexpr float kRandomWeightRange = 0.1f;
inline constexpr double kRandomGruADensity = 0.1;

inline std::vector<FeatureFrame> random_features(std::size_t count, std::uint64_t seed) {
  CounterRng rng(seed);
  const auto uni = [&](double lo, double hi) { return static_cast<float>(lo + (hi - lo) * rng.uniform()); };
  std::vector<FeatureFrame> frames(count);
  for (auto& f : frames) {
    f.cepstrum[0] = uni(-2.0, 2.0);
    for (std::size_t k = 1; k < kCepstrumSize; ++k) f.cepstrum[k] = uni(-1.0, 1.0) / static_cast<float>(k + 1);
    f.pitch_period = uni(32.0, 256.0);
    f.pitch_correlation = uni(-1.0, 1.0);
  }
  return frames;
}

namespace detail {

inline void fill_uniform(std::span<float> v, CounterRng& rng) {
  for (float& x : v) x = kRandomWeightRange * static_cast<float>(2.0 * rng.uniform() - 1.0);
}

inline void fill_uniform(DenseMatrix& m, CounterRng& rng) { fill_uniform(m.data(), rng); }

inline void fill_uniform(DenseLayer& l, CounterRng& rng) {
  fill_uniform(l.weight, rng);
  fill_uniform(l.bias, rng);
}

// Exactly round(density * total) distinct 16x1 blocks, chosen by a seeded shuffle.
inline BlockSparseMatrix random_block_sparse(std::size_t rows, std::size_t cols, double density, CounterRng& rng) {
  const std::size_t row_blocks = rows / BlockSparseMatrix::kBlockRows;
  const std::size_t total = row_blocks * cols;
  const auto keep = static_cast<std::size_t>(std::llround(density * static_cast<double>(total)));
  std::vector<std::uint32_t> slots(total);
  std::iota(slots.begin(), slots.end(), 0u);
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_u64() % (total - i));
    std::swap(slots[i], slots[j]);
  }
  std::vector<BlockSparseMatrix::Block> blocks(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    blocks[i].row_block = static_cast<std::uint32_t>(slots[i] / cols);
    blocks[i].col = static_cast<std::uint32_t>(slots[i] % cols);
    fill_uniform(blocks[i].values, rng);
  }
  return BlockSparseMatrix(rows, cols, std::move(blocks));
}

}  // namespace detail

// Uniform(-0.1, 0.1) everywhere, 10% block density in GRU-A's recurrent matrix.
inline ModelWeights random_weights(const ModelConfig& cfg, std::uint64_t seed) {
  ModelWeights w = ModelWeights::zeros(cfg);
  CounterRng rng(seed);
  detail::fill_uniform(w.frn.conv1, rng);
  detail::fill_uniform(w.frn.conv2, rng);
  detail::fill_uniform(w.frn.dense1, rng);
  detail::fill_uniform(w.frn.dense2, rng);
  detail::fill_uniform(w.cond_to_gru_a, rng);
  for (auto& t : w.embeddings) detail::fill_uniform(t.data, rng);
  w.gru_a.recurrent = detail::random_block_sparse(3 * cfg.gru_a, cfg.gru_a, kRandomGruADensity, rng);
  detail::fill_uniform(w.gru_a.bias, rng);
  detail::fill_uniform(w.gru_b_input, rng);
  detail::fill_uniform(w.cond_to_gru_b, rng);
  detail::fill_uniform(std::get<DenseMatrix>(w.gru_b.recurrent), rng);
  detail::fill_uniform(w.gru_b.bias, rng);
  for (auto& fc : w.dual_fcs) {
    detail::fill_uniform(fc.w1, rng);
    detail::fill_uniform(fc.w2, rng);
    detail::fill_uniform(fc.a1, rng);
    detail::fill_uniform(fc.a2, rng);
    detail::fill_uniform(fc.b, rng);
  }
  return w;
}

inline ModelWeights gen_random_weights(std::uint64_t seed, Mode mode) {
  return random_weights(ModelConfig::for_mode(mode), seed);
}

}  // namespace mmlpc
