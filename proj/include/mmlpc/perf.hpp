#pragma once

// Analytic SRN complexity model and wall-clock real-time-factor benchmark.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mmlpc/error.hpp"
#include "mmlpc/filterbank.hpp"
#include "mmlpc/synthetic.hpp"
#include "mmlpc/vocoder.hpp"

namespace mmlpc {

struct ComplexityParams {
  double d = 0.1;
  double gru_a = 384;
  double gru_b = 16;
  double q = 256;
  double bands = 4;
  double time_span = 2;
  double fs = kSampleRate;

  static ComplexityParams baseline() {
    ComplexityParams p;
    p.bands = 1;
    p.time_span = 1;
    return p;
  }

  void validate() const {
    const std::array<std::pair<const char*, double>, 7> fields = {
        {{"d", d}, {"ga", gru_a}, {"gb", gru_b}, {"q", q}, {"bands", bands}, {"timespan", time_span}, {"fs", fs}}};
    for (const auto& [name, v] : fields) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ParameterError(std::string(name) + " must be positive and finite");
    }
    if (d > 1.0) throw ParameterError("d must not exceed 1");
  }
};

// Each term already carries the 2 F_s / (N_B N_T) factor; total is their sum, in FLOPS.
struct FlopsBreakdown {
  double gru_a = 0.0;   // 3 d G_A^2
  double gru_b = 0.0;   // 3 G_B (G_A + G_B)
  double output = 0.0;  // 2 G_B Q N_B N_T
  double total = 0.0;
};

inline FlopsBreakdown flops_breakdown(const ComplexityParams& p) {
  p.validate();
  const double rate = 2.0 * p.fs / (p.bands * p.time_span);
  FlopsBreakdown b;
  b.gru_a = 3.0 * p.d * p.gru_a * p.gru_a * rate;
  b.gru_b = 3.0 * p.gru_b * (p.gru_a + p.gru_b) * rate;
  b.output = 2.0 * p.gru_b * p.q * p.bands * p.time_span * rate;
  b.total = b.gru_a + b.gru_b + b.output;
  return b;
}

// GFLOPS.
inline double flops_model(const ComplexityParams& p) { return flops_breakdown(p).total * 1e-9; }

inline ComplexityParams complexity_of(const ModelWeights& w) {
  const ModelConfig& c = w.config;
  ComplexityParams p;
  p.d = std::get<BlockSparseMatrix>(w.gru_a.recurrent).density();
  if (p.d <= 0.0) p.d = 1e-12;
  p.gru_a = static_cast<double>(c.gru_a);
  p.gru_b = static_cast<double>(c.gru_b);
  p.q = static_cast<double>(c.levels);
  p.bands = static_cast<double>(c.bands);
  p.time_span = static_cast<double>(c.time_span);
  return p;
}

// Operation counts of the kernels actually invoked, multiply-add = 2.
// Activations are not counted.
struct KernelFlops {
  double per_step = 0.0;   // one SRN forward pass
  double per_frame = 0.0;  // FRN and condition projections
  double per_output_sample = 0.0;  // synthesis filter bank
};

inline KernelFlops kernel_flops(const ModelWeights& w, const PrototypeFilterBank* fb = nullptr) {
  const ModelConfig& c = w.config;
  const auto dense = [](const DenseMatrix& m) { return 2.0 * static_cast<double>(m.rows() * m.cols()); };
  const auto layer = [&](const DenseLayer& l) { return dense(l.weight) + static_cast<double>(l.bias.size()); };
  const double ga3 = 3.0 * static_cast<double>(c.gru_a), gb3 = 3.0 * static_cast<double>(c.gru_b);
  const double q = static_cast<double>(c.levels);

  KernelFlops k;
  const auto& sparse = std::get<BlockSparseMatrix>(w.gru_a.recurrent);
  k.per_step += 2.0 * static_cast<double>(sparse.block_count() * BlockSparseMatrix::kBlockRows);
  k.per_step += static_cast<double>(c.roles()) * ga3 + ga3;  // embedding sums, condition copy, bias
  k.per_step += dense(w.gru_b_input) + gb3;
  k.per_step += dense(std::get<DenseMatrix>(w.gru_b.recurrent)) + gb3;
  k.per_step += static_cast<double>(c.heads()) * (2.0 * 2.0 * q * static_cast<double>(c.gru_b) + 5.0 * q);
  k.per_step += static_cast<double>(c.heads()) * 2.0 * kLpcOrder;

  k.per_frame = layer(w.frn.conv1) + layer(w.frn.conv2) + layer(w.frn.dense1) + layer(w.frn.dense2) +
                dense(w.cond_to_gru_a) + dense(w.cond_to_gru_b);
  if (fb && c.mode == Mode::mmt) k.per_output_sample = 2.0 * static_cast<double>(fb->taps);
  return k;
}

struct BenchReport {
  Mode mode = Mode::mmt;
  std::size_t frames = 0;
  double wall_seconds = 0.0;  // median over timed runs
  double audio_seconds = 0.0;
  double rtf = 0.0;
  std::uint64_t forward_steps = 0;
  double steps_per_second = 0.0;
  double analytic_gflops = 0.0;  // formula with the model's actual density
  double measured_gflops = 0.0;  // kernel operation counts per second of audio
};

inline constexpr std::size_t kMinBenchFrames = 100;
inline constexpr int kBenchRuns = 3;

// One discarded warm-up run, then the median of kBenchRuns timed runs.
// Timing covers FRN, SRN and filter bank; features are generated beforehand.
inline BenchReport rtf_bench(const ModelWeights& w, Mode mode, std::size_t frames, const PrototypeFilterBank& fb,
                             std::uint64_t seed) {
  if (frames < kMinBenchFrames) {
    throw ParameterError("rtf_bench: at least " + std::to_string(kMinBenchFrames) + " frames required");
  }
  if (w.config.mode != mode) {
    throw ParameterError("rtf_bench: weights are for mode " + std::string(to_string(w.config.mode)));
  }
  const auto features = random_features(frames, seed);
  SynthesisOptions opt;
  opt.seed = seed;

  std::uint64_t steps = synthesize(features, w, mode, fb, opt).forward_steps;
  std::vector<double> times;
  for (int r = 0; r < kBenchRuns; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = synthesize(features, w, mode, fb, opt);
    const auto t1 = std::chrono::steady_clock::now();
    if (res.forward_steps != steps) throw StateError("rtf_bench: forward step count changed between runs");
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());

  BenchReport r;
  r.mode = mode;
  r.frames = frames;
  r.wall_seconds = times[times.size() / 2];
  r.audio_seconds = static_cast<double>(frames * kFrameSize) / kSampleRate;
  r.rtf = r.wall_seconds / r.audio_seconds;
  r.forward_steps = steps;
  r.steps_per_second = static_cast<double>(steps) / r.wall_seconds;
  r.analytic_gflops = flops_model(complexity_of(w));
  const KernelFlops k = kernel_flops(w, &fb);
  const double total = k.per_step * static_cast<double>(steps) + k.per_frame * static_cast<double>(frames) +
                       k.per_output_sample * static_cast<double>(frames * kFrameSize);
  r.measured_gflops = total / r.audio_seconds * 1e-9;
  return r;
}

}  // namespace mmlpc
