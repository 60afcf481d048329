#pragma once

// LPC vocoder: a frame-rate network (FRN) turning conditioning frames into
// condition vectors, and two sample-rate-network (SRN) loops.
//
//  * baseline: one full-band sample per forward pass, 160 passes per frame.
//  * mmt: one pass predicts the excitation of N_B subbands at N_T adjacent
//    times through N_B*N_T independent dual-FC heads; the subband samples are
//    then rebuilt recursively
//        s_t     = e_t     + p_t
//        p_{t+1} = LPC(s_{t-15} .. s_t)
//        s_{t+1} = e_{t+1} + p_{t+1}
//    and the bands are merged by the Pseudo-QMF synthesis bank.
//    With N_B=4, N_T=2 that is 20 passes per frame.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmlpc/error.hpp"
#include "mmlpc/features.hpp"
#include "mmlpc/filterbank.hpp"
#include "mmlpc/mulaw.hpp"
#include "mmlpc/neuralops.hpp"
#include "mmlpc/rng.hpp"

namespace mmlpc {

inline constexpr std::size_t kFrameSize = 160;  // 10 ms at 16 kHz
inline constexpr std::size_t kConditionDim = 128;
// Excitations are mu-law coded on [-kExcitationScale, kExcitationScale], one
// scale shared by every band.
inline constexpr double kExcitationScale = 1.0;

enum class Mode : std::uint32_t { baseline = 0, mmt = 1 };

inline std::string_view to_string(Mode m) { return m == Mode::baseline ? "baseline" : "mmt"; }

inline Mode parse_mode(std::string_view s) {
  if (s == "baseline") return Mode::baseline;
  if (s == "mmt") return Mode::mmt;
  throw ParameterError("unknown mode '" + std::string(s) + "' (expected baseline or mmt)");
}

struct ModelConfig {
  Mode mode = Mode::mmt;
  std::size_t gru_a = 384;
  std::size_t gru_b = 16;
  std::size_t levels = 256;  // Q, the excitation alphabet
  std::size_t bands = 4;     // N_B
  std::size_t time_span = 2; // N_T
  std::size_t feature_dim = kFeatureDim;
  std::size_t frn_hidden = 128;
  std::size_t cond_dim = kConditionDim;

  static ModelConfig baseline() {
    ModelConfig c;
    c.mode = Mode::baseline;
    c.bands = 1;
    c.time_span = 1;
    return c;
  }
  static ModelConfig mmt() { return ModelConfig{}; }
  static ModelConfig for_mode(Mode m) { return m == Mode::baseline ? baseline() : mmt(); }

  std::size_t heads() const { return bands * time_span; }
  // baseline: {e_{t-1}, s_{t-1}, p_t}
  // mmt, per band: {e_{t-1..t-N_T}, s_{t-1..t-N_T}, p_{t-1}, p_t}
  std::size_t roles_per_band() const { return mode == Mode::baseline ? 3 : 2 * time_span + 2; }
  std::size_t roles() const { return bands * roles_per_band(); }
  std::size_t steps_per_frame() const { return kFrameSize / heads(); }
  std::size_t embed_width() const { return 3 * gru_a; }

  void validate() const {
    if (gru_a == 0 || gru_a % BlockSparseMatrix::kBlockRows != 0) {
      throw ParameterError("G_A must be a positive multiple of 16");
    }
    if (gru_b == 0 || feature_dim != kFeatureDim || frn_hidden == 0 || cond_dim == 0) {
      throw ParameterError("invalid network dimensions");
    }
    if (levels != static_cast<std::size_t>(kMuLawLevels)) throw ParameterError("Q must be 256 (mu-law alphabet)");
    if (mode == Mode::baseline && (bands != 1 || time_span != 1)) {
      throw ParameterError("baseline mode requires one band and time span 1");
    }
    if (mode == Mode::mmt && (bands < 2 || time_span < 1)) {
      throw ParameterError("mmt mode requires at least two bands");
    }
    if (kFrameSize % heads() != 0) throw ParameterError("bands x time_span must divide the 160-sample frame");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline std::string role_name(const ModelConfig& cfg, std::size_t role) {
  const std::size_t per = cfg.roles_per_band();
  const std::size_t band = role / per;
  const std::size_t r = role % per;
  std::string what;
  if (cfg.mode == Mode::baseline) {
    static constexpr std::array<const char*, 3> kNames = {"e1", "s1", "pcur"};
    what = kNames[r];
  } else if (r < cfg.time_span) {
    what = "e" + std::to_string(r + 1);
  } else if (r < 2 * cfg.time_span) {
    what = "s" + std::to_string(r - cfg.time_span + 1);
  } else {
    what = r == 2 * cfg.time_span ? "pprev" : "pcur";
  }
  return what + ".b" + std::to_string(band);
}

struct DenseLayer {
  DenseMatrix weight;  // out x in
  std::vector<float> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t out, std::size_t in) : weight(out, in), bias(out, 0.0f) {}
};

// Two width-3 convolutions (residual around the second) then two dense
// layers, tanh throughout. A width-3 convolution is a DenseLayer over the
// concatenation [x_{t-1}, x_t, x_{t+1}].
struct FrnParams {
  DenseLayer conv1;   // hidden x 3*feature_dim
  DenseLayer conv2;   // hidden x 3*hidden
  DenseLayer dense1;  // hidden x hidden
  DenseLayer dense2;  // cond x hidden
};

struct ModelWeights {
  ModelConfig config;
  FrnParams frn;
  DenseMatrix cond_to_gru_a;                // 3G_A x cond
  std::vector<EmbeddingTable> embeddings;   // one per role, width 3G_A
  GruParams gru_a;                          // block-sparse recurrent
  DenseMatrix gru_b_input;                  // 3G_B x G_A
  DenseMatrix cond_to_gru_b;                // 3G_B x cond
  GruParams gru_b;                          // dense recurrent
  std::vector<DualFcParams> dual_fcs;       // heads, index = time_offset * bands + band

  static ModelWeights zeros(const ModelConfig& cfg) {
    cfg.validate();
    ModelWeights w;
    w.config = cfg;
    const std::size_t ga = cfg.gru_a, gb = cfg.gru_b, h = cfg.frn_hidden, c = cfg.cond_dim;
    w.frn.conv1 = DenseLayer(h, 3 * cfg.feature_dim);
    w.frn.conv2 = DenseLayer(h, 3 * h);
    w.frn.dense1 = DenseLayer(h, h);
    w.frn.dense2 = DenseLayer(c, h);
    w.cond_to_gru_a = DenseMatrix(3 * ga, c);
    w.embeddings.assign(cfg.roles(), EmbeddingTable(cfg.embed_width()));
    w.gru_a.recurrent = BlockSparseMatrix(3 * ga, ga, {});
    w.gru_a.bias.assign(3 * ga, 0.0f);
    w.gru_b_input = DenseMatrix(3 * gb, ga);
    w.cond_to_gru_b = DenseMatrix(3 * gb, c);
    w.gru_b.recurrent = DenseMatrix(3 * gb, gb);
    w.gru_b.bias.assign(3 * gb, 0.0f);
    DualFcParams fc{DenseMatrix(cfg.levels, gb), DenseMatrix(cfg.levels, gb),
                    std::vector<float>(cfg.levels, 0.0f), std::vector<float>(cfg.levels, 0.0f),
                    std::vector<float>(cfg.levels, 0.0f)};
    w.dual_fcs.assign(cfg.heads(), fc);
    return w;
  }

  void validate() const {
    config.validate();
    const std::size_t ga = config.gru_a, gb = config.gru_b, h = config.frn_hidden, c = config.cond_dim;
    const auto need = [](bool ok, const std::string& what) {
      if (!ok) throw ValidationError("model weights: " + what);
    };
    const auto layer_ok = [](const DenseLayer& l, std::size_t out, std::size_t in) {
      return l.weight.rows() == out && l.weight.cols() == in && l.bias.size() == out;
    };
    need(layer_ok(frn.conv1, h, 3 * config.feature_dim), "frn.conv1 shape");
    need(layer_ok(frn.conv2, h, 3 * h), "frn.conv2 shape");
    need(layer_ok(frn.dense1, h, h), "frn.dense1 shape");
    need(layer_ok(frn.dense2, c, h), "frn.dense2 shape");
    need(cond_to_gru_a.rows() == 3 * ga && cond_to_gru_a.cols() == c, "gru_a.cond shape");
    need(embeddings.size() == config.roles(), "embedding role count");
    for (const auto& t : embeddings) {
      need(t.width == config.embed_width() && t.data.size() == kMuLawLevels * t.width, "embedding table shape");
    }
    need(std::holds_alternative<BlockSparseMatrix>(gru_a.recurrent), "gru_a.recurrent must be block-sparse");
    need(rows_of(gru_a.recurrent) == 3 * ga && cols_of(gru_a.recurrent) == ga && gru_a.bias.size() == 3 * ga,
         "gru_a shape");
    need(gru_b_input.rows() == 3 * gb && gru_b_input.cols() == ga, "gru_b.input shape");
    need(cond_to_gru_b.rows() == 3 * gb && cond_to_gru_b.cols() == c, "gru_b.cond shape");
    need(rows_of(gru_b.recurrent) == 3 * gb && cols_of(gru_b.recurrent) == gb && gru_b.bias.size() == 3 * gb,
         "gru_b shape");
    need(dual_fcs.size() == config.heads(), "dual FC head count");
    for (const auto& fc : dual_fcs) {
      need(fc.w1.rows() == config.levels && fc.w1.cols() == gb && fc.w2.rows() == config.levels &&
               fc.w2.cols() == gb && fc.a1.size() == config.levels && fc.a2.size() == config.levels &&
               fc.b.size() == config.levels,
           "dual FC shape");
    }
  }
};

using ConditionVector = std::vector<float>;

// ---------------------------------------------------------------------------
// Frame-rate network

namespace detail {

inline std::vector<float> frame_input(const FeatureFrame& f) {
  std::vector<float> x(kFeatureDim);
  std::copy(f.cepstrum.begin(), f.cepstrum.end(), x.begin());
  x[kCepstrumSize] = 0.01f * (f.pitch_period - 200.0f);
  x[kCepstrumSize + 1] = f.pitch_correlation;
  return x;
}

inline std::vector<float> dense_tanh(const DenseLayer& l, std::span<const float> x) {
  auto y = gemv_dense(l.weight, x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = tanh_approx(y[i] + l.bias[i]);
  return y;
}

// Width-3 convolution over time with replication padding at both ends.
inline std::vector<std::vector<float>> conv3_tanh(const DenseLayer& l, const std::vector<std::vector<float>>& xs) {
  const std::size_t n = xs.size();
  const std::size_t width = xs.front().size();
  std::vector<std::vector<float>> out(n);
  std::vector<float> window(3 * width);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& prev = xs[t == 0 ? 0 : t - 1];
    const auto& next = xs[t + 1 < n ? t + 1 : n - 1];
    std::copy(prev.begin(), prev.end(), window.begin());
    std::copy(xs[t].begin(), xs[t].end(), window.begin() + static_cast<std::ptrdiff_t>(width));
    std::copy(next.begin(), next.end(), window.begin() + static_cast<std::ptrdiff_t>(2 * width));
    out[t] = dense_tanh(l, window);
  }
  return out;
}

}  // namespace detail

inline std::vector<ConditionVector> frn_forward(std::span<const FeatureFrame> frames, const ModelWeights& w) {
  if (frames.empty()) throw ParameterError("frn_forward: at least one frame required");
  std::vector<std::vector<float>> x;
  x.reserve(frames.size());
  for (const auto& f : frames) x.push_back(detail::frame_input(f));
  const auto c1 = detail::conv3_tanh(w.frn.conv1, x);
  auto c2 = detail::conv3_tanh(w.frn.conv2, c1);
  std::vector<ConditionVector> out;
  out.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (std::size_t i = 0; i < c2[t].size(); ++i) c2[t][i] += c1[t][i];
    out.push_back(detail::dense_tanh(w.frn.dense2, detail::dense_tanh(w.frn.dense1, c2[t])));
  }
  return out;
}

// Condition projections, computed once per frame and reused by every SRN pass.
struct FrameConditioning {
  std::vector<float> gru_a;  // 3G_A
  std::vector<float> gru_b;  // 3G_B
};

inline FrameConditioning project_condition(const ConditionVector& cond, const ModelWeights& w) {
  if (cond.size() != w.config.cond_dim) throw ParameterError("condition vector has wrong width");
  return {gemv_dense(w.cond_to_gru_a, cond), gemv_dense(w.cond_to_gru_b, cond)};
}

// ---------------------------------------------------------------------------
// Linear prediction

// p = sum_{k=1..order} a_k s_{t-k}; queue holds the 16 latest samples, newest last.
inline double lpc_predict(std::span<const double> queue, const LpcCoeffs& lpc) {
  if (queue.size() != kLpcOrder) throw ParameterError("lpc_predict: queue must hold 16 samples");
  if (lpc.order() > kLpcOrder) throw ParameterError("lpc_predict: order above 16");
  double p = 0.0;
  for (std::size_t k = 1; k <= lpc.order(); ++k) p += lpc.coeffs[k - 1] * queue[kLpcOrder - k];
  return p;
}

// ---------------------------------------------------------------------------
// Stream state

struct BandState {
  std::array<double, kLpcOrder> lpc_queue{};  // oldest first, newest last
  std::vector<MuLawIndex> e_hist;             // e_hist[0] = e_{t-1}
  std::vector<double> s_hist;                 // s_hist[0] = s_{t-1}
  double p_last = 0.0;                        // prediction used for s_{t-1}
  std::uint64_t emitted = 0;

  void push(double s) {
    std::copy(lpc_queue.begin() + 1, lpc_queue.end(), lpc_queue.begin());
    lpc_queue.back() = s;
    ++emitted;
  }
};

struct StreamState {
  ModelConfig config;
  bool initialized = false;
  std::vector<float> gru_a;
  std::vector<float> gru_b;
  std::vector<BandState> bands;
  std::size_t frame = 0;          // frames completed
  std::size_t step_in_frame = 0;  // SRN passes into the current frame
  std::uint64_t forward_steps = 0;

  // Workspace, reused across passes.
  std::vector<float> gate_a, scratch_a, gate_b, scratch_b, logits, fc_scratch, sample_scratch;
  std::vector<RoleIndex> lookups;
  std::vector<MuLawIndex> excitation;

  StreamState() = default;
  explicit StreamState(const ModelConfig& cfg) : config(cfg), initialized(true) {
    cfg.validate();
    gru_a.assign(cfg.gru_a, 0.0f);
    gru_b.assign(cfg.gru_b, 0.0f);
    BandState b;
    b.e_hist.assign(cfg.time_span, kMuLawZero);
    b.s_hist.assign(cfg.time_span, 0.0);
    bands.assign(cfg.bands, b);
    gate_a.resize(3 * cfg.gru_a);
    scratch_a.resize(3 * cfg.gru_a);
    gate_b.resize(3 * cfg.gru_b);
    scratch_b.resize(3 * cfg.gru_b);
    logits.resize(cfg.levels);
    fc_scratch.resize(2 * cfg.levels);
    sample_scratch.resize(cfg.levels);
    lookups.reserve(cfg.roles());
    excitation.resize(cfg.heads());
  }
};

// One emitted subband (or full-band) sample with the quantities behind it.
struct SampleRecord {
  std::size_t band = 0;
  std::size_t time_offset = 0;  // 0 .. N_T-1 within the pass
  std::uint64_t index = 0;      // position in this band's stream
  MuLawIndex excitation_index = kMuLawZero;
  double excitation = 0.0;
  double prediction = 0.0;
  double sample = 0.0;
};

// Optional instrumentation. All hooks default to no-ops; pass nullptr to
// skip instrumentation entirely.
class SynthesisProbe {
 public:
  virtual ~SynthesisProbe() = default;
  virtual void on_forward_pass(const StreamState&) {}
  // May overwrite the sampled excitation index before it is used.
  virtual void on_excitation(std::size_t /*band*/, std::size_t /*time_offset*/, MuLawIndex& /*e*/) {}
  virtual void on_sample(const SampleRecord&) {}
};

class StepCounter : public SynthesisProbe {
 public:
  void on_forward_pass(const StreamState&) override { ++passes; }
  std::uint64_t passes = 0;
};

namespace detail {

inline void check_step(const StreamState& st, const ModelWeights& w, Mode mode, std::size_t lpc_count,
                       std::size_t out_size) {
  if (!st.initialized) throw StateError("SRN step on an uninitialized stream state");
  if (!(st.config == w.config)) throw StateError("stream state was created for a different model");
  if (w.config.mode != mode) throw ParameterError("weights are for mode " + std::string(to_string(w.config.mode)));
  if (lpc_count != w.config.bands) throw ParameterError("one LPC set per band is required");
  if (out_size != w.config.heads()) throw ParameterError("output span must hold one sample per head");
}

// GRU-A on the precomputed gate inputs, then GRU-B with the condition added.
inline void run_grus(StreamState& st, const FrameConditioning& cond, const ModelWeights& w) {
  gru_cell(st.gru_a, st.gate_a, w.gru_a, st.gru_a, st.scratch_a);
  gemv_dense(w.gru_b_input, st.gru_a, st.gate_b);
  for (std::size_t i = 0; i < st.gate_b.size(); ++i) st.gate_b[i] += cond.gru_b[i];
  gru_cell(st.gru_b, st.gate_b, w.gru_b, st.gru_b, st.scratch_b);
}

inline MuLawIndex sample_head(StreamState& st, const ModelWeights& w, std::size_t head, float temperature,
                              CounterRng& rng) {
  dual_fc(st.gru_b, w.dual_fcs[head], st.logits, st.fc_scratch);
  return static_cast<MuLawIndex>(sample_categorical(st.logits, temperature, rng, st.sample_scratch));
}

inline void advance_counters(StreamState& st) {
  ++st.forward_steps;
  if (++st.step_in_frame == st.config.steps_per_frame()) {
    st.step_in_frame = 0;
    ++st.frame;
  }
}

}  // namespace detail

// One multi-band multi-time pass. out[j * N_B + b] receives s_{t+j} of band b.
inline void srn_step_mmt(StreamState& st, const FrameConditioning& cond, const ModelWeights& w,
                         std::span<const LpcCoeffs> lpc, float temperature, CounterRng& rng, std::span<double> out,
                         SynthesisProbe* probe = nullptr) {
  detail::check_step(st, w, Mode::mmt, lpc.size(), out.size());
  const ModelConfig& cfg = w.config;
  const std::size_t nb = cfg.bands, nt = cfg.time_span, per = cfg.roles_per_band();

  // p_t from the current queues, then the GRU-A input: table rows for every
  // history role of every band on top of the projected condition.
  std::copy(cond.gru_a.begin(), cond.gru_a.end(), st.gate_a.begin());
  st.lookups.clear();
  for (std::size_t b = 0; b < nb; ++b) {
    const BandState& bs = st.bands[b];
    const double p_t = lpc_predict(bs.lpc_queue, lpc[b]);
    const std::size_t base = b * per;
    for (std::size_t j = 0; j < nt; ++j) {
      st.lookups.push_back({base + j, bs.e_hist[j]});
      st.lookups.push_back({base + nt + j, mulaw_encode(bs.s_hist[j])});
    }
    st.lookups.push_back({base + 2 * nt, mulaw_encode(bs.p_last)});
    st.lookups.push_back({base + 2 * nt + 1, mulaw_encode(p_t)});
  }
  embed_lookup_sum_into(st.lookups, w.embeddings, st.gate_a);
  detail::run_grus(st, cond, w);

  // Independent heads: no excitation conditions on another one.
  for (std::size_t j = 0; j < nt; ++j) {
    for (std::size_t b = 0; b < nb; ++b) {
      MuLawIndex e = detail::sample_head(st, w, j * nb + b, temperature, rng);
      if (probe) probe->on_excitation(b, j, e);
      st.excitation[j * nb + b] = e;
    }
  }

  // s = e + p, one time offset after another, refreshing p from the queue.
  for (std::size_t b = 0; b < nb; ++b) {
    BandState& bs = st.bands[b];
    double p = 0.0;
    for (std::size_t j = 0; j < nt; ++j) {
      p = lpc_predict(bs.lpc_queue, lpc[b]);
      const MuLawIndex ei = st.excitation[j * nb + b];
      const double e = kExcitationScale * mulaw_decode(ei);
      const double s = e + p;
      if (probe) probe->on_sample({b, j, bs.emitted, ei, e, p, s});
      bs.push(s);
      out[j * nb + b] = s;
      // The whole history window is replaced by this pass's values.
      bs.e_hist[nt - 1 - j] = ei;
      bs.s_hist[nt - 1 - j] = s;
    }
    bs.p_last = p;
  }
  detail::advance_counters(st);
  if (probe) probe->on_forward_pass(st);
}

// Single-band single-time pass: inputs {e_{t-1}, s_{t-1}, p_t}, one head.
inline double srn_step_baseline(StreamState& st, const FrameConditioning& cond, const ModelWeights& w,
                                const LpcCoeffs& lpc, float temperature, CounterRng& rng,
                                SynthesisProbe* probe = nullptr) {
  std::array<double, 1> out{};
  detail::check_step(st, w, Mode::baseline, 1, out.size());
  BandState& bs = st.bands.front();
  const double p = lpc_predict(bs.lpc_queue, lpc);

  std::copy(cond.gru_a.begin(), cond.gru_a.end(), st.gate_a.begin());
  st.lookups.clear();
  st.lookups.push_back({0, bs.e_hist[0]});
  st.lookups.push_back({1, mulaw_encode(bs.s_hist[0])});
  st.lookups.push_back({2, mulaw_encode(p)});
  embed_lookup_sum_into(st.lookups, w.embeddings, st.gate_a);
  detail::run_grus(st, cond, w);

  MuLawIndex ei = detail::sample_head(st, w, 0, temperature, rng);
  if (probe) probe->on_excitation(0, 0, ei);
  const double e = kExcitationScale * mulaw_decode(ei);
  const double s = e + p;
  if (probe) probe->on_sample({0, 0, bs.emitted, ei, e, p, s});
  bs.push(s);
  bs.e_hist[0] = ei;
  bs.s_hist[0] = s;
  bs.p_last = p;
  detail::advance_counters(st);
  if (probe) probe->on_forward_pass(st);
  return s;
}

// ---------------------------------------------------------------------------
// End-to-end synthesis

struct SynthesisOptions {
  float temperature = 1.0f;
  std::uint64_t seed = 42;
  std::size_t fft_size = kDefaultFftSize;
  SynthesisProbe* probe = nullptr;
};

struct SynthesisResult {
  std::vector<double> samples;  // 16 kHz, kFrameSize per input frame
  std::uint64_t forward_steps = 0;
};

inline SynthesisResult synthesize(std::span<const FeatureFrame> frames, const ModelWeights& w, Mode mode,
                                  const PrototypeFilterBank& fb, const SynthesisOptions& opt = {}) {
  if (w.config.mode != mode) {
    throw ParameterError("synthesize: weights are for mode " + std::string(to_string(w.config.mode)) +
                         " but mode " + std::string(to_string(mode)) + " was requested");
  }
  const ModelConfig& cfg = w.config;
  if (mode == Mode::mmt && fb.bands != cfg.bands) {
    throw ParameterError("synthesize: filter bank has " + std::to_string(fb.bands) + " bands, model expects " +
                         std::to_string(cfg.bands));
  }
  if (frames.empty()) return {};

  const auto conds = frn_forward(frames, w);
  StreamState st(cfg);
  CounterRng rng(opt.seed);
  SynthesisResult result;

  if (mode == Mode::baseline) {
    result.samples.reserve(frames.size() * kFrameSize);
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const LpcCoeffs lpc = fullband_lpc(frames[f], opt.fft_size);
      const FrameConditioning fc = project_condition(conds[f], w);
      for (std::size_t i = 0; i < kFrameSize; ++i) {
        result.samples.push_back(srn_step_baseline(st, fc, w, lpc, opt.temperature, rng, opt.probe));
      }
    }
    result.forward_steps = st.forward_steps;
    return result;
  }

  const std::size_t nb = cfg.bands, nt = cfg.time_span;
  const std::size_t steps = cfg.steps_per_frame();
  SubbandSignals sub;
  sub.bands.assign(nb, {});
  for (auto& b : sub.bands) b.reserve(frames.size() * kFrameSize / nb + fb.taps);
  std::vector<LpcCoeffs> lpc(nb);
  std::vector<double> out(cfg.heads());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const PowerSpectrum spec = cepstrum_to_spectrum(frames[f], opt.fft_size);
    for (std::size_t b = 0; b < nb; ++b) lpc[b] = subband_lpc_from_spectrum(spec, b, nb).lpc;
    const FrameConditioning fc = project_condition(conds[f], w);
    for (std::size_t s = 0; s < steps; ++s) {
      srn_step_mmt(st, fc, w, lpc, opt.temperature, rng, out, opt.probe);
      for (std::size_t j = 0; j < nt; ++j) {
        for (std::size_t b = 0; b < nb; ++b) sub.bands[b].push_back(out[j * nb + b]);
      }
    }
  }
  // Flush the bank's delay line with zeros, then drop the leading delay.
  const std::size_t pad = (fb.group_delay + nb - 1) / nb;
  for (auto& b : sub.bands) b.resize(b.size() + pad, 0.0);
  const auto full = synthesis(sub, fb);
  const std::size_t total = frames.size() * kFrameSize;
  result.samples.assign(full.begin() + static_cast<std::ptrdiff_t>(fb.group_delay),
                        full.begin() + static_cast<std::ptrdiff_t>(fb.group_delay + total));
  result.forward_steps = st.forward_steps;
  return result;
}

}  // namespace mmlpc
