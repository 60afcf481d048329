#pragma once

// mmlpc command-line interface. run_cli() is the whole program minus
// process setup, so tests drive it in-process.
//
// Exit status: 0 ok, 1 internal error or failed check, 2 usage/validation.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mmlpc/mmlpc.hpp"

namespace mmlpc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline constexpr double kSnrThresholdDb = 60.0;
inline constexpr std::size_t kDefaultTaps = 64;
inline constexpr std::uint64_t kDefaultSeed = 42;

namespace detail {

inline std::string fmt_double(double v, int precision) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

inline PrototypeFilterBank bank_for(const ModelConfig& cfg, std::size_t taps = kDefaultTaps) {
  return design_prototype(cfg.mode == Mode::mmt ? cfg.bands : 1, taps);
}

inline void print_report(std::ostream& out, const BenchReport& r) {
  out << "mode: " << to_string(r.mode) << "\n"
      << "frames: " << r.frames << "\n"
      << "wall_seconds: " << fmt_double(r.wall_seconds, 4) << "\n"
      << "audio_seconds: " << fmt_double(r.audio_seconds, 1) << "\n"
      << "rtf: " << fmt_double(r.rtf, 4) << "\n"
      << "forward_steps: " << r.forward_steps << "\n"
      << "steps_per_second: " << fmt_double(r.steps_per_second, 1) << "\n"
      << "analytic_gflops: " << fmt_double(r.analytic_gflops, 6) << "\n"
      << "measured_gflops: " << fmt_double(r.measured_gflops, 6) << "\n";
}

inline nlohmann::ordered_json report_json(const BenchReport& r) {
  return {{"mode", std::string(to_string(r.mode))},
          {"frames", r.frames},
          {"wall_seconds", r.wall_seconds},
          {"audio_seconds", r.audio_seconds},
          {"rtf", r.rtf},
          {"forward_steps", r.forward_steps},
          {"steps_per_second", r.steps_per_second},
          {"analytic_gflops", r.analytic_gflops},
          {"measured_gflops", r.measured_gflops}};
}

// One character per cell, darker = more mass.
inline std::string heat_row(std::span<const double> row) {
  static constexpr std::string_view kRamp = " .:-=+*#%@";
  std::string s;
  for (double v : row) {
    const auto level = static_cast<std::size_t>(std::lround(std::clamp(v, 0.0, 1.0) * (kRamp.size() - 1)));
    s += kRamp[level];
  }
  return s;
}

inline double row_sum(std::span<const double> row) {
  double s = 0.0;
  for (double v : row) s += v;
  return s;
}

inline double normal(CounterRng& rng) {
  const double u1 = 1.0 - rng.uniform(), u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

struct AttnDemoResult {
  AlignmentMatrix alignment;
  std::vector<std::pair<std::string, bool>> checks;
  std::vector<std::string> notes;  // extra per-row lines
};

inline AttnDemoResult demo_lsa(std::size_t enc, std::size_t dec, CounterRng& rng) {
  constexpr std::size_t kAttn = 16, kQuery = 8, kKey = 8;
  LsaParams p = LsaParams::zeros(kAttn, kQuery, kKey);
  const auto fill = [&](std::span<double> v, double scale) {
    for (double& x : v) x = scale * normal(rng);
  };
  fill(p.query_proj.data(), 0.3);
  fill(p.key_proj.data(), 0.3);
  fill(p.location_proj.data(), 0.3);
  fill(p.filters, 0.3);
  fill(p.bias, 0.1);
  fill(p.v, 1.0);
  Matrix keys(enc, kKey);
  fill(keys.data(), 1.0);
  std::vector<double> cum(enc, 0.0), query(kQuery);
  std::vector<std::vector<double>> rows;
  for (std::size_t t = 0; t < dec; ++t) {
    fill(query, 1.0);
    rows.push_back(lsa_score(query, keys, cum, p));
    for (std::size_t i = 0; i < enc; ++i) cum[i] += rows.back()[i];
  }
  AttnDemoResult r{AlignmentMatrix::from_rows(rows), {}, {}};
  r.checks.push_back({"rows on simplex", r.alignment.is_valid(1e-6)});
  return r;
}

// Base rows: a bump drifting along the diagonal plus a little noise.
inline AttnDemoResult demo_forward(std::size_t enc, std::size_t dec, CounterRng& rng) {
  ForwardAttnState st = ForwardAttnState::initial(enc);
  std::vector<std::vector<double>> rows;
  std::vector<double> base(enc);
  bool monotone = true;
  double prev = st.expected_position();
  for (std::size_t t = 0; t < dec; ++t) {
    const double centre = dec > 1 ? static_cast<double>(t) * static_cast<double>(enc - 1) / static_cast<double>(dec - 1) : 0.0;
    for (std::size_t i = 0; i < enc; ++i) {
      const double d = static_cast<double>(i) - centre;
      base[i] = std::exp(-0.5 * d * d) + 0.01 * rng.uniform();
    }
    const double s = row_sum(base);
    for (double& v : base) v /= s;
    st = forward_attention_step(st, base);
    const double pos = st.expected_position();
    if (pos < prev - 1e-12) monotone = false;
    prev = pos;
    rows.push_back(st.alpha);
  }
  AttnDemoResult r{AlignmentMatrix::from_rows(rows), {}, {}};
  r.checks.push_back({"rows on simplex", r.alignment.is_valid(1e-6)});
  r.checks.push_back({"expected position nondecreasing", monotone});
  return r;
}

inline AttnDemoResult demo_gmm(std::size_t enc, std::size_t dec, CounterRng& rng) {
  constexpr std::size_t kComponents = 3;
  GmmAttnState st = GmmAttnState::initial(kComponents);
  std::vector<std::vector<double>> rows;
  std::vector<GmmRawOutput> raw(kComponents);
  bool increasing = true;
  std::vector<std::string> notes;
  for (std::size_t t = 0; t < dec; ++t) {
    for (auto& o : raw) o = {normal(rng) - 1.0, normal(rng) + 1.0, normal(rng)};
    auto res = gmm_attention_step(st, raw, enc);
    std::string means = "means";
    for (std::size_t k = 0; k < kComponents; ++k) {
      if (!(res.state.components[k].mean > st.components[k].mean)) increasing = false;
      means += " " + fmt_double(res.state.components[k].mean, 3);
    }
    notes.push_back(means);
    st = std::move(res.state);
    rows.push_back(std::move(res.row));
  }
  AttnDemoResult r{AlignmentMatrix::from_rows(rows), {}, std::move(notes)};
  r.checks.push_back({"rows on simplex", r.alignment.is_valid(1e-6)});
  r.checks.push_back({"means strictly increasing", increasing});
  return r;
}

}  // namespace detail

struct CliOptions {
  // synth
  std::string weights, features, out;
  std::optional<std::string> mode;
  std::uint64_t seed = kDefaultSeed;
  float temperature = 1.0f;
  // bench
  std::vector<std::string> bench_weights;
  std::size_t frames = 1000;
  std::string bench_mode = "both";
  bool json = false;
  // flops
  ComplexityParams flops;
  // fb-check
  std::size_t bands = 4, taps = kDefaultTaps, length = 16000;
  std::string signal = "noise";
  double freq = 1000.0;
  // attn-demo
  std::string mechanism;
  std::size_t enc_len = 10, dec_len = 30;
  // gen-*
  std::string gen_mode = "mmt";
  std::size_t gen_frames = 100;
};

inline int cmd_synth(const CliOptions& o, std::ostream& out) {
  const ModelWeights w = load_weights(o.weights);
  const auto frames = read_feature_file(o.features);
  const Mode mode = o.mode ? parse_mode(*o.mode) : w.config.mode;
  SynthesisOptions opt;
  opt.seed = o.seed;
  opt.temperature = o.temperature;
  const auto res = synthesize(frames, w, mode, detail::bank_for(w.config), opt);
  write_wav(res.samples, o.out);
  out << "samples: " << res.samples.size() << "\n"
      << "duration_seconds: " << detail::fmt_double(static_cast<double>(res.samples.size()) / kSampleRate, 3)
      << "\n"
      << "forward_steps: " << res.forward_steps << "\n";
  return kExitOk;
}

inline int cmd_bench(const CliOptions& o, std::ostream& out) {
  std::vector<Mode> modes;
  if (o.bench_mode == "both") {
    modes = {Mode::baseline, Mode::mmt};
  } else {
    modes = {parse_mode(o.bench_mode)};
  }
  std::vector<ModelWeights> loaded;
  for (const auto& path : o.bench_weights) loaded.push_back(load_weights(path));
  std::vector<BenchReport> reports;
  for (Mode m : modes) {
    const auto it = std::find_if(loaded.begin(), loaded.end(), [&](const ModelWeights& w) { return w.config.mode == m; });
    if (it == loaded.end()) {
      throw ParameterError("bench: no --weights file for mode " + std::string(to_string(m)));
    }
    reports.push_back(rtf_bench(*it, m, o.frames, detail::bank_for(it->config), o.seed));
  }
  const bool both = reports.size() == 2;
  const double speedup = both ? reports[0].rtf / reports[1].rtf : 0.0;
  if (o.json) {
    nlohmann::ordered_json j;
    j["reports"] = nlohmann::ordered_json::array();
    for (const auto& r : reports) j["reports"].push_back(detail::report_json(r));
    if (both) {
      j["speedup"] = speedup;
      j["step_ratio"] = static_cast<double>(reports[0].forward_steps) / static_cast<double>(reports[1].forward_steps);
    }
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (i) out << "\n";
    detail::print_report(out, reports[i]);
  }
  if (both) {
    out << "\nstep_ratio: "
        << detail::fmt_double(static_cast<double>(reports[0].forward_steps) / static_cast<double>(reports[1].forward_steps), 3)
        << "\n"
        << "speedup: " << detail::fmt_double(speedup, 3) << " (rtf_baseline / rtf_mmt)\n";
  }
  return kExitOk;
}

inline int cmd_flops(const CliOptions& o, std::ostream& out) {
  ComplexityParams mmt = o.flops;
  ComplexityParams base = mmt;
  base.bands = 1;
  base.time_span = 1;
  const auto bb = flops_breakdown(base), bm = flops_breakdown(mmt);
  const auto line = [&](const char* label, const ComplexityParams& p, const FlopsBreakdown& b) {
    out << label << " (bands=" << p.bands << ", timespan=" << p.time_span << "): " << std::setprecision(10)
        << b.total * 1e-9 << " GFLOPS  [gru_a " << b.gru_a * 1e-9 << ", gru_b " << b.gru_b * 1e-9 << ", output "
        << b.output * 1e-9 << "]\n";
  };
  line("baseline", base, bb);
  line("mmt", mmt, bm);
  out << "ratio: " << std::setprecision(6) << bb.total / bm.total << "\n"
      << "reference: published LPCNet figures for these configurations are 2.8 (baseline) and 1.0 (mmt) GFLOPS\n";
  return kExitOk;
}

inline int cmd_fb_check(const CliOptions& o, std::ostream& out) {
  if (o.signal == "sine" && !(o.freq > 0.0 && o.freq < kSampleRate / 2)) {
    throw ParameterError("--freq must lie in (0, 8000) Hz");
  }
  if (o.length == 0) throw ParameterError("--length must be positive");
  const PrototypeFilterBank fb = design_prototype(o.bands, o.taps);
  std::vector<double> x(o.length, 0.0);
  if (o.signal == "impulse") {
    x[0] = 1.0;
  } else if (o.signal == "noise") {
    CounterRng rng(o.seed);
    for (double& v : x) v = 2.0 * rng.uniform() - 1.0;
  } else if (o.signal == "sine") {
    for (std::size_t n = 0; n < x.size(); ++n) {
      x[n] = 0.5 * std::sin(2.0 * std::numbers::pi * o.freq * static_cast<double>(n) / kSampleRate);
    }
  } else {
    throw ParameterError("--signal must be impulse, noise or sine");
  }
  // Zero tail so the delayed reconstruction covers the whole input.
  std::vector<double> padded = x;
  padded.resize(x.size() + fb.group_delay + o.bands, 0.0);
  const auto y = synthesis(analysis(padded, fb), fb);
  const double snr = reconstruction_snr(x, y, fb.group_delay);
  out << "bands: " << fb.bands << "\n"
      << "taps: " << fb.taps << "\n"
      << "group_delay: " << fb.group_delay << "\n"
      << "snr_db: " << (std::isinf(snr) ? std::string("exact") : detail::fmt_double(snr, 2)) << "\n";
  const bool ok = snr >= kSnrThresholdDb;
  out << (ok ? "PASS" : "FAIL") << " (threshold " << kSnrThresholdDb << " dB)\n";
  return ok ? kExitOk : kExitFailure;
}

inline int cmd_attn_demo(const CliOptions& o, std::ostream& out) {
  if (o.enc_len == 0 || o.dec_len == 0) throw ParameterError("--enc-len and --dec-len must be positive");
  CounterRng rng(o.seed);
  detail::AttnDemoResult r;
  if (o.mechanism == "lsa") {
    r = detail::demo_lsa(o.enc_len, o.dec_len, rng);
  } else if (o.mechanism == "forward") {
    r = detail::demo_forward(o.enc_len, o.dec_len, rng);
  } else if (o.mechanism == "gmm") {
    r = detail::demo_gmm(o.enc_len, o.dec_len, rng);
  } else {
    throw ParameterError("--mechanism must be lsa, forward or gmm");
  }
  for (std::size_t t = 0; t < r.alignment.dec_steps(); ++t) {
    const auto row = r.alignment.row(t);
    out << std::setw(4) << t << " |" << detail::heat_row(row) << "| sum=" << detail::fmt_double(detail::row_sum(row), 3);
    if (t < r.notes.size()) out << "  " << r.notes[t];
    out << "\n";
  }
  bool all = true;
  for (const auto& [name, ok] : r.checks) {
    out << (ok ? "PASS" : "FAIL") << " " << name << "\n";
    all = all && ok;
  }
  return all ? kExitOk : kExitFailure;
}

inline int cmd_gen_weights(const CliOptions& o, std::ostream& out) {
  const ModelWeights w = gen_random_weights(o.seed, parse_mode(o.gen_mode));
  save_weights(o.out, w);
  out << "wrote " << o.out << " (" << to_string(w.config.mode) << ", seed " << o.seed << ")\n";
  return kExitOk;
}

inline int cmd_gen_features(const CliOptions& o, std::ostream& out) {
  write_feature_file(o.out, random_features(o.gen_frames, o.seed));
  out << "wrote " << o.out << " (" << o.gen_frames << " frames, seed " << o.seed << ")\n";
  return kExitOk;
}

// args excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-band multi-time LPC vocoder toolkit", "mmlpc"};
  app.require_subcommand(1);
  CliOptions o;

  auto* synth = app.add_subcommand("synth", "Synthesize a WAV file from a feature file");
  synth->add_option("--weights", o.weights, "MMLP weights file")->required();
  synth->add_option("--features", o.features, ".f32feat feature file")->required();
  synth->add_option("--out", o.out, "Output WAV path")->required();
  synth->add_option("--mode", o.mode, "baseline or mmt (default: the weights' mode)");
  synth->add_option("--seed", o.seed, "Sampling seed")->capture_default_str();
  synth->add_option("--temperature", o.temperature, "Sampling temperature")->capture_default_str();

  auto* bench = app.add_subcommand("bench", "Measure real-time factor");
  bench->add_option("--weights", o.bench_weights, "MMLP weights file; repeat to give one per mode")->required();
  bench->add_option("--frames", o.frames, "Frames per run")->capture_default_str();
  bench->add_option("--mode", o.bench_mode, "baseline, mmt or both")->capture_default_str();
  bench->add_option("--seed", o.seed, "Feature and sampling seed")->capture_default_str();
  bench->add_flag("--json", o.json, "Emit JSON");

  auto* flops = app.add_subcommand("flops", "Evaluate the analytic SRN complexity model");
  flops->add_option("--d", o.flops.d, "GRU-A density")->capture_default_str();
  flops->add_option("--ga", o.flops.gru_a, "GRU-A units")->capture_default_str();
  flops->add_option("--gb", o.flops.gru_b, "GRU-B units")->capture_default_str();
  flops->add_option("--q", o.flops.q, "Output levels")->capture_default_str();
  flops->add_option("--bands", o.flops.bands, "Subbands")->capture_default_str();
  flops->add_option("--timespan", o.flops.time_span, "Time span")->capture_default_str();
  flops->add_option("--fs", o.flops.fs, "Sample rate (Hz)")->capture_default_str();

  auto* fb = app.add_subcommand("fb-check", "Pseudo-QMF analysis/synthesis round trip");
  fb->add_option("--bands", o.bands, "Subbands (1, 2, 4 or 8)")->capture_default_str();
  fb->add_option("--taps", o.taps, "Prototype length")->capture_default_str();
  fb->add_option("--signal", o.signal, "impulse, noise or sine")->capture_default_str();
  fb->add_option("--freq", o.freq, "Sine frequency (Hz)")->capture_default_str();
  fb->add_option("--length", o.length, "Signal length in samples")->capture_default_str();
  fb->add_option("--seed", o.seed, "Noise seed")->capture_default_str();

  auto* attn = app.add_subcommand("attn-demo", "Run an attention mechanism on synthetic states");
  attn->add_option("--mechanism", o.mechanism, "lsa, forward or gmm")->required();
  attn->add_option("--enc-len", o.enc_len, "Encoder steps")->capture_default_str();
  attn->add_option("--dec-len", o.dec_len, "Decoder steps")->capture_default_str();
  attn->add_option("--seed", o.seed, "Seed")->capture_default_str();

  auto* gw = app.add_subcommand("gen-weights", "Write random MMLP weights");
  gw->add_option("--mode", o.gen_mode, "baseline or mmt")->capture_default_str();
  gw->add_option("--seed", o.seed, "Seed")->capture_default_str();
  gw->add_option("--out", o.out, "Output path")->required();

  auto* gf = app.add_subcommand("gen-features", "Write random feature frames");
  gf->add_option("--frames", o.gen_frames, "Frame count")->capture_default_str();
  gf->add_option("--seed", o.seed, "Seed")->capture_default_str();
  gf->add_option("--out", o.out, "Output path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(o, out);
    if (bench->parsed()) return cmd_bench(o, out);
    if (flops->parsed()) return cmd_flops(o, out);
    if (fb->parsed()) return cmd_fb_check(o, out);
    if (attn->parsed()) return cmd_attn_demo(o, out);
    if (gw->parsed()) return cmd_gen_weights(o, out);
    if (gf->parsed()) return cmd_gen_features(o, out);
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const MalformedInputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace mmlpc::cli
