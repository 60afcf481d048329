#pragma once

// Conditioning features and the cepstrum -> spectrum -> autocorrelation -> LPC
// chain used to drive the per-band linear predictors.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mmlpc/detail/bytes.hpp"
#include "mmlpc/detail/fft.hpp"
#include "mmlpc/error.hpp"

namespace mmlpc {

inline constexpr std::size_t kCepstrumSize = 18;
inline constexpr std::size_t kFeatureDim = kCepstrumSize + 2;
inline constexpr std::size_t kFrameBytes = kFeatureDim * 4;
inline constexpr std::size_t kLpcOrder = 16;
inline constexpr double kSampleRate = 16000.0;
inline constexpr std::size_t kDefaultFftSize = 256;

// Bark band anchor frequencies in units of 200 Hz, 0..8 kHz. One anchor per
// cepstral band; the band envelope is linearly interpolated between anchors.
inline constexpr std::array<int, kCepstrumSize> kBarkEdges200Hz = {
    0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 14, 16, 20, 24, 28, 34, 40};

struct FeatureFrame {
  std::array<float, kCepstrumSize> cepstrum{};
  float pitch_period = 0.0f;       // samples
  float pitch_correlation = 0.0f;  // [-1, 1]

  // Throws ValidationError naming `index` if any invariant is broken.
  void validate(std::size_t index = 0) const {
    const auto where = [&] { return "feature frame " + std::to_string(index) + ": "; };
    for (float c : cepstrum) {
      if (!std::isfinite(c)) throw ValidationError(where() + "non-finite cepstral coefficient");
    }
    if (!std::isfinite(pitch_period) || !std::isfinite(pitch_correlation)) {
      throw ValidationError(where() + "non-finite pitch parameter");
    }
    if (!(pitch_period > 0.0f)) throw ValidationError(where() + "pitch_period must be > 0");
    if (pitch_correlation < -1.0f || pitch_correlation > 1.0f) {
      throw ValidationError(where() + "pitch_correlation outside [-1, 1]");
    }
  }

  friend bool operator==(const FeatureFrame&, const FeatureFrame&) = default;
};

// ---------------------------------------------------------------------------
// .f32feat files: 20 little-endian float32 per frame, frame-major, no header.

inline std::vector<FeatureFrame> parse_feature_file(std::span<const std::byte> bytes) {
  if (bytes.size() % kFrameBytes != 0) {
    throw MalformedInputError("feature data length " + std::to_string(bytes.size()) +
                              " bytes is not a multiple of " + std::to_string(kFrameBytes));
  }
  std::vector<FeatureFrame> frames(bytes.size() / kFrameBytes);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const std::size_t base = f * kFrameBytes;
    auto& fr = frames[f];
    for (std::size_t i = 0; i < kCepstrumSize; ++i) fr.cepstrum[i] = detail::get_f32(bytes, base + 4 * i);
    fr.pitch_period = detail::get_f32(bytes, base + 4 * kCepstrumSize);
    fr.pitch_correlation = detail::get_f32(bytes, base + 4 * (kCepstrumSize + 1));
    fr.validate(f);
  }
  return frames;
}

inline std::vector<std::byte> serialize_features(std::span<const FeatureFrame> frames) {
  std::vector<std::byte> out;
  out.reserve(frames.size() * kFrameBytes);
  for (const auto& fr : frames) {
    for (float c : fr.cepstrum) detail::put_f32(out, c);
    detail::put_f32(out, fr.pitch_period);
    detail::put_f32(out, fr.pitch_correlation);
  }
  return out;
}

inline std::vector<FeatureFrame> read_feature_file(const std::string& path) {
  const auto bytes = detail::read_file(path);
  try {
    return parse_feature_file(bytes);
  } catch (const MalformedInputError& e) {
    throw MalformedInputError(path + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline void write_feature_file(const std::string& path, std::span<const FeatureFrame> frames) {
  detail::write_file(path, serialize_features(frames));
}

// ---------------------------------------------------------------------------

struct PowerSpectrum {
  std::vector<double> bins;  // fft_size/2 + 1 linear-frequency bins

  std::size_t fft_size() const { return bins.empty() ? 0 : 2 * (bins.size() - 1); }
};

struct LpcCoeffs {
  // Predictor p[t] = sum_{k=1..order} coeffs[k-1] * s[t-k].
  std::vector<double> coeffs;

  std::size_t order() const { return coeffs.size(); }
  static LpcCoeffs zeros(std::size_t order = kLpcOrder) { return {std::vector<double>(order, 0.0)}; }
};

namespace detail {

inline void check_fft_size(std::size_t fft_size) {
  if (fft_size < 64 || !is_power_of_two(fft_size)) {
    throw ParameterError("fft_size must be a power of two >= 64, got " + std::to_string(fft_size));
  }
}

// Orthonormal inverse DCT-II over the Bark bands: cepstrum -> log10 band energy.
inline std::array<double, kCepstrumSize> bark_log_energy(const FeatureFrame& frame) {
  constexpr double n = static_cast<double>(kCepstrumSize);
  std::array<double, kCepstrumSize> out{};
  for (std::size_t j = 0; j < kCepstrumSize; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < kCepstrumSize; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      acc += scale * frame.cepstrum[k] * std::cos(std::numbers::pi * k * (j + 0.5) / n);
    }
    out[j] = acc;
  }
  return out;
}

}  // namespace detail

inline PowerSpectrum cepstrum_to_spectrum(const FeatureFrame& frame, std::size_t fft_size = kDefaultFftSize) {
  detail::check_fft_size(fft_size);
  const auto log_energy = detail::bark_log_energy(frame);
  std::array<double, kCepstrumSize> gain{};
  for (std::size_t j = 0; j < kCepstrumSize; ++j) gain[j] = std::pow(10.0, log_energy[j]);

  PowerSpectrum spec;
  spec.bins.resize(fft_size / 2 + 1);
  const double bin_hz = kSampleRate / static_cast<double>(fft_size);
  std::size_t band = 0;
  for (std::size_t i = 0; i < spec.bins.size(); ++i) {
    const double f = i * bin_hz;
    while (band + 2 < kCepstrumSize && f >= kBarkEdges200Hz[band + 1] * 200.0) ++band;
    const double lo = kBarkEdges200Hz[band] * 200.0;
    const double hi = kBarkEdges200Hz[band + 1] * 200.0;
    const double frac = std::clamp((f - lo) / (hi - lo), 0.0, 1.0);
    const double v = (1.0 - frac) * gain[band] + frac * gain[band + 1];
    if (!std::isfinite(v)) throw NumericError("cepstrum_to_spectrum: non-finite spectral value");
    spec.bins[i] = v;
  }
  return spec;
}

// Wiener-Khinchin: inverse real FFT of the (even-symmetric) power spectrum,
// truncated to lags 0..order.
inline std::vector<double> spectrum_to_autocorrelation(const PowerSpectrum& spectrum,
                                                       std::size_t order = kLpcOrder) {
  const std::size_t m = spectrum.fft_size();
  if (m < 2 || !detail::is_power_of_two(m)) {
    throw ParameterError("power spectrum must have 2^k/2 + 1 bins");
  }
  if (order >= m) throw ParameterError("autocorrelation order must be below the FFT size");
  bool any = false;
  for (double p : spectrum.bins) {
    if (!std::isfinite(p) || p < 0.0) throw ParameterError("power spectrum bins must be finite and >= 0");
    any = any || p > 0.0;
  }
  if (!any) throw DegenerateInputError("all-zero power spectrum has no autocorrelation");

  std::vector<std::complex<double>> buf(m);
  for (std::size_t f = 0; f <= m / 2; ++f) {
    buf[f] = spectrum.bins[f];
    if (f != 0 && f != m / 2) buf[m - f] = spectrum.bins[f];
  }
  detail::fft_inplace(buf, +1);
  std::vector<double> r(order + 1);
  for (std::size_t k = 0; k <= order; ++k) r[k] = buf[k].real() / static_cast<double>(m);
  return r;
}

struct LevinsonResult {
  LpcCoeffs lpc;
  std::vector<double> reflection;  // k_1..k_order
  std::vector<double> residual;    // prediction error energy, E_0..E_order
  bool regularized = false;
};

namespace detail {

// Returns false if a reflection coefficient reaches |k| >= 1.
inline bool levinson_recursion(std::span<const double> r, std::size_t order, LevinsonResult& out) {
  std::vector<double> a(order, 0.0), prev(order, 0.0);
  out.reflection.assign(order, 0.0);
  out.residual.assign(1, r[0]);
  double err = r[0];
  for (std::size_t i = 1; i <= order; ++i) {
    double acc = r[i];
    for (std::size_t j = 1; j < i; ++j) acc -= a[j - 1] * r[i - j];
    const double k = acc / err;
    if (!std::isfinite(k) || std::abs(k) >= 1.0) return false;
    prev = a;
    a[i - 1] = k;
    for (std::size_t j = 1; j < i; ++j) a[j - 1] = prev[j - 1] - k * prev[i - j - 1];
    err *= (1.0 - k * k);
    out.reflection[i - 1] = k;
    out.residual.push_back(err);
  }
  out.lpc.coeffs = std::move(a);
  return true;
}

}  // namespace detail

inline LevinsonResult levinson_durbin_detailed(std::span<const double> autocorr, std::size_t order = kLpcOrder) {
  if (order == 0) throw ParameterError("LPC order must be positive");
  if (autocorr.size() < order + 1) {
    throw ParameterError("levinson_durbin needs " + std::to_string(order + 1) + " autocorrelation lags");
  }
  if (!(autocorr[0] > 0.0)) throw DegenerateInputError("levinson_durbin: r[0] must be > 0");
  for (std::size_t i = 0; i <= order; ++i) {
    if (!std::isfinite(autocorr[i])) throw NumericError("levinson_durbin: non-finite autocorrelation");
  }

  LevinsonResult out;
  if (detail::levinson_recursion(autocorr, order, out)) return out;

  // Gaussian lag window, -40 dB at lag 16, plus a 1e-6 white-noise floor.
  const double alpha2 = 2.0 * std::log(100.0) / (16.0 * 16.0);
  std::vector<double> r(autocorr.begin(), autocorr.begin() + static_cast<std::ptrdiff_t>(order) + 1);
  for (std::size_t k = 0; k <= order; ++k) r[k] *= std::exp(-0.5 * alpha2 * static_cast<double>(k * k));
  r[0] += 1e-6 * autocorr[0];
  out = LevinsonResult{};
  if (!detail::levinson_recursion(r, order, out)) {
    throw NumericError("levinson_durbin: unstable even after lag-window regularization");
  }
  out.regularized = true;
  return out;
}

inline LpcCoeffs levinson_durbin(std::span<const double> autocorr, std::size_t order = kLpcOrder) {
  return levinson_durbin_detailed(autocorr, order).lpc;
}

// ---------------------------------------------------------------------------
// Per-subband predictors.
//
// Band b of an N-band critically sampled bank occupies bins [b*K, (b+1)*K] of
// the full-band spectrum, K = fft_size / (2N). After decimation by N that range
// becomes the full half-spectrum of the subband signal; odd bands arrive
// frequency-reversed.

struct SubbandLpc {
  LpcCoeffs lpc;
  bool degenerate = false;  // band had no energy; lpc is all zeros
};

inline PowerSpectrum subband_spectrum(const PowerSpectrum& full, std::size_t band, std::size_t bands) {
  const std::size_t m = full.fft_size();
  if (bands == 0 || band >= bands) throw ParameterError("subband index out of range");
  if (m % (2 * bands) != 0 || m / bands <= kLpcOrder) {
    throw ParameterError("fft_size too small for the requested number of bands");
  }
  const std::size_t k = m / (2 * bands);
  PowerSpectrum sub;
  sub.bins.assign(full.bins.begin() + static_cast<std::ptrdiff_t>(band * k),
                  full.bins.begin() + static_cast<std::ptrdiff_t>((band + 1) * k + 1));
  if (band % 2 == 1) std::reverse(sub.bins.begin(), sub.bins.end());
  return sub;
}

inline SubbandLpc subband_lpc_from_spectrum(const PowerSpectrum& full, std::size_t band, std::size_t bands) {
  const PowerSpectrum sub = subband_spectrum(full, band, bands);
  double total = 0.0;
  for (double p : full.bins) total += p;
  double energy = 0.0;
  for (double p : sub.bins) energy += p;
  if (total > 0.0 && energy < 1e-12 * total) return {LpcCoeffs::zeros(), true};
  const auto r = spectrum_to_autocorrelation(sub, kLpcOrder);
  return {levinson_durbin(r, kLpcOrder), false};
}

inline SubbandLpc subband_lpc(const FeatureFrame& frame, std::size_t band, std::size_t bands = 4,
                              std::size_t fft_size = kDefaultFftSize) {
  return subband_lpc_from_spectrum(cepstrum_to_spectrum(frame, fft_size), band, bands);
}

// Full-band predictor used by the single-band loop.
inline LpcCoeffs fullband_lpc(const FeatureFrame& frame, std::size_t fft_size = kDefaultFftSize) {
  const auto r = spectrum_to_autocorrelation(cepstrum_to_spectrum(frame, fft_size), kLpcOrder);
  return levinson_durbin(r, kLpcOrder);
}

}  // namespace mmlpc
