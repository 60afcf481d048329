#pragma once

// Pseudo-QMF cosine-modulated filter bank.
//
// A linear-phase Kaiser-windowed lowpass prototype h[n] (cutoff near pi/2N)
// is modulated into N analysis and N synthesis filters
//
//   a_k[n] = 2 h[n] cos((2k+1) pi/(2N) (n - (L-1)/2) + theta_k)
//   s_k[n] = 2 h[n] cos((2k+1) pi/(2N) (n - (L-1)/2) - theta_k)
//
// with theta_k = (-1)^k pi/4, which cancels adjacent-band aliasing. The
// prototype cutoff is picked by golden-section search on the worst-case
// impulse roundtrip error, and the prototype is scaled so the composite
// distortion response has unit mean magnitude. Roundtrip delay is L - 1.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mmlpc/error.hpp"

namespace mmlpc {

struct PrototypeFilterBank {
  std::size_t bands = 0;
  std::size_t taps = 0;
  std::vector<double> prototype;              // taps
  std::vector<std::vector<double>> analysis;  // bands x taps
  std::vector<std::vector<double>> synthesis; // bands x taps
  std::size_t group_delay = 0;                // analysis + synthesis, samples
  double cutoff = 0.0;                        // radians/sample
  double kaiser_beta = 0.0;
};

struct SubbandSignals {
  std::vector<std::vector<double>> bands;

  std::size_t band_count() const { return bands.size(); }
  std::size_t length() const { return bands.empty() ? 0 : bands.front().size(); }
};

// Stopband attenuation the Kaiser window is sized for.
inline constexpr double kPrototypeAttenuationDb = 85.0;

namespace detail {

inline double kaiser_beta_for(double attenuation_db) {
  if (attenuation_db > 50.0) return 0.1102 * (attenuation_db - 8.7);
  if (attenuation_db >= 21.0) {
    return 0.5842 * std::pow(attenuation_db - 21.0, 0.4) + 0.07886 * (attenuation_db - 21.0);
  }
  return 0.0;
}

inline std::vector<double> kaiser_sinc_prototype(std::size_t taps, double cutoff, double beta) {
  std::vector<double> h(taps);
  const double centre = (static_cast<double>(taps) - 1.0) / 2.0;
  const double i0_beta = std::cyl_bessel_i(0.0, beta);
  // Mirrored from the first half so the taps are symmetric bit for bit.
  for (std::size_t n = 0; n < (taps + 1) / 2; ++n) {
    const double t = static_cast<double>(n) - centre;
    const double sinc = t == 0.0 ? cutoff / std::numbers::pi : std::sin(cutoff * t) / (std::numbers::pi * t);
    const double r = 2.0 * static_cast<double>(n) / (static_cast<double>(taps) - 1.0) - 1.0;
    const double w = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
    h[n] = sinc * w;
    h[taps - 1 - n] = h[n];
  }
  return h;
}

inline void modulate(PrototypeFilterBank& fb) {
  const std::size_t n_bands = fb.bands;
  const double centre = (static_cast<double>(fb.taps) - 1.0) / 2.0;
  fb.analysis.assign(n_bands, std::vector<double>(fb.taps));
  fb.synthesis.assign(n_bands, std::vector<double>(fb.taps));
  for (std::size_t k = 0; k < n_bands; ++k) {
    const double theta = (k % 2 == 0 ? 1.0 : -1.0) * std::numbers::pi / 4.0;
    const double omega = (2.0 * k + 1.0) * std::numbers::pi / (2.0 * n_bands);
    for (std::size_t n = 0; n < fb.taps; ++n) {
      const double phase = omega * (static_cast<double>(n) - centre);
      fb.analysis[k][n] = 2.0 * fb.prototype[n] * std::cos(phase + theta);
      fb.synthesis[k][n] = 2.0 * fb.prototype[n] * std::cos(phase - theta);
    }
  }
}

// Mean magnitude of the alias-free composite response sum_k A_k(w) S_k(w).
inline double composite_mean_gain(const PrototypeFilterBank& fb) {
  std::vector<double> t(2 * fb.taps - 1, 0.0);
  for (std::size_t k = 0; k < fb.bands; ++k) {
    for (std::size_t i = 0; i < fb.taps; ++i) {
      for (std::size_t j = 0; j < fb.taps; ++j) t[i + j] += fb.analysis[k][i] * fb.synthesis[k][j];
    }
  }
  constexpr std::size_t kGrid = 512;
  double acc = 0.0;
  for (std::size_t g = 0; g < kGrid; ++g) {
    const double w = std::numbers::pi * (static_cast<double>(g) + 0.5) / kGrid;
    std::complex<double> z = 0.0;
    for (std::size_t n = 0; n < t.size(); ++n) z += t[n] * std::polar(1.0, -w * static_cast<double>(n));
    acc += std::abs(z);
  }
  return acc / kGrid;
}

inline PrototypeFilterBank build_bank(std::size_t bands, std::size_t taps, double cutoff, double beta) {
  PrototypeFilterBank fb;
  fb.bands = bands;
  fb.taps = taps;
  fb.cutoff = cutoff;
  fb.kaiser_beta = beta;
  fb.group_delay = taps - 1;
  fb.prototype = kaiser_sinc_prototype(taps, cutoff, beta);
  modulate(fb);
  const double scale = 1.0 / std::sqrt(composite_mean_gain(fb));
  for (double& h : fb.prototype) h *= scale;
  modulate(fb);
  return fb;
}

// N=1 degenerates to a pure delay of L-1: the prototype holds 1/2 at its two
// centre taps, so the analysis row is a unit tap at L/2-1 and the synthesis
// row a unit tap at L/2.
inline PrototypeFilterBank build_identity_bank(std::size_t taps) {
  PrototypeFilterBank fb;
  fb.bands = 1;
  fb.taps = taps;
  fb.group_delay = taps - 1;
  fb.cutoff = std::numbers::pi;
  fb.prototype.assign(taps, 0.0);
  fb.prototype[taps / 2 - 1] = 0.5;
  fb.prototype[taps / 2] = 0.5;
  fb.analysis.assign(1, std::vector<double>(taps, 0.0));
  fb.synthesis.assign(1, std::vector<double>(taps, 0.0));
  fb.analysis[0][taps / 2 - 1] = 1.0;
  fb.synthesis[0][taps / 2] = 1.0;
  return fb;
}

}  // namespace detail

// Filters with each analysis row and keeps every N-th output:
//   out_k[m] = sum_j a_k[j] x[mN - j],  m = 0 .. ceil(T/N)-1, zero-padded.
inline SubbandSignals analysis(std::span<const double> signal, const PrototypeFilterBank& fb) {
  if (fb.bands == 0) throw ParameterError("analysis: filter bank has no bands");
  const std::size_t n = fb.bands;
  const std::size_t len = (signal.size() + n - 1) / n;
  SubbandSignals out;
  out.bands.assign(n, std::vector<double>(len, 0.0));
  for (std::size_t k = 0; k < n; ++k) {
    const auto& a = fb.analysis[k];
    auto& band = out.bands[k];
    for (std::size_t m = 0; m < len; ++m) {
      const std::size_t centre = m * n;
      const std::size_t jmax = std::min(fb.taps - 1, centre);
      double acc = 0.0;
      for (std::size_t j = 0; j <= jmax; ++j) {
        const std::size_t idx = centre - j;
        if (idx < signal.size()) acc += a[j] * signal[idx];
      }
      band[m] = acc;
    }
  }
  return out;
}

// Upsamples each band by N, filters with its synthesis row, sums, scales by N.
// Output length is N times the band length.
inline std::vector<double> synthesis(const SubbandSignals& subbands, const PrototypeFilterBank& fb) {
  const std::size_t n = fb.bands;
  if (subbands.band_count() != n) {
    throw ParameterError("synthesis: expected " + std::to_string(n) + " bands, got " +
                         std::to_string(subbands.band_count()));
  }
  const std::size_t len = subbands.length();
  for (const auto& b : subbands.bands) {
    if (b.size() != len) throw ParameterError("synthesis: subband lengths differ");
  }
  std::vector<double> out(n * len, 0.0);
  const double gain = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& s = fb.synthesis[k];
    const auto& band = subbands.bands[k];
    for (std::size_t m = 0; m < len; ++m) {
      const double v = gain * band[m];
      if (v == 0.0) continue;
      const std::size_t base = m * n;
      const std::size_t jend = std::min(fb.taps, out.size() - base);
      for (std::size_t j = 0; j < jend; ++j) out[base + j] += s[j] * v;
    }
  }
  return out;
}

// 10 log10(sum x^2 / sum (x[n] - y[n + delay])^2) over the overlap.
// Returns +infinity for an exact match.
inline double reconstruction_snr(std::span<const double> original, std::span<const double> reconstructed,
                                 std::size_t delay) {
  if (reconstructed.size() <= delay) throw ParameterError("reconstruction_snr: empty overlap");
  const std::size_t overlap = std::min(original.size(), reconstructed.size() - delay);
  if (overlap == 0) throw ParameterError("reconstruction_snr: empty overlap");
  double signal = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < overlap; ++i) {
    const double d = original[i] - reconstructed[i + delay];
    signal += original[i] * original[i];
    noise += d * d;
  }
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / noise);
}

// Worst-case (over the N input phases) roundtrip error energy for a unit impulse.
inline double impulse_roundtrip_error(const PrototypeFilterBank& fb) {
  const std::size_t n = fb.bands;
  const std::size_t len = 8 * fb.taps;
  double worst = 0.0;
  for (std::size_t phase = 0; phase < n; ++phase) {
    std::vector<double> x(len, 0.0);
    x[2 * fb.taps + phase] = 1.0;
    const auto y = synthesis(analysis(x, fb), fb);
    double err = 0.0;
    for (std::size_t i = 0; i + fb.group_delay < y.size() && i < len; ++i) {
      const double d = x[i] - y[i + fb.group_delay];
      err += d * d;
    }
    worst = std::max(worst, err);
  }
  return worst;
}

inline PrototypeFilterBank design_prototype(std::size_t bands, std::size_t taps) {
  if (bands == 1) {
    if (taps < 2 || taps % 2 != 0) throw ParameterError("design_prototype: taps must be even for one band");
    return detail::build_identity_bank(taps);
  }
  if (bands != 2 && bands != 4 && bands != 8) {
    throw ParameterError("design_prototype: bands must be 1, 2, 4 or 8, got " + std::to_string(bands));
  }
  if (taps % (2 * bands) != 0 || taps < 8 * bands) {
    throw ParameterError("design_prototype: taps must be a multiple of " + std::to_string(2 * bands) +
                         " and at least " + std::to_string(8 * bands) + ", got " + std::to_string(taps));
  }

  const double beta = detail::kaiser_beta_for(kPrototypeAttenuationDb);
  const double nominal = std::numbers::pi / (2.0 * static_cast<double>(bands));
  const auto cost = [&](double cutoff) {
    return impulse_roundtrip_error(detail::build_bank(bands, taps, cutoff, beta));
  };

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.7 * nominal, hi = 1.5 * nominal;
  double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
  double f1 = cost(x1), f2 = cost(x2);
  while (hi - lo > 1e-7 * nominal) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = cost(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = cost(x2);
    }
  }
  return detail::build_bank(bands, taps, 0.5 * (lo + hi), beta);
}

}  // namespace mmlpc
