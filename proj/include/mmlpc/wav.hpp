#pragma once

// Canonical 44-byte-header PCM WAV, 16-bit mono.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmlpc/detail/bytes.hpp"
#include "mmlpc/features.hpp"

namespace mmlpc {

inline constexpr std::size_t kWavHeaderBytes = 44;

// Clamp to [-1, 1], scale by 32767, round half away from zero. NaN maps to 0.
inline std::int16_t to_pcm16(double x) {
  if (std::isnan(x)) return 0;
  const double c = x < -1.0 ? -1.0 : (x > 1.0 ? 1.0 : x);
  return static_cast<std::int16_t>(std::lround(c * 32767.0));
}

inline std::vector<std::byte> encode_wav(std::span<const double> samples, std::uint32_t sample_rate = 16000) {
  const auto data_bytes = static_cast<std::uint32_t>(2 * samples.size());
  std::vector<std::byte> out;
  out.reserve(kWavHeaderBytes + data_bytes);
  const auto tag = [&](const char* s) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>(s[i]));
  };
  tag("RIFF");
  detail::put_u32(out, 36 + data_bytes);
  tag("WAVE");
  tag("fmt ");
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);  // PCM
  detail::put_u16(out, 1);  // mono
  detail::put_u32(out, sample_rate);
  detail::put_u32(out, sample_rate * 2);
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  tag("data");
  detail::put_u32(out, data_bytes);
  for (double s : samples) detail::put_u16(out, static_cast<std::uint16_t>(to_pcm16(s)));
  return out;
}

inline void write_wav(std::span<const double> samples, const std::string& path) {
  detail::write_file(path, encode_wav(samples, static_cast<std::uint32_t>(kSampleRate)));
}

}  // namespace mmlpc
