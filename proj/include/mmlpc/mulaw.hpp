#pragma once

// 8-bit mu-law companding (mu = 255) over samples normalized to [-1, 1].

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace mmlpc {

using MuLawIndex = std::uint8_t;

inline constexpr int kMuLawLevels = 256;
inline constexpr MuLawIndex kMuLawZero = 128;

namespace detail {
inline constexpr double kMu = 255.0;
inline const double kLogMuPlusOne = std::log(256.0);
}  // namespace detail

inline MuLawIndex mulaw_encode(double x) {
  if (std::isnan(x)) x = 0.0;
  x = std::clamp(x, -1.0, 1.0);
  const double mag = 128.0 * std::log1p(detail::kMu * std::abs(x)) / detail::kLogMuPlusOne;
  const double u = 128.0 + (x < 0.0 ? -mag : mag);
  return static_cast<MuLawIndex>(std::clamp(std::floor(u + 0.5), 0.0, 255.0));
}

inline double mulaw_decode(MuLawIndex index) {
  const int u = static_cast<int>(index) - 128;
  const double mag = std::expm1(std::abs(u) / 128.0 * detail::kLogMuPlusOne) / detail::kMu;
  return u < 0 ? -mag : mag;
}

}  // namespace mmlpc
