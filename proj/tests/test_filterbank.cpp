#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "support.hpp"

using namespace mmlpc;

namespace {

const PrototypeFilterBank& bank4() {
  static const PrototypeFilterBank fb = design_prototype(4, 64);
  return fb;
}

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<double> x(n);
  for (double& v : x) v = 2.0 * rng.uniform() - 1.0;
  return x;
}

std::vector<double> sine(std::size_t n, double hz) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 0.5 * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / 16000.0);
  return x;
}

std::vector<double> impulse(std::size_t n, std::size_t at) {
  std::vector<double> x(n, 0.0);
  x[at] = 1.0;
  return x;
}

// Zero tail so every input sample survives the delayed roundtrip.
double roundtrip_snr(const PrototypeFilterBank& fb, const std::vector<double>& x) {
  std::vector<double> padded = x;
  padded.resize(x.size() + fb.group_delay + fb.bands, 0.0);
  return reconstruction_snr(x, synthesis(analysis(padded, fb), fb), fb.group_delay);
}

std::map<std::string, double> read_golden() {
  std::ifstream in(std::string(MMLPC_GOLDEN_DIR) + "/pqmf_snr.txt");
  std::map<std::string, double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    double v = 0.0;
    if (ls >> key >> v) out[key] = v;
  }
  return out;
}

}  // namespace

TEST(Design, RejectsInvalidShapes) {
  EXPECT_THROW(design_prototype(3, 48), ParameterError);
  EXPECT_THROW(design_prototype(0, 8), ParameterError);
  EXPECT_THROW(design_prototype(4, 60), ParameterError);  // not a multiple of 8
  EXPECT_THROW(design_prototype(4, 24), ParameterError);  // below 8N
  EXPECT_THROW(design_prototype(1, 3), ParameterError);
}

TEST(Design, PrototypeIsSymmetric) {
  for (auto [n, l] : {std::pair{2u, 32u}, {4u, 64u}, {8u, 128u}}) {
    const auto fb = design_prototype(n, l);
    ASSERT_EQ(fb.prototype.size(), l);
    for (std::size_t k = 0; k < l; ++k) EXPECT_DOUBLE_EQ(fb.prototype[k], fb.prototype[l - 1 - k]);
    EXPECT_EQ(fb.group_delay, l - 1);
  }
}

TEST(Design, RowsAreCosineModulationsOfPrototype) {
  for (auto [n, l] : {std::pair{1u, 8u}, {2u, 32u}, {4u, 64u}, {8u, 128u}}) {
    const auto fb = design_prototype(n, l);
    const double c = (static_cast<double>(l) - 1.0) / 2.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double theta = (k % 2 == 0 ? 1.0 : -1.0) * std::numbers::pi / 4.0;
      for (std::size_t i = 0; i < l; ++i) {
        const double arg = (2.0 * k + 1.0) * std::numbers::pi / (2.0 * n) * (static_cast<double>(i) - c);
        EXPECT_NEAR(fb.analysis[k][i], 2.0 * fb.prototype[i] * std::cos(arg + theta), 1e-15);
        EXPECT_NEAR(fb.synthesis[k][i], 2.0 * fb.prototype[i] * std::cos(arg - theta), 1e-15);
      }
    }
  }
}

TEST(Design, IsDeterministic) {
  const auto a = design_prototype(4, 64), b = design_prototype(4, 64);
  EXPECT_EQ(a.prototype, b.prototype);
  EXPECT_EQ(a.cutoff, b.cutoff);
}

TEST(Analysis, MatchesConvolveThenDecimate) {
  const auto& fb = bank4();
  const auto x = noise(1001, 3);
  const auto sb = analysis(x, fb);
  ASSERT_EQ(sb.band_count(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    // Full linear convolution, then every 4th output.
    std::vector<double> full(x.size() + fb.taps - 1, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t j = 0; j < fb.taps; ++j) full[i + j] += fb.analysis[k][j] * x[i];
    }
    ASSERT_EQ(sb.bands[k].size(), (x.size() + 3) / 4);
    for (std::size_t m = 0; m < sb.bands[k].size(); ++m) ASSERT_NEAR(sb.bands[k][m], full[4 * m], 1e-10);
  }
}

TEST(Analysis, ZeroSignalGivesZeroBands) {
  const auto sb = analysis(std::vector<double>(333, 0.0), bank4());
  for (const auto& b : sb.bands) {
    for (double v : b) EXPECT_EQ(v, 0.0);
  }
}

TEST(Analysis, DcLandsInBandZero) {
  const auto& fb = bank4();
  const auto sb = analysis(std::vector<double>(4000, 1.0), fb);
  std::vector<double> energy(4, 0.0);
  for (std::size_t k = 0; k < 4; ++k) {
    // Steady state only: skip the filter transients at both ends.
    for (std::size_t m = fb.taps; m + fb.taps < sb.bands[k].size(); ++m) energy[k] += sb.bands[k][m] * sb.bands[k][m];
  }
  for (std::size_t k = 1; k < 4; ++k) {
    EXPECT_LT(10.0 * std::log10(energy[k] / energy[0]), -kPrototypeAttenuationDb + 5.0) << "band " << k;
  }
}

TEST(Analysis, Linearity) {
  const auto& fb = bank4();
  const auto x = noise(800, 1), y = noise(800, 2);
  std::vector<double> z(800);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = 0.7 * x[i] - 2.5 * y[i];
  const auto ax = analysis(x, fb), ay = analysis(y, fb), az = analysis(z, fb);
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t m = 0; m < az.bands[k].size(); ++m) {
      ASSERT_NEAR(az.bands[k][m], 0.7 * ax.bands[k][m] - 2.5 * ay.bands[k][m], 1e-10);
    }
  }
}

TEST(Analysis, CriticalSampling) {
  const auto& fb = bank4();
  for (std::size_t t : {1u, 3u, 4u, 5u, 159u, 160u, 1001u}) {
    const auto sb = analysis(std::vector<double>(t, 0.5), fb);
    const std::size_t total = sb.band_count() * sb.length();
    EXPECT_GE(total, t);
    EXPECT_LE(total, t + fb.bands * fb.taps);
  }
}

// Critically sampled bands run at 1/N of the input rate, so the sum of the
// per-band mean powers is compared with the input mean power.
TEST(Analysis, WhiteNoisePowerPreserved) {
  const auto& fb = bank4();
  const auto x = noise(64000, 17);
  double px = 0.0;
  for (double v : x) px += v * v;
  px /= static_cast<double>(x.size());
  const auto sb = analysis(x, fb);
  double ps = 0.0;
  for (const auto& b : sb.bands) {
    double e = 0.0;
    for (double v : b) e += v * v;
    ps += e / static_cast<double>(b.size());
  }
  EXPECT_LT(std::abs(10.0 * std::log10(ps / px)), 0.1);
}

TEST(Synthesis, ZeroBandsGiveZeroOutput) {
  SubbandSignals sb;
  sb.bands.assign(4, std::vector<double>(50, 0.0));
  const auto y = synthesis(sb, bank4());
  ASSERT_EQ(y.size(), 200u);
  for (double v : y) EXPECT_EQ(v, 0.0);
}

TEST(Synthesis, RejectsMismatchedBands) {
  SubbandSignals sb;
  sb.bands.assign(3, std::vector<double>(10, 0.0));
  EXPECT_THROW(synthesis(sb, bank4()), ParameterError);
  sb.bands.assign(4, std::vector<double>(10, 0.0));
  sb.bands[2].resize(11);
  EXPECT_THROW(synthesis(sb, bank4()), ParameterError);
}

TEST(Roundtrip, FourBandsAbove60Db) {
  const auto& fb = bank4();
  EXPECT_GE(roundtrip_snr(fb, impulse(4096, 0)), 60.0);
  for (std::size_t at = 100; at < 104; ++at) EXPECT_GE(roundtrip_snr(fb, impulse(4096, at)), 60.0);
  EXPECT_GE(roundtrip_snr(fb, noise(16000, 42)), 60.0);
  EXPECT_GE(roundtrip_snr(fb, sine(16000, 1000.0)), 60.0);
}

TEST(Roundtrip, OtherBandCountsReconstruct) {
  EXPECT_GE(roundtrip_snr(design_prototype(2, 32), noise(8000, 5)), 60.0);
  EXPECT_GE(roundtrip_snr(design_prototype(8, 128), noise(8000, 5)), 55.0);
}

TEST(Roundtrip, SingleBandIsExact) {
  for (std::size_t taps : {2u, 8u, 64u}) {
    const auto fb = design_prototype(1, taps);
    const auto x = noise(1000, 9);
    std::vector<double> padded = x;
    padded.resize(x.size() + fb.group_delay, 0.0);
    const auto y = synthesis(analysis(padded, fb), fb);
    for (std::size_t i = 0; i < x.size(); ++i) ASSERT_NEAR(y[i + fb.group_delay], x[i], 1e-12);
    EXPECT_TRUE(std::isinf(reconstruction_snr(x, y, fb.group_delay)));
  }
}

TEST(Roundtrip, MatchesGoldenValues) {
  const auto golden = read_golden();
  ASSERT_EQ(golden.count("impulse"), 1u);
  ASSERT_EQ(golden.count("noise"), 1u);
  ASSERT_EQ(golden.count("sine1k"), 1u);
  const auto& fb = bank4();
  EXPECT_NEAR(roundtrip_snr(fb, impulse(16000, 0)), golden.at("impulse"), 0.01);
  EXPECT_NEAR(roundtrip_snr(fb, noise(16000, 42)), golden.at("noise"), 0.01);
  EXPECT_NEAR(roundtrip_snr(fb, sine(16000, 1000.0)), golden.at("sine1k"), 0.01);
}

TEST(Snr, IdenticalSignalsAreInfinite) {
  const auto x = noise(100, 1);
  EXPECT_TRUE(std::isinf(reconstruction_snr(x, x, 0)));
  EXPECT_GT(reconstruction_snr(x, x, 0), 0.0);
}

TEST(Snr, AgainstZeroIsZeroDb) {
  const auto x = noise(100, 1);
  EXPECT_NEAR(reconstruction_snr(x, std::vector<double>(100, 0.0), 0), 0.0, 1e-12);
}

TEST(Snr, KnownNoiseLevel) {
  const auto x = noise(100000, 1), n = noise(100000, 2);
  const double eps = 0.01;
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + eps * n[i];
  // Both signals are uniform on [-1, 1], so sigma_noise / sigma_x = 1.
  EXPECT_NEAR(reconstruction_snr(x, y, 0), -20.0 * std::log10(eps), 0.5);
}

TEST(Snr, DelayShiftsComparison) {
  const auto x = noise(100, 1);
  std::vector<double> y(7, 0.0);
  y.insert(y.end(), x.begin(), x.end());
  EXPECT_TRUE(std::isinf(reconstruction_snr(x, y, 7)));
}

TEST(Snr, EmptyOverlapRejected) {
  const auto x = noise(10, 1);
  EXPECT_THROW(reconstruction_snr(x, x, 10), ParameterError);
  EXPECT_THROW(reconstruction_snr(std::vector<double>{}, x, 0), ParameterError);
}
