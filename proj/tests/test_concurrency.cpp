#include <gtest/gtest.h>

#include <thread>

#include "support.hpp"

using namespace mmlpc;

// Weights and filter bank are read-only during synthesis; every call owns its
// stream state and RNG, so concurrent calls must match serial ones exactly.
TEST(Concurrency, SharedWeightsMatchSerialOutput) {
  const auto w = gen_random_weights(11, Mode::mmt);
  const auto fb = design_prototype(4, 64);
  const auto frames = random_features(15, 12);
  constexpr std::size_t kThreads = 4;

  std::vector<std::vector<double>> serial(kThreads);
  for (std::size_t i = 0; i < kThreads; ++i) {
    SynthesisOptions opt;
    opt.seed = 100 + i;
    serial[i] = synthesize(frames, w, Mode::mmt, fb, opt).samples;
  }

  std::vector<std::vector<double>> parallel(kThreads);
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < kThreads; ++i) {
    pool.emplace_back([&, i] {
      SynthesisOptions opt;
      opt.seed = 100 + i;
      parallel[i] = synthesize(frames, w, Mode::mmt, fb, opt).samples;
    });
  }
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < kThreads; ++i) EXPECT_EQ(parallel[i], serial[i]) << "thread " << i;
}
