#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "support.hpp"

using namespace mmlpc;

namespace {

Matrix random_matrix(CounterRng& rng, std::size_t rows, std::size_t cols, double scale) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m.at(r, c) = scale * (2.0 * rng.uniform() - 1.0);
  }
  return m;
}

std::vector<double> random_doubles(CounterRng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
  return v;
}

std::vector<double> random_simplex(CounterRng& rng, std::size_t n) {
  std::vector<double> v(n);
  double s = 0.0;
  for (double& x : v) {
    x = -std::log(1.0 - rng.uniform());
    s += x;
  }
  for (double& x : v) x /= s;
  return v;
}

LsaParams random_lsa(CounterRng& rng, std::size_t a, std::size_t dq, std::size_t dk) {
  LsaParams p = LsaParams::zeros(a, dq, dk);
  p.query_proj = random_matrix(rng, a, dq, 0.5);
  p.key_proj = random_matrix(rng, a, dk, 0.5);
  p.location_proj = random_matrix(rng, a, LsaParams::kFilters, 0.5);
  p.filters = random_doubles(rng, LsaParams::kFilters * LsaParams::kFilterWidth, 0.5);
  p.bias = random_doubles(rng, a, 0.5);
  p.v = random_doubles(rng, a, 1.0);
  return p;
}

// Direct transcription: zero-padded "same" correlation, then additive energy.
std::vector<double> lsa_reference(const std::vector<double>& q, const Matrix& keys, const std::vector<double>& cum,
                                  const LsaParams& p) {
  const std::size_t len = keys.rows(), a = p.attn_dim();
  const long half = static_cast<long>(LsaParams::kFilterWidth / 2);
  std::vector<double> e(len);
  for (std::size_t i = 0; i < len; ++i) {
    std::vector<double> f(LsaParams::kFilters, 0.0);
    for (std::size_t k = 0; k < LsaParams::kFilters; ++k) {
      for (long m = -half; m <= half; ++m) {
        const long src = static_cast<long>(i) + m;
        if (src < 0 || src >= static_cast<long>(len)) continue;
        f[k] += p.filters[k * LsaParams::kFilterWidth + static_cast<std::size_t>(m + half)] *
                cum[static_cast<std::size_t>(src)];
      }
    }
    double energy = 0.0;
    for (std::size_t r = 0; r < a; ++r) {
      double h = p.bias[r];
      for (std::size_t d = 0; d < q.size(); ++d) h += p.query_proj.at(r, d) * q[d];
      for (std::size_t d = 0; d < keys.cols(); ++d) h += p.key_proj.at(r, d) * keys.at(i, d);
      for (std::size_t k = 0; k < LsaParams::kFilters; ++k) h += p.location_proj.at(r, k) * f[k];
      energy += p.v[r] * std::tanh(h);
    }
    e[i] = energy;
  }
  double mx = e[0];
  for (double x : e) mx = std::max(mx, x);
  double s = 0.0;
  for (double& x : e) {
    x = std::exp(x - mx);
    s += x;
  }
  for (double& x : e) x /= s;
  return e;
}

AlignmentMatrix random_alignment(CounterRng& rng, std::size_t dec, std::size_t enc) {
  std::vector<std::vector<double>> rows;
  for (std::size_t t = 0; t < dec; ++t) rows.push_back(random_simplex(rng, enc));
  return AlignmentMatrix::from_rows(rows);
}

}  // namespace

// ---------------------------------------------------------------------------
// Alignment matrix

TEST(Alignment, ValidityCheck) {
  auto m = AlignmentMatrix::from_rows({{0.5, 0.5}, {1.0, 0.0}});
  EXPECT_TRUE(m.is_valid());
  m.at(1, 1) = 0.1;
  EXPECT_FALSE(m.is_valid());
  m.at(1, 0) = 0.9;
  EXPECT_TRUE(m.is_valid());
  m.at(1, 0) = 1.2;
  m.at(1, 1) = -0.2;
  EXPECT_FALSE(m.is_valid());
  EXPECT_THROW(AlignmentMatrix::from_rows({{1.0}, {0.5, 0.5}}), ParameterError);
}

// ---------------------------------------------------------------------------
// Location-sensitive attention

TEST(Lsa, ZeroParamsGiveUniformRow) {
  CounterRng rng(1);
  const auto p = LsaParams::zeros(8, 4, 6);
  const auto keys = random_matrix(rng, 9, 6, 1.0);
  const auto row = lsa_score(random_doubles(rng, 4, 1.0), keys, std::vector<double>(9, 0.0), p);
  for (double v : row) EXPECT_NEAR(v, 1.0 / 9.0, 1e-15);
}

TEST(Lsa, LargeBiasSaturatesToUniform) {
  CounterRng rng(2);
  auto p = random_lsa(rng, 8, 4, 6);
  for (double& b : p.bias) b = 100.0;
  const auto keys = random_matrix(rng, 7, 6, 1.0);
  const auto row = lsa_score(random_doubles(rng, 4, 1.0), keys, random_simplex(rng, 7), p);
  for (double v : row) EXPECT_NEAR(v, 1.0 / 7.0, 1e-12);
}

TEST(Lsa, MatchesDirectReference) {
  CounterRng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_lsa(rng, 8, 5, 6);
    const auto keys = random_matrix(rng, 7, 6, 1.0);
    const auto q = random_doubles(rng, 5, 1.0);
    std::vector<double> cum(7);
    for (double& c : cum) c = 3.0 * rng.uniform();
    const auto got = lsa_score(q, keys, cum, p);
    const auto ref = lsa_reference(q, keys, cum, p);
    ASSERT_LT(oracle::max_abs_error(got, ref), 1e-6);
  }
}

TEST(Lsa, RowIsOnSimplex) {
  CounterRng rng(4);
  for (std::size_t len : {1u, 2u, 10u, 40u}) {
    const auto p = random_lsa(rng, 8, 3, 3);
    const auto row = lsa_score(random_doubles(rng, 3, 2.0), random_matrix(rng, len, 3, 2.0),
                               std::vector<double>(len, 1.0), p);
    double s = 0.0;
    for (double v : row) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Lsa, LocationTermShiftsAttention) {
  // A single centred tap on the cumulative alignment pulls mass to where it is large.
  CounterRng rng(5);
  auto p = LsaParams::zeros(1, 1, 1);
  p.filters[LsaParams::kFilterWidth / 2] = 1.0;
  p.location_proj.at(0, 0) = 1.0;
  p.v[0] = 5.0;
  std::vector<double> cum(6, 0.0);
  cum[4] = 1.0;
  const auto row = lsa_score(std::vector<double>{0.0}, Matrix(6, 1), cum, p);
  for (std::size_t i = 0; i < 6; ++i) {
    if (i != 4) {
      EXPECT_GT(row[4], row[i]);
    }
  }
}

TEST(Lsa, ShapeErrors) {
  const auto p = LsaParams::zeros(4, 3, 2);
  EXPECT_THROW(lsa_score(std::vector<double>(2), Matrix(5, 2), std::vector<double>(5), p), ParameterError);
  EXPECT_THROW(lsa_score(std::vector<double>(3), Matrix(5, 3), std::vector<double>(5), p), ParameterError);
  EXPECT_THROW(lsa_score(std::vector<double>(3), Matrix(5, 2), std::vector<double>(4), p), ParameterError);
  EXPECT_THROW(lsa_score(std::vector<double>(3), Matrix(5, 2), std::vector<double>(5, -1.0), p), ParameterError);
}

TEST(Lsa, ContextIsWeightedSum) {
  Matrix keys(3, 2);
  keys.at(0, 0) = 1.0;
  keys.at(1, 1) = 2.0;
  keys.at(2, 0) = 4.0;
  const auto c = attention_context(std::vector<double>{0.5, 0.25, 0.25}, keys);
  EXPECT_DOUBLE_EQ(c[0], 1.5);
  EXPECT_DOUBLE_EQ(c[1], 0.5);
  EXPECT_THROW(attention_context(std::vector<double>{1.0}, keys), ParameterError);
}

// ---------------------------------------------------------------------------
// Forward attention

TEST(Forward, InitialStateIsFirstPosition) {
  const auto s = ForwardAttnState::initial(5);
  EXPECT_EQ(s.alpha, (std::vector<double>{1.0, 0.0, 0.0, 0.0, 0.0}));
  EXPECT_EQ(s.expected_position(), 0.0);
}

TEST(Forward, UniformBaseSplitsMass) {
  const auto s = forward_attention_step(ForwardAttnState::initial(4), std::vector<double>(4, 0.25));
  EXPECT_NEAR(s.alpha[0], 0.5, 1e-15);
  EXPECT_NEAR(s.alpha[1], 0.5, 1e-15);
  EXPECT_EQ(s.alpha[2], 0.0);
  EXPECT_EQ(s.alpha[3], 0.0);
}

TEST(Forward, OneHotBaseAbsorbsMass) {
  ForwardAttnState s{{0.0, 1.0, 0.0}};
  const auto next = forward_attention_step(s, std::vector<double>{0.0, 0.0, 1.0});
  EXPECT_EQ(next.alpha, (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(Forward, SupportMovesAtMostOnePosition) {
  CounterRng rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    ForwardAttnState s = ForwardAttnState::initial(10);
    for (int step = 0; step < 20; ++step) {
      auto next = forward_attention_step(s, random_simplex(rng, 10));
      std::size_t first_prev = 0, last_prev = 0, first_next = 0, last_next = 0;
      for (std::size_t i = 0; i < 10; ++i) {
        if (s.alpha[i] > 0.0) last_prev = i;
        if (next.alpha[i] > 0.0) last_next = i;
      }
      while (s.alpha[first_prev] == 0.0) ++first_prev;
      while (next.alpha[first_next] == 0.0) ++first_next;
      ASSERT_GE(first_next, first_prev);
      ASSERT_LE(last_next, last_prev + 1);
      double sum = 0.0;
      for (double v : next.alpha) sum += v;
      ASSERT_NEAR(sum, 1.0, 1e-12);
      s = std::move(next);
    }
  }
}

// A base row that favours the earlier of two occupied positions pulls the
// expected position back; monotonicity holds for the support, not the mean.
TEST(Forward, ExpectedPositionCanDecrease) {
  ForwardAttnState s{{0.5, 0.5, 0.0}};
  const auto next = forward_attention_step(s, std::vector<double>{0.99, 0.01, 0.0});
  EXPECT_LT(next.expected_position(), s.expected_position());
}

// Away from the last position the shifted sum alone adds 1/2 to the mean, and
// an increasing base only pulls it further forward.
TEST(Forward, IncreasingBaseAdvancesMeanBeforeReachingTheEnd) {
  ForwardAttnState s = ForwardAttnState::initial(10);
  std::vector<double> base(10);
  for (std::size_t i = 0; i < 10; ++i) base[i] = static_cast<double>(i + 1) / 55.0;
  for (int step = 0; step < 8; ++step) {
    auto next = forward_attention_step(s, base);
    ASSERT_GE(next.expected_position(), s.expected_position() + 0.5 - 1e-12);
    s = std::move(next);
  }
}

TEST(Forward, DegenerateInputsRejected) {
  ForwardAttnState s{{0.0, 0.0, 1.0}};
  EXPECT_THROW(forward_attention_step(s, std::vector<double>{0.5, 0.5, 0.0}), DegenerateInputError);
  EXPECT_THROW(forward_attention_step(s, std::vector<double>{0.5, 0.5}), ParameterError);
  EXPECT_THROW(forward_attention_step(s, std::vector<double>{0.5, 0.6, 0.1}), Error);
}

// ---------------------------------------------------------------------------
// GMM attention

TEST(Gmm, SingleComponentPeaksAtMean) {
  const auto st = GmmAttnState::initial(1);
  // softplus(delta) = 3 exactly when delta = log(e^3 - 1).
  const double delta = std::log(std::exp(3.0) - 1.0);
  const std::vector<GmmRawOutput> raw = {{delta, 0.0, 0.0}};
  const auto res = gmm_attention_step(st, raw, 8);
  EXPECT_NEAR(res.state.components[0].mean, 3.0, 1e-12);
  const auto peak = std::max_element(res.row.begin(), res.row.end()) - res.row.begin();
  EXPECT_EQ(peak, 3);
  EXPECT_NEAR(res.row[2], res.row[4], 1e-12);
}

TEST(Gmm, SoftplusLimits) {
  const auto st = GmmAttnState::initial(1);
  const std::vector<GmmRawOutput> big = {{50.0, 50.0, 0.0}};
  const auto r1 = gmm_attention_step(st, big, 4);
  EXPECT_NEAR(r1.state.components[0].mean, 50.0, 1e-12);
  EXPECT_NEAR(r1.state.components[0].width, 50.0 + kGmmWidthFloor, 1e-12);
  const std::vector<GmmRawOutput> small = {{-50.0, -50.0, 0.0}};
  const auto r2 = gmm_attention_step(st, small, 4);
  EXPECT_NEAR(r2.state.components[0].mean, 0.0, 1e-20);
  EXPECT_NEAR(r2.state.components[0].width, kGmmWidthFloor, 1e-20);
  EXPECT_NEAR(r2.row[0], 1.0, 1e-12);
}

TEST(Gmm, MatchesNaiveMixture) {
  CounterRng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    GmmAttnState st = GmmAttnState::initial(3);
    for (int step = 0; step < 10; ++step) {
      std::vector<GmmRawOutput> raw(3);
      for (auto& r : raw) r = {2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() + 0.5, 2.0 * rng.uniform() - 1.0};
      auto res = gmm_attention_step(st, raw, 12);
      ASSERT_LT(oracle::max_abs_error(res.row, oracle::gmm_row(res.state.components, 12)), 1e-9);
      double wsum = 0.0;
      for (const auto& c : res.state.components) wsum += c.weight;
      ASSERT_NEAR(wsum, 1.0, 1e-12);
      st = std::move(res.state);
    }
  }
}

TEST(Gmm, MeansStrictlyIncrease) {
  CounterRng rng(9);
  GmmAttnState st = GmmAttnState::initial(4);
  for (int step = 0; step < 100; ++step) {
    std::vector<GmmRawOutput> raw(4);
    for (auto& r : raw) r = {4.0 * rng.uniform() - 3.0, rng.uniform(), rng.uniform()};
    auto res = gmm_attention_step(st, raw, 200);
    for (std::size_t k = 0; k < 4; ++k) ASSERT_GT(res.state.components[k].mean, st.components[k].mean);
    st = std::move(res.state);
  }
}

TEST(Gmm, ErrorsOnShapeAndMassLoss) {
  const auto st = GmmAttnState::initial(2);
  EXPECT_THROW(gmm_attention_step(st, std::vector<GmmRawOutput>(1), 5), ParameterError);
  EXPECT_THROW(gmm_attention_step(st, std::vector<GmmRawOutput>(2), 0), ParameterError);
  // Both means far past the encoder with a tiny width: all weights underflow.
  GmmAttnState far{{{1000.0, 1.0, 0.5}, {1000.0, 1.0, 0.5}}};
  const std::vector<GmmRawOutput> narrow(2, GmmRawOutput{0.0, -50.0, 0.0});
  EXPECT_THROW(gmm_attention_step(far, narrow, 5), NumericError);
}

// ---------------------------------------------------------------------------
// Losses

TEST(Loss, MeanAbsErrorMatchesReference) {
  CounterRng rng(10);
  const auto a = random_doubles(rng, 37, 1.0), b = random_doubles(rng, 37, 1.0);
  EXPECT_NEAR(mean_abs_error(std::span<const double>(a), std::span<const double>(b)), oracle::l1_mean(a, b), 1e-15);
  EXPECT_THROW(mean_abs_error(std::span<const double>(a), std::span<const double>(b).first(3)), ParameterError);
}

TEST(Loss, GuidanceZeroAtIdentity) {
  CounterRng rng(11);
  const auto a = random_alignment(rng, 6, 5);
  EXPECT_EQ(guidance_loss(a, a, a, kGuidanceLambda), 0.0);
}

TEST(Loss, GuidanceLinearInLambda) {
  CounterRng rng(12);
  const auto a = random_alignment(rng, 6, 5), f = random_alignment(rng, 6, 5), g = random_alignment(rng, 6, 5);
  const double one = guidance_loss(a, f, g, 1.0);
  EXPECT_GT(one, 0.0);
  EXPECT_NEAR(guidance_loss(a, f, g, 10.0), 10.0 * one, 1e-12);
  EXPECT_NEAR(guidance_loss(a, f, g, 2.5), 2.5 * one, 1e-12);
  EXPECT_EQ(guidance_loss(a, f, g, 0.0), 0.0);
  EXPECT_EQ(kGuidanceLambda, 10.0);
  EXPECT_THROW(guidance_loss(a, f, g, -1.0), ParameterError);
}

TEST(Loss, GuidanceHandComputed) {
  // |a - f| has mean 0.2 over the four cells; g equals a.
  const auto a = AlignmentMatrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  const auto f = AlignmentMatrix::from_rows({{0.8, 0.2}, {0.2, 0.8}});
  EXPECT_NEAR(guidance_loss(a, f, a, 1.0), 0.2, 1e-15);
  EXPECT_NEAR(guidance_loss(a, f, a, kGuidanceLambda), 2.0, 1e-14);
  EXPECT_NEAR(guidance_loss(a, f, f, kGuidanceLambda), 4.0, 1e-14);
}

TEST(Loss, GuidanceShapeMismatch) {
  CounterRng rng(13);
  const auto a = random_alignment(rng, 4, 5), b = random_alignment(rng, 5, 5);
  EXPECT_THROW(guidance_loss(a, b, a, 1.0), ParameterError);
}

TEST(Loss, CompositeSumsAllTerms) {
  CounterRng rng(14);
  const auto o = random_matrix(rng, 5, 4, 1.0), of = random_matrix(rng, 5, 4, 1.0),
             og = random_matrix(rng, 5, 4, 1.0), p = random_matrix(rng, 5, 4, 1.0),
             r = random_matrix(rng, 5, 4, 1.0);
  const auto a = random_alignment(rng, 6, 3), f = random_alignment(rng, 6, 3), g = random_alignment(rng, 6, 3);
  const double expected = oracle::l1_mean(o.data(), r.data()) + oracle::l1_mean(of.data(), r.data()) +
                          oracle::l1_mean(og.data(), r.data()) + oracle::l1_mean(p.data(), r.data()) +
                          kGuidanceLambda * (oracle::l1_mean(a.scores(), f.scores()) +
                                             oracle::l1_mean(a.scores(), g.scores()));
  EXPECT_NEAR(composite_loss(o, of, og, p, r, a, f, g, kGuidanceLambda), expected, 1e-12);
  // The three decoder outputs enter symmetrically.
  EXPECT_NEAR(composite_loss(of, o, og, p, r, a, f, g, kGuidanceLambda),
              composite_loss(o, of, og, p, r, a, f, g, kGuidanceLambda), 1e-12);
}

TEST(Loss, CompositeZeroWhenEverythingMatches) {
  CounterRng rng(15);
  const auto r = random_matrix(rng, 3, 3, 1.0);
  const auto a = random_alignment(rng, 4, 4);
  EXPECT_EQ(composite_loss(r, r, r, r, r, a, a, a, kGuidanceLambda), 0.0);
}

TEST(Loss, CompositeShapeMismatch) {
  CounterRng rng(16);
  const auto r = random_matrix(rng, 3, 3, 1.0), bad = random_matrix(rng, 3, 2, 1.0);
  const auto a = random_alignment(rng, 4, 4);
  EXPECT_THROW(composite_loss(r, bad, r, r, r, a, a, a, 1.0), ParameterError);
}
