#pragma once

// Forward computations of three alignment mechanisms (location-sensitive,
// forward, GMM) and the L1 losses that tie a basic attention to its guides.
// Everything here runs in double precision at toy scale.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mmlpc/error.hpp"
#include "mmlpc/neuralops.hpp"

namespace mmlpc {

using Matrix = BasicDenseMatrix<double>;

// Decoder steps x encoder steps, row-major. Rows live on the simplex.
class AlignmentMatrix {
 public:
  AlignmentMatrix() = default;
  AlignmentMatrix(std::size_t dec_steps, std::size_t enc_steps)
      : dec_(dec_steps), enc_(enc_steps), scores_(dec_steps * enc_steps, 0.0) {}

  static AlignmentMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    AlignmentMatrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t t = 0; t < rows.size(); ++t) {
      if (rows[t].size() != m.enc_) throw ParameterError("alignment rows differ in length");
      std::copy(rows[t].begin(), rows[t].end(), m.row(t).begin());
    }
    return m;
  }

  std::size_t dec_steps() const { return dec_; }
  std::size_t enc_steps() const { return enc_; }
  std::span<double> row(std::size_t t) { return {scores_.data() + t * enc_, enc_}; }
  std::span<const double> row(std::size_t t) const { return {scores_.data() + t * enc_, enc_}; }
  std::span<const double> scores() const { return scores_; }
  double& at(std::size_t t, std::size_t i) { return scores_[t * enc_ + i]; }
  double at(std::size_t t, std::size_t i) const { return scores_[t * enc_ + i]; }

  // Nonnegative entries and unit row sums within tol.
  bool is_valid(double tol = 1e-6) const {
    for (std::size_t t = 0; t < dec_; ++t) {
      double sum = 0.0;
      for (double v : row(t)) {
        if (!(v >= 0.0) || !std::isfinite(v)) return false;
        sum += v;
      }
      if (std::abs(sum - 1.0) > tol) return false;
    }
    return true;
  }

 private:
  std::size_t dec_ = 0;
  std::size_t enc_ = 0;
  std::vector<double> scores_;
};

namespace detail {

inline void softmax_inplace(std::span<double> x) {
  const double mx = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (double& v : x) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : x) v /= sum;
}

inline double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

inline void require_simplex(std::span<const double> row, const char* what) {
  double sum = 0.0;
  for (double v : row) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError(std::string(what) + ": entries must be >= 0");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ParameterError(std::string(what) + ": row must sum to 1");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Location-sensitive attention
//
//   f_i      = conv1d(cum_align; 32 filters of width 31)[i]
//   energy_i = v . tanh(W q + V k_i + U f_i + b)
//   row      = softmax(energy)

struct LsaParams {
  static constexpr std::size_t kFilters = 32;
  static constexpr std::size_t kFilterWidth = 31;

  Matrix query_proj;                 // A x Dq
  Matrix key_proj;                   // A x Dk
  Matrix location_proj;              // A x kFilters
  std::vector<double> filters;       // kFilters x kFilterWidth, row-major
  std::vector<double> bias;          // A
  std::vector<double> v;             // A

  static LsaParams zeros(std::size_t attn_dim, std::size_t query_dim, std::size_t key_dim) {
    return {Matrix(attn_dim, query_dim), Matrix(attn_dim, key_dim), Matrix(attn_dim, kFilters),
            std::vector<double>(kFilters * kFilterWidth, 0.0), std::vector<double>(attn_dim, 0.0),
            std::vector<double>(attn_dim, 0.0)};
  }

  std::size_t attn_dim() const { return v.size(); }
};

inline std::vector<double> location_features(std::span<const double> cum_align, const LsaParams& p) {
  const std::size_t len = cum_align.size();
  constexpr std::size_t half = LsaParams::kFilterWidth / 2;
  std::vector<double> out(len * LsaParams::kFilters, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t f = 0; f < LsaParams::kFilters; ++f) {
      double acc = 0.0;
      for (std::size_t m = 0; m < LsaParams::kFilterWidth; ++m) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i + m) - static_cast<std::ptrdiff_t>(half);
        if (src >= 0 && src < static_cast<std::ptrdiff_t>(len)) {
          acc += p.filters[f * LsaParams::kFilterWidth + m] * cum_align[static_cast<std::size_t>(src)];
        }
      }
      out[i * LsaParams::kFilters + f] = acc;
    }
  }
  return out;
}

// keys: L_enc x Dk.
inline std::vector<double> lsa_score(std::span<const double> query, const Matrix& keys,
                                     std::span<const double> cum_align, const LsaParams& p) {
  const std::size_t a = p.attn_dim();
  const std::size_t len = keys.rows();
  if (len == 0 || query.size() != p.query_proj.cols() || keys.cols() != p.key_proj.cols() ||
      cum_align.size() != len || p.query_proj.rows() != a || p.key_proj.rows() != a ||
      p.location_proj.rows() != a || p.location_proj.cols() != LsaParams::kFilters || p.bias.size() != a ||
      p.filters.size() != LsaParams::kFilters * LsaParams::kFilterWidth) {
    throw ParameterError("lsa_score: shape mismatch");
  }
  for (double c : cum_align) {
    if (!(c >= 0.0)) throw ParameterError("lsa_score: cumulative alignment must be >= 0");
  }

  std::vector<double> wq(a, 0.0);
  for (std::size_t d = 0; d < query.size(); ++d) {
    for (std::size_t r = 0; r < a; ++r) wq[r] += p.query_proj.at(r, d) * query[d];
  }
  const auto loc = location_features(cum_align, p);
  std::vector<double> energy(len, 0.0), hidden(a);
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t r = 0; r < a; ++r) hidden[r] = wq[r] + p.bias[r];
    for (std::size_t d = 0; d < keys.cols(); ++d) {
      const double k = keys.at(i, d);
      for (std::size_t r = 0; r < a; ++r) hidden[r] += p.key_proj.at(r, d) * k;
    }
    for (std::size_t f = 0; f < LsaParams::kFilters; ++f) {
      const double l = loc[i * LsaParams::kFilters + f];
      for (std::size_t r = 0; r < a; ++r) hidden[r] += p.location_proj.at(r, f) * l;
    }
    double e = 0.0;
    for (std::size_t r = 0; r < a; ++r) e += p.v[r] * std::tanh(hidden[r]);
    energy[i] = e;
  }
  detail::softmax_inplace(energy);
  return energy;
}

// c_t = sum_i a_{t,i} h_i
inline std::vector<double> attention_context(std::span<const double> row, const Matrix& keys) {
  if (row.size() != keys.rows()) throw ParameterError("attention_context: shape mismatch");
  std::vector<double> c(keys.cols(), 0.0);
  for (std::size_t i = 0; i < keys.rows(); ++i) {
    for (std::size_t d = 0; d < keys.cols(); ++d) c[d] += row[i] * keys.at(i, d);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Forward attention: alpha'(i) ∝ (alpha(i) + alpha(i-1)) * base(i). Mass can
// only stay or move one position forward before reweighting.

struct ForwardAttnState {
  std::vector<double> alpha;

  static ForwardAttnState initial(std::size_t enc_steps) {
    ForwardAttnState s{std::vector<double>(enc_steps, 0.0)};
    if (enc_steps > 0) s.alpha[0] = 1.0;
    return s;
  }

  double expected_position() const {
    double e = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) e += static_cast<double>(i) * alpha[i];
    return e;
  }
};

inline ForwardAttnState forward_attention_step(const ForwardAttnState& prev, std::span<const double> base_row) {
  if (prev.alpha.size() != base_row.size() || base_row.empty()) {
    throw ParameterError("forward_attention_step: length mismatch");
  }
  detail::require_simplex(prev.alpha, "forward_attention_step: previous state");
  detail::require_simplex(base_row, "forward_attention_step: base row");
  ForwardAttnState next{std::vector<double>(base_row.size())};
  double norm = 0.0;
  for (std::size_t i = 0; i < base_row.size(); ++i) {
    const double shifted = i == 0 ? 0.0 : prev.alpha[i - 1];
    next.alpha[i] = (prev.alpha[i] + shifted) * base_row[i];
    norm += next.alpha[i];
  }
  if (!(norm >= 1e-30)) {
    throw DegenerateInputError("forward_attention_step: degenerate alignment (normalizer underflow)");
  }
  for (double& v : next.alpha) v /= norm;
  return next;
}

// ---------------------------------------------------------------------------
// GMM attention (purely location based)
//
//   mu'    = mu + softplus(delta_hat)
//   sigma' = softplus(sigma_hat) + 1e-3
//   rho'   = softmax(rho_hat)
//   row_i  ∝ sum_k rho'_k exp(-(i - mu'_k)^2 / (2 sigma'_k^2))

inline constexpr double kGmmWidthFloor = 1e-3;

struct GmmComponent {
  double mean = 0.0;
  double width = 1.0;
  double weight = 1.0;
};

struct GmmAttnState {
  std::vector<GmmComponent> components;

  static GmmAttnState initial(std::size_t k) {
    GmmAttnState s;
    s.components.assign(k, GmmComponent{0.0, 1.0, 1.0 / static_cast<double>(k)});
    return s;
  }
};

struct GmmRawOutput {
  double delta = 0.0;
  double width = 0.0;
  double weight = 0.0;
};

struct GmmStepResult {
  GmmAttnState state;
  std::vector<double> row;
};

inline GmmStepResult gmm_attention_step(const GmmAttnState& state, std::span<const GmmRawOutput> raw,
                                        std::size_t enc_steps) {
  const std::size_t k = state.components.size();
  if (k == 0 || raw.size() != k || enc_steps == 0) throw ParameterError("gmm_attention_step: shape mismatch");
  GmmStepResult out;
  out.state.components.resize(k);
  std::vector<double> logits(k);
  for (std::size_t c = 0; c < k; ++c) logits[c] = raw[c].weight;
  detail::softmax_inplace(logits);
  for (std::size_t c = 0; c < k; ++c) {
    auto& comp = out.state.components[c];
    comp.mean = state.components[c].mean + detail::softplus(raw[c].delta);
    comp.width = detail::softplus(raw[c].width) + kGmmWidthFloor;
    comp.weight = logits[c];
  }
  out.row.assign(enc_steps, 0.0);
  double norm = 0.0;
  for (std::size_t i = 0; i < enc_steps; ++i) {
    double acc = 0.0;
    for (const auto& comp : out.state.components) {
      const double d = static_cast<double>(i) - comp.mean;
      acc += comp.weight * std::exp(-d * d / (2.0 * comp.width * comp.width));
    }
    out.row[i] = acc;
    norm += acc;
  }
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw NumericError("gmm_attention_step: mixture has no mass over the encoder positions");
  }
  for (double& v : out.row) v /= norm;
  return out;
}

// ---------------------------------------------------------------------------
// Losses. L1 terms are means over all elements.

// Default guidance intensity.
inline constexpr double kGuidanceLambda = 10.0;

inline double mean_abs_error(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw ParameterError("mean_abs_error: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
  return acc / static_cast<double>(x.size());
}

inline double mean_abs_error(const AlignmentMatrix& x, const AlignmentMatrix& y) {
  if (x.dec_steps() != y.dec_steps() || x.enc_steps() != y.enc_steps()) {
    throw ParameterError("alignment shapes differ");
  }
  return mean_abs_error(x.scores(), y.scores());
}

inline double mean_abs_error(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) throw ParameterError("feature matrix shapes differ");
  return mean_abs_error(x.data(), y.data());
}

// lambda * (l1(a, a_f) + l1(a, a_g))
inline double guidance_loss(const AlignmentMatrix& a, const AlignmentMatrix& a_forward,
                            const AlignmentMatrix& a_gmm, double lambda) {
  if (!(lambda >= 0.0)) throw ParameterError("guidance_loss: lambda must be >= 0");
  return lambda * (mean_abs_error(a, a_forward) + mean_abs_error(a, a_gmm));
}

// l1(o, r) + l1(o_f, r) + l1(o_g, r) + l1(p, r) + guidance_loss
inline double composite_loss(const Matrix& o, const Matrix& o_forward, const Matrix& o_gmm,
                             const Matrix& postnet, const Matrix& target, const AlignmentMatrix& a,
                             const AlignmentMatrix& a_forward, const AlignmentMatrix& a_gmm, double lambda) {
  return mean_abs_error(o, target) + mean_abs_error(o_forward, target) + mean_abs_error(o_gmm, target) +
         mean_abs_error(postnet, target) + guidance_loss(a, a_forward, a_gmm, lambda);
}

}  // namespace mmlpc
