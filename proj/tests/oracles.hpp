// Independent reference implementations used by the unit and acceptance tests.
// Each is a plain loop nest written from the operator definitions, sharing no code with the library kernels.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cuenet/attention.hpp"
#include "cuenet/model.hpp"
#include "cuenet/tensor.hpp"

namespace cuenet::testing {

using Mat = std::vector<std::vector<double>>;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo = -1, double hi = 1) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(gen_);
  }
  std::mt19937_64& engine() { return gen_; }

  template <Real Scalar = double>
  Tensor<Scalar> tensor(Shape shape, double lo = -1, double hi = 1) {
    Tensor<Scalar> t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<Scalar>(uniform(lo, hi));
    return t;
  }

 private:
  std::mt19937_64 gen_;
};

inline double rel_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max(std::sqrt(na), std::sqrt(nb));
  return scale < 1e-300 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

inline double rel_error(const Tensor<double>& a, const Tensor<double>& b) { return rel_error(a.data(), b.data()); }

inline double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline Mat to_mat(const Tensor<double>& t) {
  const std::size_t r = t.extent(0), c = t.size() / r;
  Mat m(r, std::vector<double>(c));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m[i][j] = t[i * c + j];
  return m;
}

inline Tensor<double> from_mat(const Mat& m) {
  Tensor<double> t({m.size(), m[0].size()});
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[0].size(); ++j) t[i * m[0].size() + j] = m[i][j];
  return t;
}

inline Mat naive_matmul(const Mat& a, const Mat& b) {
  Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

/// Standard normal CDF by composite Simpson quadrature of the density over [-12, x].
inline double normal_cdf_quadrature(double x, int intervals = 200000) {
  const double lo = -12.0, h = (x - lo) / intervals;
  const auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2 * M_PI); };
  double s = pdf(lo) + pdf(x);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4 : 2) * pdf(lo + i * h);
  return s * h / 3;
}

/// (T,H,W,cin) x (kt,kh,kw,cin,cout) cross-correlation with zero padding.
inline Tensor<double> naive_conv3d(const Tensor<double>& x, const Tensor<double>& k, std::array<int, 3> stride,
                                   std::array<int, 3> pad) {
  const int T = x.extent(0), H = x.extent(1), W = x.extent(2), C = x.extent(3);
  const int kt = k.extent(0), kh = k.extent(1), kw = k.extent(2), O = k.extent(4);
  const int To = (T + 2 * pad[0] - kt) / stride[0] + 1, Ho = (H + 2 * pad[1] - kh) / stride[1] + 1,
            Wo = (W + 2 * pad[2] - kw) / stride[2] + 1;
  Tensor<double> y({std::size_t(To), std::size_t(Ho), std::size_t(Wo), std::size_t(O)});
  for (int t = 0; t < To; ++t)
    for (int h = 0; h < Ho; ++h)
      for (int w = 0; w < Wo; ++w)
        for (int o = 0; o < O; ++o) {
          double acc = 0;
          for (int a = 0; a < kt; ++a)
            for (int b = 0; b < kh; ++b)
              for (int c = 0; c < kw; ++c)
                for (int i = 0; i < C; ++i) {
                  const int it = t * stride[0] + a - pad[0], ih = h * stride[1] + b - pad[1],
                            iw = w * stride[2] + c - pad[2];
                  if (it < 0 || it >= T || ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                  acc += x(it, ih, iw, i) * k(a, b, c, i, o);
                }
          y(t, h, w, o) = acc;
        }
  return y;
}

/// Depthwise, stride 1, "same" zero padding.
inline Tensor<double> naive_dwconv3d(const Tensor<double>& x, const Tensor<double>& k) {
  const int T = x.extent(0), H = x.extent(1), W = x.extent(2), D = x.extent(3);
  const int kt = k.extent(0), kh = k.extent(1), kw = k.extent(2);
  Tensor<double> y(x.shape());
  for (int c = 0; c < D; ++c)
    for (int t = 0; t < T; ++t)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
          double acc = 0;
          for (int a = 0; a < kt; ++a)
            for (int b = 0; b < kh; ++b)
              for (int e = 0; e < kw; ++e) {
                const int it = t + a - kt / 2, ih = h + b - kh / 2, iw = w + e - kw / 2;
                if (it < 0 || it >= T || ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                acc += x(it, ih, iw, c) * k(a, b, e, c);
              }
          y(t, h, w, c) = acc;
        }
  return y;
}

inline std::vector<double> vec_mat(const std::vector<double>& v, const Tensor<double>& w) {
  const std::size_t in = w.extent(0), out = w.extent(1);
  std::vector<double> r(out, 0.0);
  for (std::size_t j = 0; j < out; ++j)
    for (std::size_t i = 0; i < in; ++i) r[j] += v[i] * w(i, j);
  return r;
}

/// Modified additive attention written term by term:
///   q* = q Wq,  K_i = x_i Wk,  alpha = (q* . w_a) / sqrt(d),  q^g = alpha q*,
///   out_i = W2((W1(q^g (.) K_i) + b1) + q*) + b2,  result = mean_i out_i.
inline std::vector<std::vector<double>> meaa_loop_rows(const Tensor<double>& query, const Tensor<double>& tokens,
                                                       const MeaaParams<double>& p) {
  const std::size_t d = p.hidden(), n = tokens.extent(0);
  std::vector<double> q(query.data().begin(), query.data().end());
  const std::vector<double> qs = vec_mat(q, p.wq);
  double alpha = 0;
  for (std::size_t j = 0; j < d; ++j) alpha += qs[j] * p.w_a[j];
  alpha /= std::sqrt(static_cast<double>(d));
  std::vector<double> qg(d);
  for (std::size_t j = 0; j < d; ++j) qg[j] = alpha * qs[j];
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(tokens.data().begin() + i * d, tokens.data().begin() + (i + 1) * d);
    const std::vector<double> key = vec_mat(x, p.wk);
    std::vector<double> f(d);
    for (std::size_t j = 0; j < d; ++j) f[j] = qg[j] * key[j];
    std::vector<double> h = vec_mat(f, p.w1);
    for (std::size_t j = 0; j < d; ++j) h[j] = (h[j] + p.b1[j]) + qs[j];
    std::vector<double> o = vec_mat(h, p.w2);
    for (std::size_t j = 0; j < d; ++j) o[j] += p.b2[j];
    rows.push_back(o);
  }
  return rows;
}

inline Tensor<double> mean_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t d = rows[0].size();
  Tensor<double> out({1, d});
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) out[j] += r[j];
  for (std::size_t j = 0; j < d; ++j) out[j] /= static_cast<double>(rows.size());
  return out;
}

inline Tensor<double> meaa_loop(const Tensor<double>& query, const Tensor<double>& tokens, const MeaaParams<double>& p) {
  return mean_rows(meaa_loop_rows(query, tokens, p));
}

/// Original additive attention: per-token queries, softmax-normalized weights, pooled global query.
inline Tensor<double> eaa_loop(const Tensor<double>& tokens, const MeaaParams<double>& p) {
  const std::size_t d = p.hidden(), n = tokens.extent(0);
  std::vector<std::vector<double>> Q, K;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(tokens.data().begin() + i * d, tokens.data().begin() + (i + 1) * d);
    Q.push_back(vec_mat(x, p.wq));
    K.push_back(vec_mat(x, p.wk));
  }
  std::vector<double> a(n);
  double mx = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = 0;
    for (std::size_t j = 0; j < d; ++j) a[i] += Q[i][j] * p.w_a[j];
    a[i] /= std::sqrt(static_cast<double>(d));
    mx = std::max(mx, a[i]);
  }
  double z = 0;
  for (auto& v : a) z += (v = std::exp(v - mx));
  for (auto& v : a) v /= z;
  std::vector<double> g(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) g[j] += a[i] * Q[i][j];
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> f(d);
    for (std::size_t j = 0; j < d; ++j) f[j] = g[j] * K[i][j];
    std::vector<double> h = vec_mat(f, p.w1);
    for (std::size_t j = 0; j < d; ++j) h[j] = (h[j] + p.b1[j]) + Q[i][j];
    std::vector<double> o = vec_mat(h, p.w2);
    for (std::size_t j = 0; j < d; ++j) o[j] += p.b2[j];
    rows.push_back(o);
  }
  return mean_rows(rows);
}

/// Multi-head softmax attention with an explicit n x n weight matrix per head.
inline Tensor<double> self_attention_loop(const Tensor<double>& tokens, const SelfAttentionParams<double>& p,
                                          std::vector<Mat>* weights = nullptr) {
  const std::size_t d = p.hidden(), n = tokens.extent(0), hd = d / p.heads;
  const Mat X = to_mat(tokens);
  const Mat Q = naive_matmul(X, to_mat(p.wq)), K = naive_matmul(X, to_mat(p.wk)), V = naive_matmul(X, to_mat(p.wv));
  Mat heads(n, std::vector<double>(d, 0.0));
  for (std::size_t h = 0; h < p.heads; ++h) {
    Mat A(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -INFINITY;
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t c = h * hd; c < (h + 1) * hd; ++c) s += Q[i][c] * K[j][c];
        A[i][j] = s / std::sqrt(static_cast<double>(hd));
        mx = std::max(mx, A[i][j]);
      }
      double z = 0;
      for (auto& v : A[i]) z += (v = std::exp(v - mx));
      for (auto& v : A[i]) v /= z;
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t c = h * hd; c < (h + 1) * hd; ++c) heads[i][c] += A[i][j] * V[j][c];
    }
    if (weights) weights->push_back(A);
  }
  return from_mat(naive_matmul(heads, to_mat(p.fuse)));
}

template <Real Scalar = double>
MeaaParams<Scalar> random_meaa(Rng& rng, std::size_t d, double scale = 0.5) {
  MeaaParams<Scalar> p(d);
  for (Tensor<Scalar>* t : {&p.query, &p.wq, &p.wk, &p.w_a, &p.w1, &p.b1, &p.w2, &p.b2}) {
    *t = rng.tensor<Scalar>(t->shape(), -scale, scale);
  }
  return p;
}

template <Real Scalar = double>
SelfAttentionParams<Scalar> random_self(Rng& rng, std::size_t d, std::size_t heads, double scale = 0.5) {
  SelfAttentionParams<Scalar> p(d, heads);
  for (Tensor<Scalar>* t : {&p.wq, &p.wk, &p.wv, &p.fuse}) *t = rng.tensor<Scalar>(t->shape(), -scale, scale);
  return p;
}

inline Tensor<double> identity(std::size_t d) {
  Tensor<double> t({d, d});
  for (std::size_t i = 0; i < d; ++i) t(i, i) = 1.0;
  return t;
}

/// Small config with every supported knob exercised; T, H, W stay tiny so oracles run fast.
inline ModelConfig tiny_config(std::size_t d = 8, std::size_t heads = 2) {
  ModelConfig c;
  c.frames = 4;
  c.height = 32;
  c.width = 16;
  c.channels = 2;
  c.hidden = d;
  c.heads = heads;
  c.local_depth = 1;
  c.ffn_ratio = 2.0;
  return c;
}

}  // namespace cuenet::testing
