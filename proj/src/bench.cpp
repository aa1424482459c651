#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "cuenet/analysis.hpp"

namespace cuenet::analysis {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

std::vector<BenchRow> bench_attention(AttentionKind kind, const std::vector<std::size_t>& n_sweep,
                                      const BenchOptions& opts) {
  if (opts.reps < 5) throw ParameterError("bench_attention: reps must be at least 5, got " + std::to_string(opts.reps));
  if (opts.d == 0 || opts.heads == 0 || opts.d % opts.heads) throw ParameterError("bench_attention: heads must divide d");
  const std::size_t d = opts.d;

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<float> uni(-1.0f, 1.0f);
  const auto fill = [&](Tensor<float>& t, float scale) {
    for (auto& v : t.data()) v = scale * uni(rng);
  };
  const float w_scale = 1.0f / std::sqrt(static_cast<float>(d));
  MeaaParams<float> additive(d);
  for (Tensor<float>* t : {&additive.query, &additive.wq, &additive.wk, &additive.w_a, &additive.w1, &additive.b1,
                           &additive.w2, &additive.b2}) {
    fill(*t, w_scale);
  }
  SelfAttentionParams<float> self(d, opts.heads);
  for (Tensor<float>* t : {&self.wq, &self.wk, &self.wv, &self.fuse}) fill(*t, w_scale);

  exec::ScopedContext ctx({std::max(1u, opts.threads), nullptr, nullptr});
  std::vector<BenchRow> rows;
  for (std::size_t n : n_sweep) {
    Tensor<float> tokens({n, d});
    fill(tokens, 1.0f);
    const auto run = [&]() -> Tensor<float> {
      switch (kind) {
        case AttentionKind::meaa: return meaa(additive.query, tokens, additive);
        case AttentionKind::eaa_original: return eaa_original(tokens, additive);
        case AttentionKind::self_attention: return self_attention_pooled(tokens, self, opts.query_block);
      }
      throw ParameterError("bench_attention: unknown kind");
    };
    const Tensor<float> warm = run();
    std::vector<double> times;
    for (std::size_t r = 0; r < opts.reps; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const Tensor<float> out = run();
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
    }
    BenchRow row{kind, n, d, opts.reps, median(times), 0, 0};
    std::vector<double> dev;
    for (double t : times) dev.push_back(std::abs(t - row.median_ns));
    row.mad_ns = median(dev);
    for (float v : warm.data()) row.checksum += v;
    rows.push_back(row);
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "kind,n,d,reps,median_ns,mad_ns\n";
  os.setf(std::ios::fixed);
  os.precision(0);
  for (const auto& r : rows) {
    os << attention_name(r.kind) << ',' << r.n << ',' << r.d << ',' << r.reps << ',' << r.median_ns << ','
       << r.mad_ns << '\n';
  }
  return os.str();
}

double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ParameterError("linear_fit_r2: need at least two paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return syy == 0 ? 1.0 : 0.0;
  return (sxy * sxy) / (sxx * syy);
}

}  // namespace cuenet::analysis
