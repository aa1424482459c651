#include <random>

#include "cuenet/analysis.hpp"

namespace cuenet::analysis {

MemEstimate estimate_memory(AttentionKind kind, std::size_t n, std::size_t d, Precision precision,
                            std::size_t query_block) {
  if (n == 0 || d == 0) throw ParameterError("estimate_memory: n and d must be at least 1");
  MemEstimate m{kind, n, d, precision, 0, 0};
  switch (kind) {
    case AttentionKind::meaa: m.elements = 2 * n * d + 2 * d + 1; break;
    case AttentionKind::eaa_original: m.elements = 3 * n * d + n + d; break;
    case AttentionKind::self_attention: {
      const std::size_t block = query_block == 0 ? n : std::min(query_block, n);
      m.elements = 4 * n * d + block * n;
      break;
    }
  }
  m.bytes = m.elements * precision_width(precision);
  return m;
}

std::size_t measure_attention_memory(AttentionKind kind, std::size_t n, std::size_t d, std::size_t heads,
                                     std::uint64_t seed, std::size_t query_block) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const auto fill = [&](Tensor<double>& t) {
    for (auto& v : t.data()) v = uni(rng);
  };
  Tensor<double> tokens({n, d});
  fill(tokens);
  MeaaParams<double> additive(d);
  for (Tensor<double>* t : {&additive.query, &additive.wq, &additive.wk, &additive.w_a, &additive.w1, &additive.b1,
                            &additive.w2, &additive.b2}) {
    fill(*t);
  }
  SelfAttentionParams<double> self(d, heads);
  for (Tensor<double>* t : {&self.wq, &self.wk, &self.wv, &self.fuse}) fill(*t);

  exec::MemTracker tracker;
  exec::ScopedContext ctx({1, nullptr, &tracker});
  switch (kind) {
    case AttentionKind::meaa: (void)meaa(additive.query, tokens, additive); break;
    case AttentionKind::eaa_original: (void)eaa_original(tokens, additive); break;
    case AttentionKind::self_attention: (void)self_attention_pooled(tokens, self, query_block); break;
  }
  return tracker.peak();
}

}  // namespace cuenet::analysis
