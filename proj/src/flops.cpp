#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "cuenet/analysis.hpp"

namespace cuenet::analysis {

AttentionTerms self_attention_terms(std::uint64_t n, std::uint64_t d) {
  return {4 * n * d * d, n * n * d, n * n * d, 0};
}

AttentionTerms meaa_terms(std::uint64_t n, std::uint64_t d) {
  // q* = q Wq, K = X Wk, rows through W1 and W2; alpha dot, q^g = alpha q*, q^g (.) K.
  return {d * d + 3 * n * d * d, 0, 0, d + d + n * d};
}

AttentionTerms eaa_terms(std::uint64_t n, std::uint64_t d) {
  // Q, K, W1, W2; per-row weight dots, weighted query sum, key fusion.
  return {4 * n * d * d, 0, 0, 3 * n * d};
}

AttentionTerms attention_terms(AttentionKind kind, std::uint64_t n, std::uint64_t d) {
  switch (kind) {
    case AttentionKind::self_attention: return self_attention_terms(n, d);
    case AttentionKind::meaa: return meaa_terms(n, d);
    case AttentionKind::eaa_original: return eaa_terms(n, d);
  }
  return {};
}

std::uint64_t FlopsReport::total() const {
  std::uint64_t sum = 0;
  for (const auto& s : stages) sum += s.macs;
  return sum;
}

std::uint64_t FlopsReport::stage(const std::string& name) const {
  for (const auto& s : stages) {
    if (s.name == name) return s.macs;
  }
  return 0;
}

std::string FlopsReport::to_text() const {
  std::ostringstream os;
  os << "# cuenet flops report v1\n"
     << "# convention: MAC (one fused multiply-add counted once; FLOPs = 2 x MACs)\n"
     << "# config: T=" << config.frames << " H=" << config.height << " W=" << config.width << " c=" << config.channels
     << " d=" << config.hidden << " heads=" << config.heads << " depth=" << config.local_depth
     << " local=" << attention_name(config.local_attention) << " global=" << attention_name(config.global_attention)
     << '\n';
  os << std::left << std::setw(24) << "stage" << std::right << std::setw(20) << "macs" << '\n';
  for (const auto& s : stages) os << std::left << std::setw(24) << s.name << std::right << std::setw(20) << s.macs << '\n';
  os << std::left << std::setw(24) << "total" << std::right << std::setw(20) << total() << '\n';
  os << std::left << std::setw(24) << "total_gflops" << std::right << std::setw(20) << std::fixed
     << std::setprecision(3) << 2.0 * static_cast<double>(total()) / 1e9 << '\n';
  return os.str();
}

FlopsReport count_flops(const ModelConfig& cfg) {
  cfg.validate();
  const GridDims g = cfg.grid();
  const std::uint64_t T = g.frames, Hp = g.height, Wp = g.width, d = g.hidden;
  const std::uint64_t s = g.tokens_per_frame(), n = g.token_count();
  const std::uint64_t r = cfg.ffn_width();

  FlopsReport rep;
  rep.config = cfg;
  // Patch projection runs over all input frames before the stride-2 frame selection;
  // temporal taps falling in the zero padding are skipped.
  const std::uint64_t conv_taps = valid_taps_1d(cfg.frames, kPatchFrames, 1, 1, cfg.frames) * (Hp * kPatch) *
                                  (Wp * kPatch);
  rep.stages.push_back({"backbone", conv_taps * cfg.channels * d});

  const std::uint64_t lt_taps = valid_taps_1d(T, cfg.lt_kernel, cfg.lt_kernel / 2, 1, T) * Hp * Wp;
  for (std::size_t l = 0; l < cfg.local_depth; ++l) {
    const std::string prefix = "local." + std::to_string(l);
    rep.stages.push_back({prefix + ".lt", 2 * matmul_macs(T * s, d, d) + lt_taps * d});
    rep.stages.push_back({prefix + ".attention", T * attention_terms(cfg.local_attention, s, d).total()});
    rep.stages.push_back({prefix + ".ffn", 2 * matmul_macs(T * s, d, r)});
  }

  const std::uint64_t dpe_taps =
      valid_taps_1d(T, 3, 1, 1, T) * valid_taps_1d(Hp, 3, 1, 1, Hp) * valid_taps_1d(Wp, 3, 1, 1, Wp);
  rep.stages.push_back({"global.dpe", dpe_taps * d});
  rep.stages.push_back({"global.attention", attention_terms(cfg.global_attention, n, d).total()});
  rep.stages.push_back({"global.ffn", 2 * matmul_macs(1, d, r)});
  rep.stages.push_back({"fusion", 2 * d + matmul_macs(1, d, cfg.num_classes)});
  return rep;
}

bool FlopsVerification::ok() const {
  for (const auto& s : stages) {
    if (!s.matches()) return false;
  }
  return true;
}

std::string FlopsVerification::discrepancies() const {
  std::ostringstream os;
  for (const auto& s : stages) {
    if (!s.matches()) os << s.name << " (analytic " << s.analytic << ", instrumented " << s.instrumented << ") ";
  }
  return os.str();
}

FlopsVerification verify_flops(const ModelConfig& cfg, std::uint64_t seed) {
  const FlopsReport analytic = count_flops(cfg);
  const WeightContainer<double> w = init_weights<double>(cfg);
  const ModelParams<double> params = bind_params(w, cfg);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Tensor<double> video({cfg.frames, cfg.height, cfg.width, cfg.channels});
  for (auto& v : video.data()) v = uni(rng);
  const DetectionSequence det = empty_detections(cfg.frames, {cfg.height, cfg.width});

  exec::MacCounter counter;
  {
    exec::ScopedContext ctx({1, &counter, nullptr});
    (void)forward(video, det, params, cfg);
  }

  FlopsVerification out;
  std::set<std::string> seen;
  for (const auto& s : analytic.stages) {
    const auto it = counter.stages().find(s.name);
    out.stages.push_back({s.name, s.macs, it == counter.stages().end() ? 0 : it->second});
    seen.insert(s.name);
  }
  for (const auto& [name, macs] : counter.stages()) {
    if (!seen.count(name) && macs != 0) out.stages.push_back({name, 0, macs});
  }
  return out;
}

}  // namespace cuenet::analysis
