#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cuenet/attention.hpp"
#include "cuenet/model.hpp"

namespace cuenet::analysis {

// ---------------------------------------------------------------------------
// Multiply-accumulate accounting (MAC convention: one fused multiply-add = 1).

/// MAC terms of one attention operator over n tokens of width d.
struct AttentionTerms {
  std::uint64_t projections = 0;   // dense d x d maps
  std::uint64_t scores = 0;        // query-key products (self-attention only)
  std::uint64_t weighted_sum = 0;  // attention-weighted value sums (self-attention only)
  std::uint64_t elementwise = 0;   // attention-vector dots, query scaling, key fusion

  std::uint64_t total() const { return projections + scores + weighted_sum + elementwise; }
};

inline std::uint64_t matmul_macs(std::uint64_t m, std::uint64_t k, std::uint64_t n) { return m * k * n; }

/// Projections 4nd^2 (q, k, v, fuse) plus n^2 d for scores and n^2 d for the weighted sum.
AttentionTerms self_attention_terms(std::uint64_t n, std::uint64_t d);

/// Affine in n: (3d^2 + d) n + (d^2 + 2d).
AttentionTerms meaa_terms(std::uint64_t n, std::uint64_t d);

/// 4nd^2 projections plus 3nd for weights, the pooled query and key fusion.
AttentionTerms eaa_terms(std::uint64_t n, std::uint64_t d);

AttentionTerms attention_terms(AttentionKind kind, std::uint64_t n, std::uint64_t d);

struct StageFlops {
  std::string name;
  std::uint64_t macs = 0;
};

struct FlopsReport {
  ModelConfig config;
  std::vector<StageFlops> stages;

  std::uint64_t total() const;
  /// 0 when the stage does not exist.
  std::uint64_t stage(const std::string& name) const;
  /// Plain-text table with a versioned header declaring the MAC convention.
  std::string to_text() const;
};

/// Closed-form per-stage MAC counts of the full forward pass.
FlopsReport count_flops(const ModelConfig& cfg);

struct StageCheck {
  std::string name;
  std::uint64_t analytic = 0;
  std::uint64_t instrumented = 0;
  bool matches() const { return analytic == instrumented; }
};

struct FlopsVerification {
  std::vector<StageCheck> stages;
  bool ok() const;
  /// Names of the stages that disagree.
  std::string discrepancies() const;
};

/// Runs a seeded forward pass with per-kernel MAC counting and compares every stage to count_flops.
FlopsVerification verify_flops(const ModelConfig& cfg, std::uint64_t seed = 7);

// ---------------------------------------------------------------------------
// Activation memory.
//
// Liveness model: each intermediate buffer is live from the step that produces it until
// the step that last consumes it has finished. Inputs, parameters and the 1 x d result
// are not counted. Peaks per operator:
//   meaa          2nd + 2d + 1        (q*, K, alpha, q^g, fused rows)
//   eaa_original  3nd + n + d         (Q, K, weights, pooled query, fused rows)
//   self          4nd + b n           (Q, K, V, head outputs, one b x n score block)

struct MemEstimate {
  AttentionKind kind;
  std::size_t n = 0;
  std::size_t d = 0;
  Precision precision = Precision::f64;
  std::size_t elements = 0;
  std::size_t bytes = 0;
};

/// `query_block` = 0 means all n query rows are scored at once.
MemEstimate estimate_memory(AttentionKind kind, std::size_t n, std::size_t d, Precision precision,
                            std::size_t query_block = 0);

/// High-water mark of live scratch elements observed while running the pooled global attention.
std::size_t measure_attention_memory(AttentionKind kind, std::size_t n, std::size_t d, std::size_t heads,
                                     std::uint64_t seed = 11, std::size_t query_block = 0);

// ---------------------------------------------------------------------------
// Timing.

struct BenchRow {
  AttentionKind kind;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t reps = 0;
  double median_ns = 0;
  double mad_ns = 0;
  double checksum = 0;  // sum of the pooled output; identical across runs with the same seed
};

struct BenchOptions {
  std::size_t d = 32;
  std::size_t heads = 1;
  std::size_t reps = 5;
  unsigned threads = 1;
  std::uint64_t seed = 1;
  std::size_t query_block = 64;
};

/// Median wall time (single precision) of one pooled attention call for each n of the sweep.
/// Throws ParameterError when reps < 5. One untimed warm-up call precedes each n.
std::vector<BenchRow> bench_attention(AttentionKind kind, const std::vector<std::size_t>& n_sweep,
                                      const BenchOptions& opts);

std::string bench_csv(const std::vector<BenchRow>& rows);

/// Coefficient of determination of the least-squares line through (x, y).
double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// Gradient checks.

struct GradCheckEntry {
  std::string module;
  std::string parameter;
  std::size_t instance = 0;
  double rel_error = 0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double analytic_norm = 0;
  double numeric_norm = 0;
  bool passed = false;
  std::string note;
};

struct GradCheckOptions {
  std::size_t instances = 20;
  double eps = 1e-5;
  double tol = 1e-4;
  std::uint64_t seed = 3;
  bool zero_upstream = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool passed() const;
  std::string to_text() const;
};

/// module: "meaa", "fuse", "classify" or "all".
GradCheckReport grad_check(const std::string& module, const GradCheckOptions& opts = {});

}  // namespace cuenet::analysis
