#include <cmath>
#include <functional>
#include <iomanip>
#include <random>
#include <sstream>

#include "cuenet/analysis.hpp"

namespace cuenet::analysis {

namespace {

using Objective = std::function<double()>;

double inner(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Central differences of `objective` with respect to every element of `param`, compared to `analytic`.
GradCheckEntry compare(const std::string& module, const std::string& name, std::size_t instance,
                       Tensor<double>& param, const Tensor<double>& analytic, const Objective& objective,
                       const GradCheckOptions& opts) {
  GradCheckEntry e{module, name, instance, 0, 0, 0, false, {}};
  if (analytic.size() != param.size()) {
    e.note = "analytic gradient has " + std::to_string(analytic.size()) + " entries, parameter has " +
             std::to_string(param.size());
    return e;
  }
  std::vector<double> numeric(param.size()), diff(param.size()), a(analytic.data().begin(), analytic.data().end());
  bool finite = true;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double saved = param[i];
    param[i] = saved + opts.eps;
    const double up = objective();
    param[i] = saved - opts.eps;
    const double down = objective();
    param[i] = saved;
    numeric[i] = (up - down) / (2 * opts.eps);
    diff[i] = a[i] - numeric[i];
    finite = finite && std::isfinite(numeric[i]) && std::isfinite(a[i]);
  }
  e.analytic_norm = norm(a);
  e.numeric_norm = norm(numeric);
  if (!finite) {
    e.rel_error = std::numeric_limits<double>::infinity();
    e.note = "non-finite gradient";
    return e;
  }
  const double scale = std::max(e.analytic_norm, e.numeric_norm);
  e.rel_error = scale < 1e-12 ? norm(diff) : norm(diff) / scale;
  e.passed = e.rel_error <= opts.tol;
  return e;
}

struct Sampler {
  std::mt19937_64 rng;
  std::uniform_real_distribution<double> uni{-1.0, 1.0};

  explicit Sampler(std::uint64_t seed) : rng(seed) {}
  std::size_t between(std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
  }
  void fill(Tensor<double>& t) {
    for (auto& v : t.data()) v = uni(rng);
  }
  Tensor<double> upstream(std::size_t rows, std::size_t cols, bool zero) {
    Tensor<double> u({rows, cols});
    if (!zero) fill(u);
    return u;
  }
};

void check_meaa(GradCheckReport& rep, Sampler& s, std::size_t instance, const GradCheckOptions& opts) {
  const std::size_t d = s.between(2, 8), n = s.between(1, 6);
  MeaaParams<double> p(d);
  Tensor<double> tokens({n, d});
  for (Tensor<double>* t : {&p.query, &p.wq, &p.wk, &p.w_a, &p.w1, &p.b1, &p.w2, &p.b2, &tokens}) s.fill(*t);
  const Tensor<double> u = s.upstream(1, d, opts.zero_upstream);

  const MeaaGrads<double> g = meaa_grad(p.query, tokens, p, u);
  const Objective objective = [&] { return inner(u, meaa(p.query, tokens, p)); };
  const std::pair<const char*, std::pair<Tensor<double>*, const Tensor<double>*>> groups[] = {
      {"query", {&p.query, &g.params.query}}, {"wq", {&p.wq, &g.params.wq}}, {"wk", {&p.wk, &g.params.wk}},
      {"w_a", {&p.w_a, &g.params.w_a}},   {"w1", {&p.w1, &g.params.w1}}, {"b1", {&p.b1, &g.params.b1}},
      {"w2", {&p.w2, &g.params.w2}},      {"b2", {&p.b2, &g.params.b2}}, {"tokens", {&tokens, &g.tokens}},
  };
  for (const auto& [name, pair] : groups) {
    rep.entries.push_back(compare("meaa", name, instance, *pair.first, *pair.second, objective, opts));
  }
}

void check_fuse(GradCheckReport& rep, Sampler& s, std::size_t instance, const GradCheckOptions& opts) {
  const std::size_t d = s.between(2, 8);
  Tensor<double> global({1, d}), cls({1, d}), beta({1, d});
  s.fill(global);
  s.fill(cls);
  s.fill(beta);
  for (auto& b : beta.data()) b *= 3.0;
  const Tensor<double> u = s.upstream(1, d, opts.zero_upstream);
  const Tensor<double> g = fuse_grad_beta(global, cls, beta, u);
  const Objective objective = [&] { return inner(u, fuse(global, cls, beta)); };
  rep.entries.push_back(compare("fuse", "beta", instance, beta, g, objective, opts));
}

void check_classify(GradCheckReport& rep, Sampler& s, std::size_t instance, const GradCheckOptions& opts) {
  const std::size_t d = s.between(2, 8), k = s.between(2, 4);
  FusionParams<double> p(d, k);
  Tensor<double> z({1, d});
  s.fill(p.proj);
  s.fill(p.bias);
  s.fill(z);
  const Tensor<double> u = s.upstream(1, k, opts.zero_upstream).reshaped({k});
  const ClassifyGrads<double> g = classify_grad(z, p, u);
  const Objective objective = [&] { return inner(u, classify(z, p)); };
  rep.entries.push_back(compare("classify", "proj", instance, p.proj, g.proj, objective, opts));
  rep.entries.push_back(compare("classify", "bias", instance, p.bias, g.bias, objective, opts));
}

}  // namespace

bool GradCheckReport::passed() const {
  if (entries.empty()) return false;
  for (const auto& e : entries) {
    if (!e.passed) return false;
  }
  return true;
}

std::string GradCheckReport::to_text() const {
  std::ostringstream os;
  os << "# cuenet gradcheck report v1\n"
     << "# central differences vs analytic gradients; rel = ||a - n|| / max(||a||, ||n||)\n";
  os << std::left << std::setw(10) << "module" << std::setw(10) << "param" << std::setw(10) << "instance"
     << std::setw(14) << "rel_error" << "status\n";
  for (const auto& e : entries) {
    os << std::left << std::setw(10) << e.module << std::setw(10) << e.parameter << std::setw(10) << e.instance
       << std::setw(14) << std::scientific << std::setprecision(3) << e.rel_error << (e.passed ? "pass" : "FAIL");
    if (!e.note.empty()) os << "  " << e.note;
    os << '\n';
  }
  os << "result " << (passed() ? "pass" : "FAIL") << '\n';
  return os.str();
}

GradCheckReport grad_check(const std::string& module, const GradCheckOptions& opts) {
  const bool all = module == "all";
  if (!all && module != "meaa" && module != "fuse" && module != "classify") {
    throw ParameterError("grad_check: unknown module '" + module + "' (expected meaa, fuse, classify or all)");
  }
  GradCheckReport rep;
  Sampler s(opts.seed);
  for (std::size_t i = 0; i < opts.instances; ++i) {
    if (all || module == "meaa") check_meaa(rep, s, i, opts);
    if (all || module == "fuse") check_fuse(rep, s, i, opts);
    if (all || module == "classify") check_classify(rep, s, i, opts);
  }
  return rep;
}

}  // namespace cuenet::analysis
