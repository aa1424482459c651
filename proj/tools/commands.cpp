#include "commands.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "cuenet/analysis.hpp"
#include "cuenet/model.hpp"
#include "json.hpp"

namespace cuenet::cli {

namespace {

using Json = nlohmann::ordered_json;

/// Raised by a subcommand when one of its checks does not hold.
class AssertionFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string video, detections, weights, config, out, summary, preset = "desk";
  std::string precision, attention, local_attention;
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;

  // bench
  std::string kinds = "meaa,self";
  std::size_t n_min = 1024, n_max = 32768, d = 32, reps = 5, heads = 1;
  bool check = false;

  // gradcheck
  std::string module = "all";
  std::size_t instances = 20;
  double eps = 1e-5, tol = 1e-4;

  // flops
  bool verify = true, ablation = false;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw IoError(std::string("missing --") + what);
  if (!std::filesystem::exists(path)) throw IoError(std::string(what) + " file '" + path + "' does not exist");
}

unsigned resolve_threads(unsigned flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("CUENET_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

ModelConfig resolve_config(const Options& o) {
  ModelConfig cfg;
  if (!o.config.empty()) {
    require_file(o.config, "config");
    cfg = load_config(o.config);
  } else if (o.preset == "desk") {
    cfg = desk_preset();
  } else if (o.preset == "large") {
    cfg = large_preset();
  } else {
    throw ConfigError("unknown preset '" + o.preset + "' (expected desk or large)");
  }
  if (!o.precision.empty()) {
    if (o.precision == "f32") cfg.precision = Precision::f32;
    else if (o.precision == "f64") cfg.precision = Precision::f64;
    else throw ConfigError("--precision must be f32 or f64");
  }
  if (!o.attention.empty()) cfg.global_attention = parse_attention(o.attention);
  if (!o.local_attention.empty()) cfg.local_attention = parse_attention(o.local_attention);
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

void emit(const Options& o, std::ostream& out, const std::string& text) {
  if (!o.out.empty()) io::write_file_atomic(o.out, text);
  out << text;
}

Json box_json(const BBox& b) { return Json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

Json crop_json(const CropDecision& c) {
  return Json{{"applied", c.applied}, {"box", box_json(c.box)}, {"max_people", c.max_people}};
}

DetectionSequence load_detections(const std::string& path, FrameDims dims) {
  require_file(path, "detections");
  return parse_detections(io::read_file(path), dims);
}

// ---------------------------------------------------------------------------

int cmd_crop(const Options& o, std::ostream& out) {
  require_file(o.video, "video");
  if (o.out.empty()) throw IoError("missing --out");
  const io::AnyTensor video = io::read_ctf(o.video);
  const Shape& shape = io::shape_of(video);
  if (shape.size() != 4) throw ConfigError("video must be a rank-4 (T,H,W,c) tensor, got " + shape_string(shape));
  const DetectionSequence det = load_detections(o.detections, {shape[1], shape[2]});
  if (det.frame_count() != shape[0]) {
    throw FormatError("detections describe " + std::to_string(det.frame_count()) + " frames but the video has " +
                      std::to_string(shape[0]));
  }
  const CropDecision decision = compute_crop_box(det);
  std::visit([&](const auto& v) { io::write_ctf(o.out, apply_crop(v, decision)); }, video);
  const std::string summary = crop_json(decision).dump() + "\n";
  if (!o.summary.empty()) io::write_file_atomic(o.summary, summary);
  out << summary;
  return kOk;
}

template <Real Scalar>
Json infer_as(const Options& o, const ModelConfig& cfg, const io::AnyTensor& any_video, const DetectionSequence& det) {
  const Tensor<Scalar> video = std::visit([](const auto& v) { return v.template cast<Scalar>(); }, any_video);
  WeightContainer<Scalar> w;
  if (!o.weights.empty()) {
    require_file(o.weights, "weights");
    w = load_weights<Scalar>(o.weights, /*allow_widening=*/true);
  } else {
    w = init_weights<Scalar>(cfg);
  }
  ForwardTrace trace;
  Tensor<Scalar> logits({cfg.num_classes});
  {
    exec::ScopedContext ctx({resolve_threads(o.threads), nullptr, nullptr});
    logits = forward(video, det, w, cfg, &trace);
  }
  // Probabilities are a presentation of the logits only.
  Tensor<double> probs = logits.template cast<double>().reshaped({1, logits.size()});
  probs = softmax_rows(probs);
  const std::size_t cls = argmax(logits);
  static const char* kLabels[] = {"NonViolent", "Violent"};
  Json j;
  j["logits"] = std::vector<double>(logits.data().begin(), logits.data().end());
  j["probabilities"] = std::vector<double>(probs.data().begin(), probs.data().end());
  j["class"] = cls;
  j["label"] = cls < 2 && cfg.num_classes == 2 ? kLabels[cls] : "class_" + std::to_string(cls);
  j["crop"] = crop_json(trace.crop);
  j["precision"] = precision_name(cfg.precision);
  j["weights_widened"] = w.widened;
  return j;
}

int cmd_infer(const Options& o, std::ostream& out) {
  const ModelConfig cfg = resolve_config(o);
  require_file(o.video, "video");
  const io::AnyTensor video = io::read_ctf(o.video);
  const Shape& shape = io::shape_of(video);
  if (shape.size() != 4) throw ConfigError("video must be a rank-4 (T,H,W,c) tensor, got " + shape_string(shape));
  const DetectionSequence det = o.detections.empty() ? empty_detections(shape[0], {shape[1], shape[2]})
                                                     : load_detections(o.detections, {shape[1], shape[2]});
  const Json j = cfg.precision == Precision::f32 ? infer_as<float>(o, cfg, video, det)
                                                 : infer_as<double>(o, cfg, video, det);
  emit(o, out, j.dump() + "\n");
  return kOk;
}

int cmd_init_weights(const Options& o, std::ostream& out) {
  const ModelConfig cfg = resolve_config(o);
  if (o.out.empty()) throw IoError("missing --out");
  std::size_t count = 0;
  if (cfg.precision == Precision::f32) {
    const auto w = init_weights<float>(cfg);
    save_weights(w, o.out);
    count = w.parameter_count();
  } else {
    const auto w = init_weights<double>(cfg);
    save_weights(w, o.out);
    count = w.parameter_count();
  }
  out << Json{{"weights", o.out}, {"parameters", count}, {"precision", precision_name(cfg.precision)}}.dump() << '\n';
  return kOk;
}

int cmd_flops(const Options& o, std::ostream& out) {
  const ModelConfig cfg = resolve_config(o);
  const analysis::FlopsReport rep = analysis::count_flops(cfg);
  std::ostringstream text;
  text << rep.to_text();
  bool failed = false;
  std::string failure;

  if (o.verify) {
    if (cfg.grid().token_count() > 4096 || cfg.hidden > 256) {
      text << "# verify: skipped (config too large for instrumented execution)\n";
    } else {
      const analysis::FlopsVerification v = analysis::verify_flops(cfg);
      text << "# verify: " << (v.ok() ? "instrumented == analytic for every stage" : "MISMATCH " + v.discrepancies())
           << '\n';
      if (!v.ok()) {
        failed = true;
        failure = "analytic MAC count differs from instrumented execution: " + v.discrepancies();
      }
    }
  }

  if (o.ablation) {
    struct Row {
      const char* local;
      const char* global;
      AttentionKind lk, gk;
    };
    const Row rows[] = {{"self", "self", AttentionKind::self_attention, AttentionKind::self_attention},
                        {"meaa", "self", AttentionKind::meaa, AttentionKind::self_attention},
                        {"meaa", "meaa", AttentionKind::meaa, AttentionKind::meaa},
                        {"self", "meaa", AttentionKind::self_attention, AttentionKind::meaa}};
    text << "# ablation (total MACs)\n";
    std::uint64_t totals[4];
    for (int i = 0; i < 4; ++i) {
      ModelConfig c = cfg;
      c.local_attention = rows[i].lk;
      c.global_attention = rows[i].gk;
      totals[i] = analysis::count_flops(c).total();
      text << "local=" << rows[i].local << " global=" << rows[i].global << " macs=" << totals[i] << '\n';
    }
    if (!(totals[2] < totals[3] && totals[3] < totals[0])) {
      failed = true;
      failure = "ablation ordering meaa-everywhere < meaa-global < self-everywhere does not hold";
    }
  }
  emit(o, out, text.str());
  if (failed) throw AssertionFailure(failure);
  return kOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  analysis::GradCheckOptions opts;
  opts.instances = o.instances;
  opts.eps = o.eps;
  opts.tol = o.tol;
  if (o.seed) opts.seed = *o.seed;
  const analysis::GradCheckReport rep = analysis::grad_check(o.module, opts);
  emit(o, out, rep.to_text());
  if (!rep.passed()) throw AssertionFailure("gradient check failed for at least one parameter group");
  return kOk;
}

int cmd_bench(const Options& o, std::ostream& out) {
  if (o.reps < 5) throw ParameterError("--reps must be at least 5");
  if (o.n_min == 0 || o.n_max < o.n_min) throw ParameterError("--n-min/--n-max must describe a non-empty sweep");
  analysis::BenchOptions opts;
  opts.d = o.d;
  opts.heads = o.heads;
  opts.reps = o.reps;
  opts.threads = resolve_threads(o.threads);
  if (o.seed) opts.seed = *o.seed;
  std::vector<std::size_t> sweep;
  for (std::size_t n = o.n_min; n <= o.n_max; n *= 2) sweep.push_back(n);

  std::vector<analysis::BenchRow> all;
  std::string failure;
  std::stringstream kinds(o.kinds);
  for (std::string k; std::getline(kinds, k, ',');) {
    const AttentionKind kind = parse_attention(k);
    const auto rows = analysis::bench_attention(kind, sweep, opts);
    all.insert(all.end(), rows.begin(), rows.end());
    if (!o.check || rows.size() < 2) continue;
    if (kind == AttentionKind::self_attention) {
      const double ratio = rows.back().median_ns / rows[rows.size() - 2].median_ns;
      if (ratio < 3.0) failure += "self-attention t(2n)/t(n) = " + std::to_string(ratio) + " < 3.0; ";
    } else {
      std::vector<double> x, y;
      for (const auto& r : rows) {
        x.push_back(static_cast<double>(r.n));
        y.push_back(r.median_ns);
      }
      const double r2 = analysis::linear_fit_r2(x, y);
      if (r2 < 0.98) failure += std::string(attention_name(kind)) + " linear fit R^2 = " + std::to_string(r2) + " < 0.98; ";
    }
  }
  emit(o, out, analysis::bench_csv(all));
  if (!failure.empty()) throw AssertionFailure(failure);
  return kOk;
}

int cmd_memory(const Options& o, std::ostream& out) {
  std::ostringstream text;
  text << "# cuenet memory report v1\n"
       << "# liveness: buffers live from producing step through last consuming step; inputs/params/result excluded\n"
       << "kind,n,d,elements,bytes,measured_elements\n";
  const Precision prec = o.precision == "f32" ? Precision::f32 : Precision::f64;
  bool ok = true;
  for (AttentionKind k : {AttentionKind::meaa, AttentionKind::eaa_original, AttentionKind::self_attention}) {
    const auto est = analysis::estimate_memory(k, o.n_min, o.d, prec);
    const std::size_t measured = analysis::measure_attention_memory(k, o.n_min, o.d, o.heads);
    ok = ok && measured == est.elements;
    text << attention_name(k) << ',' << o.n_min << ',' << o.d << ',' << est.elements << ',' << est.bytes << ','
         << measured << '\n';
  }
  emit(o, out, text.str());
  if (!ok) throw AssertionFailure("instrumented high-water mark differs from the memory estimate");
  return kOk;
}

int cmd_selftest(const Options& o, std::ostream& out) {
  std::ostringstream text;
  std::string failure;
  const auto report = [&](const std::string& name, bool pass) {
    text << (pass ? "pass " : "FAIL ") << name << '\n';
    if (!pass) failure += name + "; ";
  };

  const ModelConfig cfg = desk_preset();
  for (AttentionKind k : {AttentionKind::self_attention, AttentionKind::meaa, AttentionKind::eaa_original}) {
    ModelConfig c = cfg;
    c.global_attention = k;
    report(std::string("flops instrumented == analytic (global ") + attention_name(k) + ")",
           analysis::verify_flops(c).ok());
  }
  analysis::GradCheckOptions gopts;
  gopts.instances = 3;
  report("gradient checks", analysis::grad_check("all", gopts).passed());

  DetectionSequence det;
  det.dims = {100, 100};
  det.frames = {{{10, 10, 20, 20}, {50, 60, 70, 80}}, {{5, 15, 12, 18}}};
  const CropDecision c = compute_crop_box(det);
  report("crop union fixture", c.applied && c.box == BBox{5, 10, 70, 80} && c.max_people == 2);

  const std::size_t n = 64, d = 16;
  report("memory estimate matches instrumented peak (meaa)",
         analysis::measure_attention_memory(AttentionKind::meaa, n, d, 1) ==
             analysis::estimate_memory(AttentionKind::meaa, n, d, Precision::f64).elements);
  report("memory estimate matches instrumented peak (eaa)",
         analysis::measure_attention_memory(AttentionKind::eaa_original, n, d, 1) ==
             analysis::estimate_memory(AttentionKind::eaa_original, n, d, Precision::f64).elements);

  emit(o, out, text.str());
  if (!failure.empty()) throw AssertionFailure(failure);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"cuenet: cropping, local/global uniblocks and additive attention for violence detection"};
  app.require_subcommand(1);
  Options o;

  const auto add_io = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "Output path");
    sub->add_option("--threads", o.threads, "Worker threads (default: $CUENET_THREADS or 1)");
    sub->add_option("--seed", o.seed, "Random seed");
  };
  const auto add_model = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Model config (key=value)");
    sub->add_option("--preset", o.preset, "Built-in config when --config is absent")->check(CLI::IsMember({"desk", "large"}));
    sub->add_option("--precision", o.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
    sub->add_option("--attention", o.attention, "Global block attention")->check(CLI::IsMember({"self", "meaa", "eaa"}));
    sub->add_option("--local-attention", o.local_attention, "Local block mixer")->check(CLI::IsMember({"self", "meaa", "eaa"}));
  };

  auto* crop = app.add_subcommand("crop", "Crop a video to the union box of its person detections");
  crop->add_option("--video", o.video, "CTF1 video (T,H,W,c)");
  crop->add_option("--detections", o.detections, "Detection JSON Lines");
  crop->add_option("--summary", o.summary, "Also write the JSON summary here");
  add_io(crop);

  auto* infer = app.add_subcommand("infer", "Run the full model and print logits, probabilities and class");
  infer->add_option("--video", o.video, "CTF1 video (T,H,W,c)");
  infer->add_option("--detections", o.detections, "Detection JSON Lines (default: no detections)");
  infer->add_option("--weights", o.weights, "CWC1 weights (default: seeded initialization)");
  add_model(infer);
  add_io(infer);

  auto* initw = app.add_subcommand("init-weights", "Write seeded initial weights as CWC1");
  add_model(initw);
  add_io(initw);

  auto* flops = app.add_subcommand("flops", "Per-stage MAC table, verified against instrumented execution");
  add_model(flops);
  add_io(flops);
  flops->add_flag("--verify,!--no-verify", o.verify, "Compare with instrumented execution (desk-scale configs)");
  flops->add_flag("--ablation", o.ablation, "Also tabulate local/global attention combinations");

  auto* grad = app.add_subcommand("gradcheck", "Central-difference checks of the analytic gradients");
  grad->add_option("--module", o.module, "meaa, fuse, classify or all")->check(CLI::IsMember({"meaa", "fuse", "classify", "all"}));
  grad->add_option("--instances", o.instances, "Random instances per module");
  grad->add_option("--eps", o.eps, "Difference step");
  grad->add_option("--tol", o.tol, "Relative tolerance");
  add_io(grad);

  auto* bench = app.add_subcommand("bench", "Attention wall-time sweep over powers of two (CSV)");
  bench->add_option("--kinds", o.kinds, "Comma-separated: meaa, eaa, self");
  bench->add_option("--n-min", o.n_min, "Smallest token count");
  bench->add_option("--n-max", o.n_max, "Largest token count");
  bench->add_option("--d", o.d, "Hidden width");
  bench->add_option("--heads", o.heads, "Self-attention heads");
  bench->add_option("--reps", o.reps, "Timed repetitions per point (>= 5)")->check(CLI::Range(std::size_t{5}, std::size_t{1000000}));
  bench->add_flag("--check", o.check, "Fail unless additive kinds fit a line (R^2 >= 0.98) and self-attention grows >= 3x per doubling");
  add_io(bench);

  auto* memory = app.add_subcommand("memory", "Attention activation-memory estimates vs instrumented peaks");
  memory->add_option("--n", o.n_min, "Token count");
  memory->add_option("--d", o.d, "Hidden width");
  memory->add_option("--heads", o.heads, "Self-attention heads");
  memory->add_option("--precision", o.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
  add_io(memory);

  auto* selftest = app.add_subcommand("selftest", "Quick internal consistency checks");
  add_io(selftest);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o_out, o_err;
    const int code = app.exit(e, o_out, o_err);
    out << o_out.str();
    err << o_err.str();
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (crop->parsed()) return cmd_crop(o, out);
    if (infer->parsed()) return cmd_infer(o, out);
    if (initw->parsed()) return cmd_init_weights(o, out);
    if (flops->parsed()) return cmd_flops(o, out);
    if (grad->parsed()) return cmd_gradcheck(o, out);
    if (bench->parsed()) return cmd_bench(o, out);
    if (memory->parsed()) return cmd_memory(o, out);
    if (selftest->parsed()) return cmd_selftest(o, out);
  } catch (const AssertionFailure& e) {
    err << "assertion failed: " << e.what() << '\n';
    return kAssertionFailed;
  } catch (const IoError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const FormatError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const ParameterError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  return kInputError;
}

}  // namespace cuenet::cli
