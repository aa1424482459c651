#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace cuenet::exec {

/// Per-stage multiply-accumulate tallies collected while kernels execute.
///
/// One unit is one multiply feeding an accumulation or one elementwise
/// feature product. Normalizations, activations, softmax, residual adds,
/// biases and means are not counted.
class MacCounter {
 public:
  void add(std::uint64_t macs) { stages_[stage_] += macs; }
  void set_stage(std::string stage) { stage_ = std::move(stage); }
  const std::string& stage() const { return stage_; }
  const std::map<std::string, std::uint64_t>& stages() const { return stages_; }
  std::uint64_t total() const;

 private:
  std::string stage_ = "unscoped";
  std::map<std::string, std::uint64_t> stages_;
};

/// High-water mark of live scratch elements, registered by Scratch buffers.
class MemTracker {
 public:
  void acquire(std::size_t elements);
  void release(std::size_t elements);
  std::size_t live() const { return live_; }
  std::size_t peak() const { return peak_; }

 private:
  std::size_t live_ = 0;
  std::size_t peak_ = 0;
};

struct Context {
  unsigned threads = 1;
  MacCounter* macs = nullptr;
  MemTracker* memory = nullptr;
};

/// Context of the calling thread. Worker threads spawned by parallel_for
/// run with a default context, so counting always runs sequentially.
Context& current();

inline void count_macs(std::uint64_t n) {
  if (auto* c = current().macs) c->add(n);
}

/// Installs a context for the lifetime of the scope.
class ScopedContext {
 public:
  explicit ScopedContext(Context ctx);
  ~ScopedContext();
  ScopedContext(const ScopedContext&) = delete;
  ScopedContext& operator=(const ScopedContext&) = delete;

 private:
  Context saved_;
};

/// Labels MACs counted inside the scope with a stage name.
class StageScope {
 public:
  explicit StageScope(const std::string& stage);
  ~StageScope();
  StageScope(const StageScope&) = delete;
  StageScope& operator=(const StageScope&) = delete;

 private:
  std::string saved_;
};

/// Splits [0, count) into contiguous chunks over the context's thread count.
/// Runs inline when threads == 1, when counting is active, or when the range is small.
void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk = 1);

/// Scratch storage whose element count is reported to the active MemTracker.
template <typename Scalar>
class Scratch {
 public:
  explicit Scratch(std::size_t n) : data_(n, Scalar{0}), tracker_(current().memory) {
    if (tracker_) tracker_->acquire(n);
  }
  ~Scratch() { release(); }
  Scratch(const Scratch&) = delete;
  Scratch& operator=(const Scratch&) = delete;

  void release() {
    if (released_) return;
    released_ = true;
    if (tracker_) tracker_->release(data_.size());
    data_.clear();
    data_.shrink_to_fit();
  }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }
  Scalar& operator[](std::size_t i) { return data_[i]; }
  const Scalar& operator[](std::size_t i) const { return data_[i]; }

 private:
  std::vector<Scalar> data_;
  MemTracker* tracker_;
  bool released_ = false;
};

}  // namespace cuenet::exec
