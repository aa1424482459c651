#include "cuenet/exec.hpp"

#include <algorithm>
#include <thread>

namespace cuenet::exec {

std::uint64_t MacCounter::total() const {
  std::uint64_t sum = 0;
  for (const auto& [name, macs] : stages_) sum += macs;
  return sum;
}

void MemTracker::acquire(std::size_t elements) {
  live_ += elements;
  peak_ = std::max(peak_, live_);
}

void MemTracker::release(std::size_t elements) { live_ -= std::min(live_, elements); }

Context& current() {
  thread_local Context ctx;
  return ctx;
}

ScopedContext::ScopedContext(Context ctx) : saved_(current()) { current() = ctx; }

ScopedContext::~ScopedContext() { current() = saved_; }

StageScope::StageScope(const std::string& stage) {
  if (auto* c = current().macs) {
    saved_ = c->stage();
    c->set_stage(stage);
  }
}

StageScope::~StageScope() {
  if (auto* c = current().macs) c->set_stage(saved_);
}

void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk) {
  const Context& ctx = current();
  std::size_t workers = ctx.threads;
  if (ctx.macs != nullptr || ctx.memory != nullptr) workers = 1;
  workers = std::min<std::size_t>(workers, (count + min_chunk - 1) / std::max<std::size_t>(min_chunk, 1));
  if (workers <= 1) {
    if (count) body(0, count);
    return;
  }
  const std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin < end) pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(0, std::min(count, chunk));
}

}  // namespace cuenet::exec
