#pragma once

#include <cstddef>
#include <functional>

namespace attnmask {

/// Process-wide worker count used by the per-pixel and per-token loops.
/// 0 means std::thread::hardware_concurrency().
void set_thread_count(unsigned count);
unsigned thread_count();

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunks never
/// overlap, so bodies that only write their own indices stay deterministic
/// regardless of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t grain = 4096);

}  // namespace attnmask
