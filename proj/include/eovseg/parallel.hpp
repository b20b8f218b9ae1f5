#pragma once

#include <cstddef>
#include <functional>

namespace eovseg {

// Number of worker threads kernels may use. 0 and 1 both mean the calling
// thread only. Initialized from EOVSEG_THREADS (default 0).
std::size_t kernel_threads();
void set_kernel_threads(std::size_t n);

// Runs body(begin, end) over contiguous chunks of [0, n). Every index is
// handled by exactly one call, so per-index reductions keep their order and
// results do not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

// RAII override of the kernel thread count.
class ThreadScope {
public:
    explicit ThreadScope(std::size_t n) : saved_(kernel_threads()) { set_kernel_threads(n); }
    ~ThreadScope() { set_kernel_threads(saved_); }
    ThreadScope(const ThreadScope&) = delete;
    ThreadScope& operator=(const ThreadScope&) = delete;

private:
    std::size_t saved_;
};

}  // namespace eovseg
