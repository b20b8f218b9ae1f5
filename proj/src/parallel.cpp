#include "eovseg/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace eovseg {

namespace {

std::size_t threads_from_env() {
    const char* env = std::getenv("EOVSEG_THREADS");
    if (!env || !*env) return 0;
    try {
        return static_cast<std::size_t>(std::stoul(env));
    } catch (...) {
        return 0;
    }
}

std::atomic<std::size_t>& thread_setting() {
    static std::atomic<std::size_t> value{threads_from_env()};
    return value;
}

}  // namespace

std::size_t kernel_threads() { return thread_setting().load(); }
void set_kernel_threads(std::size_t n) { thread_setting().store(n); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    const std::size_t workers = std::min(kernel_threads(), n);
    if (workers <= 1) {
        if (n) body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 1; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin < end) pool.emplace_back(body, begin, end);
    }
    body(0, std::min(n, chunk));
    for (auto& t : pool) t.join();
}

}  // namespace eovseg
