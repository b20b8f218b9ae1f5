#include "eovseg/rng.hpp"

#include <cmath>

#include "eovseg/error.hpp"

namespace eovseg {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::size_t Rng::below(std::size_t n) {
    if (n == 0) throw ConfigError("Rng::below requires n > 0");
    // Rejection sampling keeps the result unbiased and platform independent.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

Rng Rng::fork(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

Tensor Rng::uniform_tensor(Shape shape, float lo, float hi) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = uniform(lo, hi);
    return t;
}

Tensor Rng::param(Shape shape, std::size_t fan_in) {
    const float bound = static_cast<float>(std::sqrt(3.0 / static_cast<double>(fan_in ? fan_in : 1)));
    return uniform_tensor(std::move(shape), -bound, bound);
}

}  // namespace eovseg
