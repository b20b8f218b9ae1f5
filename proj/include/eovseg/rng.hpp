#pragma once

#include <cstdint>
#include <random>

#include "eovseg/tensor.hpp"

namespace eovseg {

// Seeded generator. The engine is std::mt19937_64, whose output sequence is
// fixed by the C++ standard; floats are derived from the top 24 bits with
// integer arithmetic only, so a given seed yields the same stream on every
// conforming platform. std::*_distribution is deliberately not used.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) on a 2^-24 grid.
    float uniform() { return static_cast<float>(engine_() >> 40) * (1.0f / 16777216.0f); }
    float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive.
    std::size_t below(std::size_t n);

    // Independent child generator for a named sub-stream.
    Rng fork(std::uint64_t stream) const;

    Tensor uniform_tensor(Shape shape, float lo, float hi);

    // Uniform tensor with variance 1/fan_in (the usual fan-in scaling).
    Tensor param(Shape shape, std::size_t fan_in);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

// splitmix64 finalizer; used to derive sub-seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace eovseg
