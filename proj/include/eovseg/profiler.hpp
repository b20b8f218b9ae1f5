#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "eovseg/config.hpp"
#include "eovseg/decoder.hpp"
#include "eovseg/model.hpp"
#include "eovseg/pipeline.hpp"
#include "eovseg/weight_store.hpp"

namespace eovseg {

// Computational modules in pipeline order (the CSV row order).
const std::vector<std::string>& profiled_modules();

// MAC convention: one count per multiply inside a contraction (matmul,
// convolution tap, attention dot product). Taps reading zero padding count.
// Elementwise products, norms, softmax, activations, pooling divisions and
// bilinear resampling are not counted.
struct OpCount {
    std::string module;
    std::string op;
    std::uint64_t macs = 0;
};

// Closed-form per-op counts for an H x W image and `num_classes` text rows,
// for the configured fusion mode and interaction.
std::vector<OpCount> count_macs(const ModelConfig& config, std::size_t height, std::size_t width,
                                std::size_t num_classes);
std::map<std::string, std::uint64_t> macs_by_module(const std::vector<OpCount>& ops);

// Cost of the query/feature interaction alone on an H' x W' feature map.
std::uint64_t interaction_macs(Interaction mode, std::size_t queries, std::size_t dim, std::size_t m,
                               std::size_t feat_h, std::size_t feat_w);
// dda: D*m (no bias); ca: four D x D projections with bias.
std::uint64_t interaction_params(Interaction mode, std::size_t dim, std::size_t m);
std::uint64_t interaction_params(const DecoderLayerWeights& layer, Interaction mode);

// Element counts grouped by the first dotted component of each name.
std::map<std::string, std::uint64_t> count_params(const WeightStore& store);

// Per computational module, counting only tensors the configured fusion mode
// and interaction actually use.
std::map<std::string, std::uint64_t> module_params(const ModelWeights& weights, const ModelConfig& config);

struct TimeStats {
    double mean_ns = 0.0, p50_ns = 0.0, p95_ns = 0.0;
};

// Nearest-rank percentiles.
TimeStats summarize(std::vector<double> samples_ns);

// `warmup` untimed runs then `reps` timed runs on the monotonic clock.
TimeStats measure(const std::function<void()>& fn, std::size_t reps, std::size_t warmup = 2);

struct ProfileRow {
    std::string module;
    std::uint64_t params = 0;
    std::uint64_t macs = 0;
    TimeStats time;
};

struct ProfileReport {
    std::vector<ProfileRow> rows;
    std::string mode;
    std::string config_hash;

    ProfileRow total() const;  // sums of params and macs; timing summed means
};

std::string to_csv(const ProfileReport& report, bool with_total = true);

inline constexpr std::size_t kMinReps = 5;

// Times every module on the intermediates of one forward pass of `image`.
// Runs single-threaded.
ProfileReport profile(const Tensor& image, const TextEmbeddings& text, const ModelConfig& config,
                      const ModelWeights& weights, std::size_t reps);

// Times the interaction op and one full decoder layer in `mode` on seeded
// inputs of extent feat_h x feat_w (identical across modes for a seed).
ProfileReport benchmark(const ModelConfig& config, const ModelWeights& weights, Interaction mode, std::size_t reps,
                        std::uint64_t seed, std::size_t feat_h = 16, std::size_t feat_w = 16);

}  // namespace eovseg
