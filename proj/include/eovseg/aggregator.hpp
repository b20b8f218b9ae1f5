#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "eovseg/params.hpp"
#include "eovseg/tensor.hpp"

namespace eovseg {

// Stand-in for the CNN visual encoder. A 4x4/stride-4 patch stem followed
// by three 2x2/stride-2 stages, each with GELU, gives strides 4/8/16/32.
// `clip_head` projects C5 to the text-embedding width; its upsampled output
// is the feature map used for out-of-vocabulary pooling.
struct SyntheticBackbone {
    std::array<std::size_t, 4> widths{64, 128, 256, 512};
    std::array<Tensor, 4> stage_weight;  // [w_i, w_{i-1} (3 for the stem), k, k]
    std::array<Tensor, 4> stage_bias;    // [w_i]
    Conv2d clip_head;                    // 1x1, w_3 -> D

    static SyntheticBackbone create(std::uint64_t seed, std::array<std::size_t, 4> widths, std::size_t embed_dim);
    static SyntheticBackbone zeros(std::array<std::size_t, 4> widths, std::size_t embed_dim);
    static constexpr std::size_t kernel(std::size_t stage) { return stage == 0 ? 4 : 2; }
};

template <Like<SyntheticBackbone> B, class F>
void visit_params(B& w, const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < 4; ++i) {
        f(prefix + ".stage" + std::to_string(i) + ".weight", w.stage_weight[i]);
        f(prefix + ".stage" + std::to_string(i) + ".bias", w.stage_bias[i]);
    }
    visit_params(w.clip_head, prefix + ".clip_head", f);
}

// C2..C5, each [w_i, H/2^(i+2), W/2^(i+2)].
struct BackboneFeatures {
    std::array<Tensor, 4> levels;
};

// P2..P5 at common width D; index 0 is P2 (stride 4).
struct FeaturePyramid {
    std::array<Tensor, 4> levels;

    // Throws unless all levels share a width and halve spatially.
    void validate() const;
};

// Top-down FPN: lateral 1x1 per level, then 3x3 smoothing.
struct PyramidWeights {
    std::array<Conv2d, 4> lateral;
    std::array<Conv2d, 4> smooth;

    static PyramidWeights init(const std::array<std::size_t, 4>& widths, std::size_t dim, Rng& rng);
    static PyramidWeights zeros(const std::array<std::size_t, 4>& widths, std::size_t dim);
};

template <Like<PyramidWeights> W, class F>
void visit_params(W& w, const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < 4; ++i) {
        visit_params(w.lateral[i], prefix + ".lateral" + std::to_string(i + 2), f);
        visit_params(w.smooth[i], prefix + ".smooth" + std::to_string(i + 2), f);
    }
}

// Per-level 1x1 "Conv" and the 3x3 "Fuse" of the aggregation.
struct AggregateWeights {
    std::array<Conv2d, 4> level_conv;
    Conv2d fuse;

    static AggregateWeights init(std::size_t dim, Rng& rng);
    static AggregateWeights zeros(std::size_t dim);
};

template <Like<AggregateWeights> W, class F>
void visit_params(W& w, const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < 4; ++i) visit_params(w.level_conv[i], prefix + ".conv" + std::to_string(i + 2), f);
    visit_params(w.fuse, prefix + ".fuse", f);
}

// image [3, H, W] with H, W divisible by 32.
BackboneFeatures extract_features(const Tensor& image, const SyntheticBackbone& backbone);

// Backbone C5 projected by the clip head and bilinearly upsampled to stride 4.
Tensor clip_final_features(const BackboneFeatures& features, const SyntheticBackbone& backbone);

FeaturePyramid build_pyramid(const BackboneFeatures& c, const PyramidWeights& w);

// F_agg = Fuse( sum_{i=3..5} Up_{2^(i-2)}(Conv_i(P_i)) + Conv_2(P_2) )  -> [D, H/4, W/4]
Tensor aggregate(const FeaturePyramid& p, const AggregateWeights& w);

}  // namespace eovseg
