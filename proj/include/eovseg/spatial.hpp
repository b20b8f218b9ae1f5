#pragma once

#include <string>

#include "eovseg/decoder.hpp"
#include "eovseg/params.hpp"
#include "eovseg/tensor.hpp"

namespace eovseg {

// One pre-norm ViT block over 16x16 patches. The positional table covers a
// max_grid x max_grid token grid (plus the class token); smaller inputs use
// its top-left corner.
struct VitBlockWeights {
    static constexpr std::size_t kPatch = 16;

    Tensor patch_weight;  // [D_v, 3, 16, 16]
    Tensor patch_bias;    // [D_v]
    Tensor class_token;   // [D_v]
    Tensor positions;     // [1 + max_grid^2, D_v]; row 0 is the class token
    LayerNormParams ln_attn;
    AttentionWeights attn;
    LayerNormParams ln_mlp;
    Linear mlp_in;   // D_v -> 4 D_v
    Linear mlp_out;  // 4 D_v -> D_v
    std::size_t max_grid = 16;

    std::size_t width() const { return patch_weight.dim(0); }

    static VitBlockWeights init(std::size_t dim, std::size_t heads, std::size_t max_grid, Rng& rng);
    static VitBlockWeights zeros(std::size_t dim, std::size_t heads, std::size_t max_grid);
};

template <Like<VitBlockWeights> W, class F>
void visit_params(W& w, const std::string& prefix, F&& f) {
    f(prefix + ".patch.weight", w.patch_weight);
    f(prefix + ".patch.bias", w.patch_bias);
    f(prefix + ".class_token", w.class_token);
    f(prefix + ".positions", w.positions);
    visit_params(w.ln_attn, prefix + ".ln_attn", f);
    visit_params(w.attn, prefix + ".attn", f);
    visit_params(w.ln_mlp, prefix + ".ln_mlp", f);
    visit_params(w.mlp_in, prefix + ".mlp_in", f);
    visit_params(w.mlp_out, prefix + ".mlp_out", f);
}

// Two 2x2 stride-2 transposed convolutions, D_v -> D_v -> D.
struct UpsamplerWeights {
    Tensor weight1, bias1;  // [D_v, D_v, 2, 2], [D_v]
    Tensor weight2, bias2;  // [D_v, D, 2, 2], [D]

    static UpsamplerWeights init(std::size_t vit_dim, std::size_t dim, Rng& rng);
    static UpsamplerWeights zeros(std::size_t vit_dim, std::size_t dim);
};

template <Like<UpsamplerWeights> W, class F>
void visit_params(W& w, const std::string& prefix, F&& f) {
    f(prefix + ".tconv1.weight", w.weight1);
    f(prefix + ".tconv1.bias", w.bias1);
    f(prefix + ".tconv2.weight", w.weight2);
    f(prefix + ".tconv2.bias", w.bias2);
}

// image [3, H, W] -> F_v [D_v, H/16, W/16] (class token dropped).
Tensor vit_block_features(const Tensor& image, const VitBlockWeights& w);

// F_v -> F_s [D, 4 H/16, 4 W/16].
Tensor spatial_features(const Tensor& vit_features, const UpsamplerWeights& w);

// E_s = mask_pool(F_s, M).
Tensor spatial_embeddings(const Tensor& spatial, const MaskSet& masks);

}  // namespace eovseg
