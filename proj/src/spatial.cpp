#include "eovseg/spatial.hpp"

#include "eovseg/error.hpp"
#include "eovseg/kernels.hpp"

namespace eovseg {

VitBlockWeights VitBlockWeights::init(std::size_t dim, std::size_t heads, std::size_t max_grid, Rng& rng) {
    VitBlockWeights w;
    w.max_grid = max_grid;
    w.patch_weight = rng.param({dim, 3, kPatch, kPatch}, 3 * kPatch * kPatch);
    w.patch_bias = rng.uniform_tensor({dim}, -0.02f, 0.02f);
    w.class_token = rng.uniform_tensor({dim}, -0.1f, 0.1f);
    w.positions = rng.uniform_tensor({1 + max_grid * max_grid, dim}, -0.1f, 0.1f);
    w.ln_attn = LayerNormParams::identity(dim);
    w.attn = AttentionWeights::init(dim, heads, rng);
    w.ln_mlp = LayerNormParams::identity(dim);
    w.mlp_in = Linear::init(dim, 4 * dim, rng);
    w.mlp_out = Linear::init(4 * dim, dim, rng);
    return w;
}

VitBlockWeights VitBlockWeights::zeros(std::size_t dim, std::size_t heads, std::size_t max_grid) {
    VitBlockWeights w;
    w.max_grid = max_grid;
    w.patch_weight = Tensor({dim, 3, kPatch, kPatch});
    w.patch_bias = Tensor({dim});
    w.class_token = Tensor({dim});
    w.positions = Tensor({1 + max_grid * max_grid, dim});
    w.ln_attn = LayerNormParams::identity(dim);
    w.attn = AttentionWeights::zeros(dim, heads);
    w.ln_mlp = LayerNormParams::identity(dim);
    w.mlp_in = Linear::zeros(dim, 4 * dim);
    w.mlp_out = Linear::zeros(4 * dim, dim);
    return w;
}

UpsamplerWeights UpsamplerWeights::init(std::size_t vit_dim, std::size_t dim, Rng& rng) {
    UpsamplerWeights w;
    w.weight1 = rng.param({vit_dim, vit_dim, 2, 2}, vit_dim);
    w.bias1 = rng.uniform_tensor({vit_dim}, -0.02f, 0.02f);
    w.weight2 = rng.param({vit_dim, dim, 2, 2}, vit_dim);
    w.bias2 = rng.uniform_tensor({dim}, -0.02f, 0.02f);
    return w;
}

UpsamplerWeights UpsamplerWeights::zeros(std::size_t vit_dim, std::size_t dim) {
    return {Tensor({vit_dim, vit_dim, 2, 2}), Tensor({vit_dim}), Tensor({vit_dim, dim, 2, 2}), Tensor({dim})};
}

Tensor vit_block_features(const Tensor& image, const VitBlockWeights& w) {
    require_rank(image, 3, "vit_block_features image");
    constexpr std::size_t P = VitBlockWeights::kPatch;
    if (image.dim(1) % P || image.dim(2) % P)
        throw ShapeError("vit_block_features: image extents " + std::to_string(image.dim(1)) + "x" +
                         std::to_string(image.dim(2)) + " must be divisible by 16");
    const std::size_t gh = image.dim(1) / P, gw = image.dim(2) / P, dv = w.width(), t = gh * gw;
    if (gh > w.max_grid || gw > w.max_grid)
        throw ShapeError("vit_block_features: token grid " + std::to_string(gh) + "x" + std::to_string(gw) +
                         " exceeds the positional table (" + std::to_string(w.max_grid) + "x" +
                         std::to_string(w.max_grid) + ")");

    const Tensor patches = transpose2d(patch_conv2d(image, w.patch_weight, w.patch_bias, P).reshaped({dv, t}));
    Tensor x({t + 1, dv});
    for (std::size_t c = 0; c < dv; ++c) x[c] = w.class_token[c] + w.positions[c];
    for (std::size_t r = 0; r < gh; ++r)
        for (std::size_t q = 0; q < gw; ++q) {
            const std::size_t tok = r * gw + q, pos = 1 + r * w.max_grid + q;
            for (std::size_t c = 0; c < dv; ++c)
                x[(tok + 1) * dv + c] = patches[tok * dv + c] + w.positions[pos * dv + c];
        }

    const Tensor normed = layer_norm(x, w.ln_attn);
    add_inplace(x, multi_head_attention(normed, normed, w.attn));
    const Tensor hidden = pointwise(Activation::gelu, linear(layer_norm(x, w.ln_mlp), w.mlp_in));
    add_inplace(x, linear(hidden, w.mlp_out));

    Tensor out({dv, gh, gw});
    for (std::size_t tok = 0; tok < t; ++tok)
        for (std::size_t c = 0; c < dv; ++c) out[c * t + tok] = x[(tok + 1) * dv + c];
    return out;
}

Tensor spatial_features(const Tensor& vit_features, const UpsamplerWeights& w) {
    return transposed_conv2d(transposed_conv2d(vit_features, w.weight1, w.bias1), w.weight2, w.bias2);
}

Tensor spatial_embeddings(const Tensor& spatial, const MaskSet& masks) { return mask_pool(spatial, masks); }

}  // namespace eovseg
