#include "eovseg/decoder.hpp"

#include <cmath>

#include "eovseg/error.hpp"
#include "eovseg/kernels.hpp"

namespace eovseg {

Tensor MaskSet::probabilities() const { return pointwise(Activation::sigmoid, logits); }

AttentionWeights AttentionWeights::init(std::size_t dim, std::size_t heads, Rng& rng) {
    return {Linear::init(dim, dim, rng), Linear::init(dim, dim, rng), Linear::init(dim, dim, rng),
            Linear::init(dim, dim, rng), heads};
}

AttentionWeights AttentionWeights::zeros(std::size_t dim, std::size_t heads) {
    return {Linear::zeros(dim, dim), Linear::zeros(dim, dim), Linear::zeros(dim, dim), Linear::zeros(dim, dim), heads};
}

Interaction parse_interaction(std::string_view name) {
    if (name == "dda") return Interaction::dda;
    if (name == "ca") return Interaction::ca;
    throw ConfigError("unknown interaction mode '" + std::string(name) + "' (expected dda or ca)");
}

std::string to_string(Interaction mode) { return mode == Interaction::dda ? "dda" : "ca"; }

DecoderLayerWeights DecoderLayerWeights::init(std::size_t dim, std::size_t m, std::size_t heads,
                                              std::size_t ffn_mult, Rng& rng) {
    DecoderLayerWeights w;
    w.dda_proj = rng.param({dim, m}, dim);
    w.cross = AttentionWeights::init(dim, heads, rng);
    w.ln_attn = LayerNormParams::identity(dim);
    w.self_attn = AttentionWeights::init(dim, heads, rng);
    w.ln_ffn = LayerNormParams::identity(dim);
    w.ffn_in = Linear::init(dim, ffn_mult * dim, rng);
    w.ffn_out = Linear::init(ffn_mult * dim, dim, rng);
    return w;
}

DecoderLayerWeights DecoderLayerWeights::zeros(std::size_t dim, std::size_t m, std::size_t heads,
                                               std::size_t ffn_mult) {
    DecoderLayerWeights w;
    w.dda_proj = Tensor({dim, m});
    w.cross = AttentionWeights::zeros(dim, heads);
    w.ln_attn = LayerNormParams::identity(dim);
    w.self_attn = AttentionWeights::zeros(dim, heads);
    w.ln_ffn = LayerNormParams::identity(dim);
    w.ffn_in = Linear::zeros(dim, ffn_mult * dim);
    w.ffn_out = Linear::zeros(ffn_mult * dim, dim);
    return w;
}

DecoderWeights DecoderWeights::init(std::size_t queries, std::size_t dim, std::size_t layers, std::size_t m,
                                    std::size_t heads, std::size_t ffn_mult, Rng& rng) {
    DecoderWeights w;
    w.kernels = rng.uniform_tensor({queries, dim}, -1.0f, 1.0f);
    for (std::size_t i = 0; i < layers; ++i) w.layers.push_back(DecoderLayerWeights::init(dim, m, heads, ffn_mult, rng));
    for (auto& l : w.mask_mlp) l = Linear::init(dim, dim, rng);
    return w;
}

DecoderWeights DecoderWeights::zeros(std::size_t queries, std::size_t dim, std::size_t layers, std::size_t m,
                                     std::size_t heads, std::size_t ffn_mult) {
    DecoderWeights w;
    w.kernels = Tensor({queries, dim});
    for (std::size_t i = 0; i < layers; ++i) w.layers.push_back(DecoderLayerWeights::zeros(dim, m, heads, ffn_mult));
    for (auto& l : w.mask_mlp) l = Linear::zeros(dim, dim);
    return w;
}

Tensor multi_head_attention(const Tensor& queries, const Tensor& context, const AttentionWeights& w) {
    const Tensor q = linear(queries, w.query);
    const Tensor k = linear(context, w.key);
    const Tensor v = linear(context, w.value);
    const std::size_t nq = q.dim(0), nk = k.dim(0), d = q.dim(1);
    if (w.heads == 0 || d % w.heads != 0)
        throw ShapeError("attention: width " + std::to_string(d) + " not divisible by " + std::to_string(w.heads) +
                         " heads");
    const std::size_t dh = d / w.heads;
    const float scale = static_cast<float>(1.0 / std::sqrt(static_cast<double>(dh)));
    // [h, nq, nk] scores
    Tensor scores = contract(q.reshaped({nq, w.heads, dh}), k.reshaped({nk, w.heads, dh}), "qhc,khc->hqk");
    for (auto& s : scores.data()) s *= scale;
    const Tensor attn = softmax(scores, 2);
    const Tensor mixed = contract(attn, v.reshaped({nk, w.heads, dh}), "hqk,khc->qhc").reshaped({nq, d});
    return linear(mixed, w.output);
}

namespace {

void require_mask_extents(const Tensor& features, const MaskSet& masks, const char* what) {
    require_rank(features, 3, what);
    require_rank(masks.logits, 3, what);
    if (features.dim(1) != masks.height() || features.dim(2) != masks.width())
        throw ShapeError(std::string(what) + ": mask extents " + shape_str(masks.logits.shape()) +
                         " do not match features " + shape_str(features.shape()));
}

}  // namespace

Tensor initial_attention(const Tensor& features, const MaskSet& masks) {
    require_mask_extents(features, masks, "initial_attention");
    const std::size_t n = masks.count(), d = features.dim(0), hw = masks.height() * masks.width();
    const Tensor q = masks.probabilities().reshaped({n, hw});
    return matmul(q, transpose2d(features.reshaped({d, hw})));
}

Tensor dda(const Tensor& kernels, const Tensor& f_init, const Tensor& proj) {
    require_rank(proj, 2, "dda projection");
    if (proj.dim(1) % 2 == 0)
        throw ShapeError("dda: kernel length m must be odd, got " + std::to_string(proj.dim(1)));
    if (kernels.shape() != f_init.shape())
        throw ShapeError("dda: kernels " + shape_str(kernels.shape()) + " and F_init " + shape_str(f_init.shape()) +
                         " differ");
    return depthwise_conv1d(f_init, matmul(kernels, proj));
}

Tensor refine_kernels(const Tensor& kernels, const DecoderLayerWeights& w) {
    Tensor x = add(kernels, multi_head_attention(layer_norm(kernels, w.ln_attn), layer_norm(kernels, w.ln_attn),
                                                 w.self_attn));
    const Tensor hidden = pointwise(Activation::relu, linear(layer_norm(x, w.ln_ffn), w.ffn_in));
    add_inplace(x, linear(hidden, w.ffn_out));
    return x;
}

Tensor cross_attention_baseline(const Tensor& kernels, const Tensor& features, const AttentionWeights& w) {
    require_rank(features, 3, "cross_attention features");
    const std::size_t d = features.dim(0), hw = features.dim(1) * features.dim(2);
    const Tensor context = transpose2d(features.reshaped({d, hw}));
    return add(kernels, multi_head_attention(kernels, context, w));
}

Tensor mask_kernels(const Tensor& kernels, const std::array<Linear, 3>& mlp) {
    Tensor x = pointwise(Activation::relu, linear(kernels, mlp[0]));
    x = pointwise(Activation::relu, linear(x, mlp[1]));
    return linear(x, mlp[2]);
}

MaskSet predict_masks(const Tensor& kernels, const Tensor& features) {
    require_rank(features, 3, "predict_masks features");
    require_rank(kernels, 2, "predict_masks kernels");
    const std::size_t d = features.dim(0), h = features.dim(1), w = features.dim(2);
    if (kernels.dim(1) != d)
        throw ShapeError("predict_masks: kernel width " + std::to_string(kernels.dim(1)) +
                         " does not match feature width " + std::to_string(d));
    return {matmul(kernels, features.reshaped({d, h * w})).reshaped({kernels.dim(0), h, w})};
}

Tensor mask_pool(const Tensor& features, const MaskSet& masks) {
    require_mask_extents(features, masks, "mask_pool");
    const std::size_t n = masks.count(), d = features.dim(0), hw = masks.height() * masks.width();
    const Tensor q = masks.probabilities().reshaped({n, hw});
    Tensor pooled = matmul(q, transpose2d(features.reshaped({d, hw})));
    for (std::size_t i = 0; i < n; ++i) {
        double area = 0.0;
        for (std::size_t p = 0; p < hw; ++p) area += q[i * hw + p];
        const double denom = area + 1e-8;
        for (std::size_t c = 0; c < d; ++c) pooled[i * d + c] = static_cast<float>(pooled[i * d + c] / denom);
    }
    return pooled;
}

DecoderLayerTrace decoder_layer(const Tensor& features, const Tensor& kernels, const MaskSet& masks,
                                const DecoderLayerWeights& layer, const std::array<Linear, 3>& mlp,
                                Interaction mode) {
    DecoderLayerTrace t;
    Tensor interacted;
    if (mode == Interaction::dda) {
        t.f_init = initial_attention(features, masks);
        interacted = dda(kernels, t.f_init, layer.dda_proj);
    } else {
        interacted = cross_attention_baseline(kernels, features, layer.cross);
    }
    t.refined = refine_kernels(interacted, layer);
    t.masks = predict_masks(mask_kernels(t.refined, mlp), features);
    return t;
}

DecoderOutput decoder_forward(const Tensor& features, const DecoderWeights& w, std::size_t layers, Interaction mode) {
    if (layers == 0) throw ConfigError("decoder_forward: at least one layer is required");
    if (layers > w.layers.size())
        throw ConfigError("decoder_forward: " + std::to_string(layers) + " layers requested but weights hold " +
                          std::to_string(w.layers.size()));
    DecoderOutput out;
    MaskSet masks = predict_masks(w.kernels, features);
    Tensor kernels = w.kernels;
    for (std::size_t l = 0; l < layers; ++l) {
        auto t = decoder_layer(features, kernels, masks, w.layers[l], w.mask_mlp, mode);
        kernels = t.refined;
        masks = t.masks;
        out.layers.push_back(std::move(t));
    }
    out.masks = masks;
    out.refined = kernels;
    out.embeddings = mask_pool(features, masks);
    return out;
}

}  // namespace eovseg
