#pragma once

#include <array>
#include <string>
#include <vector>

#include "eovseg/params.hpp"
#include "eovseg/tensor.hpp"

namespace eovseg {

// N query mask logits on the stride-4 grid.
struct MaskSet {
    Tensor logits;  // [N, H', W']

    std::size_t count() const { return logits.dim(0); }
    std::size_t height() const { return logits.dim(1); }
    std::size_t width() const { return logits.dim(2); }
    Tensor probabilities() const;  // sigmoid(logits)
};

struct AttentionWeights {
    Linear query, key, value, output;
    std::size_t heads = 1;

    static AttentionWeights init(std::size_t dim, std::size_t heads, Rng& rng);
    static AttentionWeights zeros(std::size_t dim, std::size_t heads);
};

template <Like<AttentionWeights> W, class F>
void visit_params(W& w, const std::string& prefix, F&& f) {
    visit_params(w.query, prefix + ".query", f);
    visit_params(w.key, prefix + ".key", f);
    visit_params(w.value, prefix + ".value", f);
    visit_params(w.output, prefix + ".output", f);
}

enum class Interaction { dda, ca };
Interaction parse_interaction(std::string_view name);
std::string to_string(Interaction mode);

struct DecoderLayerWeights {
    Tensor dda_proj;           // W_m [D, m], no bias
    AttentionWeights cross;    // cross-attention baseline (profiling only)
    LayerNormParams ln_attn;
    AttentionWeights self_attn;
    LayerNormParams ln_ffn;
    Linear ffn_in;             // D -> ffn_mult * D
    Linear ffn_out;            // ffn_mult * D -> D

    static DecoderLayerWeights init(std::size_t dim, std::size_t m, std::size_t heads, std::size_t ffn_mult, Rng& rng);
    static DecoderLayerWeights zeros(std::size_t dim, std::size_t m, std::size_t heads, std::size_t ffn_mult);
};

template <Like<DecoderLayerWeights> W, class F>
void visit_params(W& w, const std::string& prefix, F&& f) {
    f(prefix + ".dda.weight", w.dda_proj);
    visit_params(w.cross, prefix + ".ca", f);
    visit_params(w.ln_attn, prefix + ".ln_attn", f);
    visit_params(w.self_attn, prefix + ".self_attn", f);
    visit_params(w.ln_ffn, prefix + ".ln_ffn", f);
    visit_params(w.ffn_in, prefix + ".ffn_in", f);
    visit_params(w.ffn_out, prefix + ".ffn_out", f);
}

struct DecoderWeights {
    Tensor kernels;  // learnable object kernels K [N, D]
    std::vector<DecoderLayerWeights> layers;
    std::array<Linear, 3> mask_mlp;

    static DecoderWeights init(std::size_t queries, std::size_t dim, std::size_t layers, std::size_t m,
                               std::size_t heads, std::size_t ffn_mult, Rng& rng);
    static DecoderWeights zeros(std::size_t queries, std::size_t dim, std::size_t layers, std::size_t m,
                                std::size_t heads, std::size_t ffn_mult);
};

template <Like<DecoderWeights> W, class F>
void visit_params(W& w, const std::string& prefix, F&& f) {
    f(prefix + ".kernels", w.kernels);
    for (std::size_t i = 0; i < w.layers.size(); ++i) visit_params(w.layers[i], prefix + ".layer" + std::to_string(i), f);
    for (std::size_t i = 0; i < 3; ++i) visit_params(w.mask_mlp[i], prefix + ".mask_mlp" + std::to_string(i), f);
}

// Multi-head scaled dot-product attention of `queries` [Nq, D] over
// `context` [Nk, D], including the output projection (no residual).
Tensor multi_head_attention(const Tensor& queries, const Tensor& context, const AttentionWeights& w);

// F_init[n, d] = sum_p sigmoid(M[n, p]) * F[d, p]   (unnormalized)
Tensor initial_attention(const Tensor& features, const MaskSet& masks);

// K_hat = F_init * r(K W_m): row n of F_init correlated with row n of K W_m.
Tensor dda(const Tensor& kernels, const Tensor& f_init, const Tensor& proj);

// Pre-norm self-attention then FFN (ReLU), both residual.
Tensor refine_kernels(const Tensor& kernels, const DecoderLayerWeights& w);

// Queries attend over all H'W' feature positions; residual.
Tensor cross_attention_baseline(const Tensor& kernels, const Tensor& features, const AttentionWeights& w);

// Three linear layers, ReLU between, last layer linear.
Tensor mask_kernels(const Tensor& kernels, const std::array<Linear, 3>& mlp);

// logits[n, p] = sum_d kernels[n, d] * F[d, p]
MaskSet predict_masks(const Tensor& kernels, const Tensor& features);

// E[n, d] = sum_p q[n, p] F[d, p] / (sum_p q[n, p] + 1e-8), q = sigmoid(M)
Tensor mask_pool(const Tensor& features, const MaskSet& masks);

struct DecoderLayerTrace {
    Tensor f_init;  // empty in ca mode
    Tensor refined;
    MaskSet masks;
};

struct DecoderOutput {
    MaskSet masks;
    Tensor embeddings;  // E_m [N, D]
    Tensor refined;     // K_hat of the last layer
    std::vector<DecoderLayerTrace> layers;
};

// One decoder layer: interaction (dda or ca), refinement, mask prediction.
DecoderLayerTrace decoder_layer(const Tensor& features, const Tensor& kernels, const MaskSet& masks,
                                const DecoderLayerWeights& layer, const std::array<Linear, 3>& mlp,
                                Interaction mode);

DecoderOutput decoder_forward(const Tensor& features, const DecoderWeights& w, std::size_t layers, Interaction mode);

}  // namespace eovseg
