#pragma once

#include "eovseg/params.hpp"
#include "eovseg/tensor.hpp"

namespace eovseg {

// Vocabulary-aware selection. Visual features are projected with a
// depthwise-separable conv, text embeddings with a linear layer; both are
// split into `heads` groups of D/heads channels.
struct VasWeights {
    Conv2d feature_proj;  // depthwise_separable, D -> D
    Linear text_proj;     // D -> D
    std::size_t heads = 8;
    float scale = 1.0f;   // gamma
    float offset = 0.0f;  // delta

    static VasWeights init(std::size_t dim, std::size_t heads, float scale, float offset, Rng& rng);
    static VasWeights zeros(std::size_t dim, std::size_t heads, float scale, float offset);
    void validate(std::size_t dim) const;
};

template <Like<VasWeights> W, class F>
void visit_params(W& w, const std::string& prefix, F&& f) {
    visit_params(w.feature_proj, prefix + ".feature_proj", f);
    visit_params(w.text_proj, prefix + ".text_proj", f);
}

Tensor vas_project_features(const Tensor& f_agg, const VasWeights& w);

// Attention weights from already-projected features: contraction
// "bmchw,bnmc->bmhwn", softmax over the vocabulary, max over the vocabulary.
// projected [D, H, W], text [N_class, D] -> [heads, H, W], each in [1/N_class, 1].
Tensor vas_attention_projected(const Tensor& projected, const Tensor& text, const VasWeights& w);

// Same, starting from unprojected F_agg.
Tensor vas_attention(const Tensor& f_agg, const Tensor& text, const VasWeights& w);

// (scale * A + offset) broadcast over each head's D/heads channels,
// multiplied into the projected features -> [D, H, W].
Tensor vas_apply(const Tensor& projected, const Tensor& attention, float scale, float offset);

struct VasOutput {
    Tensor projected;
    Tensor attention;
    Tensor features;  // F_hat_agg
};

VasOutput vas_forward_detailed(const Tensor& f_agg, const Tensor& text, const VasWeights& w);
Tensor vas_forward(const Tensor& f_agg, const Tensor& text, const VasWeights& w);

}  // namespace eovseg
