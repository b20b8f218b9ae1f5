#include "eovseg/vas.hpp"

#include <cmath>

#include "eovseg/error.hpp"
#include "eovseg/kernels.hpp"

namespace eovseg {

VasWeights VasWeights::init(std::size_t dim, std::size_t heads, float scale, float offset, Rng& rng) {
    VasWeights w;
    w.feature_proj = Conv2d::init(ConvMode::depthwise_separable, dim, dim, rng);
    w.text_proj = Linear::init(dim, dim, rng);
    w.heads = heads;
    w.scale = scale;
    w.offset = offset;
    w.validate(dim);
    return w;
}

VasWeights VasWeights::zeros(std::size_t dim, std::size_t heads, float scale, float offset) {
    VasWeights w;
    w.feature_proj = Conv2d::zeros(ConvMode::depthwise_separable, dim, dim);
    w.text_proj = Linear::zeros(dim, dim);
    w.heads = heads;
    w.scale = scale;
    w.offset = offset;
    w.validate(dim);
    return w;
}

void VasWeights::validate(std::size_t dim) const {
    if (heads == 0 || dim % heads != 0)
        throw ShapeError("vas: feature width " + std::to_string(dim) + " is not divisible by " +
                         std::to_string(heads) + " heads");
    if (!std::isfinite(scale) || !std::isfinite(offset)) throw ConfigError("vas: scale and offset must be finite");
}

Tensor vas_project_features(const Tensor& f_agg, const VasWeights& w) {
    require_rank(f_agg, 3, "vas features");
    return conv2d(f_agg, w.feature_proj);
}

Tensor vas_attention_projected(const Tensor& projected, const Tensor& text, const VasWeights& w) {
    require_rank(projected, 3, "vas projected features");
    require_rank(text, 2, "vas text embeddings");
    const std::size_t d = projected.dim(0), h = projected.dim(1), wd = projected.dim(2);
    w.validate(d);
    const std::size_t heads = w.heads, c = d / heads, n = text.dim(0);
    const Tensor text_proj = linear(text, w.text_proj);
    if (text_proj.dim(1) != d)
        throw ShapeError("vas: projected text width " + std::to_string(text_proj.dim(1)) +
                         " does not match feature width " + std::to_string(d));
    const Tensor mh_feat = projected.reshaped({1, heads, c, h, wd});
    const Tensor mh_text = text_proj.reshaped({1, n, heads, c});
    const Tensor logits = contract(mh_feat, mh_text, "bmchw,bnmc->bmhwn");
    return reduce_max(softmax(logits, 4), 4).reshaped({heads, h, wd});
}

Tensor vas_attention(const Tensor& f_agg, const Tensor& text, const VasWeights& w) {
    return vas_attention_projected(vas_project_features(f_agg, w), text, w);
}

Tensor vas_apply(const Tensor& projected, const Tensor& attention, float scale, float offset) {
    require_rank(projected, 3, "vas_apply features");
    require_rank(attention, 3, "vas_apply attention");
    const std::size_t d = projected.dim(0), h = projected.dim(1), wd = projected.dim(2), heads = attention.dim(0);
    if (attention.dim(1) != h || attention.dim(2) != wd)
        throw ShapeError("vas_apply: attention extents " + shape_str(attention.shape()) + " do not match features " +
                         shape_str(projected.shape()));
    if (d % heads != 0)
        throw ShapeError("vas_apply: " + std::to_string(heads) + " heads do not divide " + std::to_string(d) +
                         " channels");
    const std::size_t c = d / heads, hw = h * wd;
    Tensor out(projected.shape());
    for (std::size_t m = 0; m < heads; ++m) {
        const float* a = attention.ptr() + m * hw;
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t plane = (m * c + ch) * hw;
            for (std::size_t p = 0; p < hw; ++p) out[plane + p] = projected[plane + p] * (a[p] * scale + offset);
        }
    }
    return out;
}

VasOutput vas_forward_detailed(const Tensor& f_agg, const Tensor& text, const VasWeights& w) {
    VasOutput out;
    out.projected = vas_project_features(f_agg, w);
    out.attention = vas_attention_projected(out.projected, text, w);
    out.features = vas_apply(out.projected, out.attention, w.scale, w.offset);
    return out;
}

Tensor vas_forward(const Tensor& f_agg, const Tensor& text, const VasWeights& w) {
    return vas_forward_detailed(f_agg, text, w).features;
}

}  // namespace eovseg
