#include "eovseg/aggregator.hpp"

#include "eovseg/error.hpp"
#include "eovseg/kernels.hpp"

namespace eovseg {

SyntheticBackbone SyntheticBackbone::create(std::uint64_t seed, std::array<std::size_t, 4> widths,
                                            std::size_t embed_dim) {
    Rng rng(seed);
    SyntheticBackbone b;
    b.widths = widths;
    for (std::size_t i = 0; i < 4; ++i) {
        const std::size_t in = i == 0 ? 3 : widths[i - 1], k = kernel(i);
        b.stage_weight[i] = rng.param({widths[i], in, k, k}, in * k * k);
        b.stage_bias[i] = rng.uniform_tensor({widths[i]}, -0.02f, 0.02f);
    }
    b.clip_head = Conv2d::init(ConvMode::pointwise_1x1, widths[3], embed_dim, rng);
    return b;
}

SyntheticBackbone SyntheticBackbone::zeros(std::array<std::size_t, 4> widths, std::size_t embed_dim) {
    SyntheticBackbone b;
    b.widths = widths;
    for (std::size_t i = 0; i < 4; ++i) {
        const std::size_t in = i == 0 ? 3 : widths[i - 1], k = kernel(i);
        b.stage_weight[i] = Tensor({widths[i], in, k, k});
        b.stage_bias[i] = Tensor({widths[i]});
    }
    b.clip_head = Conv2d::zeros(ConvMode::pointwise_1x1, widths[3], embed_dim);
    return b;
}

void FeaturePyramid::validate() const {
    for (std::size_t i = 0; i < 4; ++i) {
        require_rank(levels[i], 3, "pyramid level P" + std::to_string(i + 2));
        if (levels[i].dim(0) != levels[0].dim(0))
            throw ShapeError("pyramid level P" + std::to_string(i + 2) + " has width " +
                             std::to_string(levels[i].dim(0)) + ", expected " + std::to_string(levels[0].dim(0)));
        if (i > 0 && (levels[i].dim(1) * 2 != levels[i - 1].dim(1) || levels[i].dim(2) * 2 != levels[i - 1].dim(2)))
            throw ShapeError("pyramid level P" + std::to_string(i + 2) + " extents " + shape_str(levels[i].shape()) +
                             " are not half of P" + std::to_string(i + 1));
    }
}

PyramidWeights PyramidWeights::init(const std::array<std::size_t, 4>& widths, std::size_t dim, Rng& rng) {
    PyramidWeights w;
    for (std::size_t i = 0; i < 4; ++i) {
        w.lateral[i] = Conv2d::init(ConvMode::pointwise_1x1, widths[i], dim, rng);
        w.smooth[i] = Conv2d::init(ConvMode::k3_pad1, dim, dim, rng);
    }
    return w;
}

PyramidWeights PyramidWeights::zeros(const std::array<std::size_t, 4>& widths, std::size_t dim) {
    PyramidWeights w;
    for (std::size_t i = 0; i < 4; ++i) {
        w.lateral[i] = Conv2d::zeros(ConvMode::pointwise_1x1, widths[i], dim);
        w.smooth[i] = Conv2d::zeros(ConvMode::k3_pad1, dim, dim);
    }
    return w;
}

AggregateWeights AggregateWeights::init(std::size_t dim, Rng& rng) {
    AggregateWeights w;
    for (auto& c : w.level_conv) c = Conv2d::init(ConvMode::pointwise_1x1, dim, dim, rng);
    w.fuse = Conv2d::init(ConvMode::k3_pad1, dim, dim, rng);
    return w;
}

AggregateWeights AggregateWeights::zeros(std::size_t dim) {
    AggregateWeights w;
    for (auto& c : w.level_conv) c = Conv2d::zeros(ConvMode::pointwise_1x1, dim, dim);
    w.fuse = Conv2d::zeros(ConvMode::k3_pad1, dim, dim);
    return w;
}

BackboneFeatures extract_features(const Tensor& image, const SyntheticBackbone& backbone) {
    require_rank(image, 3, "extract_features image");
    if (image.dim(0) != 3) throw ShapeError("extract_features: image must have 3 channels");
    if (image.dim(1) % 32 || image.dim(2) % 32)
        throw ShapeError("extract_features: image extents " + std::to_string(image.dim(1)) + "x" +
                         std::to_string(image.dim(2)) + " must be divisible by 32; pad the image first");
    BackboneFeatures out;
    Tensor x = image;
    for (std::size_t i = 0; i < 4; ++i) {
        x = pointwise(Activation::gelu,
                      patch_conv2d(x, backbone.stage_weight[i], backbone.stage_bias[i], SyntheticBackbone::kernel(i)));
        out.levels[i] = x;
    }
    return out;
}

Tensor clip_final_features(const BackboneFeatures& features, const SyntheticBackbone& backbone) {
    return bilinear_upsample(conv2d(features.levels[3], backbone.clip_head), 8);
}

FeaturePyramid build_pyramid(const BackboneFeatures& c, const PyramidWeights& w) {
    std::array<Tensor, 4> lateral;
    for (std::size_t i = 0; i < 4; ++i) {
        if (c.levels[i].dim(0) != w.lateral[i].in_channels())
            throw ShapeError("build_pyramid: C" + std::to_string(i + 2) + " has width " +
                             std::to_string(c.levels[i].dim(0)) + " but lateral expects " +
                             std::to_string(w.lateral[i].in_channels()));
        lateral[i] = conv2d(c.levels[i], w.lateral[i]);
    }
    // Coarse to fine.
    for (std::size_t i = 3; i-- > 0;) add_inplace(lateral[i], bilinear_upsample(lateral[i + 1], 2));
    FeaturePyramid p;
    for (std::size_t i = 0; i < 4; ++i) p.levels[i] = conv2d(lateral[i], w.smooth[i]);
    return p;
}

Tensor aggregate(const FeaturePyramid& p, const AggregateWeights& w) {
    p.validate();
    Tensor sum = conv2d(p.levels[0], w.level_conv[0]);
    for (std::size_t i = 1; i < 4; ++i)
        add_inplace(sum, bilinear_upsample(conv2d(p.levels[i], w.level_conv[i]), std::size_t{1} << i));
    return conv2d(sum, w.fuse);
}

}  // namespace eovseg
