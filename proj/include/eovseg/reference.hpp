#pragma once

// Naive loop implementations used as oracles. Every output element is
// accumulated in double from the float inputs; nothing here calls the
// optimized kernels. Each multiply inside a contraction bumps a thread-local
// counter so analytic MAC formulas can be checked against executed work.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "eovseg/aggregator.hpp"
#include "eovseg/classifier.hpp"
#include "eovseg/config.hpp"
#include "eovseg/decoder.hpp"
#include "eovseg/fusion.hpp"
#include "eovseg/model.hpp"
#include "eovseg/spatial.hpp"
#include "eovseg/vas.hpp"

namespace eovseg::ref {

std::uint64_t mac_count();
void count_macs(std::uint64_t n);

// Multiplications executed on this thread since construction.
class CountScope {
public:
    CountScope() : start_(mac_count()) {}
    std::uint64_t macs() const { return mac_count() - start_; }

private:
    std::uint64_t start_;
};

// ---- kernels
Tensor contract(const Tensor& a, const Tensor& b, std::string_view spec);
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor layer_norm(const Tensor& x, const LayerNormParams& p, double eps = 1e-5);
Tensor sigmoid(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor linear(const Tensor& x, const Linear& w);
Tensor conv2d(const Tensor& x, const Conv2d& w);
Tensor patch_conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t kernel);
Tensor depthwise_conv1d(const Tensor& signals, const Tensor& kernels);
Tensor transposed_conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor bilinear_upsample(const Tensor& x, std::size_t factor);
Tensor reduce_max(const Tensor& x, std::size_t axis);
Tensor l2_normalize(const Tensor& x, std::size_t axis);

// ---- modules
BackboneFeatures extract_features(const Tensor& image, const SyntheticBackbone& b);
Tensor clip_final_features(const BackboneFeatures& f, const SyntheticBackbone& b);
FeaturePyramid build_pyramid(const BackboneFeatures& c, const PyramidWeights& w);
Tensor aggregate(const FeaturePyramid& p, const AggregateWeights& w);

Tensor vas_attention(const Tensor& f_agg, const Tensor& text, const VasWeights& w);
Tensor vas_forward(const Tensor& f_agg, const Tensor& text, const VasWeights& w);
// Step-by-step rendering of the published VAS pseudocode (batch of one).
Tensor vas_pseudocode(const Tensor& agg_feat, const Tensor& text_embed, const VasWeights& w);

Tensor multi_head_attention(const Tensor& queries, const Tensor& context, const AttentionWeights& w);
Tensor initial_attention(const Tensor& features, const Tensor& mask_logits);
Tensor dda(const Tensor& kernels, const Tensor& f_init, const Tensor& proj);
Tensor refine_kernels(const Tensor& kernels, const DecoderLayerWeights& w);
Tensor cross_attention_baseline(const Tensor& kernels, const Tensor& features, const AttentionWeights& w);
Tensor mask_kernels(const Tensor& kernels, const std::array<Linear, 3>& mlp);
Tensor predict_masks(const Tensor& kernels, const Tensor& features);
Tensor mask_pool(const Tensor& features, const Tensor& mask_logits);
DecoderOutput decoder_forward(const Tensor& features, const DecoderWeights& w, std::size_t layers, Interaction mode);

Tensor vit_block_features(const Tensor& image, const VitBlockWeights& w);
Tensor spatial_features(const Tensor& vit_features, const UpsamplerWeights& w);

TdeeOutput tdee(const Tensor& e_m, const Tensor& e_s, const TdeeWeights& w);
// The gating equations written out symbol by symbol, one row at a time.
Tensor tdee_equations(const Tensor& e_m, const Tensor& e_s, const TdeeWeights& w);
Tensor eaf(const Tensor& f_hat, const Tensor& vit_up, const EafWeights& w);
Tensor sdi(const Tensor& e_m, const Tensor& e_s, const SdiWeights& w);

Tensor in_vocab_scores(const Tensor& embeddings, const Tensor& text, double tau);
Tensor ensemble(const Tensor& s_i, const Tensor& s_o, const EnsembleParams& p, const std::vector<bool>& seen);

// Whole forward pass up to the ensembled scores, recording the MACs spent in
// each profiled module.
struct ForwardCounts {
    std::map<std::string, Tensor> tensors;  // trace names
    std::map<std::string, std::uint64_t> macs;
};
ForwardCounts forward(const Tensor& image, const TextEmbeddings& text, const ModelConfig& config,
                      const ModelWeights& weights);

}  // namespace eovseg::ref
