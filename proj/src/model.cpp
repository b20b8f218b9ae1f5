#include "eovseg/model.hpp"

#include "eovseg/error.hpp"

namespace eovseg {

ModelWeights ModelWeights::create(const ModelConfig& c) {
    c.validate();
    const Rng root(c.weight_seed);
    ModelWeights w;
    w.backbone = SyntheticBackbone::create(mix_seed(c.weight_seed, 0), c.backbone_widths, c.embed_dim);
    Rng r1 = root.fork(1), r2 = root.fork(2), r3 = root.fork(3), r4 = root.fork(4), r5 = root.fork(5);
    Rng r6 = root.fork(6), r7 = root.fork(7), r8 = root.fork(8), r9 = root.fork(9);
    w.pyramid = PyramidWeights::init(c.backbone_widths, c.embed_dim, r1);
    w.aggregate = AggregateWeights::init(c.embed_dim, r2);
    w.vas = VasWeights::init(c.embed_dim, c.vas_heads, c.vas_scale, c.vas_offset, r3);
    w.decoder = DecoderWeights::init(c.queries, c.embed_dim, c.decoder_layers, c.dda_kernel, c.attn_heads, c.ffn_mult, r4);
    w.vit = VitBlockWeights::init(c.vit_dim, c.vit_heads, c.vit_max_grid, r5);
    w.upsampler = UpsamplerWeights::init(c.vit_dim, c.embed_dim, r6);
    w.tdee = TdeeWeights::init(c.embed_dim, c.fusion_dim, r7);
    w.sdi = SdiWeights::init(c.embed_dim, c.sdi_kernel, c.sdi_rank, r8);
    w.eaf = EafWeights::init(c.embed_dim, c.vit_dim, r9);
    return w;
}

ModelWeights ModelWeights::zeros(const ModelConfig& c) {
    c.validate();
    ModelWeights w;
    w.backbone = SyntheticBackbone::zeros(c.backbone_widths, c.embed_dim);
    w.pyramid = PyramidWeights::zeros(c.backbone_widths, c.embed_dim);
    w.aggregate = AggregateWeights::zeros(c.embed_dim);
    w.vas = VasWeights::zeros(c.embed_dim, c.vas_heads, c.vas_scale, c.vas_offset);
    w.decoder = DecoderWeights::zeros(c.queries, c.embed_dim, c.decoder_layers, c.dda_kernel, c.attn_heads, c.ffn_mult);
    w.vit = VitBlockWeights::zeros(c.vit_dim, c.vit_heads, c.vit_max_grid);
    w.upsampler = UpsamplerWeights::zeros(c.vit_dim, c.embed_dim);
    w.tdee = TdeeWeights::zeros(c.embed_dim, c.fusion_dim);
    w.sdi = SdiWeights::zeros(c.embed_dim, c.sdi_kernel, c.sdi_rank);
    w.eaf = EafWeights::zeros(c.embed_dim, c.vit_dim);
    return w;
}

WeightStore ModelWeights::to_store() const {
    WeightStore store;
    visit_params(*this, [&](const std::string& name, const Tensor& t) { store.put(name, t); });
    return store;
}

ModelWeights ModelWeights::from_store(const WeightStore& store, const ModelConfig& config) {
    ModelWeights w = zeros(config);
    std::size_t used = 0;
    try {
        visit_params(w, [&](const std::string& name, Tensor& t) {
            const Tensor& src = store.get(name);
            if (src.shape() != t.shape())
                throw FormatError("weight '" + name + "' has shape " + shape_str(src.shape()) + ", config expects " +
                                  shape_str(t.shape()));
            t = src;
            ++used;
        });
    } catch (const ShapeError& e) {
        throw FormatError(e.what());
    }
    if (used != store.size())
        throw FormatError("weight bundle holds " + std::to_string(store.size() - used) + " tensors the config does not use");
    return w;
}

ModelWeights load_or_create_weights(const std::filesystem::path& dir, const ModelConfig& config) {
    if (dir.empty()) return ModelWeights::create(config);
    if (WeightStore::exists(dir)) return ModelWeights::from_store(WeightStore::load(dir), config);
    ModelWeights w = ModelWeights::create(config);
    w.to_store().save(dir);
    return w;
}

}  // namespace eovseg
