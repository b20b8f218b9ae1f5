#pragma once

#include <filesystem>

#include "eovseg/aggregator.hpp"
#include "eovseg/config.hpp"
#include "eovseg/decoder.hpp"
#include "eovseg/fusion.hpp"
#include "eovseg/spatial.hpp"
#include "eovseg/vas.hpp"
#include "eovseg/weight_store.hpp"

namespace eovseg {

// Every learnable tensor of the model. All fusion variants are carried so one
// bundle serves every mode.
struct ModelWeights {
    SyntheticBackbone backbone;
    PyramidWeights pyramid;
    AggregateWeights aggregate;
    VasWeights vas;
    DecoderWeights decoder;
    VitBlockWeights vit;
    UpsamplerWeights upsampler;
    TdeeWeights tdee;
    SdiWeights sdi;
    EafWeights eaf;

    // Deterministic in (config, config.weight_seed); each module draws from
    // its own forked stream.
    static ModelWeights create(const ModelConfig& config);
    static ModelWeights zeros(const ModelConfig& config);

    WeightStore to_store() const;
    // Missing tensors or shape mismatches against `config` throw FormatError.
    static ModelWeights from_store(const WeightStore& store, const ModelConfig& config);
};

template <Like<ModelWeights> W, class F>
void visit_params(W& w, F&& f) {
    visit_params(w.backbone, "backbone", f);
    visit_params(w.pyramid, "pyramid", f);
    visit_params(w.aggregate, "aggregate", f);
    visit_params(w.vas, "vas", f);
    visit_params(w.decoder, "decoder", f);
    visit_params(w.vit, "vit", f);
    visit_params(w.upsampler, "upsampler", f);
    visit_params(w.tdee, "tdee", f);
    visit_params(w.sdi, "sdi", f);
    visit_params(w.eaf, "eaf", f);
}

// Loads the bundle from `dir` when it holds one, otherwise generates it from
// the config seed and saves it there. An empty path skips the cache.
ModelWeights load_or_create_weights(const std::filesystem::path& dir, const ModelConfig& config);

}  // namespace eovseg
