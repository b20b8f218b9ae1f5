#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "eovseg/classifier.hpp"
#include "eovseg/decoder.hpp"
#include "eovseg/fusion.hpp"

namespace eovseg {

struct ModelConfig {
    std::size_t embed_dim = 256;  // D
    std::array<std::size_t, 4> backbone_widths{64, 128, 256, 512};
    std::size_t vit_dim = 64;  // D_v
    std::size_t vit_heads = 4;
    std::size_t vit_max_grid = 16;
    std::size_t vas_heads = 8;  // h
    float vas_scale = 1.0f;
    float vas_offset = 0.0f;
    std::size_t queries = 100;  // N
    std::size_t decoder_layers = 3;
    std::size_t dda_kernel = 3;  // m
    std::size_t attn_heads = 8;
    std::size_t ffn_mult = 4;
    Interaction interaction = Interaction::dda;
    FusionMode fusion = FusionMode::tdee;
    std::size_t fusion_dim = 256;  // d
    std::size_t sdi_kernel = 3;
    std::size_t sdi_rank = 4;
    EnsembleParams ensemble;
    float temperature = 0.07f;  // tau
    float score_floor = 0.0f;
    std::size_t prompt_templates = 4;  // M
    std::uint64_t weight_seed = 1;

    // Throws ConfigError naming the first violated constraint.
    void validate() const;
};

ModelConfig parse_config(const std::string& json_text);
ModelConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ModelConfig& c);

// FNV-1a over the canonical JSON with the interaction mode removed, so dda
// and ca runs of one configuration share a hash.
std::string config_hash(const ModelConfig& c);

}  // namespace eovseg
