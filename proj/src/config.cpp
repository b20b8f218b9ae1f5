#include "eovseg/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "eovseg/error.hpp"

namespace eovseg {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
}

nlohmann::json to_json(const ModelConfig& c) {
    nlohmann::json j;
    j["embed_dim"] = c.embed_dim;
    j["backbone_widths"] = c.backbone_widths;
    j["vit_dim"] = c.vit_dim;
    j["vit_heads"] = c.vit_heads;
    j["vit_max_grid"] = c.vit_max_grid;
    j["vas_heads"] = c.vas_heads;
    j["vas_scale"] = c.vas_scale;
    j["vas_offset"] = c.vas_offset;
    j["queries"] = c.queries;
    j["decoder_layers"] = c.decoder_layers;
    j["dda_kernel"] = c.dda_kernel;
    j["attn_heads"] = c.attn_heads;
    j["ffn_mult"] = c.ffn_mult;
    j["interaction"] = to_string(c.interaction);
    j["fusion"] = to_string(c.fusion);
    j["fusion_dim"] = c.fusion_dim;
    j["sdi_kernel"] = c.sdi_kernel;
    j["sdi_rank"] = c.sdi_rank;
    j["ensemble"] = {{"alpha", c.ensemble.alpha}, {"beta", c.ensemble.beta}, {"method", to_string(c.ensemble.method)}};
    j["temperature"] = c.temperature;
    j["score_floor"] = c.score_floor;
    j["prompt_templates"] = c.prompt_templates;
    j["weight_seed"] = c.weight_seed;
    return j;
}

}  // namespace

void ModelConfig::validate() const {
    require(embed_dim >= 2, "embed_dim must be at least 2");
    for (auto w : backbone_widths) require(w > 0, "backbone widths must be positive");
    require(vit_dim > 0 && vit_heads > 0 && vit_dim % vit_heads == 0, "vit_dim must be a positive multiple of vit_heads");
    require(vit_max_grid > 0, "vit_max_grid must be positive");
    require(vas_heads > 0 && embed_dim % vas_heads == 0, "embed_dim must be divisible by vas_heads");
    require(queries > 0, "queries must be positive");
    require(decoder_layers > 0, "decoder_layers must be positive");
    require(dda_kernel % 2 == 1, "dda_kernel must be odd");
    require(dda_kernel <= 2 * embed_dim - 1, "dda_kernel must not exceed 2*embed_dim - 1");
    require(attn_heads > 0 && embed_dim % attn_heads == 0, "embed_dim must be divisible by attn_heads");
    require(ffn_mult > 0, "ffn_mult must be positive");
    require(fusion_dim >= 2 && fusion_dim % 2 == 0, "fusion_dim must be even and at least 2");
    require(sdi_kernel % 2 == 1, "sdi_kernel must be odd");
    require(sdi_rank > 0, "sdi_rank must be positive");
    require(temperature > 0.0f, "temperature must be positive");
    require(prompt_templates > 0, "prompt_templates must be positive");
    try {
        ensemble.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

ModelConfig parse_config(const std::string& json_text) {
    ModelConfig c;
    try {
        const auto j = nlohmann::json::parse(json_text);
        if (!j.is_object()) throw ConfigError("config: top level must be an object");
        const auto known = to_json(c);
        for (const auto& [key, value] : j.items())
            if (!known.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
        c.embed_dim = j.value("embed_dim", c.embed_dim);
        c.backbone_widths = j.value("backbone_widths", c.backbone_widths);
        c.vit_dim = j.value("vit_dim", c.vit_dim);
        c.vit_heads = j.value("vit_heads", c.vit_heads);
        c.vit_max_grid = j.value("vit_max_grid", c.vit_max_grid);
        c.vas_heads = j.value("vas_heads", c.vas_heads);
        c.vas_scale = j.value("vas_scale", c.vas_scale);
        c.vas_offset = j.value("vas_offset", c.vas_offset);
        c.queries = j.value("queries", c.queries);
        c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
        c.dda_kernel = j.value("dda_kernel", c.dda_kernel);
        c.attn_heads = j.value("attn_heads", c.attn_heads);
        c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
        if (j.contains("interaction")) c.interaction = parse_interaction(j.at("interaction").get<std::string>());
        if (j.contains("fusion")) c.fusion = parse_fusion(j.at("fusion").get<std::string>());
        c.fusion_dim = j.value("fusion_dim", c.fusion_dim);
        c.sdi_kernel = j.value("sdi_kernel", c.sdi_kernel);
        c.sdi_rank = j.value("sdi_rank", c.sdi_rank);
        if (j.contains("ensemble")) {
            const auto& e = j.at("ensemble");
            c.ensemble.alpha = e.value("alpha", c.ensemble.alpha);
            c.ensemble.beta = e.value("beta", c.ensemble.beta);
            if (e.contains("method")) c.ensemble.method = parse_ensemble_method(e.at("method").get<std::string>());
        }
        c.temperature = j.value("temperature", c.temperature);
        c.score_floor = j.value("score_floor", c.score_floor);
        c.prompt_templates = j.value("prompt_templates", c.prompt_templates);
        c.weight_seed = j.value("weight_seed", c.weight_seed);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("config: ") + e.what());
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

ModelConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw FormatError(path.string() + ": cannot open config");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const ModelConfig& c) { return to_json(c).dump(2); }

std::string config_hash(const ModelConfig& c) {
    auto j = to_json(c);
    j.erase("interaction");
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace eovseg
