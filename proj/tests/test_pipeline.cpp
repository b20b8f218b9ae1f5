#include <algorithm>
#include <set>

#include "doctest.h"
#include "eovseg/config.hpp"
#include "eovseg/error.hpp"
#include "eovseg/evaluation.hpp"
#include "eovseg/model.hpp"
#include "eovseg/pipeline.hpp"
#include "eovseg/tensor_io.hpp"
#include "helpers.hpp"

using namespace eovseg;

namespace {

ModelConfig small_config(FusionMode fusion = FusionMode::tdee) {
    ModelConfig c;
    c.embed_dim = 16;
    c.backbone_widths = {4, 8, 16, 16};
    c.vit_dim = 8;
    c.vit_heads = 2;
    c.vit_max_grid = 8;
    c.vas_heads = 2;
    c.queries = 6;
    c.decoder_layers = 2;
    c.attn_heads = 2;
    c.ffn_mult = 2;
    c.fusion_dim = 8;
    c.sdi_rank = 2;
    c.prompt_templates = 2;
    c.fusion = fusion;
    return c;
}

struct Setup {
    Tensor image;
    TextEmbeddings text;
};

Setup setup(const ModelConfig& c, std::size_t h = 64, std::size_t w = 64) {
    Rng rng(3);
    std::vector<ClassInfo> classes{{"sky", true, false}, {"car", true, true}, {"sign", false, true}};
    return {rng.uniform_tensor({3, h, w}, 0, 1),
            make_text_embeddings(rng.uniform_tensor({c.prompt_templates, 3, c.embed_dim}, -1, 1), classes)};
}

}  // namespace

TEST_CASE("config parsing and validation") {
    const auto c = parse_config(R"({"embed_dim": 32, "queries": 10, "fusion": "sdi", "ensemble": {"alpha": 0.2}})");
    CHECK(c.embed_dim == 32);
    CHECK(c.queries == 10);
    CHECK(c.fusion == FusionMode::sdi);
    CHECK(c.ensemble.alpha == doctest::Approx(0.2));
    CHECK(parse_config(config_to_json(c)).embed_dim == 32);

    CHECK_THROWS_AS(parse_config(R"({"embeded_dim": 32})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"dda_kernel": 4})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"embed_dim": 30, "vas_heads": 8})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"fusion": "late"})"), ConfigError);
    CHECK_THROWS_AS(parse_config("{"), FormatError);

    ModelConfig a, b;
    b.interaction = Interaction::ca;
    CHECK(config_hash(a) == config_hash(b));
    b.queries = 7;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(config_hash(a).size() == 16);
}

TEST_CASE("weights are seeded and survive a store round trip") {
    const ModelConfig c = small_config();
    const auto a = ModelWeights::create(c), b = ModelWeights::create(c);
    CHECK(bitwise_equal(a.decoder.kernels, b.decoder.kernels));
    ModelConfig other = c;
    other.weight_seed = 2;
    CHECK_FALSE(bitwise_equal(ModelWeights::create(other).decoder.kernels, a.decoder.kernels));

    const auto dir = testing::scratch("weights");
    a.to_store().save(dir);
    const auto loaded = load_or_create_weights(dir, c);
    CHECK(bitwise_equal(loaded.tdee.head.weight, a.tdee.head.weight));

    ModelConfig wider = c;
    wider.queries = 9;
    CHECK_THROWS_AS(ModelWeights::from_store(a.to_store(), wider), FormatError);
    WeightStore extra = a.to_store();
    extra.put("stray.tensor", Tensor({1}));
    CHECK_THROWS_AS(ModelWeights::from_store(extra, c), FormatError);
}

TEST_CASE("padding and resizing") {
    const Tensor img({3, 40, 70}, 1.0f);
    const Tensor p = pad_image(img);
    CHECK(p.shape() == Shape{3, 64, 96});
    CHECK(p.at({0, 39, 69}) == 1.0f);
    CHECK(p.at({0, 40, 0}) == 0.0f);
    CHECK(resize_short_side(img, 20).shape() == Shape{3, 20, 35});
}

TEST_CASE("forward shapes for every fusion mode") {
    for (auto mode : {FusionMode::none, FusionMode::eaf, FusionMode::sdi, FusionMode::tdee}) {
        const ModelConfig c = small_config(mode);
        const auto w = ModelWeights::create(c);
        const auto s = setup(c);
        Trace trace;
        const auto r = forward(s.image, s.text, c, w, &trace);
        CHECK(r.panoptic.map.height == 64);
        CHECK(r.panoptic.map.width == 64);
        CHECK(r.scores.scores.shape() == Shape{6, 3});
        CHECK(r.masks.logits.shape() == Shape{6, 16, 16});
        CHECK(trace.names() == trace_names(mode));
        const auto again = forward(s.image, s.text, c, w);
        CHECK(again.panoptic.map.ids == r.panoptic.map.ids);
        CHECK(bitwise_equal(again.scores.scores, r.scores.scores));
    }
    CHECK(trace_names(FusionMode::tdee).size() == 13);
}

TEST_CASE("odd-sized input is padded then cropped") {
    const ModelConfig c = small_config();
    const auto s = setup(c, 40, 50);
    const auto r = forward(s.image, s.text, c, ModelWeights::create(c));
    CHECK(r.panoptic.map.height == 40);
    CHECK(r.panoptic.map.width == 50);
    std::set<std::int32_t> ids(r.panoptic.map.ids.begin(), r.panoptic.map.ids.end());
    for (const auto& seg : r.panoptic.segments) CHECK(ids.count(seg.id) == 1);
}

TEST_CASE("trace replay is bitwise and Avocab is bounded") {
    for (auto mode : {FusionMode::none, FusionMode::eaf, FusionMode::sdi, FusionMode::tdee}) {
        const ModelConfig c = small_config(mode);
        const auto w = ModelWeights::create(c);
        const auto s = setup(c);
        Trace trace;
        forward(s.image, s.text, c, w, &trace);
        const auto dir = testing::scratch("trace");
        trace.save(dir);
        const Trace loaded = Trace::load(dir);
        const auto results = replay_trace(loaded, s.image, s.text, c, w);
        CHECK(!results.empty());
        for (const auto& r : results) CHECK_MESSAGE(r.bitwise, r.stage << " -> " << r.output);
        for (float v : testing::vals(trace.get("A_vocab"))) {
            CHECK(v >= 1.0f / 3.0f - 1e-6f);
            CHECK(v <= 1.0f + 1e-6f);
        }
    }
}

TEST_CASE("stage failures name the stage") {
    const ModelConfig c = small_config();
    const auto w = ModelWeights::create(c);
    auto s = setup(c);
    Rng rng(1);
    s.text = make_text_embeddings(rng.uniform_tensor({1, 2, 12}, -1, 1), {{"a", true, true}, {"b", true, true}});
    try {
        forward(s.image, s.text, c, w);
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "vas");
    }
    Trace t;
    t.put("x", Tensor({1}));
    CHECK_THROWS_AS(t.put("x", Tensor({1})), Error);
}
