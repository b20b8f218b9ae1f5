#include <fstream>
#include <sstream>

#include "doctest.h"
#include "eovseg/config.hpp"
#include "eovseg/error.hpp"
#include "eovseg/model.hpp"
#include "eovseg/profiler.hpp"
#include "eovseg/reference.hpp"
#include "helpers.hpp"

using namespace eovseg;

namespace {

ModelConfig small_config() {
    ModelConfig c;
    c.embed_dim = 8;
    c.backbone_widths = {4, 6, 8, 8};
    c.vit_dim = 8;
    c.vit_heads = 2;
    c.vit_max_grid = 4;
    c.vas_heads = 2;
    c.queries = 3;
    c.decoder_layers = 2;
    c.attn_heads = 2;
    c.ffn_mult = 2;
    c.fusion_dim = 8;
    c.sdi_rank = 2;
    c.prompt_templates = 2;
    return c;
}

std::uint64_t shape_product(const std::string& s) {
    std::uint64_t n = 1;
    std::stringstream in(s);
    std::string part;
    while (std::getline(in, part, 'x')) n *= std::stoull(part);
    return n;
}

}  // namespace

TEST_CASE("parameter arithmetic") {
    CHECK(param_count(Conv2d::zeros(ConvMode::pointwise_1x1, 2, 3)) == 9);
    CHECK(interaction_params(Interaction::dda, 256, 3) == 768);
    CHECK(interaction_params(Interaction::ca, 256, 3) == 4 * (256 * 256 + 256));
    Rng rng(1);
    const auto layer = DecoderLayerWeights::init(8, 3, 2, 2, rng);
    CHECK(interaction_params(layer, Interaction::dda) == 24);
    CHECK(interaction_params(layer, Interaction::ca) == param_count(layer.cross));
}

TEST_CASE("count_params matches a manifest walk") {
    const ModelConfig c;
    const auto w = ModelWeights::create(c);
    const auto dir = testing::scratch("manifest");
    w.to_store().save(dir);

    std::map<std::string, std::uint64_t> walked;
    std::ifstream in(dir / "manifest.txt");
    std::string line;
    while (std::getline(in, line)) {
        std::stringstream fields(line);
        std::string name, shape;
        std::getline(fields, name, '\t');
        std::getline(fields, shape, '\t');
        walked[name.substr(0, name.find('.'))] += shape_product(shape);
    }
    CHECK(count_params(WeightStore::load(dir)) == walked);
}

TEST_CASE("analytic MACs") {
    {
        ref::CountScope s;
        Rng rng(2);
        ref::conv2d(Tensor({2, 2, 2}, 1.0f), Conv2d::init(ConvMode::pointwise_1x1, 2, 3, rng));
        CHECK(s.macs() == 24);
    }
    ModelConfig c;
    const auto ops = count_macs(c, 64, 64, 5);
    bool seen = false;
    for (const auto& op : ops)
        if (op.op == "layer0.dda_conv") {
            CHECK(op.macs == 76800);
            seen = true;
        }
    CHECK(seen);
    CHECK(interaction_macs(Interaction::dda, 100, 256, 3, 16, 16) <
          interaction_macs(Interaction::ca, 100, 256, 3, 16, 16));
    CHECK_THROWS_AS(count_macs(c, 48, 64, 5), ConfigError);
}

TEST_CASE("analytic MACs equal the instrumented oracle") {
    Rng pick(3);
    for (auto fusion : {FusionMode::none, FusionMode::eaf, FusionMode::sdi, FusionMode::tdee})
        for (auto mode : {Interaction::dda, Interaction::ca}) {
            ModelConfig c = small_config();
            c.fusion = fusion;
            c.interaction = mode;
            const auto w = ModelWeights::create(c);
            Rng rng(4);
            const Tensor img = rng.uniform_tensor({3, 32, 32}, 0.0f, 1.0f);
            const auto text = make_text_embeddings(rng.uniform_tensor({2, 3, 8}, -1, 1),
                                                   {{"a", true, true}, {"b", false, true}, {"c", true, false}});
            const auto counted = ref::forward(img, text, c, w).macs;
            const auto analytic = macs_by_module(count_macs(c, 32, 32, 3));
            for (const auto& m : profiled_modules()) {
                const auto a = analytic.count(m) ? analytic.at(m) : 0;
                const auto k = counted.count(m) ? counted.at(m) : 0;
                CHECK_MESSAGE(a == k, m << " under " << to_string(fusion) << "/" << to_string(mode));
            }
        }
}

TEST_CASE("timing summaries") {
    const auto t = summarize({5, 1, 4, 2, 3});
    CHECK(t.mean_ns == 3.0);
    CHECK(t.p50_ns == 3.0);
    CHECK(t.p95_ns == 5.0);
    CHECK(summarize({}).mean_ns == 0.0);
    int calls = 0;
    const auto m = measure([&] { ++calls; }, 5, 2);
    CHECK(calls == 7);
    CHECK(m.p50_ns <= m.p95_ns);
}

TEST_CASE("profile report schema") {
    const ModelConfig c = small_config();
    const auto w = ModelWeights::create(c);
    Rng rng(5);
    const auto text = make_text_embeddings(rng.uniform_tensor({2, 2, 8}, -1, 1), {{"a", true, true}, {"b", true, false}});
    const auto r = profile(rng.uniform_tensor({3, 64, 64}, 0, 1), text, c, w, 5);
    REQUIRE(r.rows.size() == 8);
    CHECK(r.mode == "dda/tdee");
    CHECK(r.config_hash == config_hash(c));
    for (const auto& row : r.rows) CHECK(row.time.p50_ns <= row.time.p95_ns);

    const std::string csv = to_csv(r);
    std::stringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("# flops = 2 * macs", 0) == 0);
    std::getline(in, line);
    CHECK(line == "module,params,macs,flops,time_mean_ns,time_p50_ns,time_p95_ns,mode,config_hash");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 9);
    CHECK_THROWS_AS(profile(Tensor({3, 64, 64}), text, c, w, 4), ConfigError);
}

TEST_CASE("benchmark rows") {
    ModelConfig c = small_config();
    const auto w = ModelWeights::create(c);
    const auto dda = benchmark(c, w, Interaction::dda, 5, 1, 4, 4);
    const auto ca = benchmark(c, w, Interaction::ca, 5, 1, 4, 4);
    REQUIRE(dda.rows.size() == 2);
    CHECK(dda.rows[0].module == "interaction");
    CHECK(dda.rows[1].module == "decoder_layer");
    CHECK(dda.config_hash == ca.config_hash);
    CHECK(dda.rows[0].params < ca.rows[0].params);
    CHECK(dda.rows[0].macs < ca.rows[0].macs);
    for (const auto& row : dda.rows) CHECK(row.time.p50_ns <= row.time.p95_ns);
}
