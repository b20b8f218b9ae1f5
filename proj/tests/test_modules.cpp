#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "eovseg/aggregator.hpp"
#include "eovseg/classifier.hpp"
#include "eovseg/decoder.hpp"
#include "eovseg/error.hpp"
#include "eovseg/fusion.hpp"
#include "eovseg/kernels.hpp"
#include "eovseg/reference.hpp"
#include "eovseg/spatial.hpp"
#include "eovseg/vas.hpp"
#include "helpers.hpp"

using namespace eovseg;
using testing::rand_tensor;

namespace {

Conv2d identity_1x1(std::size_t c) {
    Conv2d w = Conv2d::zeros(ConvMode::pointwise_1x1, c, c);
    for (std::size_t i = 0; i < c; ++i) w.weight[i * c + i] = 1.0f;
    return w;
}

Conv2d delta_3x3(std::size_t c) {
    Conv2d w = Conv2d::zeros(ConvMode::k3_pad1, c, c);
    for (std::size_t i = 0; i < c; ++i) w.weight.at({i, i, 1, 1}) = 1.0f;
    return w;
}

bool all_equal(const Tensor& t, float v, float tol = 0.0f) {
    return std::all_of(t.values().begin(), t.values().end(), [&](float x) { return std::fabs(x - v) <= tol; });
}

}  // namespace

// ---- aggregator

TEST_CASE("backbone stride arithmetic and determinism") {
    const std::array<std::size_t, 4> widths{4, 6, 8, 8};
    const auto b = SyntheticBackbone::create(11, widths, 8);
    Rng rng(1);
    const Tensor img = rand_tensor(rng, {3, 64, 64});
    const auto f = extract_features(img, b);
    const std::size_t ext[4] = {16, 8, 4, 2};
    for (std::size_t i = 0; i < 4; ++i) CHECK(f.levels[i].shape() == Shape{widths[i], ext[i], ext[i]});
    const auto g = extract_features(img, SyntheticBackbone::create(11, widths, 8));
    for (std::size_t i = 0; i < 4; ++i) CHECK(bitwise_equal(f.levels[i], g.levels[i]));
    CHECK(clip_final_features(f, b).shape() == Shape{8, 16, 16});

    const auto z = extract_features(Tensor({3, 64, 64}), SyntheticBackbone::zeros(widths, 8));
    for (const auto& l : z.levels) CHECK(all_equal(l, 0.0f));
    CHECK_THROWS_AS(extract_features(Tensor({3, 48, 64}), b), ShapeError);
}

TEST_CASE("pyramid forced paths") {
    const std::array<std::size_t, 4> widths{4, 4, 4, 4};
    BackboneFeatures c;
    Rng rng(2);
    for (std::size_t i = 0; i < 4; ++i) c.levels[i] = rand_tensor(rng, {4, 16u >> i, 16u >> i});

    PyramidWeights w = PyramidWeights::zeros(widths, 4);
    w.lateral[3] = identity_1x1(4);
    Rng r2(3);
    w.smooth[3] = Conv2d::init(ConvMode::k3_pad1, 4, 4, r2);
    const auto p = build_pyramid(c, w);
    CHECK(bitwise_equal(p.levels[3], conv2d(c.levels[3], w.smooth[3])));

    // constant inputs, identity laterals, delta smoothing: every level stays constant
    PyramidWeights id = PyramidWeights::zeros(widths, 4);
    for (std::size_t i = 0; i < 4; ++i) {
        id.lateral[i] = identity_1x1(4);
        id.smooth[i] = delta_3x3(4);
        c.levels[i].fill(0.5f);
    }
    const auto q = build_pyramid(c, id);
    for (std::size_t i = 0; i < 4; ++i) CHECK(all_equal(q.levels[i], 0.5f * float(4 - i), 1e-6f));

    Rng r3(4);
    const auto rw = PyramidWeights::init(widths, 4, r3);
    for (std::size_t i = 0; i < 4; ++i) c.levels[i] = rand_tensor(r3, {4, 16u >> i, 16u >> i});
    const auto got = build_pyramid(c, rw), want = ref::build_pyramid(c, rw);
    for (std::size_t i = 0; i < 4; ++i) CHECK(max_abs_diff(got.levels[i], want.levels[i]) <= 1e-5);
}

TEST_CASE("aggregate forced paths") {
    FeaturePyramid p;
    for (std::size_t i = 0; i < 4; ++i) p.levels[i] = Tensor({3, 8u >> i, 8u >> i}, 1.25f);
    AggregateWeights w = AggregateWeights::zeros(3);
    for (auto& l : w.level_conv) l = identity_1x1(3);
    w.fuse = delta_3x3(3);
    const Tensor out = aggregate(p, w);
    CHECK(out.shape() == Shape{3, 8, 8});
    CHECK(all_equal(out, 5.0f, 1e-6f));

    Rng rng(5);
    const auto rw = AggregateWeights::init(3, rng);
    p.levels[0] = rand_tensor(rng, {3, 8, 8});
    for (std::size_t i = 1; i < 4; ++i) p.levels[i].fill(0.0f);
    // zero inputs still pass through the level bias, so compare against the same vanishing path
    Tensor sum = conv2d(p.levels[0], rw.level_conv[0]);
    for (std::size_t i = 1; i < 4; ++i)
        add_inplace(sum, bilinear_upsample(conv2d(p.levels[i], rw.level_conv[i]), std::size_t{1} << i));
    CHECK(bitwise_equal(aggregate(p, rw), conv2d(sum, rw.fuse)));

    for (std::size_t i = 0; i < 4; ++i) p.levels[i] = rand_tensor(rng, {3, 8u >> i, 8u >> i});
    CHECK(max_abs_diff(aggregate(p, rw), ref::aggregate(p, rw)) <= 1e-5);

    p.levels[2] = Tensor({3, 3, 3});
    CHECK_THROWS_AS(aggregate(p, rw), ShapeError);
}

// ---- vas

TEST_CASE("vas attention bounds and singleton vocabulary") {
    Rng rng(6);
    const VasWeights w = VasWeights::init(8, 2, 1.0f, 0.0f, rng);
    const Tensor f = rand_tensor(rng, {8, 4, 4});
    const Tensor a1 = vas_attention(f, rand_tensor(rng, {1, 8}), w);
    CHECK(a1.shape() == Shape{2, 4, 4});
    CHECK(all_equal(a1, 1.0f));
    for (std::size_t nc : {2u, 3u, 7u}) {
        const Tensor a = vas_attention(f, rand_tensor(rng, {nc, 8}), w);
        for (float v : testing::vals(a)) {
            CHECK(v >= 1.0f / float(nc) - 1e-6f);
            CHECK(v <= 1.0f + 1e-6f);
        }
    }
    VasWeights bad = w;
    bad.heads = 3;
    CHECK_THROWS_AS(bad.validate(8), Error);
}

TEST_CASE("vas_apply forced weights") {
    Rng rng(7);
    const Tensor proj = rand_tensor(rng, {4, 3, 3});
    const Tensor att = rand_tensor(rng, {2, 3, 3}, 0.4f, 1.0f);
    CHECK(bitwise_equal(vas_apply(proj, att, 0.0f, 1.0f), proj));
    CHECK(all_equal(vas_apply(proj, att, 0.0f, 0.0f), 0.0f));
    CHECK(bitwise_equal(vas_apply(proj, Tensor({2, 3, 3}, 1.0f), 1.0f, 0.0f), proj));
}

TEST_CASE("vas_forward composition, permutation and oracles") {
    Rng rng(8);
    const VasWeights w = VasWeights::init(4, 2, 1.0f, 0.0f, rng);
    const Tensor f = rand_tensor(rng, {4, 2, 2}), text = rand_tensor(rng, {3, 4});
    const Tensor out = vas_forward(f, text, w);
    CHECK(bitwise_equal(out, vas_apply(vas_project_features(f, w), vas_attention(f, text, w), w.scale, w.offset)));

    Tensor perm({3, 4});
    const std::size_t order[3] = {2, 0, 1};
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t j = 0; j < 4; ++j) perm[r * 4 + j] = text[order[r] * 4 + j];
    CHECK(max_abs_diff(vas_forward(f, perm, w), out) <= 1e-6);

    CHECK(max_abs_diff(vas_attention(f, text, w), ref::vas_attention(f, text, w)) <= 1e-5);
    CHECK(max_abs_diff(out, ref::vas_forward(f, text, w)) <= 1e-5);
    CHECK(max_abs_diff(out, ref::vas_pseudocode(f, text, w)) <= 1e-5);
}

// ---- decoder

TEST_CASE("initial_attention limits") {
    Rng rng(9);
    const Tensor f = rand_tensor(rng, {4, 3, 3});
    MaskSet m{Tensor({2, 3, 3}, -1e9f)};
    CHECK(all_equal(initial_attention(f, m), 0.0f, 1e-6f));
    m.logits.at({1, 2, 1}) = 1e9f;
    const Tensor e = initial_attention(f, m);
    for (std::size_t d = 0; d < 4; ++d) CHECK(std::fabs(e[4 + d] - f.at({d, 2, 1})) <= 1e-4);
    m.logits = rand_tensor(rng, {2, 3, 3}, -3, 3);
    CHECK(max_abs_diff(initial_attention(f, m), ref::initial_attention(f, m.logits)) <= 1e-5);
}

TEST_CASE("dda forced kernels") {
    Rng rng(10);
    const Tensor f_init = rand_tensor(rng, {3, 6});
    // K = e_0 per row, W_m row 0 = [0,1,0]
    Tensor k({3, 6});
    for (std::size_t n = 0; n < 3; ++n) k[n * 6] = 1.0f;
    Tensor proj({6, 3});
    proj[1] = 1.0f;
    CHECK(bitwise_equal(dda(k, f_init, proj), f_init));
    CHECK(all_equal(dda(Tensor({3, 6}), f_init, rand_tensor(rng, {6, 3})), 0.0f));
    const Tensor rk = rand_tensor(rng, {3, 6}), rp = rand_tensor(rng, {6, 3});
    CHECK(max_abs_diff(dda(rk, f_init, rp), ref::dda(rk, f_init, rp)) <= 1e-5);
    CHECK_THROWS_AS(dda(rk, f_init, Tensor({6, 4})), ShapeError);
}

TEST_CASE("refine_kernels and cross attention") {
    Rng rng(11);
    DecoderLayerWeights w = DecoderLayerWeights::init(4, 3, 2, 4, rng);
    const Tensor k = rand_tensor(rng, {2, 4});
    CHECK(max_abs_diff(refine_kernels(k, w), ref::refine_kernels(k, w)) <= 1e-5);

    DecoderLayerWeights z = w;
    z.self_attn.output = Linear::zeros(4, 4);
    z.ffn_out = Linear::zeros(16, 4);
    CHECK(bitwise_equal(refine_kernels(k, z), k));

    const Tensor f = rand_tensor(rng, {4, 2, 2});
    CHECK(max_abs_diff(cross_attention_baseline(k, f, w.cross), ref::cross_attention_baseline(k, f, w.cross)) <= 1e-5);
    AttentionWeights silent = w.cross;
    silent.output = Linear::zeros(4, 4);
    CHECK(bitwise_equal(cross_attention_baseline(k, f, silent), k));

    // one key: attention collapses to the value path
    const Tensor single = rand_tensor(rng, {4, 1, 1});
    const Tensor v = linear(linear(single.reshaped({1, 4}), w.cross.value), w.cross.output);
    const Tensor got = cross_attention_baseline(k, single, w.cross);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t d = 0; d < 4; ++d) CHECK(std::fabs(got[n * 4 + d] - (k[n * 4 + d] + v[d])) <= 1e-6);
}

TEST_CASE("mask kernels, masks and pooling") {
    Rng rng(12);
    std::array<Linear, 3> mlp{Linear::zeros(4, 4), Linear::zeros(4, 4), Linear::zeros(4, 4)};
    for (auto& l : mlp)
        for (std::size_t i = 0; i < 4; ++i) l.weight[i * 4 + i] = 1.0f;
    const Tensor pos = rand_tensor(rng, {3, 4}, 0.0f, 1.0f);
    CHECK(bitwise_equal(mask_kernels(pos, mlp), pos));
    auto dead = mlp;
    dead[2] = Linear::zeros(4, 4);
    CHECK(all_equal(mask_kernels(pos, dead), 0.0f));
    const auto rmlp = std::array<Linear, 3>{Linear::init(4, 4, rng), Linear::init(4, 4, rng), Linear::init(4, 4, rng)};
    const Tensor rk = rand_tensor(rng, {3, 4});
    CHECK(max_abs_diff(mask_kernels(rk, rmlp), ref::mask_kernels(rk, rmlp)) <= 1e-5);

    const Tensor f = rand_tensor(rng, {4, 3, 5});
    Tensor sel({1, 4});
    sel[2] = 1.0f;
    const MaskSet m = predict_masks(sel, f);
    for (std::size_t p = 0; p < 15; ++p) CHECK(m.logits[p] == f[2 * 15 + p]);
    CHECK(all_equal(predict_masks(Tensor({2, 4}), f).probabilities(), 0.5f));
    CHECK(max_abs_diff(predict_masks(rk, f).logits, ref::predict_masks(rk, f)) <= 1e-5);

    // uniform masks: pooling is the spatial mean
    const Tensor pooled = mask_pool(f, MaskSet{Tensor({2, 3, 5})});
    for (std::size_t d = 0; d < 4; ++d) {
        double mean = 0;
        for (std::size_t p = 0; p < 15; ++p) mean += f[d * 15 + p];
        mean /= 15;
        CHECK(std::fabs(pooled[d] - mean) <= 1e-6);
        CHECK(std::fabs(pooled[4 + d] - mean) <= 1e-6);
    }
    MaskSet hot{Tensor({1, 3, 5}, -30.0f)};
    hot.logits.at({0, 1, 4}) = 30.0f;
    const Tensor one = mask_pool(f, hot);
    for (std::size_t d = 0; d < 4; ++d) CHECK(std::fabs(one[d] - f.at({d, 1, 4})) <= 1e-4);
    const MaskSet rm{rand_tensor(rng, {3, 3, 5}, -3, 3)};
    CHECK(max_abs_diff(mask_pool(f, rm), ref::mask_pool(f, rm.logits)) <= 1e-5);
}

TEST_CASE("decoder_forward contracts") {
    Rng rng(13);
    const DecoderWeights w = DecoderWeights::init(5, 8, 2, 3, 2, 4, rng);
    const Tensor f = rand_tensor(rng, {8, 4, 4});

    const auto one = decoder_forward(f, w, 1, Interaction::dda);
    const MaskSet init = predict_masks(w.kernels, f);
    const Tensor k = dda(w.kernels, initial_attention(f, init), w.layers[0].dda_proj);
    const MaskSet m = predict_masks(mask_kernels(refine_kernels(k, w.layers[0]), w.mask_mlp), f);
    CHECK(bitwise_equal(one.masks.logits, m.logits));
    CHECK(bitwise_equal(one.embeddings, mask_pool(f, m)));

    const auto a = decoder_forward(f, w, 2, Interaction::dda);
    const auto b = decoder_forward(f, w, 2, Interaction::ca);
    CHECK(a.masks.logits.shape() == Shape{5, 4, 4});
    CHECK(b.masks.logits.shape() == a.masks.logits.shape());
    CHECK(a.embeddings.shape() == Shape{5, 8});
    CHECK_FALSE(bitwise_equal(a.masks.logits, b.masks.logits));

    for (auto mode : {Interaction::dda, Interaction::ca}) {
        const auto got = decoder_forward(f, w, 2, mode);
        const auto want = ref::decoder_forward(f, w, 2, mode);
        CHECK(max_abs_diff(got.masks.logits, want.masks.logits) <= 1e-4);
        CHECK(max_abs_diff(got.embeddings, want.embeddings) <= 1e-4);
    }
    CHECK_THROWS_AS(decoder_forward(f, w, 0, Interaction::dda), ConfigError);
    CHECK_THROWS_AS(decoder_forward(f, w, 3, Interaction::dda), ConfigError);
    CHECK_THROWS_AS(parse_interaction("xa"), ConfigError);
}

// ---- spatial

TEST_CASE("vit block and upsampler") {
    Rng rng(14);
    VitBlockWeights w = VitBlockWeights::init(8, 2, 4, rng);
    const Tensor img = rand_tensor(rng, {3, 64, 64});
    CHECK(vit_block_features(img, w).shape() == Shape{8, 4, 4});

    // silent block: tokens are the patch embeddings plus positions
    VitBlockWeights silent = w;
    silent.attn.output = Linear::zeros(8, 8);
    silent.mlp_out = Linear::zeros(32, 8);
    const Tensor got = vit_block_features(img, silent);
    const Tensor patches = patch_conv2d(img, w.patch_weight, w.patch_bias, 16);
    for (std::size_t d = 0; d < 8; ++d)
        for (std::size_t p = 0; p < 16; ++p)
            CHECK(got[d * 16 + p] == patches[d * 16 + p] + w.positions[(1 + p) * 8 + d]);

    const Tensor small = rand_tensor(rng, {3, 32, 32});
    CHECK(max_abs_diff(vit_block_features(small, w), ref::vit_block_features(small, w)) <= 1e-4);
    CHECK_THROWS_AS(vit_block_features(rand_tensor(rng, {3, 96, 96}), w), ShapeError);

    const UpsamplerWeights u = UpsamplerWeights::init(8, 6, rng);
    const Tensor v = rand_tensor(rng, {8, 4, 4});
    CHECK(spatial_features(v, u).shape() == Shape{6, 16, 16});
    CHECK(all_equal(spatial_features(Tensor({8, 4, 4}), UpsamplerWeights::zeros(8, 6)), 0.0f));
    CHECK(max_abs_diff(spatial_features(v, u), ref::spatial_features(v, u)) <= 1e-5);
}

TEST_CASE("spatial embeddings pool like masks") {
    Rng rng(15);
    const Tensor fs = rand_tensor(rng, {4, 4, 4});
    const Tensor e = spatial_embeddings(fs, MaskSet{Tensor({1, 4, 4})});
    for (std::size_t d = 0; d < 4; ++d) {
        double mean = 0;
        for (std::size_t p = 0; p < 16; ++p) mean += fs[d * 16 + p];
        CHECK(std::fabs(e[d] - mean / 16) <= 1e-6);
    }
}

// ---- fusion

TEST_CASE("tdee forced router") {
    Rng rng(16);
    TdeeWeights w = TdeeWeights::init(4, 4, rng);
    w.router_m = Linear::zeros(2, 2);
    w.router_s = Linear::zeros(2, 2);
    const Tensor em = rand_tensor(rng, {2, 4}), es = rand_tensor(rng, {2, 4});
    const auto out = tdee_detailed(em, es, w);
    CHECK(all_equal(out.gate_m, 0.5f));
    CHECK(all_equal(out.gate_s, 0.5f));
    // core = 0.5 (LN(P_f) + LN(Q_f)) where P_f, Q_f are the first halves of the projections
    const Tensor pm = linear(em, w.proj_m), ps = linear(es, w.proj_s);
    Tensor pf({2, 2}), qf({2, 2});
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t j = 0; j < 2; ++j) {
            pf[n * 2 + j] = pm[n * 4 + j];
            qf[n * 2 + j] = ps[n * 4 + j];
        }
    const Tensor lp = layer_norm(pf, w.ln_pf), lq = layer_norm(qf, w.ln_qf);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::fabs(out.combined[i] - 0.5 * (lp[i] + lq[i])) <= 1e-6);
    CHECK(max_abs_diff(out.embeddings, ref::tdee(em, es, w).embeddings) <= 1e-5);
}

TEST_CASE("tdee symmetry and transliteration") {
    Rng rng(17);
    const TdeeWeights w = TdeeWeights::init(4, 4, rng);
    const Tensor em = rand_tensor(rng, {2, 4}), es = rand_tensor(rng, {2, 4});
    CHECK(bitwise_equal(tdee(es, em, w.swapped()), tdee(em, es, w)));
    CHECK(max_abs_diff(tdee(em, es, w), ref::tdee_equations(em, es, w)) <= 1e-5);
    CHECK_THROWS_AS(TdeeWeights::init(4, 3, rng), Error);
}

TEST_CASE("eaf selectors") {
    Rng rng(18);
    const Tensor f = rand_tensor(rng, {3, 4, 4}), v = rand_tensor(rng, {5, 4, 4});
    EafWeights w = EafWeights::zeros(3, 5);
    for (std::size_t i = 0; i < 3; ++i) w.fuse.weight[i * 8 + i] = 1.0f;
    CHECK(bitwise_equal(eaf(f, v, w), f));
    EafWeights sel = EafWeights::zeros(3, 5);
    for (std::size_t i = 0; i < 3; ++i) sel.fuse.weight[i * 8 + 3 + i] = 1.0f;
    const Tensor out = eaf(f, v, sel);
    for (std::size_t i = 0; i < 48; ++i) CHECK(out[i] == v[i]);
    const EafWeights rw = EafWeights::init(3, 5, rng);
    CHECK(max_abs_diff(eaf(f, v, rw), ref::eaf(f, v, rw)) <= 1e-5);
}

TEST_CASE("sdi identity pipeline") {
    Rng rng(19);
    const std::size_t d = 4;
    SdiWeights w = SdiWeights::zeros(d, 3, d);
    w.kernel_gen.bias[1] = 1.0f;
    for (std::size_t i = 0; i < d; ++i) {
        w.u_gen.bias[i * d + i] = 1.0f;
        w.v_gen.bias[i * d + i] = 1.0f;
    }
    const Tensor em = rand_tensor(rng, {2, d}), es = rand_tensor(rng, {2, d});
    CHECK(max_abs_diff(sdi(em, es, w), es) <= 1e-7);
    CHECK(all_equal(sdi(em, Tensor({2, d}), SdiWeights::init(d, 3, 2, rng)), 0.0f));
    const SdiWeights rw = SdiWeights::init(6, 3, 2, rng);
    const Tensor a = rand_tensor(rng, {2, 6}), b = rand_tensor(rng, {2, 6});
    CHECK(max_abs_diff(sdi(a, b, rw), ref::sdi(a, b, rw)) <= 1e-5);
}

// ---- classifier

TEST_CASE("text embeddings") {
    Rng rng(20);
    const Tensor t1 = rand_tensor(rng, {1, 3, 4});
    CHECK(max_abs_diff(build_text_embeddings(t1), l2_normalize(t1.reshaped({3, 4}), 1)) <= 1e-7);

    Tensor neg({2, 1, 3});
    for (std::size_t j = 0; j < 3; ++j) {
        neg[j] = float(j + 1);
        neg[3 + j] = -float(j + 1);
    }
    CHECK_THROWS_AS(build_text_embeddings(neg), Error);

    const Tensor t3 = rand_tensor(rng, {3, 2, 5});
    const Tensor e = build_text_embeddings(t3);
    for (std::size_t c = 0; c < 2; ++c) {
        double mean[5] = {}, sq = 0;
        for (std::size_t j = 0; j < 5; ++j) {
            for (std::size_t t = 0; t < 3; ++t) mean[j] += t3[(t * 2 + c) * 5 + j] / 3.0;
            sq += mean[j] * mean[j];
        }
        for (std::size_t j = 0; j < 5; ++j) CHECK(std::fabs(e[c * 5 + j] - mean[j] / std::sqrt(sq)) <= 1e-6);
    }
    CHECK_THROWS_AS(make_text_embeddings(t3, {{"a", true, true}}), ShapeError);
}

TEST_CASE("in and out of vocabulary scores") {
    Rng rng(21);
    const Tensor text = l2_normalize(rand_tensor(rng, {3, 6}), 1);
    Tensor e({1, 6});
    for (std::size_t j = 0; j < 6; ++j) e[j] = text[6 + j];
    const Tensor s = in_vocab_scores(e, text, 0.001f).scores;
    CHECK(s[1] > 0.999f);
    const Tensor uni = in_vocab_scores(Tensor({2, 6}, 0.0f), text, 0.07f).scores;
    for (float v : testing::vals(uni)) CHECK(v == doctest::Approx(1.0 / 3));

    const Tensor r = rand_tensor(rng, {2, 6});
    CHECK(max_abs_diff(in_vocab_scores(r, text, 0.07f).scores, ref::in_vocab_scores(r, text, 0.07)) <= 1e-6);
    CHECK_THROWS_AS(in_vocab_scores(r, text, 0.0f), ConfigError);

    // constant field equal to class 2 → every mask picks class 2
    Tensor clip({6, 4, 4});
    for (std::size_t c = 0; c < 6; ++c)
        for (std::size_t p = 0; p < 16; ++p) clip[c * 16 + p] = text[12 + c];
    const MaskSet masks{rand_tensor(rng, {3, 4, 4}, -2, 2)};
    const auto so = out_vocab_scores(clip, masks, text, 0.07f);
    for (const auto& d : classify(masks, so, 0.0f)) CHECK(d.label == 2);

    const auto flat = out_vocab_scores(rand_tensor(rng, {6, 4, 4}), MaskSet{Tensor({3, 4, 4})}, text, 0.07f);
    for (std::size_t i = 0; i < 3; ++i) CHECK(flat.scores[3 + i] == flat.scores[i]);
    // composition: pool with the loop oracle, then score with the loop oracle
    const Tensor fc = rand_tensor(rng, {6, 4, 4});
    CHECK(max_abs_diff(out_vocab_scores(fc, masks, text, 0.07f).scores,
                       ref::in_vocab_scores(ref::mask_pool(fc, masks.logits), text, 0.07)) <= 1e-5);
}

TEST_CASE("ensemble") {
    Rng rng(22);
    const ClassScores si{rand_tensor(rng, {4, 3}, 0.01f, 1.0f)}, so{rand_tensor(rng, {4, 3}, 0.01f, 1.0f)};
    const std::vector<bool> seen{true, false, true};
    for (auto method : {EnsembleMethod::geometric, EnsembleMethod::arithmetic}) {
        CHECK(bitwise_equal(ensemble(si, so, {0.0f, 0.0f, method}, seen).scores, si.scores));
        CHECK(bitwise_equal(ensemble(si, so, {1.0f, 1.0f, method}, seen).scores, so.scores));
        const EnsembleParams p{0.4f, 0.8f, method};
        CHECK(max_abs_diff(ensemble(si, so, p, seen).scores, ref::ensemble(si.scores, so.scores, p, seen)) <= 1e-6);
    }
    const ClassScores a{Tensor::from({1, 1}, {0.8f})}, b{Tensor::from({1, 1}, {0.5f})};
    const float g = ensemble(a, b, {0.4f, 0.8f, EnsembleMethod::geometric}, {true}).scores[0];
    CHECK(std::fabs(g - std::pow(0.8L, 0.6L) * std::pow(0.5L, 0.4L)) <= 1e-6);
    CHECK_THROWS_AS(ensemble(a, b, {1.5f, 0.8f, EnsembleMethod::geometric}, {true}), ConfigError);
    CHECK_THROWS_AS(ensemble(a, b, {0.4f, 0.8f, EnsembleMethod::geometric}, {true, false}), ShapeError);
    CHECK_THROWS_AS(parse_ensemble_method("harmonic"), ConfigError);
}

TEST_CASE("classify") {
    Rng rng(23);
    const MaskSet masks{Tensor({4, 2, 2})};
    const ClassScores one{Tensor({4, 1}, 0.7f)};
    const auto d = classify(masks, one, 0.0f);
    CHECK(d.size() == 4);
    for (const auto& x : d) CHECK(x.label == 0);
    CHECK(classify(masks, one, 0.8f).empty());

    const ClassScores r{rand_tensor(rng, {4, 5}, 0.0f, 1.0f)};
    const auto dets = classify(masks, r, 0.0f);
    REQUIRE(dets.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        const float* row = r.scores.ptr() + i * 5;
        CHECK(dets[i].label == std::size_t(std::max_element(row, row + 5) - row));
        CHECK(dets[i].confidence == *std::max_element(row, row + 5));
    }
}
