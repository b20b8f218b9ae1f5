#include "eovseg/verify.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>

#include "eovseg/config.hpp"
#include "eovseg/error.hpp"
#include "eovseg/kernels.hpp"
#include "eovseg/model.hpp"
#include "eovseg/pipeline.hpp"
#include "eovseg/profiler.hpp"
#include "eovseg/reference.hpp"

namespace eovseg {

bool VerifyReport::passed() const { return first_failure() == nullptr; }

const CheckResult* VerifyReport::first_failure() const {
    for (const auto& c : checks)
        if (!c.passed) return &c;
    return nullptr;
}

namespace {

// Context handed to each trial: a private generator and the result to fill.
struct Trial {
    Rng& rng;
    CheckResult& result;
    double tol;

    std::size_t extent(std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }
    Tensor random(Shape s, float lo = -1.0f, float hi = 1.0f) { return rng.uniform_tensor(std::move(s), lo, hi); }

    void fail(const std::string& why) {
        if (result.passed) result.detail = why;
        result.passed = false;
    }
    void close(const Tensor& got, const Tensor& want, const std::string& what) { close(got, want, what, tol); }

    void close(const Tensor& got, const Tensor& want, const std::string& what, double limit) {
        if (got.shape() != want.shape()) {
            fail(what + ": shape " + shape_str(got.shape()) + " vs oracle " + shape_str(want.shape()));
            return;
        }
        const double d = max_abs_diff(got, want);
        result.worst = std::max(result.worst, d);
        if (!(d <= limit)) {
            std::ostringstream os;
            os << what << ": max abs diff " << d << " exceeds " << limit;
            fail(os.str());
        }
    }
    void require(bool ok, const std::string& why) {
        if (!ok) fail(why);
    }
};

template <class W>
void randomize(W& w, Rng& rng) {
    visit_params(w, "", [&](const std::string& name, Tensor& t) {
        const bool gamma = name.size() >= 6 && name.compare(name.size() - 6, 6, ".gamma") == 0;
        // matrices get a fan-scaled range so stacked layers keep activations near unit size
        float r = 0.6f;
        if (t.rank() >= 2) r = static_cast<float>(std::sqrt(3.0 / std::sqrt(static_cast<double>(t.size()))));
        for (auto& v : t.data()) v = gamma ? rng.uniform(0.5f, 1.5f) : rng.uniform(-r, r);
    });
}

Conv2d random_conv(Trial& t, ConvMode mode, std::size_t in, std::size_t out) {
    Conv2d c = Conv2d::zeros(mode, in, out);
    randomize(c, t.rng);
    return c;
}

ModelConfig desk_config(Rng& rng) {
    ModelConfig c;
    c.embed_dim = 8;
    c.backbone_widths = {4, 6, 8, 8};
    c.vit_dim = 8;
    c.vit_heads = 2;
    c.vit_max_grid = 4;
    c.vas_heads = 2;
    c.queries = 1 + rng.below(6);
    c.decoder_layers = 1 + rng.below(2);
    c.dda_kernel = 3;
    c.attn_heads = 2;
    c.ffn_mult = 2;
    c.fusion_dim = 8;
    c.sdi_kernel = 3;
    c.sdi_rank = 2;
    c.prompt_templates = 2;
    c.weight_seed = rng.next_u64();
    return c;
}

TextEmbeddings random_text(Rng& rng, std::size_t classes, std::size_t dim) {
    std::vector<ClassInfo> info;
    for (std::size_t i = 0; i < classes; ++i) info.push_back({"c" + std::to_string(i), rng.below(2) == 0, true});
    return make_text_embeddings(rng.uniform_tensor({2, classes, dim}, -1.0f, 1.0f), info);
}

using CheckFn = std::function<void(Trial&)>;

struct Check {
    const char* name;
    CheckFn fn;
    std::size_t trial_divisor = 1;  // expensive checks run trials / divisor instances (at least 1)
};

const char* kContractSpecs[] = {"ij,jk->ik",       "bmchw,bnmc->bmhwn", "qhc,khc->hqk", "hqk,khc->qhc",
                                "ij,ij->i",        "i,j->ij",           "abc,cd->abd",  "ijk,jl->il",
                                "ab,ba->",         "nd,pd->np"};

std::vector<Check> checks() {
    std::vector<Check> out;
    out.push_back({"contract", [](Trial& t) {
                       const std::string spec = kContractSpecs[t.rng.below(std::size(kContractSpecs))];
                       const auto comma = spec.find(','), arrow = spec.find("->");
                       std::map<char, std::size_t> ext;
                       for (char c : spec)
                           if (std::isalpha(static_cast<unsigned char>(c)) && !ext.count(c)) ext[c] = t.extent(1, 4);
                       Shape sa, sb;
                       for (char c : spec.substr(0, comma)) sa.push_back(ext[c]);
                       for (char c : spec.substr(comma + 1, arrow - comma - 1)) sb.push_back(ext[c]);
                       const Tensor a = t.random(sa), b = t.random(sb);
                       t.close(contract(a, b, spec), ref::contract(a, b, spec), spec);
                   }});
    out.push_back({"softmax", [](Trial& t) {
                       Shape s;
                       const std::size_t rank = t.extent(1, 4);
                       for (std::size_t i = 0; i < rank; ++i) s.push_back(t.extent(1, 6));
                       const std::size_t axis = t.rng.below(rank);
                       const Tensor x = t.random(s, -8.0f, 8.0f);
                       const Tensor y = softmax(x, axis);
                       t.close(y, ref::softmax(x, axis), "softmax");
                       // Rows sum to one.
                       std::size_t outer = 1, inner = 1;
                       for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
                       for (std::size_t i = axis + 1; i < rank; ++i) inner *= s[i];
                       for (std::size_t o = 0; o < outer; ++o)
                           for (std::size_t i = 0; i < inner; ++i) {
                               double sum = 0.0;
                               for (std::size_t k = 0; k < s[axis]; ++k) sum += y[(o * s[axis] + k) * inner + i];
                               t.result.worst = std::max(t.result.worst, std::fabs(sum - 1.0));
                               t.require(std::fabs(sum - 1.0) <= 1e-6, "softmax row sum deviates from 1 by more than 1e-6");
                           }
                   }});
    out.push_back({"layer_norm", [](Trial& t) {
                       const Tensor x = t.random({t.extent(1, 6), t.extent(2, 8)}, -3.0f, 3.0f);
                       LayerNormParams p{t.random({x.dim(1)}, 0.5f, 1.5f), t.random({x.dim(1)})};
                       t.close(layer_norm(x, p), ref::layer_norm(x, p), "layer_norm");
                   }});
    out.push_back({"activations", [](Trial& t) {
                       const Tensor x = t.random({t.extent(1, 8), t.extent(1, 8)}, -6.0f, 6.0f);
                       t.close(pointwise(Activation::sigmoid, x), ref::sigmoid(x), "sigmoid");
                       t.close(pointwise(Activation::gelu, x), ref::gelu(x), "gelu");
                       t.close(pointwise(Activation::relu, x), ref::relu(x), "relu");
                   }});
    out.push_back({"matmul", [](Trial& t) {
                       const std::size_t m = t.extent(1, 8), k = t.extent(1, 8), n = t.extent(1, 8);
                       const Tensor a = t.random({m, k}), b = t.random({k, n});
                       t.close(matmul(a, b), ref::matmul(a, b), "matmul");
                       Linear l = Linear::init(k, n, t.rng, t.rng.below(2) == 0);
                       t.close(linear(a, l), ref::linear(a, l), "linear");
                   }});
    out.push_back({"conv2d", [](Trial& t) {
                       const std::size_t cin = t.extent(1, 6), cout = t.extent(1, 6);
                       const Tensor x = t.random({cin, t.extent(1, 8), t.extent(1, 8)});
                       for (auto mode : {ConvMode::pointwise_1x1, ConvMode::k3_pad1, ConvMode::depthwise_separable}) {
                           const Conv2d w = random_conv(t, mode, cin, cout);
                           t.close(conv2d(x, w), ref::conv2d(x, w), "conv2d mode " + std::to_string(static_cast<int>(mode)));
                       }
                   }});
    out.push_back({"patch_conv2d", [](Trial& t) {
                       const std::size_t k = t.extent(1, 4), cin = t.extent(1, 4), cout = t.extent(1, 4);
                       const Tensor x = t.random({cin, k * t.extent(1, 2), k * t.extent(1, 2)});
                       const Tensor w = t.random({cout, cin, k, k}), b = t.random({cout});
                       t.close(patch_conv2d(x, w, b, k), ref::patch_conv2d(x, w, b, k), "patch_conv2d");
                   }});
    out.push_back({"depthwise_conv1d", [](Trial& t) {
                       const std::size_t n = t.extent(1, 6), d = t.extent(1, 8), m = 2 * t.extent(0, 3) + 1;
                       const Tensor s = t.random({n, d}), k = t.random({n, m});
                       t.close(depthwise_conv1d(s, k), ref::depthwise_conv1d(s, k), "depthwise_conv1d");
                   }});
    out.push_back({"transposed_conv2d", [](Trial& t) {
                       const std::size_t cin = t.extent(1, 6), cout = t.extent(1, 6);
                       const Tensor x = t.random({cin, t.extent(1, 4), t.extent(1, 4)});
                       const Tensor w = t.random({cin, cout, 2, 2}), b = t.random({cout});
                       t.close(transposed_conv2d(x, w, b), ref::transposed_conv2d(x, w, b), "transposed_conv2d");
                   }});
    out.push_back({"bilinear_upsample", [](Trial& t) {
                       const std::size_t f = std::size_t{2} << t.rng.below(3);
                       const Tensor x = t.random({t.extent(1, 4), t.extent(1, 4), t.extent(1, 4)});
                       t.close(bilinear_upsample(x, f), ref::bilinear_upsample(x, f), "bilinear x" + std::to_string(f));
                   }});
    out.push_back({"reductions", [](Trial& t) {
                       const Tensor x = t.random({t.extent(1, 6), t.extent(1, 6), t.extent(1, 6)});
                       const std::size_t axis = t.rng.below(3);
                       t.close(reduce_max(x, axis), ref::reduce_max(x, axis), "reduce_max");
                       t.close(l2_normalize(x, axis), ref::l2_normalize(x, axis), "l2_normalize");
                   }});

    // ---- vas
    out.push_back({"vas", [](Trial& t) {
                       const std::size_t heads = 1 + t.rng.below(2), d = heads * t.extent(1, 4), nc = t.extent(1, 5);
                       VasWeights w = VasWeights::zeros(d, heads, t.rng.uniform(0.5f, 1.5f), t.rng.uniform(-0.5f, 0.5f));
                       randomize(w, t.rng);
                       const Tensor f = t.random({d, t.extent(1, 8), t.extent(1, 8)}), text = t.random({nc, d});
                       const Tensor a = vas_attention(f, text, w);
                       t.close(a, ref::vas_attention(f, text, w), "vas_attention");
                       for (float v : a.values())
                           t.require(v >= 1.0f / static_cast<float>(nc) - 1e-7f && v <= 1.0f,
                                     "vas attention outside [1/N_class, 1]");
                       const Tensor y = vas_forward(f, text, w);
                       t.close(y, ref::vas_forward(f, text, w), "vas_forward");
                       t.close(y, ref::vas_pseudocode(f, text, w), "vas pseudocode");
                   }});

    // ---- decoder
    out.push_back({"attention", [](Trial& t) {
                       const std::size_t heads = 1 + t.rng.below(2), d = heads * t.extent(1, 4);
                       AttentionWeights w = AttentionWeights::zeros(d, heads);
                       randomize(w, t.rng);
                       const Tensor q = t.random({t.extent(1, 6), d}), ctx = t.random({t.extent(1, 8), d});
                       t.close(multi_head_attention(q, ctx, w), ref::multi_head_attention(q, ctx, w), "attention");
                   }});
    out.push_back({"decoder_ops", [](Trial& t) {
                       const std::size_t n = t.extent(1, 6), d = 2 * t.extent(1, 4), m = 2 * t.extent(0, 2) + 1;
                       const Tensor f = t.random({d, t.extent(1, 8), t.extent(1, 8)});
                       const Tensor k = t.random({n, d});
                       const MaskSet masks{t.random({n, f.dim(1), f.dim(2)}, -3.0f, 3.0f)};
                       DecoderLayerWeights lw = DecoderLayerWeights::zeros(d, m, 2, 2);
                       randomize(lw, t.rng);
                       std::array<Linear, 3> mlp{Linear::init(d, d, t.rng), Linear::init(d, d, t.rng), Linear::init(d, d, t.rng)};
                       const Tensor fi = initial_attention(f, masks);
                       t.close(fi, ref::initial_attention(f, masks.logits), "initial_attention");
                       t.close(dda(k, fi, lw.dda_proj), ref::dda(k, fi, lw.dda_proj), "dda");
                       t.close(refine_kernels(k, lw), ref::refine_kernels(k, lw), "refine_kernels");
                       t.close(cross_attention_baseline(k, f, lw.cross), ref::cross_attention_baseline(k, f, lw.cross),
                               "cross_attention");
                       t.close(mask_kernels(k, mlp), ref::mask_kernels(k, mlp), "mask_kernels");
                       t.close(predict_masks(k, f).logits, ref::predict_masks(k, f), "predict_masks");
                       t.close(mask_pool(f, masks), ref::mask_pool(f, masks.logits), "mask_pool");
                   }});
    out.push_back({"decoder_forward", [](Trial& t) {
                       const std::size_t n = t.extent(1, 6), d = 2 * t.extent(1, 4), layers = t.extent(1, 2);
                       DecoderWeights w = DecoderWeights::init(n, d, layers, 3, 2, 2, t.rng);
                       const Tensor f = t.random({d, t.extent(1, 8), t.extent(1, 8)});
                       // stacked dynamic kernels reach logits in the hundreds; one float ulp there is ~6e-5
                       const double limit = 10 * t.tol;
                       for (auto mode : {Interaction::dda, Interaction::ca}) {
                           const auto got = decoder_forward(f, w, layers, mode);
                           const auto want = ref::decoder_forward(f, w, layers, mode);
                           t.close(got.masks.logits, want.masks.logits, "decoder masks (" + to_string(mode) + ")", limit);
                           t.close(got.embeddings, want.embeddings, "decoder E_m (" + to_string(mode) + ")", limit);
                           // one layer must be exactly the composition of the six ops
                           const auto one = decoder_forward(f, w, 1, mode);
                           const MaskSet init = predict_masks(w.kernels, f);
                           const Tensor k = mode == Interaction::dda
                                                ? dda(w.kernels, initial_attention(f, init), w.layers[0].dda_proj)
                                                : cross_attention_baseline(w.kernels, f, w.layers[0].cross);
                           const MaskSet m = predict_masks(mask_kernels(refine_kernels(k, w.layers[0]), w.mask_mlp), f);
                           t.require(bitwise_equal(one.masks.logits, m.logits) &&
                                         bitwise_equal(one.embeddings, mask_pool(f, m)),
                                     "decoder_forward (" + to_string(mode) + ") differs from its op composition");
                       }
                   }});

    // ---- spatial
    out.push_back({"spatial", [](Trial& t) {
                       const std::size_t dv = 2 * t.extent(1, 4), d = t.extent(1, 8), grid = t.extent(1, 2);
                       VitBlockWeights vw = VitBlockWeights::init(dv, 2, 2, t.rng);
                       UpsamplerWeights uw = UpsamplerWeights::init(dv, d, t.rng);
                       const Tensor img = t.random({3, 16 * grid, 16 * t.extent(1, 2)});
                       const Tensor v = vit_block_features(img, vw);
                       t.close(v, ref::vit_block_features(img, vw), "vit_block_features");
                       t.close(spatial_features(v, uw), ref::spatial_features(v, uw), "spatial_features");
                   },
                   2});

    // ---- fusion
    out.push_back({"tdee", [](Trial& t) {
                       const std::size_t n = t.extent(1, 6), d = t.extent(2, 8), fd = 2 * t.extent(1, 4);
                       TdeeWeights w = TdeeWeights::zeros(d, fd);
                       randomize(w, t.rng);
                       const Tensor em = t.random({n, d}), es = t.random({n, d});
                       const auto got = tdee_detailed(em, es, w);
                       const auto want = ref::tdee(em, es, w);
                       t.close(got.embeddings, want.embeddings, "tdee");
                       t.close(got.gate_m, want.gate_m, "tdee gate_m");
                       t.close(got.embeddings, ref::tdee_equations(em, es, w), "tdee equations");
                       for (const Tensor* g : {&got.gate_m, &got.gate_s})
                           for (float v : g->values()) t.require(v > 0.0f && v < 1.0f, "tdee gate outside (0, 1)");
                       t.require(bitwise_equal(tdee(es, em, w.swapped()), got.embeddings),
                                 "tdee not symmetric under expert swap");
                   }});
    out.push_back({"eaf", [](Trial& t) {
                       const std::size_t d = t.extent(1, 6), dv = t.extent(1, 6), h = t.extent(1, 8), wd = t.extent(1, 8);
                       EafWeights w = EafWeights::zeros(d, dv);
                       randomize(w, t.rng);
                       const Tensor f = t.random({d, h, wd}), v = t.random({dv, h, wd});
                       t.close(eaf(f, v, w), ref::eaf(f, v, w), "eaf");
                   }});
    out.push_back({"sdi", [](Trial& t) {
                       const std::size_t n = t.extent(1, 6), d = t.extent(1, 8), k = 2 * t.extent(0, 2) + 1, r = t.extent(1, 3);
                       SdiWeights w = SdiWeights::zeros(d, k, r);
                       randomize(w, t.rng);
                       const Tensor em = t.random({n, d}), es = t.random({n, d});
                       t.close(sdi(em, es, w), ref::sdi(em, es, w), "sdi");
                   }});

    // ---- classifier
    out.push_back({"classifier", [](Trial& t) {
                       const std::size_t n = t.extent(1, 6), nc = t.extent(1, 6), d = t.extent(1, 8);
                       const float tau = t.rng.uniform(0.05f, 1.0f);
                       const Tensor e = t.random({n, d}), text = t.random({nc, d});
                       const auto si = in_vocab_scores(e, text, tau);
                       t.close(si.scores, ref::in_vocab_scores(e, text, tau), "in_vocab_scores");
                       const auto so = in_vocab_scores(t.random({n, d}), text, tau);
                       std::vector<bool> seen(nc);
                       for (std::size_t i = 0; i < nc; ++i) seen[i] = t.rng.below(2) == 0;
                       EnsembleParams p{t.rng.uniform(), t.rng.uniform(),
                                        t.rng.below(2) ? EnsembleMethod::geometric : EnsembleMethod::arithmetic};
                       t.close(ensemble(si, so, p, seen).scores, ref::ensemble(si.scores, so.scores, p, seen), "ensemble");
                   }});

    // ---- aggregator and whole-model counts
    out.push_back({"aggregator", [](Trial& t) {
                       ModelConfig c = desk_config(t.rng);
                       const ModelWeights w = ModelWeights::create(c);
                       const Tensor img = t.random({3, 32, 32});
                       const auto f = extract_features(img, w.backbone);
                       const auto rf = ref::extract_features(img, w.backbone);
                       for (std::size_t i = 0; i < 4; ++i) t.close(f.levels[i], rf.levels[i], "C" + std::to_string(i + 2));
                       t.close(clip_final_features(f, w.backbone), ref::clip_final_features(f, w.backbone), "clip features");
                       const auto p = build_pyramid(f, w.pyramid);
                       const auto rp = ref::build_pyramid(f, w.pyramid);
                       for (std::size_t i = 0; i < 4; ++i) t.close(p.levels[i], rp.levels[i], "P" + std::to_string(i + 2));
                       t.close(aggregate(p, w.aggregate), ref::aggregate(p, w.aggregate), "aggregate");
                   },
                   5});
    out.push_back({"mac_counts", [](Trial& t) {
                       ModelConfig c = desk_config(t.rng);
                       c.interaction = t.rng.below(2) ? Interaction::dda : Interaction::ca;
                       c.fusion = static_cast<FusionMode>(t.rng.below(4));
                       const ModelWeights w = ModelWeights::create(c);
                       const std::size_t nc = t.extent(1, 4);
                       const TextEmbeddings text = random_text(t.rng, nc, c.embed_dim);
                       const Tensor img = t.random({3, 32, 32});
                       const auto counted = ref::forward(img, text, c, w).macs;
                       const auto analytic = macs_by_module(count_macs(c, 32, 32, nc));
                       for (const auto& [module, n] : analytic) {
                           const auto got = counted.at(module);
                           if (got != n)
                               t.fail(module + ": analytic " + std::to_string(n) + " vs counted " + std::to_string(got) +
                                      " (" + to_string(c.interaction) + "/" + to_string(c.fusion) + ")");
                       }
                       // Interaction ops alone on a small feature map.
                       const std::size_t fh = t.extent(1, 8), fw = t.extent(1, 8);
                       const Tensor f = t.random({c.embed_dim, fh, fw});
                       const Tensor logits = t.random({c.queries, fh, fw});
                       const auto& lw = w.decoder.layers[0];
                       ref::CountScope s_dda;
                       ref::dda(w.decoder.kernels, ref::initial_attention(f, logits), lw.dda_proj);
                       const auto dda_n = s_dda.macs();
                       ref::CountScope s_ca;
                       ref::cross_attention_baseline(w.decoder.kernels, f, lw.cross);
                       const auto ca_n = s_ca.macs();
                       if (dda_n != interaction_macs(Interaction::dda, c.queries, c.embed_dim, c.dda_kernel, fh, fw))
                           t.fail("dda interaction count mismatch");
                       if (ca_n != interaction_macs(Interaction::ca, c.queries, c.embed_dim, c.dda_kernel, fh, fw))
                           t.fail("ca interaction count mismatch");
                   },
                   5});
    out.push_back({"pipeline_bounds", [](Trial& t) {
                       ModelConfig c = desk_config(t.rng);
                       c.fusion = FusionMode::tdee;
                       const ModelWeights w = ModelWeights::create(c);
                       const std::size_t nc = t.extent(1, 4);
                       const TextEmbeddings text = random_text(t.rng, nc, c.embed_dim);
                       Trace trace;
                       forward(t.random({3, 32, 32}, 0.0f, 1.0f), text, c, w, &trace);
                       for (float v : trace.get("A_vocab").values())
                           t.require(v >= 1.0f / static_cast<float>(nc) - 1e-7f && v <= 1.0f,
                                     "traced A_vocab outside [1/N_class, 1]");
                       const auto g = tdee_detailed(trace.get("E_m"), trace.get("E_s"), w.tdee);
                       for (const Tensor* x : {&g.gate_m, &g.gate_s})
                           for (float v : x->values()) t.require(v > 0.0f && v < 1.0f, "traced tdee gate outside (0, 1)");
                       for (const char* name : {"S_I", "S_O"}) {
                           const Tensor& s = trace.get(name);
                           for (std::size_t r = 0; r < s.dim(0); ++r) {
                               double sum = 0.0;
                               for (std::size_t k = 0; k < s.dim(1); ++k) sum += s[r * s.dim(1) + k];
                               t.result.worst = std::max(t.result.worst, std::fabs(sum - 1.0));
                               t.require(std::fabs(sum - 1.0) <= 1e-6, std::string(name) + " row does not sum to 1");
                           }
                       }
                   },
                   5});
    return out;
}

}  // namespace

VerifyReport run_verification(const VerifyOptions& opt) {
    if (opt.trials == 0) throw ConfigError("verify: at least one trial is required");
    const auto start = std::chrono::steady_clock::now();
    FaultScope fault(opt.fault);
    VerifyReport report;
    std::uint64_t stream = 0;
    for (const auto& check : checks()) {
        CheckResult r;
        r.name = check.name;
        Rng rng = Rng(opt.seed).fork(++stream);
        const std::size_t n = std::max<std::size_t>(1, opt.trials / check.trial_divisor);
        for (std::size_t i = 0; i < n; ++i) {
            Trial t{rng, r, opt.tolerance};
            try {
                check.fn(t);
            } catch (const std::exception& e) {
                t.fail(std::string("exception: ") + e.what());
            }
            ++r.instances;
        }
        report.checks.push_back(std::move(r));
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::string format_report(const VerifyReport& report) {
    std::ostringstream os;
    os << std::left << std::setw(20) << "check" << std::setw(6) << "result" << std::right << std::setw(10)
       << "instances" << std::setw(14) << "worst" << "  detail\n";
    for (const auto& c : report.checks) {
        os << std::left << std::setw(20) << c.name << std::setw(6) << (c.passed ? "PASS" : "FAIL") << std::right
           << std::setw(10) << c.instances << std::setw(14) << std::setprecision(3) << std::scientific << c.worst
           << std::defaultfloat << "  " << c.detail << '\n';
    }
    os << (report.passed() ? "all checks passed" : "first failing check: " + report.first_failure()->name) << " ("
       << std::fixed << std::setprecision(2) << report.seconds << " s)\n";
    return os.str();
}

}  // namespace eovseg
