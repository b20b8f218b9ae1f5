// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eovseg/classifier.hpp"
#include "eovseg/config.hpp"
#include "eovseg/decoder.hpp"
#include "eovseg/evaluation.hpp"
#include "eovseg/fusion.hpp"
#include "eovseg/model.hpp"
#include "eovseg/pipeline.hpp"
#include "eovseg/profiler.hpp"
#include "eovseg/reference.hpp"
#include "eovseg/tensor_io.hpp"
#include "eovseg/vas.hpp"
#include "eovseg/verify.hpp"

using namespace eovseg;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream note;
    void expect(bool ok, const std::string& what) {
        if (!ok && pass) note << what;
        pass = pass && ok;
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void randomize(LayerNormParams& p, Rng& rng) {
    p.gamma = rng.uniform_tensor(p.gamma.shape(), 0.5f, 1.5f);
    p.beta = rng.uniform_tensor(p.beta.shape(), -0.5f, 0.5f);
}

TdeeWeights random_tdee(std::size_t dim, std::size_t fusion_dim, Rng& rng) {
    TdeeWeights w = TdeeWeights::init(dim, fusion_dim, rng);
    for (auto* ln : {&w.ln_pf, &w.ln_qf, &w.ln_router_m, &w.ln_router_s, &w.ln_head}) randomize(*ln, rng);
    return w;
}

ModelConfig tiny_config() {
    ModelConfig c;
    c.embed_dim = 8;
    c.backbone_widths = {4, 6, 8, 8};
    c.vit_dim = 8;
    c.vit_heads = 2;
    c.vit_max_grid = 4;
    c.vas_heads = 2;
    c.queries = 4;
    c.decoder_layers = 2;
    c.attn_heads = 2;
    c.ffn_mult = 2;
    c.fusion_dim = 8;
    c.sdi_rank = 2;
    c.prompt_templates = 2;
    return c;
}

SceneSpec scene_spec_64() {
    return load_scene_spec(std::filesystem::path(EOVSEG_DATA_DIR) / "scene64.json");
}

// ---------------------------------------------------------------- 1

Outcome oracle_equivalence() {
    Outcome o;
    const std::set<std::string> kernel_checks{
        "contract", "softmax", "layer_norm", "activations", "matmul", "conv2d", "patch_conv2d", "depthwise_conv1d",
        "transposed_conv2d", "bilinear_upsample", "reductions", "vas", "attention", "decoder_ops", "decoder_forward",
        "tdee", "eaf", "sdi", "classifier"};

    VerifyOptions full;
    full.trials = 100;
    const auto t0 = std::chrono::steady_clock::now();
    const VerifyReport r = run_verification(full);
    const double t_full = seconds_since(t0);
    std::size_t covered = 0;
    for (const auto& c : r.checks) {
        o.expect(c.passed, c.name + ": " + c.detail);
        if (kernel_checks.count(c.name)) {
            ++covered;
            o.expect(c.instances >= 100, c.name + " ran only " + std::to_string(c.instances) + " instances");
        }
    }
    o.expect(covered == kernel_checks.size(), "kernel checks missing from the suite");

    const auto t1 = std::chrono::steady_clock::now();
    const VerifyReport d = run_verification(VerifyOptions{});
    const double t_default = seconds_since(t1);
    o.expect(d.passed(), "default verify failed");
    o.expect(t_default < 60.0, "default verify exceeded 60 s");
    o.note << (o.pass ? "" : "; ") << r.checks.size() << " checks, 100 trials in " << t_full << " s, default in "
           << t_default << " s";
    return o;
}

// ---------------------------------------------------------------- 2

Outcome transliteration() {
    Outcome o;
    double worst_tdee = 0, worst_vas = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(1000 + seed);
        const TdeeWeights w = random_tdee(8, 8, rng);
        const Tensor em = rng.uniform_tensor({4, 8}, -1, 1), es = rng.uniform_tensor({4, 8}, -1, 1);
        worst_tdee = std::max(worst_tdee, max_abs_diff(tdee(em, es, w), ref::tdee_equations(em, es, w)));

        const VasWeights v = VasWeights::init(8, 2, rng.uniform(0.5f, 1.5f), rng.uniform(-0.5f, 0.5f), rng);
        const Tensor f = rng.uniform_tensor({8, 4, 4}, -1, 1), text = rng.uniform_tensor({3, 8}, -1, 1);
        worst_vas = std::max(worst_vas, max_abs_diff(vas_forward(f, text, v), ref::vas_pseudocode(f, text, v)));
    }
    o.expect(worst_tdee <= 1e-5, "tdee deviates from its equations");
    o.expect(worst_vas <= 1e-5, "vas deviates from the pseudocode");
    o.note << (o.pass ? "" : "; ") << "worst tdee " << worst_tdee << ", worst vas " << worst_vas;
    return o;
}

// ---------------------------------------------------------------- 3

Outcome ensemble_correctness() {
    Outcome o;
    Rng rng(3);
    const ClassScores si{rng.uniform_tensor({16, 5}, 0.001f, 1.0f)}, so{rng.uniform_tensor({16, 5}, 0.001f, 1.0f)};
    const std::vector<bool> seen{true, false, true, false, true};
    for (auto m : {EnsembleMethod::geometric, EnsembleMethod::arithmetic}) {
        o.expect(bitwise_equal(ensemble(si, so, {0.0f, 0.0f, m}, seen).scores, si.scores),
                 to_string(m) + ": alpha=beta=0 is not S_I");
        o.expect(bitwise_equal(ensemble(si, so, {1.0f, 1.0f, m}, seen).scores, so.scores),
                 to_string(m) + ": alpha=beta=1 is not S_O");
    }

    const EnsembleParams defaults = ModelConfig{}.ensemble;
    o.expect(defaults.alpha == 0.4f && defaults.beta == 0.8f, "default exponents are not 0.4 / 0.8");
    const float got =
        ensemble(ClassScores{Tensor::from({1, 1}, {0.8f})}, ClassScores{Tensor::from({1, 1}, {0.5f})}, defaults, {true})
            .scores[0];
    const long double want = std::pow(0.8L, 0.6L) * std::pow(0.5L, 0.4L);
    const double err = static_cast<double>(std::fabs(static_cast<long double>(got) - want));
    o.expect(err <= 1e-6, "geometric case off by more than 1e-6");

    std::size_t violations = 0;
    for (int i = 0; i < 1000; ++i) {
        const float s_i = rng.uniform(0.001f, 1.0f), lo = rng.uniform(0.001f, 1.0f), hi = rng.uniform(lo, 1.0f);
        const EnsembleParams p{rng.uniform(), rng.uniform(),
                               i % 2 ? EnsembleMethod::geometric : EnsembleMethod::arithmetic};
        const bool s = rng.below(2) == 1;
        const ClassScores in{Tensor::from({1, 1}, {s_i})};
        const float a = ensemble(in, ClassScores{Tensor::from({1, 1}, {lo})}, p, {s}).scores[0];
        const float b = ensemble(in, ClassScores{Tensor::from({1, 1}, {hi})}, p, {s}).scores[0];
        if (b < a) ++violations;
    }
    o.expect(violations == 0, std::to_string(violations) + " monotonicity violations");
    o.note << (o.pass ? "" : "; ") << "geometric error " << err << ", 1000 monotone triples";
    return o;
}

// ---------------------------------------------------------------- 4

Outcome efficiency() {
    Outcome o;
    const ModelConfig c;  // N=100, D=256, m=3
    const auto p_dda = interaction_params(Interaction::dda, c.embed_dim, c.dda_kernel);
    const auto p_ca = interaction_params(Interaction::ca, c.embed_dim, c.dda_kernel);
    const auto m_dda = interaction_macs(Interaction::dda, c.queries, c.embed_dim, c.dda_kernel, 16, 16);
    const auto m_ca = interaction_macs(Interaction::ca, c.queries, c.embed_dim, c.dda_kernel, 16, 16);
    o.expect(p_dda == 768 && p_ca == 4 * (256ull * 256 + 256), "closed-form parameter counts changed");
    o.expect(p_dda < p_ca, "DDA parameters not below CA");
    o.expect(m_dda < m_ca, "DDA MACs not below CA");
    const auto layer = ModelWeights::create(c).decoder.layers.at(0);
    o.expect(interaction_params(layer, Interaction::dda) == p_dda &&
                 interaction_params(layer, Interaction::ca) == p_ca,
             "default weights disagree with closed-form parameter counts");

    // interaction counts against the instrumented oracle, features up to 8x8
    Rng rng(4);
    for (std::size_t trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + rng.below(6), d = 2 * (1 + rng.below(4)), fh = 1 + rng.below(8),
                          fw = 1 + rng.below(8);
        const auto w = DecoderLayerWeights::init(d, 3, 2, 2, rng);
        const Tensor k = rng.uniform_tensor({n, d}, -1, 1), f = rng.uniform_tensor({d, fh, fw}, -1, 1);
        const Tensor logits = rng.uniform_tensor({n, fh, fw}, -1, 1);
        ref::CountScope s_dda;
        ref::dda(k, ref::initial_attention(f, logits), w.dda_proj);
        const auto c_dda = s_dda.macs();
        ref::CountScope s_ca;
        ref::cross_attention_baseline(k, f, w.cross);
        const auto c_ca = s_ca.macs();
        o.expect(c_dda == interaction_macs(Interaction::dda, n, d, 3, fh, fw), "dda count differs from the oracle");
        o.expect(c_ca == interaction_macs(Interaction::ca, n, d, 3, fh, fw), "ca count differs from the oracle");
    }

    // whole-model counts on a 32x32 input (largest feature map 8x8)
    std::size_t compared = 0;
    for (auto fusion : {FusionMode::none, FusionMode::eaf, FusionMode::sdi, FusionMode::tdee})
        for (auto mode : {Interaction::dda, Interaction::ca}) {
            ModelConfig t = tiny_config();
            t.fusion = fusion;
            t.interaction = mode;
            const auto w = ModelWeights::create(t);
            const Tensor img = rng.uniform_tensor({3, 32, 32}, 0, 1);
            const auto text = make_text_embeddings(rng.uniform_tensor({2, 3, 8}, -1, 1),
                                                   {{"a", true, true}, {"b", false, true}, {"c", true, false}});
            const auto counted = ref::forward(img, text, t, w).macs;
            const auto analytic = macs_by_module(count_macs(t, 32, 32, 3));
            for (const auto& m : profiled_modules()) {
                const auto a = analytic.count(m) ? analytic.at(m) : 0;
                const auto k = counted.count(m) ? counted.at(m) : 0;
                o.expect(a == k, m + " MACs differ under " + to_string(fusion) + "/" + to_string(mode));
                ++compared;
            }
        }
    o.note << (o.pass ? "" : "; ") << "params " << p_dda << " vs " << p_ca << ", MACs " << m_dda << " vs " << m_ca
           << ", " << compared << " module counts exact";
    return o;
}

// ---------------------------------------------------------------- 5

PanopticAnnotation random_annotation(Rng& rng, std::size_t h, std::size_t w) {
    PanopticAnnotation a;
    a.map = SegmentMap(h, w);
    const std::size_t segs = 1 + rng.below(6);
    for (std::size_t s = 0; s < segs; ++s) {
        const auto id = static_cast<std::int32_t>(s + 1);
        const std::size_t y = rng.below(h), x = rng.below(w), sh = 1 + rng.below(h - y), sw = 1 + rng.below(w - x);
        for (std::size_t yy = y; yy < y + sh; ++yy)
            for (std::size_t xx = x; xx < x + sw; ++xx) a.map.at(yy, xx) = id;
        const auto label = static_cast<std::int32_t>(rng.below(4));
        a.segments.push_back({id, label, label != 3});
    }
    // drop segments that were painted over completely
    std::set<std::int32_t> present(a.map.ids.begin(), a.map.ids.end());
    std::erase_if(a.segments, [&](const SegmentInfo& s) { return !present.count(s.id); });
    return a;
}

Outcome metrics() {
    Outcome o;
    Rng rng(5);
    double worst = 0;
    for (int i = 0; i < 200; ++i) {
        const auto gt = random_annotation(rng, 16, 16);
        PanopticAnnotation pred = rng.below(3) ? random_annotation(rng, 16, 16) : gt;
        if (rng.below(2)) {
            // perturb a copy of gt so that real matches occur
            pred = gt;
            for (std::size_t k = 0; k < 40; ++k) pred.map.ids[rng.below(256)] = 0;
        }
        const auto q = pq_metrics(pred, gt);
        for (const auto& [label, c] : q.per_class) worst = std::max(worst, std::fabs(c.pq - c.sq * c.rq));
    }
    o.expect(worst <= 1e-9, "per-class PQ differs from SQ * RQ");

    // one TP at IoU 0.8 and one FN
    PanopticAnnotation gt, pred;
    gt.map = pred.map = SegmentMap(10, 10);
    gt.segments = {{1, 0, true}, {2, 0, true}};
    pred.segments = {{1, 0, true}};
    for (std::size_t x = 0; x < 10; ++x) {
        gt.map.at(0, x) = 1;
        gt.map.at(5, x) = 2;
        if (x < 8) pred.map.at(0, x) = 1;
    }
    const auto hand = pq_metrics(pred, gt);
    o.expect(std::fabs(hand.pq - 0.5333) <= 1e-4, "hand case PQ is not 0.5333");

    Rng srng(6);
    const Scene scene = generate_scene(scene_spec_64(), srng, 1, 8);
    const auto self = pq_metrics(scene.gt, scene.gt);
    const double mi = miou(scene.gt.semantic(), scene.gt.semantic());
    o.expect(self.pq == 1.0 && mi == 1.0, "pred = gt does not give PQ = mIoU = 1");
    o.note << (o.pass ? "" : "; ") << "worst |PQ - SQ*RQ| " << worst << ", hand PQ " << hand.pq;
    return o;
}

// ---------------------------------------------------------------- 6, 7

struct PipelineRun {
    ForwardResult result;
    Trace trace;
};

PipelineRun run_once(const Scene& scene, const ModelConfig& c) {
    const auto w = ModelWeights::create(c);
    const auto text = make_text_embeddings(scene.templates, scene.classes);
    PipelineRun r;
    r.result = forward(scene.image, text, c, w, &r.trace);
    return r;
}

bool byte_identical(const PipelineRun& a, const PipelineRun& b) {
    if (a.trace.names() != b.trace.names()) return false;
    for (const auto& n : a.trace.names())
        if (encode_tensor(a.trace.get(n)) != encode_tensor(b.trace.get(n))) return false;
    return a.result.panoptic.map.ids == b.result.panoptic.map.ids &&
           encode_tensor(a.result.scores.scores) == encode_tensor(b.result.scores.scores);
}

Outcome pipeline_integrity(std::vector<PipelineRun>& runs, Scene& scene_out) {
    Outcome o;
    const ModelConfig base;
    Rng rng(7);
    const Scene scene = generate_scene(scene_spec_64(), rng, base.prompt_templates, base.embed_dim);
    scene_out = scene;
    const std::size_t nc = scene.classes.size();
    std::size_t replayed = 0;
    for (auto mode : {FusionMode::none, FusionMode::eaf, FusionMode::sdi, FusionMode::tdee}) {
        ModelConfig c = base;
        c.fusion = mode;
        const std::string tag = to_string(mode);
        PipelineRun a = run_once(scene, c), b = run_once(scene, c);
        const auto& r = a.result;
        o.expect(r.panoptic.map.height == 64 && r.panoptic.map.width == 64, tag + ": panoptic map is not 64x64");
        o.expect(r.scores.scores.shape() == Shape{c.queries, nc}, tag + ": scores shape");
        o.expect(r.masks.logits.shape() == Shape{c.queries, 16, 16}, tag + ": masks shape");
        o.expect(a.trace.names() == trace_names(mode), tag + ": trace manifest");
        o.expect(byte_identical(a, b), tag + ": reruns differ");
        const auto text = make_text_embeddings(scene.templates, scene.classes);
        for (const auto& rr : replay_trace(a.trace, scene.image, text, c, ModelWeights::create(c))) {
            o.expect(rr.bitwise, tag + ": replay of " + rr.stage + " -> " + rr.output + " not bitwise");
            ++replayed;
        }
        runs.push_back(std::move(a));
    }
    o.note << (o.pass ? "" : "; ") << "4 modes, " << replayed << " stages replayed bitwise";
    return o;
}

Outcome bounds(const std::vector<PipelineRun>& runs, const Scene& scene) {
    Outcome o;
    const double lo = 1.0 / static_cast<double>(scene.classes.size());
    for (const auto& r : runs)
        for (float v : r.trace.get("A_vocab").values())
            if (!(v >= lo - 1e-6 && v <= 1.0 + 1e-6)) {
                o.expect(false, "traced A_vocab outside [1/N_class, 1]");
                break;
            }

    // gates on the traced embeddings of the tdee run
    const ModelConfig c;
    const auto w = ModelWeights::create(c);
    const PipelineRun& t = runs.back();
    const auto g = tdee_detailed(t.trace.get("E_m"), t.trace.get("E_s"), w.tdee);
    for (const Tensor* gate : {&g.gate_m, &g.gate_s})
        for (float v : gate->values()) o.expect(v > 0.0f && v < 1.0f, "traced TDEE gate outside (0, 1)");

    // softmax rows of the traced in-vocabulary scores
    for (const auto& r : runs) {
        const Tensor& s = r.trace.get("S_I");
        for (std::size_t i = 0; i < s.dim(0); ++i) {
            double sum = 0;
            for (std::size_t j = 0; j < s.dim(1); ++j) sum += s[i * s.dim(1) + j];
            o.expect(std::fabs(sum - 1.0) <= 1e-6, "traced softmax row does not sum to 1");
        }
    }

    // and the same bounds as enforced inside verify
    const VerifyReport v = run_verification(VerifyOptions{});
    for (const auto& ch : v.checks)
        if (ch.name == "softmax" || ch.name == "vas" || ch.name == "tdee" || ch.name == "pipeline_bounds")
            o.expect(ch.passed, "verify check " + ch.name + " failed: " + ch.detail);
    o.note << (o.pass ? "" : "; ") << runs.size() << " traced runs plus verify assertions";
    return o;
}

// ---------------------------------------------------------------- 8

Outcome symmetry() {
    Outcome o;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(8000 + seed);
        const std::size_t n = 1 + rng.below(8), d = 1 + rng.below(16), fd = 2 * (1 + rng.below(8));
        const TdeeWeights w = random_tdee(d, fd, rng);
        const Tensor em = rng.uniform_tensor({n, d}, -2, 2), es = rng.uniform_tensor({n, d}, -2, 2);
        o.expect(bitwise_equal(tdee(es, em, w.swapped()), tdee(em, es, w)),
                 "config " + std::to_string(seed) + " not symmetric");
    }
    o.note << (o.pass ? "" : "; ") << "50 seeded configs bitwise";
    return o;
}

}  // namespace

int main() {
    int failed = 0;
    auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.note << "exception: " << e.what();
        }
        std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.note.str().c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    };

    std::vector<PipelineRun> runs;
    Scene scene;
    report(1, "oracle equivalence", oracle_equivalence);
    report(2, "equation transliteration", transliteration);
    report(3, "ensemble correctness", ensemble_correctness);
    report(4, "efficiency asymmetry", efficiency);
    report(5, "metrics", metrics);
    report(6, "pipeline integrity", [&] { return pipeline_integrity(runs, scene); });
    report(7, "bound invariants", [&] {
        if (runs.size() != 4) {
            Outcome o;
            o.expect(false, "pipeline runs unavailable");
            return o;
        }
        return bounds(runs, scene);
    });
    report(8, "tdee symmetry", symmetry);
    std::printf("%d of 8 criteria failed\n", failed);
    return failed ? 1 : 0;
}
