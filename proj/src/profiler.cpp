#include "eovseg/profiler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "eovseg/error.hpp"
#include "eovseg/kernels.hpp"
#include "eovseg/parallel.hpp"

namespace eovseg {

const std::vector<std::string>& profiled_modules() {
    static const std::vector<std::string> names{"backbone", "pyramid", "aggregate", "vas",
                                                "decoder",  "spatial", "fusion",    "classifier"};
    return names;
}

namespace {

using u64 = std::uint64_t;

bool uses_spatial_embeddings(FusionMode f) { return f == FusionMode::sdi || f == FusionMode::tdee; }

}  // namespace

std::uint64_t interaction_macs(Interaction mode, std::size_t queries, std::size_t dim, std::size_t m,
                               std::size_t feat_h, std::size_t feat_w) {
    const u64 n = queries, d = dim, p = static_cast<u64>(feat_h) * feat_w;
    if (mode == Interaction::dda) return n * p * d + 2 * n * d * m;  // F_init, K W_m, depthwise conv
    return 2 * n * d * d + 2 * p * d * d + 2 * n * p * d;           // q/out, k/v projections, QK and AV
}

std::uint64_t interaction_params(Interaction mode, std::size_t dim, std::size_t m) {
    const u64 d = dim;
    return mode == Interaction::dda ? d * m : 4 * (d * d + d);
}

std::uint64_t interaction_params(const DecoderLayerWeights& layer, Interaction mode) {
    return mode == Interaction::dda ? layer.dda_proj.size() : param_count(layer.cross);
}

std::vector<OpCount> count_macs(const ModelConfig& c, std::size_t height, std::size_t width,
                                std::size_t num_classes) {
    c.validate();
    if (height == 0 || width == 0 || height % 32 || width % 32)
        throw ConfigError("count_macs: image extents must be positive multiples of 32");
    std::vector<OpCount> ops;
    auto add = [&](const char* module, std::string op, u64 macs) { ops.push_back({module, std::move(op), macs}); };

    const u64 D = c.embed_dim, N = c.queries, Nc = num_classes, m = c.dda_kernel;
    std::array<u64, 4> area{};
    for (std::size_t i = 0; i < 4; ++i) area[i] = static_cast<u64>(height >> (i + 2)) * (width >> (i + 2));
    const u64 P = area[0];
    const auto& wd = c.backbone_widths;

    for (std::size_t i = 0; i < 4; ++i) {
        const u64 cin = i == 0 ? 3 : wd[i - 1], k = SyntheticBackbone::kernel(i);
        add("backbone", "stage" + std::to_string(i), wd[i] * cin * k * k * area[i]);
    }
    add("backbone", "clip_head", wd[3] * D * area[3]);

    for (std::size_t i = 0; i < 4; ++i) {
        add("pyramid", "lateral" + std::to_string(i + 2), wd[i] * D * area[i]);
        add("pyramid", "smooth" + std::to_string(i + 2), D * D * 9 * area[i]);
    }
    for (std::size_t i = 0; i < 4; ++i) add("aggregate", "conv" + std::to_string(i + 2), D * D * area[i]);
    add("aggregate", "fuse", D * D * 9 * P);

    add("vas", "feature_proj.depthwise", D * 9 * P);
    add("vas", "feature_proj.pointwise", D * D * P);
    add("vas", "text_proj", Nc * D * D);
    add("vas", "similarity", P * Nc * D);

    add("decoder", "initial_masks", N * D * P);
    const u64 f = c.ffn_mult * D;
    for (std::size_t l = 0; l < c.decoder_layers; ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        if (c.interaction == Interaction::dda) {
            add("decoder", pre + "f_init", N * P * D);
            add("decoder", pre + "dda_kernel_proj", N * D * m);
            add("decoder", pre + "dda_conv", N * D * m);
        } else {
            add("decoder", pre + "ca_query", N * D * D);
            add("decoder", pre + "ca_key", P * D * D);
            add("decoder", pre + "ca_value", P * D * D);
            add("decoder", pre + "ca_scores", N * P * D);
            add("decoder", pre + "ca_mix", N * P * D);
            add("decoder", pre + "ca_output", N * D * D);
        }
        add("decoder", pre + "self_attn_proj", 4 * N * D * D);
        add("decoder", pre + "self_attn_scores", N * N * D);
        add("decoder", pre + "self_attn_mix", N * N * D);
        add("decoder", pre + "ffn", 2 * N * D * f);
        add("decoder", pre + "mask_mlp", 3 * N * D * D);
        add("decoder", pre + "masks", N * D * P);
    }
    add("decoder", "mask_pool", N * P * D);

    if (c.fusion != FusionMode::none) {
        const u64 dv = c.vit_dim, g = static_cast<u64>(height / 16) * (width / 16), t = g + 1;
        const u64 patch = VitBlockWeights::kPatch;
        add("spatial", "vit.patch", dv * 3 * patch * patch * g);
        add("spatial", "vit.attn_proj", 4 * t * dv * dv);
        add("spatial", "vit.attn_scores", t * t * dv);
        add("spatial", "vit.attn_mix", t * t * dv);
        add("spatial", "vit.mlp", 2 * t * dv * 4 * dv);
        if (uses_spatial_embeddings(c.fusion)) {
            add("spatial", "tconv1", dv * dv * 4 * g);
            add("spatial", "tconv2", dv * D * 4 * (4 * g));
            add("spatial", "mask_pool", N * P * D);
        }
    }

    const u64 d = c.fusion_dim, h = d / 2;
    switch (c.fusion) {
        case FusionMode::none: break;
        case FusionMode::eaf: add("fusion", "eaf.fuse", (D + c.vit_dim) * D * P); break;
        case FusionMode::tdee:
            add("fusion", "tdee.proj_m", N * D * d);
            add("fusion", "tdee.proj_s", N * D * d);
            add("fusion", "tdee.router_m", N * h * h);
            add("fusion", "tdee.router_s", N * h * h);
            add("fusion", "tdee.head", N * h * D);
            break;
        case FusionMode::sdi: {
            const u64 k = c.sdi_kernel, r = c.sdi_rank;
            add("fusion", "sdi.kernel_gen", N * D * k);
            add("fusion", "sdi.u_gen", N * D * D * r);
            add("fusion", "sdi.v_gen", N * D * r * D);
            add("fusion", "sdi.conv", N * D * k);
            add("fusion", "sdi.pointwise", 2 * N * D * r);
            break;
        }
    }

    add("classifier", "in_vocab", N * Nc * D);
    add("classifier", "clip_pool", N * P * D);
    add("classifier", "out_vocab", N * Nc * D);
    return ops;
}

std::map<std::string, std::uint64_t> macs_by_module(const std::vector<OpCount>& ops) {
    std::map<std::string, std::uint64_t> out;
    for (const auto& m : profiled_modules()) out[m] = 0;
    for (const auto& op : ops) out[op.module] += op.macs;
    return out;
}

std::map<std::string, std::uint64_t> count_params(const WeightStore& store) {
    std::map<std::string, std::uint64_t> out;
    for (const auto& [name, t] : store.tensors()) out[name.substr(0, name.find('.'))] += t.size();
    return out;
}

std::map<std::string, std::uint64_t> module_params(const ModelWeights& w, const ModelConfig& c) {
    std::map<std::string, std::uint64_t> out;
    for (const auto& m : profiled_modules()) out[m] = 0;
    out["backbone"] = param_count(w.backbone);
    out["pyramid"] = param_count(w.pyramid);
    out["aggregate"] = param_count(w.aggregate);
    out["vas"] = param_count(w.vas);

    u64 dec = w.decoder.kernels.size();
    for (const auto& l : w.decoder.mask_mlp) dec += param_count(l);
    for (std::size_t i = 0; i < c.decoder_layers; ++i) {
        const auto& l = w.decoder.layers.at(i);
        dec += param_count(l) - l.dda_proj.size() - param_count(l.cross) + interaction_params(l, c.interaction);
    }
    out["decoder"] = dec;

    if (c.fusion != FusionMode::none) out["spatial"] = param_count(w.vit);
    if (uses_spatial_embeddings(c.fusion)) out["spatial"] += param_count(w.upsampler);
    switch (c.fusion) {
        case FusionMode::none: break;
        case FusionMode::eaf: out["fusion"] = param_count(w.eaf); break;
        case FusionMode::sdi: out["fusion"] = param_count(w.sdi); break;
        case FusionMode::tdee: out["fusion"] = param_count(w.tdee); break;
    }
    return out;
}

TimeStats summarize(std::vector<double> s) {
    TimeStats t;
    if (s.empty()) return t;
    std::sort(s.begin(), s.end());
    t.mean_ns = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    auto rank = [&](double q) {
        const auto r = static_cast<std::size_t>(std::ceil(q * static_cast<double>(s.size())));
        return s[std::clamp<std::size_t>(r, 1, s.size()) - 1];
    };
    t.p50_ns = rank(0.50);
    t.p95_ns = rank(0.95);
    return t;
}

TimeStats measure(const std::function<void()>& fn, std::size_t reps, std::size_t warmup) {
    for (std::size_t i = 0; i < warmup; ++i) fn();
    std::vector<double> samples;
    samples.reserve(reps);
    for (std::size_t i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        samples.push_back(static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()));
    }
    return summarize(std::move(samples));
}

ProfileRow ProfileReport::total() const {
    ProfileRow t{"total", 0, 0, {}};
    for (const auto& r : rows) {
        t.params += r.params;
        t.macs += r.macs;
        t.time.mean_ns += r.time.mean_ns;
        t.time.p50_ns += r.time.p50_ns;
        t.time.p95_ns += r.time.p95_ns;
    }
    return t;
}

std::string to_csv(const ProfileReport& report, bool with_total) {
    std::ostringstream out;
    out << "# flops = 2 * macs (one multiply-accumulate = two floating-point operations)\n";
    out << "module,params,macs,flops,time_mean_ns,time_p50_ns,time_p95_ns,mode,config_hash\n";
    auto row = [&](const ProfileRow& r) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%.1f,%.0f,%.0f", r.time.mean_ns, r.time.p50_ns, r.time.p95_ns);
        out << r.module << ',' << r.params << ',' << r.macs << ',' << 2 * r.macs << ',' << buf << ',' << report.mode
            << ',' << report.config_hash << '\n';
    };
    for (const auto& r : report.rows) row(r);
    if (with_total) row(report.total());
    return out.str();
}

ProfileReport profile(const Tensor& input, const TextEmbeddings& text, const ModelConfig& c, const ModelWeights& w,
                      std::size_t reps) {
    if (reps < kMinReps) throw ConfigError("profile: at least " + std::to_string(kMinReps) + " repetitions required");
    ThreadScope single(0);
    const Tensor image = pad_image(input);
    Trace trace;
    forward(image, text, c, w, &trace);

    const auto features = extract_features(image, w.backbone);
    const auto pyramid = build_pyramid(features, w.pyramid);
    const Tensor clip = clip_final_features(features, w.backbone);
    const Tensor& f_agg = trace.get("F_agg");
    const Tensor& f_hat = trace.get("F_hat_agg");
    const Tensor decoder_input = c.fusion == FusionMode::eaf ? eaf(f_hat, trace.get("F_v_up"), w.eaf) : f_hat;
    const MaskSet masks{trace.get("M")};
    const Tensor& e_m = trace.get("E_m");
    const ClassScores s_i{trace.get("S_I"), ScoreKind::in_vocab}, s_o{trace.get("S_O"), ScoreKind::out_vocab};
    const auto seen = text.seen_mask();

    std::map<std::string, std::function<void()>> runs;
    runs["backbone"] = [&] { clip_final_features(extract_features(image, w.backbone), w.backbone); };
    runs["pyramid"] = [&] { build_pyramid(features, w.pyramid); };
    runs["aggregate"] = [&] { aggregate(pyramid, w.aggregate); };
    runs["vas"] = [&] { vas_forward(f_agg, text.embeddings, w.vas); };
    runs["decoder"] = [&] { decoder_forward(decoder_input, w.decoder, c.decoder_layers, c.interaction); };
    if (c.fusion == FusionMode::eaf) {
        runs["spatial"] = [&] { bilinear_upsample(vit_block_features(image, w.vit), 4); };
        runs["fusion"] = [&] { eaf(f_hat, trace.get("F_v_up"), w.eaf); };
    } else if (uses_spatial_embeddings(c.fusion)) {
        runs["spatial"] = [&] {
            spatial_embeddings(spatial_features(vit_block_features(image, w.vit), w.upsampler), masks);
        };
        const Tensor& e_s = trace.get("E_s");
        runs["fusion"] = [&, fusion = c.fusion] {
            if (fusion == FusionMode::tdee)
                tdee(e_m, e_s, w.tdee);
            else
                sdi(e_m, e_s, w.sdi);
        };
    }
    runs["classifier"] = [&] {
        in_vocab_scores(trace.get("E_I_hat"), text.embeddings, c.temperature);
        out_vocab_scores(clip, masks, text.embeddings, c.temperature);
        classify(masks, ensemble(s_i, s_o, c.ensemble, seen), c.score_floor);
    };

    const auto macs = macs_by_module(count_macs(c, image.dim(1), image.dim(2), text.size()));
    const auto params = module_params(w, c);
    ProfileReport report;
    report.mode = to_string(c.interaction) + "/" + to_string(c.fusion);
    report.config_hash = config_hash(c);
    for (const auto& m : profiled_modules()) {
        ProfileRow row{m, params.at(m), macs.at(m), {}};
        if (auto it = runs.find(m); it != runs.end()) row.time = measure(it->second, reps);
        report.rows.push_back(row);
    }
    return report;
}

ProfileReport benchmark(const ModelConfig& c, const ModelWeights& w, Interaction mode, std::size_t reps,
                        std::uint64_t seed, std::size_t feat_h, std::size_t feat_w) {
    if (reps < kMinReps) throw ConfigError("benchmark: at least " + std::to_string(kMinReps) + " repetitions required");
    c.validate();
    ThreadScope single(0);
    Rng rng(seed);
    const Tensor features = rng.uniform_tensor({c.embed_dim, feat_h, feat_w}, -1.0f, 1.0f);
    const Tensor& kernels = w.decoder.kernels;
    const MaskSet masks = predict_masks(kernels, features);
    const auto& layer = w.decoder.layers.at(0);

    const u64 N = c.queries, D = c.embed_dim, P = static_cast<u64>(feat_h) * feat_w;
    const u64 inter_macs = interaction_macs(mode, c.queries, c.embed_dim, c.dda_kernel, feat_h, feat_w);
    const u64 rest_macs = 4 * N * D * D + 2 * N * N * D + 2 * N * D * c.ffn_mult * D + 3 * N * D * D + N * D * P;
    u64 layer_params = param_count(layer) - layer.dda_proj.size() - param_count(layer.cross) +
                       interaction_params(layer, mode);
    for (const auto& l : w.decoder.mask_mlp) layer_params += param_count(l);

    ProfileReport report;
    report.mode = to_string(mode);
    report.config_hash = config_hash(c);
    ProfileRow inter{"interaction", interaction_params(layer, mode), inter_macs, {}};
    inter.time = measure(
        [&] {
            if (mode == Interaction::dda)
                dda(kernels, initial_attention(features, masks), layer.dda_proj);
            else
                cross_attention_baseline(kernels, features, layer.cross);
        },
        reps);
    ProfileRow full{"decoder_layer", layer_params, inter_macs + rest_macs, {}};
    full.time = measure([&] { decoder_layer(features, kernels, masks, layer, w.decoder.mask_mlp, mode); }, reps);
    report.rows = {inter, full};
    return report;
}

}  // namespace eovseg
