#include "eovseg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "eovseg/error.hpp"
#include "eovseg/kernels.hpp"
#include "eovseg/weight_store.hpp"

namespace eovseg {

void Trace::put(const std::string& name, const Tensor& t) {
    if (!tensors_.emplace(name, t).second) throw Error("trace: '" + name + "' recorded twice");
    order_.push_back(name);
}

const Tensor& Trace::get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw FormatError("trace: no tensor named '" + name + "'");
    return it->second;
}

void Trace::save(const std::filesystem::path& dir) const {
    WeightStore store;
    for (const auto& [name, t] : tensors_) store.put(name, t);
    store.save(dir);
}

Trace Trace::load(const std::filesystem::path& dir) {
    const auto store = WeightStore::load(dir);
    Trace t;
    for (const auto& [name, tensor] : store.tensors()) t.put(name, tensor);
    return t;
}

std::vector<std::string> trace_names(FusionMode mode) {
    std::vector<std::string> names{"F_agg", "F_hat_agg", "A_vocab"};
    if (mode == FusionMode::eaf) names.push_back("F_v_up");
    for (const char* n : {"F_init", "K_hat", "M", "E_m"}) names.push_back(n);
    if (mode == FusionMode::sdi || mode == FusionMode::tdee) {
        names.push_back("F_s");
        names.push_back("E_s");
    }
    for (const char* n : {"E_I_hat", "S_I", "S_O", "S"}) names.push_back(n);
    return names;
}

Tensor pad_image(const Tensor& image, std::size_t multiple) {
    require_rank(image, 3, "pad_image: image");
    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    const std::size_t ph = (h + multiple - 1) / multiple * multiple, pw = (w + multiple - 1) / multiple * multiple;
    if (ph == h && pw == w) return image;
    Tensor out({c, ph, pw});
    for (std::size_t k = 0; k < c; ++k)
        for (std::size_t y = 0; y < h; ++y)
            std::copy_n(image.ptr() + (k * h + y) * w, w, out.ptr() + (k * ph + y) * pw);
    return out;
}

Tensor resize_short_side(const Tensor& image, std::size_t short_side) {
    require_rank(image, 3, "resize_short_side: image");
    if (short_side == 0) throw ConfigError("resize_short_side: target must be positive");
    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    const double s = static_cast<double>(short_side) / static_cast<double>(std::min(h, w));
    const auto oh = static_cast<std::size_t>(std::lround(static_cast<double>(h) * s));
    const auto ow = static_cast<std::size_t>(std::lround(static_cast<double>(w) * s));
    Tensor out({c, oh, ow});
    auto src = [&](std::size_t o, std::size_t n, std::size_t on, std::size_t& i0, std::size_t& i1, float& t) {
        double x = (static_cast<double>(o) + 0.5) * static_cast<double>(n) / static_cast<double>(on) - 0.5;
        x = std::clamp(x, 0.0, static_cast<double>(n - 1));
        i0 = static_cast<std::size_t>(x);
        i1 = std::min(i0 + 1, n - 1);
        t = static_cast<float>(x - static_cast<double>(i0));
    };
    for (std::size_t y = 0; y < oh; ++y) {
        std::size_t y0, y1;
        float ty;
        src(y, h, oh, y0, y1, ty);
        for (std::size_t x = 0; x < ow; ++x) {
            std::size_t x0, x1;
            float tx;
            src(x, w, ow, x0, x1, tx);
            for (std::size_t k = 0; k < c; ++k) {
                const float* p = image.ptr() + k * h * w;
                const float top = p[y0 * w + x0] + tx * (p[y0 * w + x1] - p[y0 * w + x0]);
                const float bot = p[y1 * w + x0] + tx * (p[y1 * w + x1] - p[y1 * w + x0]);
                out[(k * oh + y) * ow + x] = top + ty * (bot - top);
            }
        }
    }
    return out;
}

namespace {

template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

struct Recorder {
    Trace* trace;
    ForwardResult* result;
    void operator()(const std::string& name, const Tensor& t) const {
        result->stage_shapes.emplace_back(name, t.shape());
        if (trace) trace->put(name, t);
    }
};

Tensor visual_features(const Tensor& image, const ModelWeights& w, Tensor* clip) {
    const auto c = extract_features(image, w.backbone);
    if (clip) *clip = clip_final_features(c, w.backbone);
    return aggregate(build_pyramid(c, w.pyramid), w.aggregate);
}

Tensor vit_upsampled(const Tensor& image, const ModelWeights& w) {
    return bilinear_upsample(vit_block_features(image, w.vit), 4);
}

}  // namespace

ForwardResult forward(const Tensor& input, const TextEmbeddings& text, const ModelConfig& config,
                      const ModelWeights& weights, Trace* trace) {
    stage("config", [&] {
        config.validate();
        return 0;
    });
    require_rank(input, 3, "forward: image");
    const Tensor image = pad_image(input);
    ForwardResult r;
    const Recorder rec{trace, &r};

    Tensor clip;
    const Tensor f_agg = stage("aggregator", [&] { return visual_features(image, weights, &clip); });
    rec("F_agg", f_agg);
    const VasOutput v = stage("vas", [&] { return vas_forward_detailed(f_agg, text.embeddings, weights.vas); });
    rec("F_hat_agg", v.features);
    rec("A_vocab", v.attention);

    Tensor decoder_input = v.features;
    if (config.fusion == FusionMode::eaf) {
        const Tensor up = stage("spatial", [&] { return vit_upsampled(image, weights); });
        rec("F_v_up", up);
        decoder_input = stage("fusion", [&] { return eaf(v.features, up, weights.eaf); });
    }

    const DecoderOutput dec = stage("decoder", [&] {
        return decoder_forward(decoder_input, weights.decoder, config.decoder_layers, config.interaction);
    });
    const auto& last = dec.layers.back();
    if (!last.f_init.empty()) rec("F_init", last.f_init);
    rec("K_hat", dec.refined);
    rec("M", dec.masks.logits);
    rec("E_m", dec.embeddings);

    Tensor fused = dec.embeddings;
    if (config.fusion == FusionMode::sdi || config.fusion == FusionMode::tdee) {
        const Tensor f_s = stage("spatial", [&] {
            return spatial_features(vit_block_features(image, weights.vit), weights.upsampler);
        });
        rec("F_s", f_s);
        const Tensor e_s = stage("spatial", [&] { return spatial_embeddings(f_s, dec.masks); });
        rec("E_s", e_s);
        fused = stage("fusion", [&] {
            return config.fusion == FusionMode::tdee ? tdee(dec.embeddings, e_s, weights.tdee)
                                                     : sdi(dec.embeddings, e_s, weights.sdi);
        });
    }
    rec("E_I_hat", fused);

    const auto s_i = stage("classifier", [&] { return in_vocab_scores(fused, text.embeddings, config.temperature); });
    rec("S_I", s_i.scores);
    const auto s_o = stage("classifier", [&] {
        return out_vocab_scores(clip, dec.masks, text.embeddings, config.temperature);
    });
    rec("S_O", s_o.scores);
    r.scores = stage("classifier", [&] { return ensemble(s_i, s_o, config.ensemble, text.seen_mask()); });
    rec("S", r.scores.scores);
    r.masks = dec.masks;
    r.detections = stage("classifier", [&] { return classify(dec.masks, r.scores, config.score_floor); });

    const auto full = stage("assembly", [&] {
        return assemble_panoptic(dec.masks, r.detections, text.classes, image.dim(1), image.dim(2));
    });
    const std::size_t h = input.dim(1), w = input.dim(2);
    r.panoptic.map = SegmentMap(h, w);
    std::set<std::int32_t> present;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const auto id = full.map.at(y, x);
            r.panoptic.map.at(y, x) = id;
            if (id) present.insert(id);
        }
    for (const auto& s : full.segments)
        if (present.count(s.id)) r.panoptic.segments.push_back(s);
    return r;
}

std::vector<ReplayResult> replay_trace(const Trace& t, const Tensor& input, const TextEmbeddings& text,
                                       const ModelConfig& config, const ModelWeights& weights) {
    const Tensor image = pad_image(input);
    std::vector<ReplayResult> out;
    auto check = [&](const std::string& stage_name, const std::string& name, const Tensor& got) {
        out.push_back({stage_name, name, bitwise_equal(got, t.get(name))});
    };

    Tensor clip;
    check("aggregator", "F_agg", visual_features(image, weights, &clip));

    const auto v = vas_forward_detailed(t.get("F_agg"), text.embeddings, weights.vas);
    check("vas", "F_hat_agg", v.features);
    check("vas", "A_vocab", v.attention);

    Tensor decoder_input = t.get("F_hat_agg");
    if (config.fusion == FusionMode::eaf) {
        check("spatial", "F_v_up", vit_upsampled(image, weights));
        decoder_input = eaf(t.get("F_hat_agg"), t.get("F_v_up"), weights.eaf);
    }
    const auto dec = decoder_forward(decoder_input, weights.decoder, config.decoder_layers, config.interaction);
    if (t.contains("F_init")) check("decoder", "F_init", dec.layers.back().f_init);
    check("decoder", "K_hat", dec.refined);
    check("decoder", "M", dec.masks.logits);
    const MaskSet masks{t.get("M")};
    check("mask_pool", "E_m", mask_pool(decoder_input, masks));

    if (config.fusion == FusionMode::sdi || config.fusion == FusionMode::tdee) {
        check("spatial", "F_s", spatial_features(vit_block_features(image, weights.vit), weights.upsampler));
        check("spatial", "E_s", spatial_embeddings(t.get("F_s"), masks));
        check("fusion", "E_I_hat",
              config.fusion == FusionMode::tdee ? tdee(t.get("E_m"), t.get("E_s"), weights.tdee)
                                                : sdi(t.get("E_m"), t.get("E_s"), weights.sdi));
    } else {
        check("fusion", "E_I_hat", t.get("E_m"));
    }

    const auto s_i = in_vocab_scores(t.get("E_I_hat"), text.embeddings, config.temperature);
    check("classifier", "S_I", s_i.scores);
    const auto s_o = out_vocab_scores(clip, masks, text.embeddings, config.temperature);
    check("classifier", "S_O", s_o.scores);
    const ClassScores dumped_i{t.get("S_I"), ScoreKind::in_vocab}, dumped_o{t.get("S_O"), ScoreKind::out_vocab};
    check("ensemble", "S", ensemble(dumped_i, dumped_o, config.ensemble, text.seen_mask()).scores);
    return out;
}

}  // namespace eovseg
