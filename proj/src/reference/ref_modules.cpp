#include <cmath>

#include "eovseg/error.hpp"
#include "eovseg/reference.hpp"

namespace eovseg::ref {

namespace {

Tensor add(const Tensor& a, const Tensor& b) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<float>(static_cast<double>(a[i]) + b[i]);
    return out;
}

// [D, H, W] -> [H*W, D]
Tensor tokens(const Tensor& f) {
    const std::size_t d = f.dim(0), hw = f.dim(1) * f.dim(2);
    Tensor out({hw, d});
    for (std::size_t c = 0; c < d; ++c)
        for (std::size_t p = 0; p < hw; ++p) out[p * d + c] = f[c * hw + p];
    return out;
}

}  // namespace

// ---------------------------------------------------------------- aggregator

BackboneFeatures extract_features(const Tensor& image, const SyntheticBackbone& b) {
    BackboneFeatures out;
    Tensor x = image;
    for (std::size_t i = 0; i < 4; ++i) {
        x = ref::gelu(ref::patch_conv2d(x, b.stage_weight[i], b.stage_bias[i], SyntheticBackbone::kernel(i)));
        out.levels[i] = x;
    }
    return out;
}

Tensor clip_final_features(const BackboneFeatures& f, const SyntheticBackbone& b) {
    return ref::bilinear_upsample(ref::conv2d(f.levels[3], b.clip_head), 8);
}

FeaturePyramid build_pyramid(const BackboneFeatures& c, const PyramidWeights& w) {
    std::array<Tensor, 4> lat;
    for (std::size_t i = 0; i < 4; ++i) lat[i] = ref::conv2d(c.levels[i], w.lateral[i]);
    for (std::size_t i = 3; i-- > 0;) lat[i] = add(lat[i], ref::bilinear_upsample(lat[i + 1], 2));
    FeaturePyramid p;
    for (std::size_t i = 0; i < 4; ++i) p.levels[i] = ref::conv2d(lat[i], w.smooth[i]);
    return p;
}

Tensor aggregate(const FeaturePyramid& p, const AggregateWeights& w) {
    Tensor sum = ref::conv2d(p.levels[0], w.level_conv[0]);
    for (std::size_t i = 1; i < 4; ++i) sum = add(sum, ref::bilinear_upsample(ref::conv2d(p.levels[i], w.level_conv[i]), std::size_t{1} << i));
    return ref::conv2d(sum, w.fuse);
}

// ---------------------------------------------------------------- vas

namespace {

Tensor attention_from_projected(const Tensor& proj, const Tensor& text, const VasWeights& w) {
    const Tensor tp = ref::linear(text, w.text_proj);
    const std::size_t d = proj.dim(0), h = proj.dim(1), wd = proj.dim(2), heads = w.heads, c = d / heads,
                      n = text.dim(0);
    Tensor out({heads, h, wd});
    std::vector<double> logits(n);
    for (std::size_t m = 0; m < heads; ++m)
        for (std::size_t p = 0; p < h * wd; ++p) {
            for (std::size_t k = 0; k < n; ++k) {
                double s = 0.0;
                for (std::size_t ch = 0; ch < c; ++ch)
                    s += static_cast<double>(proj[(m * c + ch) * h * wd + p]) * tp[k * d + m * c + ch];
                logits[k] = s;
            }
            count_macs(n * c);
            double mx = logits[0];
            for (double v : logits) mx = std::max(mx, v);
            double sum = 0.0, best = 0.0;
            for (double v : logits) sum += std::exp(v - mx);
            for (double v : logits) best = std::max(best, std::exp(v - mx) / sum);
            out[m * h * wd + p] = static_cast<float>(best);
        }
    return out;
}

}  // namespace

Tensor vas_attention(const Tensor& f_agg, const Tensor& text, const VasWeights& w) {
    return attention_from_projected(ref::conv2d(f_agg, w.feature_proj), text, w);
}

Tensor vas_forward(const Tensor& f_agg, const Tensor& text, const VasWeights& w) {
    const Tensor proj = ref::conv2d(f_agg, w.feature_proj);
    const Tensor a = attention_from_projected(proj, text, w);
    const std::size_t d = proj.dim(0), hw = proj.dim(1) * proj.dim(2), c = d / w.heads;
    Tensor out(proj.shape());
    for (std::size_t ch = 0; ch < d; ++ch)
        for (std::size_t p = 0; p < hw; ++p)
            out[ch * hw + p] = static_cast<float>(static_cast<double>(proj[ch * hw + p]) *
                                                  (static_cast<double>(a[(ch / c) * hw + p]) * w.scale + w.offset));
    return out;
}

Tensor vas_pseudocode(const Tensor& agg_feat_in, const Tensor& text_embed, const VasWeights& w) {
    const std::size_t ndim = agg_feat_in.dim(0), h = agg_feat_in.dim(1), wd = agg_feat_in.dim(2);
    const std::size_t m = w.heads, c = ndim / m, n = text_embed.dim(0);

    const Tensor agg_feat_proj = ref::conv2d(agg_feat_in, w.feature_proj);
    const Tensor text_embed_proj = ref::linear(text_embed, w.text_proj);

    // Split into heads.
    const Tensor mh_agg_feat = agg_feat_proj.reshaped({1, m, c, h, wd});
    const Tensor mh_text_embed = text_embed_proj.reshaped({1, n, m, c});

    // Attention weights over the vocabulary.
    Tensor attn_weights = ref::contract(mh_agg_feat, mh_text_embed, "bmchw,bnmc->bmhwn");
    attn_weights = ref::softmax(attn_weights, 4);
    attn_weights = ref::reduce_max(attn_weights, 4);  // [1, m, h, w]
    for (auto& v : attn_weights.data()) v = static_cast<float>(static_cast<double>(v) * w.scale + w.offset);

    // The weights scale the projected features (the feature tensor that has
    // passed through the depthwise-separable projection).
    const Tensor agg_feat = agg_feat_proj.reshaped({1, m, c, h, wd});
    Tensor vs_agg_feat({1, m, c, h, wd});
    for (std::size_t head = 0; head < m; ++head)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t p = 0; p < h * wd; ++p) {
                const std::size_t i = (head * c + ch) * h * wd + p;
                vs_agg_feat[i] = static_cast<float>(static_cast<double>(agg_feat[i]) * attn_weights[head * h * wd + p]);
            }
    return vs_agg_feat.reshaped({ndim, h, wd});
}

// ---------------------------------------------------------------- decoder

Tensor multi_head_attention(const Tensor& queries, const Tensor& context, const AttentionWeights& w) {
    const Tensor q = ref::linear(queries, w.query), k = ref::linear(context, w.key), v = ref::linear(context, w.value);
    const std::size_t nq = q.dim(0), nk = k.dim(0), d = q.dim(1), heads = w.heads, dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor mixed({nq, d});
    std::vector<double> s(nk);
    for (std::size_t hd = 0; hd < heads; ++hd)
        for (std::size_t i = 0; i < nq; ++i) {
            double mx = -1e300;
            for (std::size_t j = 0; j < nk; ++j) {
                double acc = 0.0;
                for (std::size_t c = 0; c < dh; ++c)
                    acc += static_cast<double>(q[i * d + hd * dh + c]) * k[j * d + hd * dh + c];
                s[j] = acc * scale;
                mx = std::max(mx, s[j]);
            }
            count_macs(nk * dh);
            double sum = 0.0;
            for (std::size_t j = 0; j < nk; ++j) sum += std::exp(s[j] - mx);
            for (std::size_t c = 0; c < dh; ++c) {
                double acc = 0.0;
                for (std::size_t j = 0; j < nk; ++j) acc += std::exp(s[j] - mx) / sum * v[j * d + hd * dh + c];
                mixed[i * d + hd * dh + c] = static_cast<float>(acc);
            }
            count_macs(nk * dh);
        }
    return ref::linear(mixed, w.output);
}

Tensor initial_attention(const Tensor& features, const Tensor& mask_logits) {
    const std::size_t n = mask_logits.dim(0), d = features.dim(0), hw = features.dim(1) * features.dim(2);
    const Tensor q = ref::sigmoid(mask_logits);
    Tensor out({n, d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) {
            double s = 0.0;
            for (std::size_t p = 0; p < hw; ++p) s += static_cast<double>(q[i * hw + p]) * features[c * hw + p];
            out[i * d + c] = static_cast<float>(s);
        }
    count_macs(n * d * hw);
    return out;
}

Tensor dda(const Tensor& kernels, const Tensor& f_init, const Tensor& proj) {
    return ref::depthwise_conv1d(f_init, ref::matmul(kernels, proj));
}

Tensor refine_kernels(const Tensor& kernels, const DecoderLayerWeights& w) {
    const Tensor normed = ref::layer_norm(kernels, w.ln_attn);
    const Tensor x = add(kernels, ref::multi_head_attention(normed, normed, w.self_attn));
    return add(x, ref::linear(ref::relu(ref::linear(ref::layer_norm(x, w.ln_ffn), w.ffn_in)), w.ffn_out));
}

Tensor cross_attention_baseline(const Tensor& kernels, const Tensor& features, const AttentionWeights& w) {
    return add(kernels, ref::multi_head_attention(kernels, tokens(features), w));
}

Tensor mask_kernels(const Tensor& kernels, const std::array<Linear, 3>& mlp) {
    return ref::linear(ref::relu(ref::linear(ref::relu(ref::linear(kernels, mlp[0])), mlp[1])), mlp[2]);
}

Tensor predict_masks(const Tensor& kernels, const Tensor& features) {
    const std::size_t n = kernels.dim(0), d = features.dim(0), h = features.dim(1), w = features.dim(2);
    Tensor out({n, h, w});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < h * w; ++p) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) s += static_cast<double>(kernels[i * d + c]) * features[c * h * w + p];
            out[i * h * w + p] = static_cast<float>(s);
        }
    count_macs(n * d * h * w);
    return out;
}

Tensor mask_pool(const Tensor& features, const Tensor& mask_logits) {
    const std::size_t n = mask_logits.dim(0), d = features.dim(0), hw = features.dim(1) * features.dim(2);
    const Tensor q = ref::sigmoid(mask_logits);
    Tensor out({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        double area = 0.0;
        for (std::size_t p = 0; p < hw; ++p) area += q[i * hw + p];
        for (std::size_t c = 0; c < d; ++c) {
            double s = 0.0;
            for (std::size_t p = 0; p < hw; ++p) s += static_cast<double>(q[i * hw + p]) * features[c * hw + p];
            out[i * d + c] = static_cast<float>(s / (area + 1e-8));
        }
    }
    count_macs(n * d * hw);
    return out;
}

DecoderOutput decoder_forward(const Tensor& features, const DecoderWeights& w, std::size_t layers, Interaction mode) {
    DecoderOutput out;
    Tensor masks = ref::predict_masks(w.kernels, features);
    Tensor kernels = w.kernels;
    for (std::size_t l = 0; l < layers; ++l) {
        const auto& lw = w.layers.at(l);
        DecoderLayerTrace t;
        Tensor inter;
        if (mode == Interaction::dda) {
            t.f_init = ref::initial_attention(features, masks);
            inter = ref::dda(kernels, t.f_init, lw.dda_proj);
        } else {
            inter = ref::cross_attention_baseline(kernels, features, lw.cross);
        }
        t.refined = ref::refine_kernels(inter, lw);
        t.masks = MaskSet{ref::predict_masks(ref::mask_kernels(t.refined, w.mask_mlp), features)};
        kernels = t.refined;
        masks = t.masks.logits;
        out.layers.push_back(std::move(t));
    }
    out.masks = MaskSet{masks};
    out.refined = kernels;
    out.embeddings = ref::mask_pool(features, masks);
    return out;
}

// ---------------------------------------------------------------- spatial

Tensor vit_block_features(const Tensor& image, const VitBlockWeights& w) {
    constexpr std::size_t P = VitBlockWeights::kPatch;
    const std::size_t gh = image.dim(1) / P, gw = image.dim(2) / P, dv = w.width(), t = gh * gw;
    const Tensor patches = ref::patch_conv2d(image, w.patch_weight, w.patch_bias, P);  // [dv, gh, gw]
    Tensor x({t + 1, dv});
    for (std::size_t c = 0; c < dv; ++c)
        x[c] = static_cast<float>(static_cast<double>(w.class_token[c]) + w.positions[c]);
    for (std::size_t r = 0; r < gh; ++r)
        for (std::size_t q = 0; q < gw; ++q)
            for (std::size_t c = 0; c < dv; ++c)
                x[(1 + r * gw + q) * dv + c] = static_cast<float>(
                    static_cast<double>(patches[(c * gh + r) * gw + q]) + w.positions[(1 + r * w.max_grid + q) * dv + c]);
    const Tensor normed = ref::layer_norm(x, w.ln_attn);
    x = add(x, ref::multi_head_attention(normed, normed, w.attn));
    x = add(x, ref::linear(ref::gelu(ref::linear(ref::layer_norm(x, w.ln_mlp), w.mlp_in)), w.mlp_out));
    Tensor out({dv, gh, gw});
    for (std::size_t tok = 0; tok < t; ++tok)
        for (std::size_t c = 0; c < dv; ++c) out[c * t + tok] = x[(tok + 1) * dv + c];
    return out;
}

Tensor spatial_features(const Tensor& v, const UpsamplerWeights& w) {
    return ref::transposed_conv2d(ref::transposed_conv2d(v, w.weight1, w.bias1), w.weight2, w.bias2);
}

// ---------------------------------------------------------------- fusion

TdeeOutput tdee(const Tensor& e_m, const Tensor& e_s, const TdeeWeights& w) {
    const Tensor p = ref::linear(e_m, w.proj_m), q = ref::linear(e_s, w.proj_s);
    const std::size_t n = p.dim(0), d = p.dim(1), half = d / 2;
    Tensor pf({n, half}), pr({n, half}), qf({n, half}), qr({n, half});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < half; ++c) {
            pf[r * half + c] = p[r * d + c];
            pr[r * half + c] = p[r * d + half + c];
            qf[r * half + c] = q[r * d + c];
            qr[r * half + c] = q[r * d + half + c];
        }
    Tensor pt({n, half});
    for (std::size_t i = 0; i < pt.size(); ++i) pt[i] = static_cast<float>(static_cast<double>(pr[i]) * qr[i]);
    TdeeOutput out;
    out.gate_m = ref::sigmoid(ref::layer_norm(ref::linear(pt, w.router_m), w.ln_router_m));
    out.gate_s = ref::sigmoid(ref::layer_norm(ref::linear(pt, w.router_s), w.ln_router_s));
    const Tensor pn = ref::layer_norm(pf, w.ln_pf), qn = ref::layer_norm(qf, w.ln_qf);
    out.combined = Tensor({n, half});
    for (std::size_t i = 0; i < pn.size(); ++i)
        out.combined[i] = static_cast<float>(static_cast<double>(out.gate_m[i]) * pn[i] +
                                             static_cast<double>(out.gate_s[i]) * qn[i]);
    out.embeddings = ref::gelu(ref::layer_norm(ref::linear(out.combined, w.head), w.ln_head));
    return out;
}

namespace {

// Row-level helpers for the equation transliteration: everything stays in
// double until the final head.
using Row = std::vector<double>;

Row row_times(const Row& x, const Linear& l) {
    const std::size_t in = l.in_features(), out = l.out_features();
    Row y(out);
    for (std::size_t o = 0; o < out; ++o) {
        double s = l.bias.empty() ? 0.0 : l.bias[o];
        for (std::size_t i = 0; i < in; ++i) s += x[i] * l.weight[i * out + o];
        y[o] = s;
    }
    count_macs(in * out);
    return y;
}

Row row_ln(const Row& x, const LayerNormParams& p) {
    double mean = 0.0, var = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    Row y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) / std::sqrt(var + 1e-5) * p.gamma[i] + p.beta[i];
    return y;
}

double sigma(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

Tensor tdee_equations(const Tensor& e_m, const Tensor& e_s, const TdeeWeights& w) {
    const std::size_t n = e_m.dim(0), D = e_m.dim(1), d = w.fusion_dim();
    Tensor out({n, D});
    for (std::size_t r = 0; r < n; ++r) {
        const Row E_m(e_m.ptr() + r * D, e_m.ptr() + (r + 1) * D);
        const Row E_s(e_s.ptr() + r * D, e_s.ptr() + (r + 1) * D);

        // (P_f, P_r) = s(E_m W_m);  (Q_f, Q_r) = s(E_s W_s)
        const Row P = row_times(E_m, w.proj_m), Q = row_times(E_s, w.proj_s);
        const Row P_f(P.begin(), P.begin() + static_cast<long>(d / 2)), P_r(P.begin() + static_cast<long>(d / 2), P.end());
        const Row Q_f(Q.begin(), Q.begin() + static_cast<long>(d / 2)), Q_r(Q.begin() + static_cast<long>(d / 2), Q.end());

        // P_t = P_r . Q_r
        Row P_t(d / 2);
        for (std::size_t i = 0; i < d / 2; ++i) P_t[i] = P_r[i] * Q_r[i];

        // alpha_m = sigma(LN(Linear_m(P_t)));  alpha_s = sigma(LN(Linear_s(P_t)))
        Row alpha_m = row_ln(row_times(P_t, w.router_m), w.ln_router_m);
        Row alpha_s = row_ln(row_times(P_t, w.router_s), w.ln_router_s);
        for (auto& v : alpha_m) v = sigma(v);
        for (auto& v : alpha_s) v = sigma(v);

        // E_I = alpha_m . LN(P_f) + alpha_s . LN(Q_f)
        const Row lp = row_ln(P_f, w.ln_pf), lq = row_ln(Q_f, w.ln_qf);
        Row E_I(d / 2);
        for (std::size_t i = 0; i < d / 2; ++i) E_I[i] = alpha_m[i] * lp[i] + alpha_s[i] * lq[i];

        // linear, LN, GELU
        const Row z = row_ln(row_times(E_I, w.head), w.ln_head);
        const double k = std::sqrt(2.0 / 3.14159265358979323846);
        for (std::size_t j = 0; j < D; ++j)
            out[r * D + j] = static_cast<float>(0.5 * z[j] * (1.0 + std::tanh(k * (z[j] + 0.044715 * z[j] * z[j] * z[j]))));
    }
    return out;
}

Tensor eaf(const Tensor& f_hat, const Tensor& vit_up, const EafWeights& w) {
    const std::size_t d = f_hat.dim(0), dv = vit_up.dim(0), h = f_hat.dim(1), wd = f_hat.dim(2);
    Tensor cat({d + dv, h, wd});
    std::copy(f_hat.data().begin(), f_hat.data().end(), cat.data().begin());
    std::copy(vit_up.data().begin(), vit_up.data().end(), cat.data().begin() + static_cast<long>(f_hat.size()));
    return ref::conv2d(cat, w.fuse);
}

Tensor sdi(const Tensor& e_m, const Tensor& e_s, const SdiWeights& w) {
    const Tensor k = ref::linear(e_m, w.kernel_gen), u = ref::linear(e_m, w.u_gen), v = ref::linear(e_m, w.v_gen);
    const Tensor y = ref::depthwise_conv1d(e_s, k);
    const std::size_t n = e_m.dim(0), d = e_m.dim(1), r = w.rank;
    Tensor out({n, d});
    for (std::size_t q = 0; q < n; ++q) {
        std::vector<double> t(r, 0.0);
        for (std::size_t kk = 0; kk < r; ++kk)
            for (std::size_t i = 0; i < d; ++i) t[kk] += static_cast<double>(y[q * d + i]) * u[q * d * r + i * r + kk];
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t kk = 0; kk < r; ++kk) s += t[kk] * v[q * r * d + kk * d + j];
            out[q * d + j] = static_cast<float>(s);
        }
    }
    count_macs(2 * n * d * r);
    return out;
}

// ---------------------------------------------------------------- classifier

Tensor in_vocab_scores(const Tensor& embeddings, const Tensor& text, double tau) {
    const Tensor e = ref::l2_normalize(embeddings, 1), t = ref::l2_normalize(text, 1);
    const std::size_t n = e.dim(0), nc = t.dim(0), d = e.dim(1);
    Tensor logits({n, nc});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < nc; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += static_cast<double>(e[i * d + j]) * t[c * d + j];
            logits[i * nc + c] = static_cast<float>(s / tau);
        }
    count_macs(n * nc * d);
    return ref::softmax(logits, 1);
}

Tensor ensemble(const Tensor& s_i, const Tensor& s_o, const EnsembleParams& p, const std::vector<bool>& seen) {
    const std::size_t nc = s_i.dim(1);
    Tensor out(s_i.shape());
    for (std::size_t i = 0; i < s_i.size(); ++i) {
        const long double w = seen[i % nc] ? p.alpha : p.beta;
        const long double a = s_i[i], b = s_o[i];
        const long double v = p.method == EnsembleMethod::geometric ? std::exp((1 - w) * std::log(a) + w * std::log(b))
                                                                    : (1 - w) * a + w * b;
        out[i] = static_cast<float>(v);
    }
    return out;
}

// ---------------------------------------------------------------- pipeline

ForwardCounts forward(const Tensor& image, const TextEmbeddings& text, const ModelConfig& c, const ModelWeights& w) {
    ForwardCounts r;
    for (const char* m : {"backbone", "pyramid", "aggregate", "vas", "decoder", "spatial", "fusion", "classifier"})
        r.macs[m] = 0;
    auto timed = [&](const char* module, auto&& fn) {
        CountScope s;
        auto v = fn();
        r.macs[module] += s.macs();
        return v;
    };

    const auto feats = timed("backbone", [&] { return ref::extract_features(image, w.backbone); });
    const Tensor clip = timed("backbone", [&] { return ref::clip_final_features(feats, w.backbone); });
    const auto pyr = timed("pyramid", [&] { return ref::build_pyramid(feats, w.pyramid); });
    const Tensor f_agg = timed("aggregate", [&] { return ref::aggregate(pyr, w.aggregate); });
    r.tensors["F_agg"] = f_agg;
    const Tensor f_hat = timed("vas", [&] { return ref::vas_forward(f_agg, text.embeddings, w.vas); });
    r.tensors["F_hat_agg"] = f_hat;

    Tensor dec_in = f_hat;
    if (c.fusion == FusionMode::eaf) {
        const Tensor up = timed("spatial", [&] { return ref::bilinear_upsample(ref::vit_block_features(image, w.vit), 4); });
        dec_in = timed("fusion", [&] { return ref::eaf(f_hat, up, w.eaf); });
    }
    const auto dec = timed("decoder", [&] { return ref::decoder_forward(dec_in, w.decoder, c.decoder_layers, c.interaction); });
    r.tensors["M"] = dec.masks.logits;
    r.tensors["E_m"] = dec.embeddings;

    Tensor fused = dec.embeddings;
    if (c.fusion == FusionMode::sdi || c.fusion == FusionMode::tdee) {
        const Tensor f_s = timed("spatial", [&] { return ref::spatial_features(ref::vit_block_features(image, w.vit), w.upsampler); });
        const Tensor e_s = timed("spatial", [&] { return ref::mask_pool(f_s, dec.masks.logits); });
        r.tensors["E_s"] = e_s;
        fused = timed("fusion", [&] {
            return c.fusion == FusionMode::tdee ? ref::tdee(dec.embeddings, e_s, w.tdee).embeddings
                                                : ref::sdi(dec.embeddings, e_s, w.sdi);
        });
    }
    r.tensors["E_I_hat"] = fused;
    const Tensor s_i = timed("classifier", [&] { return ref::in_vocab_scores(fused, text.embeddings, c.temperature); });
    const Tensor s_o = timed("classifier", [&] {
        return ref::in_vocab_scores(ref::mask_pool(clip, dec.masks.logits), text.embeddings, c.temperature);
    });
    r.tensors["S_I"] = s_i;
    r.tensors["S_O"] = s_o;
    r.tensors["S"] = ref::ensemble(s_i, s_o, c.ensemble, text.seen_mask());
    return r;
}

}  // namespace eovseg::ref
