#include "eovseg/fusion.hpp"

#include "eovseg/error.hpp"
#include "eovseg/kernels.hpp"

namespace eovseg {

FusionMode parse_fusion(std::string_view name) {
    if (name == "none") return FusionMode::none;
    if (name == "eaf") return FusionMode::eaf;
    if (name == "sdi") return FusionMode::sdi;
    if (name == "tdee") return FusionMode::tdee;
    throw ConfigError("unknown fusion mode '" + std::string(name) + "' (expected none, eaf, sdi or tdee)");
}

std::string to_string(FusionMode mode) {
    switch (mode) {
        case FusionMode::none: return "none";
        case FusionMode::eaf: return "eaf";
        case FusionMode::sdi: return "sdi";
        case FusionMode::tdee: return "tdee";
    }
    return "none";
}

namespace {

void require_even(std::size_t d) {
    if (d == 0 || d % 2 != 0) throw ShapeError("tdee: fusion width d must be even and positive, got " + std::to_string(d));
}

}  // namespace

TdeeWeights TdeeWeights::init(std::size_t dim, std::size_t fusion_dim, Rng& rng) {
    require_even(fusion_dim);
    const std::size_t half = fusion_dim / 2;
    TdeeWeights w;
    w.proj_m = Linear::init(dim, fusion_dim, rng, false);
    w.proj_s = Linear::init(dim, fusion_dim, rng, false);
    w.router_m = Linear::init(half, half, rng);
    w.router_s = Linear::init(half, half, rng);
    w.ln_pf = w.ln_qf = w.ln_router_m = w.ln_router_s = LayerNormParams::identity(half);
    w.head = Linear::init(half, dim, rng);
    w.ln_head = LayerNormParams::identity(dim);
    return w;
}

TdeeWeights TdeeWeights::zeros(std::size_t dim, std::size_t fusion_dim) {
    require_even(fusion_dim);
    const std::size_t half = fusion_dim / 2;
    TdeeWeights w;
    w.proj_m = Linear::zeros(dim, fusion_dim, false);
    w.proj_s = Linear::zeros(dim, fusion_dim, false);
    w.router_m = Linear::zeros(half, half);
    w.router_s = Linear::zeros(half, half);
    w.ln_pf = w.ln_qf = w.ln_router_m = w.ln_router_s = LayerNormParams::identity(half);
    w.head = Linear::zeros(half, dim);
    w.ln_head = LayerNormParams::identity(dim);
    return w;
}

TdeeWeights TdeeWeights::swapped() const {
    TdeeWeights s = *this;
    std::swap(s.proj_m, s.proj_s);
    std::swap(s.router_m, s.router_s);
    std::swap(s.ln_pf, s.ln_qf);
    std::swap(s.ln_router_m, s.ln_router_s);
    return s;
}

SdiWeights SdiWeights::init(std::size_t dim, std::size_t kernel, std::size_t rank, Rng& rng) {
    SdiWeights w;
    w.kernel_gen = Linear::init(dim, kernel, rng);
    w.u_gen = Linear::init(dim, dim * rank, rng);
    w.v_gen = Linear::init(dim, rank * dim, rng);
    w.rank = rank;
    return w;
}

SdiWeights SdiWeights::zeros(std::size_t dim, std::size_t kernel, std::size_t rank) {
    SdiWeights w;
    w.kernel_gen = Linear::zeros(dim, kernel);
    w.u_gen = Linear::zeros(dim, dim * rank);
    w.v_gen = Linear::zeros(dim, rank * dim);
    w.rank = rank;
    return w;
}

EafWeights EafWeights::init(std::size_t dim, std::size_t vit_dim, Rng& rng) {
    return {Conv2d::init(ConvMode::pointwise_1x1, dim + vit_dim, dim, rng)};
}

EafWeights EafWeights::zeros(std::size_t dim, std::size_t vit_dim) {
    return {Conv2d::zeros(ConvMode::pointwise_1x1, dim + vit_dim, dim)};
}

namespace {

// Splits [N, d] into the fusion half (first d/2 columns) and router half.
std::pair<Tensor, Tensor> split_halves(const Tensor& x) {
    const std::size_t n = x.dim(0), d = x.dim(1), half = d / 2;
    Tensor fusion({n, half}), router({n, half});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < half; ++c) {
            fusion[r * half + c] = x[r * d + c];
            router[r * half + c] = x[r * d + half + c];
        }
    return {std::move(fusion), std::move(router)};
}

}  // namespace

TdeeOutput tdee_detailed(const Tensor& mask_emb, const Tensor& spatial_emb, const TdeeWeights& w) {
    require_rank(mask_emb, 2, "tdee mask embeddings");
    require_shape(spatial_emb, mask_emb.shape(), "tdee spatial embeddings");
    require_even(w.fusion_dim());

    auto [p_f, p_r] = split_halves(linear(mask_emb, w.proj_m));
    auto [q_f, q_r] = split_halves(linear(spatial_emb, w.proj_s));

    Tensor p_t(p_r.shape());
    for (std::size_t i = 0; i < p_t.size(); ++i) p_t[i] = p_r[i] * q_r[i];

    TdeeOutput out;
    out.gate_m = pointwise(Activation::sigmoid, layer_norm(linear(p_t, w.router_m), w.ln_router_m));
    out.gate_s = pointwise(Activation::sigmoid, layer_norm(linear(p_t, w.router_s), w.ln_router_s));

    const Tensor pf_n = layer_norm(p_f, w.ln_pf);
    const Tensor qf_n = layer_norm(q_f, w.ln_qf);
    out.combined = Tensor(pf_n.shape());
    for (std::size_t i = 0; i < pf_n.size(); ++i)
        out.combined[i] = out.gate_m[i] * pf_n[i] + out.gate_s[i] * qf_n[i];

    out.embeddings = pointwise(Activation::gelu, layer_norm(linear(out.combined, w.head), w.ln_head));
    return out;
}

Tensor tdee(const Tensor& mask_emb, const Tensor& spatial_emb, const TdeeWeights& w) {
    return tdee_detailed(mask_emb, spatial_emb, w).embeddings;
}

Tensor eaf(const Tensor& f_hat_agg, const Tensor& vit_up, const EafWeights& w) {
    const Tensor cat = concat_channels(f_hat_agg, vit_up);
    if (cat.dim(0) != w.fuse.in_channels())
        throw ShapeError("eaf: concatenated width " + std::to_string(cat.dim(0)) + " does not match fusion conv input " +
                         std::to_string(w.fuse.in_channels()));
    return conv2d(cat, w.fuse);
}

Tensor sdi(const Tensor& mask_emb, const Tensor& spatial_emb, const SdiWeights& w) {
    require_rank(mask_emb, 2, "sdi mask embeddings");
    require_shape(spatial_emb, mask_emb.shape(), "sdi spatial embeddings");
    const std::size_t n = mask_emb.dim(0), d = mask_emb.dim(1), r = w.rank;
    if (w.kernel_size() % 2 == 0)
        throw ShapeError("sdi: kernel length must be odd, got " + std::to_string(w.kernel_size()));
    const Tensor kernels = linear(mask_emb, w.kernel_gen);
    const Tensor u = linear(mask_emb, w.u_gen);  // row n viewed as [D, r]
    const Tensor v = linear(mask_emb, w.v_gen);  // row n viewed as [r, D]
    const Tensor y = depthwise_conv1d(spatial_emb, kernels);

    Tensor out({n, d});
    std::vector<float> t(r);
    for (std::size_t q = 0; q < n; ++q) {
        const float* yr = y.ptr() + q * d;
        const float* ur = u.ptr() + q * d * r;
        const float* vr = v.ptr() + q * r * d;
        std::fill(t.begin(), t.end(), 0.0f);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t k = 0; k < r; ++k) t[k] += yr[i] * ur[i * r + k];
        float* o = out.ptr() + q * d;
        for (std::size_t k = 0; k < r; ++k)
            for (std::size_t j = 0; j < d; ++j) o[j] += t[k] * vr[k * d + j];
    }
    return out;
}

}  // namespace eovseg
