#pragma once

#include <string>

#include "eovseg/params.hpp"
#include "eovseg/tensor.hpp"

namespace eovseg {

enum class FusionMode { none, eaf, sdi, tdee };
FusionMode parse_fusion(std::string_view name);
std::string to_string(FusionMode mode);

// Two-way dynamic embedding experts. `fusion_dim` is d; the router and
// fusion halves are d/2 wide and the gates are elementwise over them.
struct TdeeWeights {
    Linear proj_m;  // W_m [D, d], no bias
    Linear proj_s;  // W_s [D, d], no bias
    Linear router_m;  // d/2 -> d/2
    Linear router_s;
    LayerNormParams ln_pf, ln_qf;
    LayerNormParams ln_router_m, ln_router_s;
    Linear head;  // d/2 -> D
    LayerNormParams ln_head;

    std::size_t fusion_dim() const { return proj_m.out_features(); }

    static TdeeWeights init(std::size_t dim, std::size_t fusion_dim, Rng& rng);
    static TdeeWeights zeros(std::size_t dim, std::size_t fusion_dim);

    // Exchanges every mask-side parameter with its spatial-side counterpart.
    TdeeWeights swapped() const;
};

template <Like<TdeeWeights> W, class F>
void visit_params(W& w, const std::string& prefix, F&& f) {
    visit_params(w.proj_m, prefix + ".proj_m", f);
    visit_params(w.proj_s, prefix + ".proj_s", f);
    visit_params(w.router_m, prefix + ".router_m", f);
    visit_params(w.router_s, prefix + ".router_s", f);
    visit_params(w.ln_pf, prefix + ".ln_pf", f);
    visit_params(w.ln_qf, prefix + ".ln_qf", f);
    visit_params(w.ln_router_m, prefix + ".ln_router_m", f);
    visit_params(w.ln_router_s, prefix + ".ln_router_s", f);
    visit_params(w.head, prefix + ".head", f);
    visit_params(w.ln_head, prefix + ".ln_head", f);
}

// Separable dynamic interaction: E_m generates a per-query depthwise kernel
// (length k) and a rank-r pointwise matrix U V (U [D, r], V [r, D]).
struct SdiWeights {
    Linear kernel_gen;  // D -> k
    Linear u_gen;       // D -> D r
    Linear v_gen;       // D -> r D
    std::size_t rank = 4;

    std::size_t kernel_size() const { return kernel_gen.out_features(); }

    static SdiWeights init(std::size_t dim, std::size_t kernel, std::size_t rank, Rng& rng);
    static SdiWeights zeros(std::size_t dim, std::size_t kernel, std::size_t rank);
};

template <Like<SdiWeights> W, class F>
void visit_params(W& w, const std::string& prefix, F&& f) {
    visit_params(w.kernel_gen, prefix + ".kernel_gen", f);
    visit_params(w.u_gen, prefix + ".u_gen", f);
    visit_params(w.v_gen, prefix + ".v_gen", f);
}

// Early aggregation fusion: 1x1 conv over [F_hat_agg ; F_v upsampled].
struct EafWeights {
    Conv2d fuse;  // (D + D_v) -> D

    static EafWeights init(std::size_t dim, std::size_t vit_dim, Rng& rng);
    static EafWeights zeros(std::size_t dim, std::size_t vit_dim);
};

template <Like<EafWeights> W, class F>
void visit_params(W& w, const std::string& prefix, F&& f) {
    visit_params(w.fuse, prefix + ".fuse", f);
}

struct TdeeOutput {
    Tensor gate_m;    // alpha_m [N, d/2]
    Tensor gate_s;    // alpha_s [N, d/2]
    Tensor combined;  // alpha_m * LN(P_f) + alpha_s * LN(Q_f)  [N, d/2]
    Tensor embeddings;  // GELU(LN(head(combined)))  [N, D]
};

TdeeOutput tdee_detailed(const Tensor& mask_emb, const Tensor& spatial_emb, const TdeeWeights& w);
Tensor tdee(const Tensor& mask_emb, const Tensor& spatial_emb, const TdeeWeights& w);

// f_hat_agg [D, H, W], vit_up [D_v, H, W] -> [D, H, W]
Tensor eaf(const Tensor& f_hat_agg, const Tensor& vit_up, const EafWeights& w);

// [N, D] x [N, D] -> [N, D]
Tensor sdi(const Tensor& mask_emb, const Tensor& spatial_emb, const SdiWeights& w);

}  // namespace eovseg
