#pragma once

#include <concepts>
#include <string>
#include <type_traits>

#include "eovseg/rng.hpp"
#include "eovseg/tensor.hpp"

namespace eovseg {

// `visit_params(w, prefix, f)` overloads walk every tensor of a weight struct
// as f(name, tensor&). The struct may be const or mutable; callbacks should
// take `auto&`. Empty (optional) tensors are skipped.
template <class T, class U>
concept Like = std::same_as<std::remove_const_t<T>, U>;

struct Linear {
    Tensor weight;  // [in, out]; applied as x * weight
    Tensor bias;    // [out] or empty

    std::size_t in_features() const { return weight.dim(0); }
    std::size_t out_features() const { return weight.dim(1); }

    static Linear init(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);
    static Linear zeros(std::size_t in, std::size_t out, bool with_bias = true);
};

template <Like<Linear> L, class F>
void visit_params(L& w, const std::string& prefix, F&& f) {
    f(prefix + ".weight", w.weight);
    if (!w.bias.empty()) f(prefix + ".bias", w.bias);
}

struct LayerNormParams {
    Tensor gamma;
    Tensor beta;

    static LayerNormParams identity(std::size_t width);
};

template <Like<LayerNormParams> L, class F>
void visit_params(L& w, const std::string& prefix, F&& f) {
    f(prefix + ".gamma", w.gamma);
    f(prefix + ".beta", w.beta);
}

enum class ConvMode { pointwise_1x1, k3_pad1, depthwise_separable };

// 2-D convolution parameters, stride 1, spatial extents preserved.
//   pointwise_1x1:        weight [Cout, Cin], bias [Cout]
//   k3_pad1:              weight [Cout, Cin, 3, 3], bias [Cout]
//   depthwise_separable:  weight [C, 3, 3], bias [C] (per-channel 3x3),
//                         then pw_weight [Cout, C], pw_bias [Cout]
struct Conv2d {
    ConvMode mode = ConvMode::pointwise_1x1;
    Tensor weight;
    Tensor bias;
    Tensor pw_weight;
    Tensor pw_bias;

    std::size_t in_channels() const;
    std::size_t out_channels() const;

    static Conv2d init(ConvMode mode, std::size_t in, std::size_t out, Rng& rng);
    static Conv2d zeros(ConvMode mode, std::size_t in, std::size_t out);
};

template <Like<Conv2d> C, class F>
void visit_params(C& w, const std::string& prefix, F&& f) {
    f(prefix + ".weight", w.weight);
    if (!w.bias.empty()) f(prefix + ".bias", w.bias);
    if (!w.pw_weight.empty()) f(prefix + ".pw_weight", w.pw_weight);
    if (!w.pw_bias.empty()) f(prefix + ".pw_bias", w.pw_bias);
}

template <class W>
std::size_t param_count(const W& w) {
    std::size_t n = 0;
    visit_params(w, "", [&](const std::string&, const auto& t) { n += t.size(); });
    return n;
}

}  // namespace eovseg
