#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "eovseg/error.hpp"
#include "eovseg/reference.hpp"

namespace eovseg::ref {

namespace {

thread_local std::uint64_t g_macs = 0;

Tensor from_double(const Shape& shape, const std::vector<double>& v) {
    Tensor t(shape);
    for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<float>(v[i]);
    return t;
}

// Strides of a row-major shape.
std::vector<std::size_t> strides(const Shape& s) {
    std::vector<std::size_t> st(s.size(), 1);
    for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
    return st;
}

}  // namespace

std::uint64_t mac_count() { return g_macs; }
void count_macs(std::uint64_t n) { g_macs += n; }

Tensor contract(const Tensor& a, const Tensor& b, std::string_view spec) {
    const auto comma = spec.find(','), arrow = spec.find("->");
    if (comma == std::string_view::npos || arrow == std::string_view::npos) throw ShapeError("ref::contract: bad spec");
    const std::string la(spec.substr(0, comma)), lb(spec.substr(comma + 1, arrow - comma - 1)),
        lo(spec.substr(arrow + 2));
    if (la.size() != a.rank() || lb.size() != b.rank()) throw ShapeError("ref::contract: rank mismatch");
    std::map<char, std::size_t> extent;
    auto bind = [&](const std::string& labels, const Tensor& t) {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            auto [it, fresh] = extent.emplace(labels[i], t.dim(i));
            if (!fresh && it->second != t.dim(i)) throw ShapeError("ref::contract: extent mismatch");
        }
    };
    bind(la, a);
    bind(lb, b);
    std::vector<char> all;
    for (auto& [c, n] : extent) all.push_back(c);
    Shape out_shape;
    for (char c : lo) out_shape.push_back(extent.at(c));
    if (out_shape.empty()) out_shape.push_back(1);

    auto pos = [&](char c) { return static_cast<std::size_t>(std::find(all.begin(), all.end(), c) - all.begin()); };
    const auto sa = strides(a.shape()), sb = strides(b.shape()), so = strides(out_shape);
    std::vector<double> acc(shape_numel(out_shape), 0.0);
    std::vector<std::size_t> idx(all.size(), 0);
    while (true) {
        std::size_t ia = 0, ib = 0, io = 0;
        for (std::size_t i = 0; i < la.size(); ++i) ia += idx[pos(la[i])] * sa[i];
        for (std::size_t i = 0; i < lb.size(); ++i) ib += idx[pos(lb[i])] * sb[i];
        for (std::size_t i = 0; i < lo.size(); ++i) io += idx[pos(lo[i])] * so[i];
        acc[io] += static_cast<double>(a[ia]) * static_cast<double>(b[ib]);
        count_macs(1);
        std::size_t k = all.size();
        while (k > 0) {
            --k;
            if (++idx[k] < extent.at(all[k])) break;
            idx[k] = 0;
            if (k == 0) return from_double(out_shape, acc);
        }
        if (all.empty()) return from_double(out_shape, acc);
    }
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    const auto& s = x.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t n = s.at(axis);
    std::vector<double> out(x.size());
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, static_cast<double>(x[(o * n + k) * inner + i]));
            double sum = 0.0;
            for (std::size_t k = 0; k < n; ++k) sum += std::exp(x[(o * n + k) * inner + i] - mx);
            for (std::size_t k = 0; k < n; ++k)
                out[(o * n + k) * inner + i] = std::exp(x[(o * n + k) * inner + i] - mx) / sum;
        }
    return from_double(s, out);
}

Tensor layer_norm(const Tensor& x, const LayerNormParams& p, double eps) {
    const std::size_t d = x.shape().back(), rows = x.size() / d;
    std::vector<double> out(x.size());
    for (std::size_t r = 0; r < rows; ++r) {
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += x[r * d + j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (x[r * d + j] - mean) * (x[r * d + j] - mean);
        var /= static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j)
            out[r * d + j] = (x[r * d + j] - mean) / std::sqrt(var + eps) * p.gamma[j] + p.beta[j];
    }
    return from_double(x.shape(), out);
}

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-static_cast<double>(x[i])));
    return from_double(x.shape(), out);
}

Tensor gelu(const Tensor& x) {
    const double k = std::sqrt(2.0 / 3.14159265358979323846);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        out[i] = 0.5 * v * (1.0 + std::tanh(k * (v + 0.044715 * v * v * v)));
    }
    return from_double(x.shape(), out);
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (auto& v : out.data()) v = v > 0.0f ? v : 0.0f;
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) throw ShapeError("ref::matmul: inner extents differ");
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) s += static_cast<double>(a[i * k + t]) * b[t * n + j];
            out[i * n + j] = s;
        }
    count_macs(m * k * n);
    return from_double({m, n}, out);
}

Tensor linear(const Tensor& x, const Linear& w) {
    const std::size_t rows = x.dim(0), in = w.in_features(), out_f = w.out_features();
    std::vector<double> out(rows * out_f);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out_f; ++o) {
            double s = w.bias.empty() ? 0.0 : w.bias[o];
            for (std::size_t i = 0; i < in; ++i) s += static_cast<double>(x[r * in + i]) * w.weight[i * out_f + o];
            out[r * out_f + o] = s;
        }
    count_macs(rows * in * out_f);
    return from_double({rows, out_f}, out);
}

namespace {

// One 3x3 tap of channel `c` around (y, x) with zero padding.
double tap3(const Tensor& x, std::size_t c, long y, long xx) {
    const long h = static_cast<long>(x.dim(1)), w = static_cast<long>(x.dim(2));
    if (y < 0 || xx < 0 || y >= h || xx >= w) return 0.0;
    return x[(c * x.dim(1) + static_cast<std::size_t>(y)) * x.dim(2) + static_cast<std::size_t>(xx)];
}

}  // namespace

Tensor conv2d(const Tensor& x, const Conv2d& w) {
    const std::size_t cin = x.dim(0), h = x.dim(1), wd = x.dim(2), hw = h * wd;
    switch (w.mode) {
        case ConvMode::pointwise_1x1: {
            const std::size_t cout = w.weight.dim(0);
            std::vector<double> out(cout * hw);
            for (std::size_t o = 0; o < cout; ++o)
                for (std::size_t p = 0; p < hw; ++p) {
                    double s = w.bias[o];
                    for (std::size_t i = 0; i < cin; ++i) s += static_cast<double>(w.weight[o * cin + i]) * x[i * hw + p];
                    out[o * hw + p] = s;
                }
            count_macs(cout * cin * hw);
            return from_double({cout, h, wd}, out);
        }
        case ConvMode::k3_pad1: {
            const std::size_t cout = w.weight.dim(0);
            std::vector<double> out(cout * hw);
            for (std::size_t o = 0; o < cout; ++o)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < wd; ++xx) {
                        double s = w.bias[o];
                        for (std::size_t i = 0; i < cin; ++i)
                            for (long dy = -1; dy <= 1; ++dy)
                                for (long dx = -1; dx <= 1; ++dx) {
                                    const double wt = w.weight[((o * cin + i) * 3 + static_cast<std::size_t>(dy + 1)) * 3 +
                                                               static_cast<std::size_t>(dx + 1)];
                                    s += wt * tap3(x, i, static_cast<long>(y) + dy, static_cast<long>(xx) + dx);
                                }
                        out[o * hw + y * wd + xx] = s;
                    }
            count_macs(cout * cin * 9 * hw);
            return from_double({cout, h, wd}, out);
        }
        case ConvMode::depthwise_separable: {
            std::vector<double> dw(cin * hw);
            for (std::size_t c = 0; c < cin; ++c)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < wd; ++xx) {
                        double s = w.bias[c];
                        for (long dy = -1; dy <= 1; ++dy)
                            for (long dx = -1; dx <= 1; ++dx)
                                s += static_cast<double>(w.weight[(c * 3 + static_cast<std::size_t>(dy + 1)) * 3 +
                                                                  static_cast<std::size_t>(dx + 1)]) *
                                     tap3(x, c, static_cast<long>(y) + dy, static_cast<long>(xx) + dx);
                        dw[c * hw + y * wd + xx] = s;
                    }
            count_macs(cin * 9 * hw);
            const std::size_t cout = w.pw_weight.dim(0);
            std::vector<double> out(cout * hw);
            for (std::size_t o = 0; o < cout; ++o)
                for (std::size_t p = 0; p < hw; ++p) {
                    double s = w.pw_bias[o];
                    for (std::size_t c = 0; c < cin; ++c) s += static_cast<double>(w.pw_weight[o * cin + c]) * dw[c * hw + p];
                    out[o * hw + p] = s;
                }
            count_macs(cout * cin * hw);
            return from_double({cout, h, wd}, out);
        }
    }
    throw ShapeError("ref::conv2d: unknown mode");
}

Tensor patch_conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t k) {
    const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2), cout = weight.dim(0);
    const std::size_t oh = h / k, ow = w / k;
    std::vector<double> out(cout * oh * ow);
    for (std::size_t o = 0; o < cout; ++o)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xx = 0; xx < ow; ++xx) {
                double s = bias[o];
                for (std::size_t i = 0; i < cin; ++i)
                    for (std::size_t ky = 0; ky < k; ++ky)
                        for (std::size_t kx = 0; kx < k; ++kx)
                            s += static_cast<double>(weight[((o * cin + i) * k + ky) * k + kx]) *
                                 x[(i * h + y * k + ky) * w + xx * k + kx];
                out[(o * oh + y) * ow + xx] = s;
            }
    count_macs(cout * cin * k * k * oh * ow);
    return from_double({cout, oh, ow}, out);
}

Tensor depthwise_conv1d(const Tensor& signals, const Tensor& kernels) {
    const std::size_t n = signals.dim(0), d = signals.dim(1), m = kernels.dim(1);
    const long pad = static_cast<long>(m / 2);
    std::vector<double> out(n * d);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < m; ++t) {
                const long src = static_cast<long>(j) + static_cast<long>(t) - pad;
                if (src >= 0 && src < static_cast<long>(d))
                    s += static_cast<double>(kernels[r * m + t]) * signals[r * d + static_cast<std::size_t>(src)];
            }
            out[r * d + j] = s;
        }
    count_macs(n * d * m);
    return from_double({n, d}, out);
}

Tensor transposed_conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2), cout = weight.dim(1);
    std::vector<double> out(cout * 4 * h * w);
    for (std::size_t o = 0; o < cout; ++o)
        for (std::size_t y = 0; y < 2 * h; ++y)
            for (std::size_t xx = 0; xx < 2 * w; ++xx) {
                double s = bias[o];
                for (std::size_t i = 0; i < cin; ++i)
                    s += static_cast<double>(x[(i * h + y / 2) * w + xx / 2]) *
                         weight[((i * cout + o) * 2 + y % 2) * 2 + xx % 2];
                out[(o * 2 * h + y) * 2 * w + xx] = s;
            }
    count_macs(cin * cout * 4 * h * w);
    return from_double({cout, 2 * h, 2 * w}, out);
}

Tensor bilinear_upsample(const Tensor& x, std::size_t f) {
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2), oh = h * f, ow = w * f;
    auto src = [&](std::size_t o, std::size_t n, std::size_t& i0, std::size_t& i1, double& t) {
        const double s = std::max(0.0, (static_cast<double>(o) + 0.5) / static_cast<double>(f) - 0.5);
        i0 = std::min(static_cast<std::size_t>(s), n - 1);
        i1 = std::min(i0 + 1, n - 1);
        t = s - static_cast<double>(i0);
    };
    std::vector<double> out(c * oh * ow);
    for (std::size_t k = 0; k < c; ++k)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xx = 0; xx < ow; ++xx) {
                std::size_t y0, y1, x0, x1;
                double ty, tx;
                src(y, h, y0, y1, ty);
                src(xx, w, x0, x1, tx);
                auto at = [&](std::size_t yy, std::size_t xc) { return static_cast<double>(x[(k * h + yy) * w + xc]); };
                out[(k * oh + y) * ow + xx] = (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x1)) +
                                              ty * ((1 - tx) * at(y1, x0) + tx * at(y1, x1));
            }
    return from_double({c, oh, ow}, out);
}

Tensor reduce_max(const Tensor& x, std::size_t axis) {
    const auto& s = x.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    Shape os;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (i != axis) os.push_back(s[i]);
    if (os.empty()) os.push_back(1);
    Tensor out(os);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
            float m = x[o * s[axis] * inner + i];
            for (std::size_t k = 1; k < s[axis]; ++k) m = std::max(m, x[(o * s[axis] + k) * inner + i]);
            out[o * inner + i] = m;
        }
    return out;
}

Tensor l2_normalize(const Tensor& x, std::size_t axis) {
    const auto& s = x.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    std::vector<double> out(x.size());
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
            double ss = 0.0;
            for (std::size_t k = 0; k < s[axis]; ++k) {
                const double v = x[(o * s[axis] + k) * inner + i];
                ss += v * v;
            }
            const double norm = std::max(std::sqrt(ss), 1e-12);
            for (std::size_t k = 0; k < s[axis]; ++k)
                out[(o * s[axis] + k) * inner + i] = x[(o * s[axis] + k) * inner + i] / norm;
        }
    return from_double(s, out);
}

}  // namespace eovseg::ref
