#include "eovseg/kernels.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <string>
#include <vector>

#include "eovseg/error.hpp"
#include "eovseg/fault.hpp"
#include "eovseg/parallel.hpp"

namespace eovseg {

// ---------------------------------------------------------------------------
// Parameter structs

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng, bool with_bias) {
    Linear l;
    l.weight = rng.param({in, out}, in);
    if (with_bias) l.bias = rng.uniform_tensor({out}, -0.02f, 0.02f);
    return l;
}

Linear Linear::zeros(std::size_t in, std::size_t out, bool with_bias) {
    Linear l;
    l.weight = Tensor({in, out});
    if (with_bias) l.bias = Tensor({out});
    return l;
}

LayerNormParams LayerNormParams::identity(std::size_t width) {
    return {Tensor({width}, 1.0f), Tensor({width}, 0.0f)};
}

std::size_t Conv2d::in_channels() const {
    switch (mode) {
        case ConvMode::pointwise_1x1:
        case ConvMode::k3_pad1: return weight.dim(1);
        case ConvMode::depthwise_separable: return weight.dim(0);
    }
    return 0;
}

std::size_t Conv2d::out_channels() const {
    return mode == ConvMode::depthwise_separable ? pw_weight.dim(0) : weight.dim(0);
}

Conv2d Conv2d::init(ConvMode mode, std::size_t in, std::size_t out, Rng& rng) {
    Conv2d c;
    c.mode = mode;
    switch (mode) {
        case ConvMode::pointwise_1x1:
            c.weight = rng.param({out, in}, in);
            c.bias = rng.uniform_tensor({out}, -0.02f, 0.02f);
            break;
        case ConvMode::k3_pad1:
            c.weight = rng.param({out, in, 3, 3}, in * 9);
            c.bias = rng.uniform_tensor({out}, -0.02f, 0.02f);
            break;
        case ConvMode::depthwise_separable:
            c.weight = rng.param({in, 3, 3}, 9);
            c.bias = rng.uniform_tensor({in}, -0.02f, 0.02f);
            c.pw_weight = rng.param({out, in}, in);
            c.pw_bias = rng.uniform_tensor({out}, -0.02f, 0.02f);
            break;
    }
    return c;
}

Conv2d Conv2d::zeros(ConvMode mode, std::size_t in, std::size_t out) {
    Conv2d c;
    c.mode = mode;
    switch (mode) {
        case ConvMode::pointwise_1x1:
            c.weight = Tensor({out, in});
            c.bias = Tensor({out});
            break;
        case ConvMode::k3_pad1:
            c.weight = Tensor({out, in, 3, 3});
            c.bias = Tensor({out});
            break;
        case ConvMode::depthwise_separable:
            c.weight = Tensor({in, 3, 3});
            c.bias = Tensor({in});
            c.pw_weight = Tensor({out, in});
            c.pw_bias = Tensor({out});
            break;
    }
    return c;
}

// ---------------------------------------------------------------------------
// contract

namespace {

struct ContractionSpec {
    std::string lhs;
    std::string rhs;
    std::string out;
};

ContractionSpec parse_contraction(std::string_view spec) {
    std::string s;
    for (char c : spec)
        if (c != ' ') s.push_back(c);
    const auto arrow = s.find("->");
    const auto comma = s.find(',');
    if (arrow == std::string::npos || comma == std::string::npos || comma > arrow)
        throw ShapeError("contract: spec '" + std::string(spec) + "' must have the form 'ab,bc->ac'");
    ContractionSpec out{s.substr(0, comma), s.substr(comma + 1, arrow - comma - 1), s.substr(arrow + 2)};
    for (const auto* part : {&out.lhs, &out.rhs, &out.out}) {
        for (std::size_t i = 0; i < part->size(); ++i) {
            const char c = (*part)[i];
            if (!std::isalpha(static_cast<unsigned char>(c)))
                throw ShapeError(std::string("contract: invalid axis label '") + c + "'");
            if (part->find(c, i + 1) != std::string::npos)
                throw ShapeError(std::string("contract: axis '") + c + "' repeated within one operand");
        }
    }
    return out;
}

bool has(const std::string& s, char c) { return s.find(c) != std::string::npos; }

// Strides into a packed [group0][group1][group2] buffer for every axis of an
// operand. Labels outside all groups get stride 0 and are summed.
std::vector<std::size_t> packed_strides(const std::string& labels, const std::array<std::string, 3>& groups,
                                        const std::array<std::size_t, 3>& group_sizes,
                                        const std::array<std::size_t, 128>& extent) {
    std::vector<std::size_t> strides(labels.size(), 0);
    for (std::size_t g = 0; g < 3; ++g) {
        std::size_t outer = 1;
        for (std::size_t h = g + 1; h < 3; ++h) outer *= group_sizes[h];
        std::size_t sub = 1;
        for (std::size_t k = groups[g].size(); k-- > 0;) {
            const char c = groups[g][k];
            strides[labels.find(c)] = sub * outer;
            sub *= extent[static_cast<unsigned char>(c)];
        }
    }
    return strides;
}

std::vector<float> pack(const Tensor& t, const std::vector<std::size_t>& strides, std::size_t packed_size) {
    std::vector<float> buf(packed_size, 0.0f);
    const auto& shape = t.shape();
    std::vector<std::size_t> idx(shape.size(), 0);
    std::size_t off = 0;
    for (std::size_t lin = 0; lin < t.size(); ++lin) {
        buf[off] += t[lin];
        for (std::size_t ax = shape.size(); ax-- > 0;) {
            if (++idx[ax] < shape[ax]) {
                off += strides[ax];
                break;
            }
            off -= strides[ax] * (shape[ax] - 1);
            idx[ax] = 0;
        }
    }
    return buf;
}

std::size_t group_size(const std::string& g, const std::array<std::size_t, 128>& extent) {
    std::size_t n = 1;
    for (char c : g) n *= extent[static_cast<unsigned char>(c)];
    return n;
}

}  // namespace

Tensor contract(const Tensor& a, const Tensor& b, std::string_view spec) {
    const auto cs = parse_contraction(spec);
    if (cs.lhs.size() != a.rank())
        throw ShapeError("contract: lhs labels '" + cs.lhs + "' do not match operand rank " + std::to_string(a.rank()));
    if (cs.rhs.size() != b.rank())
        throw ShapeError("contract: rhs labels '" + cs.rhs + "' do not match operand rank " + std::to_string(b.rank()));

    std::array<std::size_t, 128> extent{};
    for (std::size_t i = 0; i < cs.lhs.size(); ++i) extent[static_cast<unsigned char>(cs.lhs[i])] = a.dim(i);
    for (std::size_t i = 0; i < cs.rhs.size(); ++i) {
        auto& e = extent[static_cast<unsigned char>(cs.rhs[i])];
        if (e != 0 && has(cs.lhs, cs.rhs[i]) && e != b.dim(i))
            throw ShapeError(std::string("contract: axis '") + cs.rhs[i] + "' has extent " + std::to_string(e) +
                             " in lhs but " + std::to_string(b.dim(i)) + " in rhs");
        e = b.dim(i);
    }
    for (char c : cs.out)
        if (!has(cs.lhs, c) && !has(cs.rhs, c))
            throw ShapeError(std::string("contract: output axis '") + c + "' does not appear in any operand");

    std::string batch, left, right, summed;
    for (char c : cs.out) {
        const bool in_a = has(cs.lhs, c), in_b = has(cs.rhs, c);
        if (in_a && in_b) batch.push_back(c);
        else if (in_a) left.push_back(c);
        else right.push_back(c);
    }
    for (char c : cs.lhs)
        if (has(cs.rhs, c) && !has(cs.out, c)) summed.push_back(c);

    const std::size_t nb = group_size(batch, extent), ni = group_size(left, extent),
                      nj = group_size(right, extent), nk = group_size(summed, extent);

    const auto a_strides = packed_strides(cs.lhs, {batch, left, summed}, {nb, ni, nk}, extent);
    const auto b_strides = packed_strides(cs.rhs, {batch, summed, right}, {nb, nk, nj}, extent);
    const auto ap = pack(a, a_strides, nb * ni * nk);
    const auto bp = pack(b, b_strides, nb * nk * nj);

    std::vector<float> cp(nb * ni * nj, 0.0f);
    std::vector<double> acc(nj);
    for (std::size_t bt = 0; bt < nb; ++bt) {
        const float* A = ap.data() + bt * ni * nk;
        const float* B = bp.data() + bt * nk * nj;
        float* C = cp.data() + bt * ni * nj;
        for (std::size_t i = 0; i < ni; ++i) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t k = 0; k < nk; ++k) {
                const double av = A[i * nk + k];
                const float* brow = B + k * nj;
                for (std::size_t j = 0; j < nj; ++j) acc[j] += av * brow[j];
            }
            for (std::size_t j = 0; j < nj; ++j) C[i * nj + j] = static_cast<float>(acc[j]);
        }
    }

    Shape out_shape;
    for (char c : cs.out) out_shape.push_back(extent[static_cast<unsigned char>(c)]);
    if (out_shape.empty()) return Tensor({1}, std::vector<float>{cp[0]});
    Tensor out(out_shape);
    const auto c_strides = packed_strides(cs.out, {batch, left, right}, {nb, ni, nj}, extent);
    std::vector<std::size_t> idx(out_shape.size(), 0);
    std::size_t off = 0;
    for (std::size_t lin = 0; lin < out.size(); ++lin) {
        out[lin] = cp[off];
        for (std::size_t ax = out_shape.size(); ax-- > 0;) {
            if (++idx[ax] < out_shape[ax]) {
                off += c_strides[ax];
                break;
            }
            off -= c_strides[ax] * (out_shape[ax] - 1);
            idx[ax] = 0;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// softmax / layer_norm / pointwise

namespace {

struct AxisSplit {
    std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Tensor& x, std::size_t axis, const char* what) {
    if (axis >= x.rank())
        throw ShapeError(std::string(what) + ": axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(x.rank()));
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= x.dim(i);
    s.n = x.dim(axis);
    for (std::size_t i = axis + 1; i < x.rank(); ++i) s.inner *= x.dim(i);
    return s;
}

}  // namespace

Tensor softmax(const Tensor& x, std::size_t axis) {
    const auto s = split_axis(x, axis, "softmax");
    const bool flip = active_fault() == Fault::softmax;
    Tensor out(x.shape());
    std::vector<float> row(s.n), sorted(s.n);
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.n * s.inner + in;
            float mx = -INFINITY;
            for (std::size_t j = 0; j < s.n; ++j) {
                float v = x[base + j * s.inner];
                if (!std::isfinite(v)) throw Error("softmax: non-finite input");
                if (flip) v = -v;
                row[j] = v;
                mx = std::max(mx, v);
            }
            for (std::size_t j = 0; j < s.n; ++j) row[j] = std::exp(row[j] - mx);
            sorted = row;
            std::sort(sorted.begin(), sorted.end());
            double denom = 0.0;
            for (float e : sorted) denom += e;
            for (std::size_t j = 0; j < s.n; ++j)
                out[base + j * s.inner] = static_cast<float>(static_cast<double>(row[j]) / denom);
        }
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    const std::size_t width = x.dim(x.rank() - 1);
    require_shape(gamma, {width}, "layer_norm gamma");
    require_shape(beta, {width}, "layer_norm beta");
    Tensor out(x.shape());
    const std::size_t rows = x.size() / width;
    for (std::size_t r = 0; r < rows; ++r) {
        const float* in = x.ptr() + r * width;
        float* o = out.ptr() + r * width;
        double mean = 0.0;
        for (std::size_t i = 0; i < width; ++i) mean += in[i];
        mean /= static_cast<double>(width);
        double var = 0.0;
        for (std::size_t i = 0; i < width; ++i) {
            const double d = in[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(width);
        const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
        for (std::size_t i = 0; i < width; ++i)
            o[i] = static_cast<float>((in[i] - mean) * inv * gamma[i] + beta[i]);
    }
    return out;
}

Activation parse_activation(std::string_view name) {
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "gelu") return Activation::gelu;
    if (name == "relu") return Activation::relu;
    throw ConfigError("unknown activation '" + std::string(name) + "'");
}

float sigmoid(float x) { return static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(x)))); }

float gelu(float x) {
    const double v = x;
    constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    return static_cast<float>(0.5 * v * (1.0 + std::tanh(k * (v + 0.044715 * v * v * v))));
}

Tensor pointwise(Activation act, const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        switch (act) {
            case Activation::sigmoid: out[i] = sigmoid(x[i]); break;
            case Activation::gelu: out[i] = gelu(x[i]); break;
            case Activation::relu: out[i] = x[i] > 0.0f ? x[i] : 0.0f; break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// dense

namespace {

// Row-major product with double row accumulators; bias (if any) joins before the one rounding.
Tensor gemm(const Tensor& a, const Tensor& b, const Tensor* bias) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    parallel_for(m, [&](std::size_t begin, std::size_t end) {
        std::vector<double> acc(n);
        for (std::size_t i = begin; i < end; ++i) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t p = 0; p < k; ++p) {
                const double av = a[i * k + p];
                const float* brow = b.ptr() + p * n;
                for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
            }
            float* row = out.ptr() + i * n;
            if (bias)
                for (std::size_t j = 0; j < n; ++j) row[j] = static_cast<float>(acc[j] + (*bias)[j]);
            else
                for (std::size_t j = 0; j < n; ++j) row[j] = static_cast<float>(acc[j]);
        }
    });
    return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul lhs");
    require_rank(b, 2, "matmul rhs");
    if (b.dim(0) != a.dim(1))
        throw ShapeError("matmul: inner extents differ (" + shape_str(a.shape()) + " x " + shape_str(b.shape()) + ")");
    return gemm(a, b, nullptr);
}

Tensor linear(const Tensor& x, const Linear& w) {
    require_rank(x, 2, "linear input");
    if (x.dim(1) != w.in_features())
        throw ShapeError("linear: input width " + std::to_string(x.dim(1)) + " does not match weight " +
                         shape_str(w.weight.shape()));
    if (w.bias.empty()) return gemm(x, w.weight, nullptr);
    require_shape(w.bias, {w.out_features()}, "linear bias");
    return gemm(x, w.weight, &w.bias);
}

// ---------------------------------------------------------------------------
// convolutions

namespace {

// Plane accumulator: starts at the bias, rounds to float once on store.
void store(float* dst, const std::vector<double>& acc) {
    for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<float>(acc[i]);
}

void require_chw(const Tensor& x, const char* what) {
    if (x.rank() != 3) throw ShapeError(std::string(what) + ": expected [C, H, W] input, got " + shape_str(x.shape()));
}

Tensor conv1x1(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    const std::size_t cin = x.dim(0), hw = x.dim(1) * x.dim(2), cout = weight.dim(0);
    if (weight.rank() != 2 || weight.dim(1) != cin)
        throw ShapeError("conv2d: 1x1 weight " + shape_str(weight.shape()) + " does not match " +
                         std::to_string(cin) + " input channels");
    if (!bias.empty()) require_shape(bias, {cout}, "conv2d bias");
    Tensor out({cout, x.dim(1), x.dim(2)});
    parallel_for(cout, [&](std::size_t begin, std::size_t end) {
        for (std::size_t co = begin; co < end; ++co) {
            std::vector<double> o(hw, bias.empty() ? 0.0 : bias[co]);
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const double w = weight[co * cin + ci];
                const float* in = x.ptr() + ci * hw;
                for (std::size_t p = 0; p < hw; ++p) o[p] += w * in[p];
            }
            store(out.ptr() + co * hw, o);
        }
    });
    return out;
}

// Accumulates a 3x3 pad-1 correlation of one input plane into one output plane.
void accumulate3x3(double* o, const float* in, const float* k, std::size_t h, std::size_t w) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
            const double kv = k[ky * 3 + kx];
            const std::size_t y0 = ky == 0 ? 1 : 0, y1 = ky == 2 ? h - 1 : h;
            const std::size_t x0 = kx == 0 ? 1 : 0, x1 = kx == 2 ? w - 1 : w;
            for (std::size_t y = y0; y < y1; ++y) {
                double* orow = o + y * w;
                const float* irow = in + (y + ky - 1) * w + (kx - 1);
                for (std::size_t xx = x0; xx < x1; ++xx) orow[xx] += kv * irow[xx];
            }
        }
    }
}

Tensor conv3x3(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2), cout = weight.dim(0);
    if (weight.rank() != 4 || weight.dim(1) != cin || weight.dim(2) != 3 || weight.dim(3) != 3)
        throw ShapeError("conv2d: 3x3 weight " + shape_str(weight.shape()) + " does not match " +
                         std::to_string(cin) + " input channels");
    if (!bias.empty()) require_shape(bias, {cout}, "conv2d bias");
    Tensor out({cout, h, w});
    parallel_for(cout, [&](std::size_t begin, std::size_t end) {
        for (std::size_t co = begin; co < end; ++co) {
            std::vector<double> o(h * w, bias.empty() ? 0.0 : bias[co]);
            for (std::size_t ci = 0; ci < cin; ++ci)
                accumulate3x3(o.data(), x.ptr() + ci * h * w, weight.ptr() + (co * cin + ci) * 9, h, w);
            store(out.ptr() + co * h * w, o);
        }
    });
    return out;
}

Tensor depthwise3x3(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (weight.rank() != 3 || weight.dim(0) != c || weight.dim(1) != 3 || weight.dim(2) != 3)
        throw ShapeError("conv2d: depthwise weight " + shape_str(weight.shape()) + " does not match " +
                         std::to_string(c) + " input channels");
    if (!bias.empty()) require_shape(bias, {c}, "conv2d depthwise bias");
    Tensor out({c, h, w});
    for (std::size_t ch = 0; ch < c; ++ch) {
        std::vector<double> o(h * w, bias.empty() ? 0.0 : bias[ch]);
        accumulate3x3(o.data(), x.ptr() + ch * h * w, weight.ptr() + ch * 9, h, w);
        store(out.ptr() + ch * h * w, o);
    }
    return out;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Conv2d& w) {
    require_chw(x, "conv2d");
    switch (w.mode) {
        case ConvMode::pointwise_1x1: return conv1x1(x, w.weight, w.bias);
        case ConvMode::k3_pad1: return conv3x3(x, w.weight, w.bias);
        case ConvMode::depthwise_separable: return conv1x1(depthwise3x3(x, w.weight, w.bias), w.pw_weight, w.pw_bias);
    }
    throw ConfigError("conv2d: unknown mode");
}

Tensor patch_conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t kernel) {
    require_chw(x, "patch_conv2d");
    const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (weight.rank() != 4 || weight.dim(1) != cin || weight.dim(2) != kernel || weight.dim(3) != kernel)
        throw ShapeError("patch_conv2d: weight " + shape_str(weight.shape()) + " does not match " +
                         std::to_string(cin) + " channels and kernel " + std::to_string(kernel));
    if (h % kernel || w % kernel)
        throw ShapeError("patch_conv2d: extents " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by " + std::to_string(kernel));
    const std::size_t cout = weight.dim(0), oh = h / kernel, ow = w / kernel;
    if (!bias.empty()) require_shape(bias, {cout}, "patch_conv2d bias");
    Tensor out({cout, oh, ow});
    parallel_for(cout, [&](std::size_t begin, std::size_t end) {
        for (std::size_t co = begin; co < end; ++co) {
            std::vector<double> o(oh * ow, bias.empty() ? 0.0 : bias[co]);
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const float* in = x.ptr() + ci * h * w;
                const float* k = weight.ptr() + (co * cin + ci) * kernel * kernel;
                for (std::size_t ky = 0; ky < kernel; ++ky)
                    for (std::size_t kx = 0; kx < kernel; ++kx) {
                        const double kv = k[ky * kernel + kx];
                        for (std::size_t oy = 0; oy < oh; ++oy) {
                            const float* irow = in + (oy * kernel + ky) * w + kx;
                            double* orow = o.data() + oy * ow;
                            for (std::size_t ox = 0; ox < ow; ++ox) orow[ox] += kv * irow[ox * kernel];
                        }
                    }
            }
            store(out.ptr() + co * oh * ow, o);
        }
    });
    return out;
}

Tensor depthwise_conv1d(const Tensor& signals, const Tensor& kernels) {
    require_rank(signals, 2, "depthwise_conv1d signals");
    require_rank(kernels, 2, "depthwise_conv1d kernels");
    const std::size_t n = signals.dim(0), d = signals.dim(1), m = kernels.dim(1);
    if (kernels.dim(0) != n)
        throw ShapeError("depthwise_conv1d: " + std::to_string(kernels.dim(0)) + " kernels for " + std::to_string(n) +
                         " signals");
    if (m % 2 == 0) throw ShapeError("depthwise_conv1d: kernel length must be odd, got " + std::to_string(m));
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(m / 2);
    Tensor out({n, d});
    for (std::size_t r = 0; r < n; ++r) {
        const float* s = signals.ptr() + r * d;
        const float* k = kernels.ptr() + r * m;
        std::vector<double> o(d, 0.0);
        for (std::size_t j = 0; j < m; ++j) {
            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - half;
            const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
            const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(d),
                                                               static_cast<std::ptrdiff_t>(d) - shift);
            for (std::ptrdiff_t i = lo; i < hi; ++i) o[i] += static_cast<double>(k[j]) * s[i + shift];
        }
        store(out.ptr() + r * d, o);
    }
    return out;
}

Tensor transposed_conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_chw(x, "transposed_conv2d");
    const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (weight.rank() != 4 || weight.dim(0) != cin || weight.dim(2) != 2 || weight.dim(3) != 2)
        throw ShapeError("transposed_conv2d: weight " + shape_str(weight.shape()) + " must be [" +
                         std::to_string(cin) + ", Cout, 2, 2]");
    const std::size_t cout = weight.dim(1), oh = 2 * h, ow = 2 * w;
    if (!bias.empty()) require_shape(bias, {cout}, "transposed_conv2d bias");
    Tensor out({cout, oh, ow});
    parallel_for(cout, [&](std::size_t begin, std::size_t end) {
        for (std::size_t co = begin; co < end; ++co) {
            std::vector<double> o(oh * ow, bias.empty() ? 0.0 : bias[co]);
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const float* in = x.ptr() + ci * h * w;
                const float* k = weight.ptr() + (ci * cout + co) * 4;
                for (std::size_t y = 0; y < h; ++y) {
                    double* top = o.data() + (2 * y) * ow;
                    double* bot = top + ow;
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const double v = in[y * w + xx];
                        top[2 * xx] += v * k[0];
                        top[2 * xx + 1] += v * k[1];
                        bot[2 * xx] += v * k[2];
                        bot[2 * xx + 1] += v * k[3];
                    }
                }
            }
            store(out.ptr() + co * oh * ow, o);
        }
    });
    return out;
}

Tensor bilinear_upsample(const Tensor& x, std::size_t factor) {
    require_chw(x, "bilinear_upsample");
    if (factor != 2 && factor != 4 && factor != 8)
        throw ConfigError("bilinear_upsample: unsupported factor " + std::to_string(factor) + " (expected 2, 4 or 8)");
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2), oh = h * factor, ow = w * factor;

    struct Tap {
        std::size_t i0, i1;
        float frac;
    };
    auto taps = [factor](std::size_t out_len, std::size_t in_len) {
        std::vector<Tap> t(out_len);
        for (std::size_t o = 0; o < out_len; ++o) {
            float src = (static_cast<float>(o) + 0.5f) / static_cast<float>(factor) - 0.5f;
            if (src < 0.0f) src = 0.0f;
            std::size_t i0 = static_cast<std::size_t>(src);
            if (i0 > in_len - 1) i0 = in_len - 1;
            const std::size_t i1 = std::min(i0 + 1, in_len - 1);
            t[o] = {i0, i1, src - static_cast<float>(i0)};
        }
        return t;
    };
    const auto ty = taps(oh, h), tx = taps(ow, w);

    Tensor out({c, oh, ow});
    std::vector<float> row(ow);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const float* in = x.ptr() + ch * h * w;
        float* o = out.ptr() + ch * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            const float* r0 = in + ty[oy].i0 * w;
            const float* r1 = in + ty[oy].i1 * w;
            const float fy = ty[oy].frac;
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const auto& t = tx[ox];
                const float top = r0[t.i0] + t.frac * (r0[t.i1] - r0[t.i0]);
                const float bot = r1[t.i0] + t.frac * (r1[t.i1] - r1[t.i0]);
                o[oy * ow + ox] = top + fy * (bot - top);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// reductions and helpers

Tensor reduce_max(const Tensor& x, std::size_t axis) {
    const auto s = split_axis(x, axis, "reduce_max");
    Shape shape;
    for (std::size_t i = 0; i < x.rank(); ++i)
        if (i != axis) shape.push_back(x.dim(i));
    if (shape.empty()) shape.push_back(1);
    Tensor out(shape);
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.n * s.inner + in;
            float mx = x[base];
            for (std::size_t j = 1; j < s.n; ++j) mx = std::max(mx, x[base + j * s.inner]);
            out[o * s.inner + in] = mx;
        }
    return out;
}

Tensor l2_normalize(const Tensor& x, std::size_t axis) {
    const auto s = split_axis(x, axis, "l2_normalize");
    Tensor out(x.shape());
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.n * s.inner + in;
            double sq = 0.0;
            for (std::size_t j = 0; j < s.n; ++j) {
                const double v = x[base + j * s.inner];
                sq += v * v;
            }
            const double norm = std::max(std::sqrt(sq), 1e-12);
            for (std::size_t j = 0; j < s.n; ++j)
                out[base + j * s.inner] = static_cast<float>(x[base + j * s.inner] / norm);
        }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    add_inplace(out, b);
    return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

Tensor transpose2d(const Tensor& x) {
    require_rank(x, 2, "transpose2d");
    const std::size_t r = x.dim(0), c = x.dim(1);
    Tensor out({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require_chw(a, "concat_channels");
    require_chw(b, "concat_channels");
    if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw ShapeError("concat_channels: spatial extents differ (" + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()) + ")");
    Tensor out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::copy(a.data().begin(), a.data().end(), out.data().begin());
    std::copy(b.data().begin(), b.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(a.size()));
    return out;
}

}  // namespace eovseg
