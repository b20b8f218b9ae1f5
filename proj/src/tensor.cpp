#include "eovseg/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "eovseg/error.hpp"

namespace eovseg {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
    if (shape.empty() || shape.size() > kMaxRank)
        throw ShapeError("tensor rank must be in [1, 5], got " + std::to_string(shape.size()));
    for (std::size_t i = 0; i < shape.size(); ++i)
        if (shape[i] == 0)
            throw ShapeError("tensor extent " + std::to_string(i) + " is zero in shape " + shape_str(shape));
}

}  // namespace

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (data_.size() != shape_numel(shape_))
        throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_str(shape_));
}

Tensor Tensor::from(Shape shape, std::initializer_list<float> values) {
    return Tensor(std::move(shape), std::vector<float>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size())
        throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank()));
    return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
    if (index.size() != shape_.size())
        throw ShapeError("index rank " + std::to_string(index.size()) + " does not match tensor rank " +
                         std::to_string(rank()));
    std::size_t off = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i >= shape_[axis]) throw ShapeError("index out of range on axis " + std::to_string(axis));
        off = off * shape_[axis] + i;
        ++axis;
    }
    return off;
}

float& Tensor::at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
float Tensor::at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

Tensor Tensor::reshaped(Shape shape) const& {
    Tensor copy = *this;
    return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
    validate_shape(shape);
    if (shape_numel(shape) != data_.size())
        throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    shape_ = std::move(shape);
    return std::move(*this);
}

void Tensor::fill(float value) {
    for (auto& v : data_) v = value;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    return a.size() == 0 || std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(float)) == 0;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
        if (std::isnan(d)) return d;
        if (d > m) m = d;
    }
    return m;
}

void require_shape(const Tensor& t, const Shape& expected, const std::string& what) {
    if (t.shape() != expected)
        throw ShapeError(what + ": expected shape " + shape_str(expected) + ", got " +
                         (t.empty() ? std::string("<empty>") : shape_str(t.shape())));
}

void require_rank(const Tensor& t, std::size_t rank, const std::string& what) {
    if (t.rank() != rank)
        throw ShapeError(what + ": expected rank " + std::to_string(rank) + ", got " + std::to_string(t.rank()));
}

}  // namespace eovseg
