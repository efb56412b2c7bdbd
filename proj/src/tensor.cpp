#include "auprobe/tensor.hpp"

#include "auprobe/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

namespace auprobe {

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_product(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

static void check_extents(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
    for (auto e : shape)
        if (e == 0) throw ShapeError("tensor extents must be >= 1, got " + shape_string(shape));
}

Tensor::Tensor(Shape shape, real fill) : shape_(std::move(shape)) {
    check_extents(shape_);
    data_.assign(shape_product(shape_), fill);
}

Tensor Tensor::from_values(const Shape& shape, std::vector<real> values) {
    check_extents(shape);
    if (values.size() != shape_product(shape))
        throw ShapeError("from_values: " + std::to_string(values.size()) +
                         " values do not fill shape " + shape_string(shape));
    Tensor t;
    t.shape_ = shape;
    t.data_ = std::move(values);
    return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) throw ShapeError("axis out of range");
    return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
    if (index.size() != shape_.size())
        throw ShapeError("index rank " + std::to_string(index.size()) + " does not match tensor rank " +
                         std::to_string(shape_.size()));
    std::size_t off = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i >= shape_[axis]) throw ShapeError("index out of range on axis " + std::to_string(axis));
        off = off * shape_[axis] + i;
        ++axis;
    }
    return off;
}

real& Tensor::at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
real Tensor::at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

Tensor Tensor::reshaped(const Shape& shape) const {
    check_extents(shape);
    if (shape_product(shape) != size())
        throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    Tensor t = *this;
    t.shape_ = shape;
    return t;
}

void Tensor::fill(real value) { std::fill(data_.begin(), data_.end(), value); }

static void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

Tensor& Tensor::operator+=(const Tensor& other) {
    require_same_shape(*this, other, "add");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(real s) {
    for (auto& v : data_) v *= s;
    return *this;
}

Tensor elementwise_add(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    out += b;
    return out;
}

Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a;
    auto o = out.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
    return out;
}

Tensor scale(const Tensor& t, real s) {
    Tensor out = t;
    out *= s;
    return out;
}

real inner_product(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "inner_product");
    real sum = 0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) sum += av[i] * bv[i];
    return sum;
}

real squared_norm(const Tensor& t) {
    real sum = 0;
    for (auto v : t.values()) sum += v * v;
    return sum;
}

void gemm(std::span<const real> a, std::span<const real> b, std::span<real> out,
          std::size_t m, std::size_t n, std::size_t k,
          bool transpose_a, bool transpose_b, bool accumulate) {
    using Mat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using CMap = Eigen::Map<const Mat>;
    if (a.size() != m * k || b.size() != k * n || out.size() != m * n)
        throw ShapeError("gemm: operand sizes do not match m/n/k");
    const auto ei = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
    Eigen::Map<Mat> c(out.data(), ei(m), ei(n));
    if (!accumulate) c.setZero();
    const CMap am = transpose_a ? CMap(a.data(), ei(k), ei(m)) : CMap(a.data(), ei(m), ei(k));
    const CMap bm = transpose_b ? CMap(b.data(), ei(n), ei(k)) : CMap(b.data(), ei(k), ei(n));
    if (!transpose_a && !transpose_b)
        c.noalias() += am * bm;
    else if (transpose_a && !transpose_b)
        c.noalias() += am.transpose() * bm;
    else if (!transpose_a && transpose_b)
        c.noalias() += am * bm.transpose();
    else
        c.noalias() += am.transpose() * bm.transpose();
}

}  // namespace auprobe
