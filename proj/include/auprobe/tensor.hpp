#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace auprobe {

#ifdef AUPROBE_SINGLE_PRECISION
using real = float;
#else
using real = double;
#endif

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

/// Dense row-major array of reals. The last axis varies fastest.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, real fill = real(0));

    static Tensor zeros(const Shape& shape) { return Tensor(shape); }
    static Tensor ones(const Shape& shape) { return Tensor(shape, real(1)); }
    static Tensor from_values(const Shape& shape, std::vector<real> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<real> values() noexcept { return data_; }
    std::span<const real> values() const noexcept { return data_; }
    real* data() noexcept { return data_.data(); }
    const real* data() const noexcept { return data_.data(); }

    real& operator[](std::size_t i) noexcept { return data_[i]; }
    real operator[](std::size_t i) const noexcept { return data_[i]; }

    // Bounds-checked multi-index access.
    real& at(std::initializer_list<std::size_t> index);
    real at(std::initializer_list<std::size_t> index) const;

    // Unchecked fast paths for the common ranks.
    real& operator()(std::size_t c, std::size_t i, std::size_t j) noexcept {
        return data_[(c * shape_[1] + i) * shape_[2] + j];
    }
    real operator()(std::size_t c, std::size_t i, std::size_t j) const noexcept {
        return data_[(c * shape_[1] + i) * shape_[2] + j];
    }

    /// Same buffer under a new shape with the same element count.
    Tensor reshaped(const Shape& shape) const;

    void fill(real value);

    // In-place mutation, used by the trainer.
    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(real s);

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t offset(std::initializer_list<std::size_t> index) const;

    Shape shape_;
    std::vector<real> data_;
};

std::size_t shape_product(const Shape& shape);

Tensor elementwise_add(const Tensor& a, const Tensor& b);
Tensor elementwise_mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& t, real s);
real inner_product(const Tensor& a, const Tensor& b);
real squared_norm(const Tensor& t);

/// out[m x n] (+)= a[m x k] * b[k x n], all row-major. Transpose flags apply to the stored operands.
void gemm(std::span<const real> a, std::span<const real> b, std::span<real> out,
          std::size_t m, std::size_t n, std::size_t k,
          bool transpose_a, bool transpose_b, bool accumulate);

}  // namespace auprobe
