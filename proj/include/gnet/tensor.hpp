#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "gnet/error.hpp"

namespace gnet {

// Engine-wide scalar. 64-bit by default so gradient checks and bit-exact
// determinism tests run at full precision.
#ifdef GNET_SINGLE_PRECISION
using real = float;
#else
using real = double;
#endif

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);
Shape shape_strides(const Shape& shape);

/// Dense row-major N-dimensional array. A rank-0 tensor holds one element.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() : data_(1, T(0)) {}

    explicit BasicTensor(Shape shape, T fill = T(0))
        : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}

    BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_numel(shape_)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                             shape_str(shape_));
        }
    }

    static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }
    static BasicTensor full(Shape shape, T value) { return BasicTensor(std::move(shape), value); }
    static BasicTensor scalar(T value) { return BasicTensor(Shape{}, std::vector<T>{value}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    T* ptr() { return data_.data(); }
    const T* ptr() const { return data_.data(); }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::size_t offset(std::initializer_list<std::size_t> index) const {
        if (index.size() != shape_.size()) {
            throw ShapeError("index rank " + std::to_string(index.size()) + " does not match tensor rank " +
                             std::to_string(shape_.size()));
        }
        std::size_t off = 0;
        std::size_t axis = 0;
        for (std::size_t i : index) {
            if (i >= shape_[axis]) {
                throw ShapeError("index " + std::to_string(i) + " out of range for axis " + std::to_string(axis) +
                                 " of shape " + shape_str(shape_));
            }
            off = off * shape_[axis] + i;
            ++axis;
        }
        return off;
    }

    T& at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
    const T& at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

    /// Same data, new shape with equal element count.
    BasicTensor reshaped(Shape shape) const& {
        BasicTensor out = *this;
        out.reshape_inplace(std::move(shape));
        return out;
    }
    BasicTensor reshaped(Shape shape) && {
        reshape_inplace(std::move(shape));
        return std::move(*this);
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    bool same_shape(const BasicTensor& other) const { return shape_ == other.shape_; }

    template <typename U>
    BasicTensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return BasicTensor<U>(shape_, std::move(out));
    }

    friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    static std::size_t checked_numel(const Shape& shape) {
        for (std::size_t e : shape) {
            if (e == 0) {
                throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
            }
        }
        return shape_numel(shape);
    }

    void reshape_inplace(Shape shape) {
        if (checked_numel(shape) != data_.size()) {
            throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
        }
        shape_ = std::move(shape);
    }

    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<real>;
using FloatTensor = BasicTensor<float>;

enum class ElementwiseOp { add, sub, mul, max };
enum class ReduceOp { sum, mean, max };

/// Pointwise op; either operand may be rank-0 and is then broadcast.
Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);

/// [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Reduction over `axes`; the canonical summation order is ascending flat
/// index, so reducing all axes equals a left-to-right accumulation.
Tensor reduce(ReduceOp op, const Tensor& t, std::span<const std::size_t> axes, bool keep_dims = false);
Tensor reduce(ReduceOp op, const Tensor& t, std::initializer_list<std::size_t> axes, bool keep_dims = false);
Tensor reduce_all(ReduceOp op, const Tensor& t);

real sum_all(const Tensor& t);
bool all_finite(const Tensor& t);

/// Plain row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, real alpha, const real* a,
          std::size_t lda, const real* b, std::size_t ldb, real beta, real* c, std::size_t ldc);

}  // namespace gnet
