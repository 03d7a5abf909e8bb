#include "gnet/tensor.hpp"

#include <cblas.h>

#include <cmath>
#include <sstream>

namespace gnet {

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

Shape shape_strides(const Shape& shape) {
    Shape strides(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
    return strides;
}

namespace {

// Parallelism lives above the kernels; a fixed single BLAS thread keeps
// every product's accumulation order independent of the host.
const bool kBlasSingleThreaded = [] {
    openblas_set_num_threads(1);
    return true;
}();

real apply(ElementwiseOp op, real x, real y) {
    switch (op) {
        case ElementwiseOp::add: return x + y;
        case ElementwiseOp::sub: return x - y;
        case ElementwiseOp::mul: return x * y;
        case ElementwiseOp::max: return x < y ? y : x;
    }
    return x;
}

}  // namespace

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b) {
    if (a.rank() == 0 && b.rank() != 0) {
        Tensor out(b.shape());
        const real x = a[0];
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = apply(op, x, b[i]);
        return out;
    }
    if (b.rank() == 0) {
        Tensor out(a.shape());
        const real y = b[0];
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = apply(op, a[i], y);
        return out;
    }
    if (a.shape() != b.shape()) {
        throw ShapeError("elementwise shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = apply(op, a[i], b[i]);
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::mul, a, b); }
Tensor maximum(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::max, a, b); }

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, real alpha, const real* a,
          std::size_t lda, const real* b, std::size_t ldb, real beta, real* c, std::size_t ldc) {
    if (m == 0 || n == 0) return;
    if (k == 0) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = beta == real(0) ? real(0) : beta * c[i * ldc + j];
        return;
    }
    const auto ta = trans_a ? CblasTrans : CblasNoTrans;
    const auto tb = trans_b ? CblasTrans : CblasNoTrans;
#ifdef GNET_SINGLE_PRECISION
    cblas_sgemm(CblasRowMajor, ta, tb, int(m), int(n), int(k), alpha, a, int(lda), b, int(ldb), beta, c, int(ldc));
#else
    cblas_dgemm(CblasRowMajor, ta, tb, int(m), int(n), int(k), alpha, a, int(lda), b, int(ldb), beta, c, int(ldc));
#endif
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul expects rank-2 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    if (a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul inner dimension mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    gemm(false, false, m, n, k, real(1), a.ptr(), k, b.ptr(), n, real(0), out.ptr(), n);
    return out;
}

Tensor reduce(ReduceOp op, const Tensor& t, std::span<const std::size_t> axes, bool keep_dims) {
    const std::size_t rank = t.rank();
    std::vector<bool> reduced(rank, false);
    for (std::size_t ax : axes) {
        if (ax >= rank) {
            throw ShapeError("reduce axis " + std::to_string(ax) + " out of range for shape " + shape_str(t.shape()));
        }
        if (reduced[ax]) throw ShapeError("reduce axis " + std::to_string(ax) + " given twice");
        reduced[ax] = true;
    }

    Shape kept(rank);
    Shape out_shape;
    std::size_t count = 1;
    for (std::size_t i = 0; i < rank; ++i) {
        kept[i] = reduced[i] ? 1 : t.dim(i);
        if (reduced[i]) count *= t.dim(i);
        if (!reduced[i] || keep_dims) out_shape.push_back(kept[i]);
    }
    const Shape in_strides = shape_strides(t.shape());
    const Shape kept_strides = shape_strides(kept);

    Tensor out(out_shape);
    std::vector<bool> seen(out.numel(), false);
    for (std::size_t flat = 0; flat < t.numel(); ++flat) {
        std::size_t rem = flat, out_idx = 0;
        for (std::size_t ax = 0; ax < rank; ++ax) {
            const std::size_t i = rem / in_strides[ax];
            rem %= in_strides[ax];
            if (!reduced[ax]) out_idx += i * kept_strides[ax];
        }
        const real v = t[flat];
        if (op == ReduceOp::max) {
            if (!seen[out_idx] || v > out[out_idx]) out[out_idx] = v;
            seen[out_idx] = true;
        } else {
            out[out_idx] += v;
        }
    }
    if (op == ReduceOp::mean) {
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= real(count);
    }
    return out;
}

Tensor reduce(ReduceOp op, const Tensor& t, std::initializer_list<std::size_t> axes, bool keep_dims) {
    return reduce(op, t, std::span<const std::size_t>(axes.begin(), axes.size()), keep_dims);
}

Tensor reduce_all(ReduceOp op, const Tensor& t) {
    std::vector<std::size_t> axes(t.rank());
    for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
    return reduce(op, t, axes, false);
}

real sum_all(const Tensor& t) {
    real s = 0;
    for (real v : t.data()) s += v;
    return s;
}

bool all_finite(const Tensor& t) {
    for (real v : t.data())
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace gnet
