#include "gnet/layers.hpp"

namespace gnet {

Tensor flatten(const Tensor& x) {
    if (x.rank() < 2) throw ShapeError("flatten: rank must be >= 2, got " + shape_str(x.shape()));
    return x.reshaped({x.dim(0), x.numel() / x.dim(0)});
}

Tensor unflatten(const Tensor& flat, const Shape& original) { return flat.reshaped(original); }

DenseResult dense_forward(const Tensor& x, const DenseParams& p) {
    if (x.rank() != 2 || p.weight.rank() != 2) {
        throw ShapeError("dense: expects [n,d_in] input and [d_in,d_out] weight, got " + shape_str(x.shape()) +
                         " and " + shape_str(p.weight.shape()));
    }
    const std::size_t n = x.dim(0), din = x.dim(1), dout = p.weight.dim(1);
    if (p.weight.dim(0) != din) {
        throw ShapeError("dense: input width " + std::to_string(din) + " does not match weight " +
                         shape_str(p.weight.shape()));
    }
    if (p.bias.numel() != dout) throw ShapeError("dense: bias " + shape_str(p.bias.shape()) + " for d_out " +
                                                 std::to_string(dout));
    DenseResult res{Tensor({n, dout}), {}};
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t o = 0; o < dout; ++o) res.y[r * dout + o] = p.bias[o];
    gemm(false, false, n, dout, din, real(1), x.ptr(), din, p.weight.ptr(), dout, real(1), res.y.ptr(), dout);
    res.cache.x = x;
    res.cache.weight = p.weight;
    res.cache.token.arm();
    return res;
}

DenseGrads dense_backward(const Tensor& dy, DenseCache& cache) {
    const std::size_t n = cache.x.dim(0), din = cache.x.dim(1), dout = cache.weight.dim(1);
    if (dy.shape() != Shape{n, dout}) {
        throw ShapeError("dense_backward: dy " + shape_str(dy.shape()) + " does not match output [" +
                         std::to_string(n) + "," + std::to_string(dout) + "]");
    }
    cache.token.consume("dense");
    DenseGrads g{Tensor({n, din}), Tensor({din, dout}), Tensor({dout})};
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t o = 0; o < dout; ++o) g.dbias[o] += dy[r * dout + o];
    gemm(true, false, din, dout, n, real(1), cache.x.ptr(), din, dy.ptr(), dout, real(0), g.dweight.ptr(), dout);
    gemm(false, true, n, din, dout, real(1), dy.ptr(), dout, cache.weight.ptr(), dout, real(0), g.dx.ptr(), din);
    return g;
}

}  // namespace gnet
