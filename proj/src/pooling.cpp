#include "gnet/layers.hpp"

namespace gnet {

std::size_t pooled_extent(std::size_t extent, std::size_t window, std::size_t stride) {
    if (window > extent) return 0;
    return (extent - window) / stride + 1;
}

MaxPoolResult maxpool3d_forward(const Tensor& x, Window3 window, Window3 stride) {
    if (x.rank() != 5) throw ShapeError("maxpool3d: input must be [n,t,h,w,c], got " + shape_str(x.shape()));
    if (window.t == 0 || window.h == 0 || window.w == 0 || stride.t == 0 || stride.h == 0 || stride.w == 0) {
        throw ValueError("maxpool3d: window and stride must be positive");
    }
    const std::size_t n = x.dim(0), t = x.dim(1), h = x.dim(2), w = x.dim(3), c = x.dim(4);
    if (window.t > t || window.h > h || window.w > w) {
        throw ShapeError("maxpool3d: window (" + std::to_string(window.t) + "," + std::to_string(window.h) + "," +
                         std::to_string(window.w) + ") larger than input " + shape_str(x.shape()));
    }
    const std::size_t to = pooled_extent(t, window.t, stride.t);
    const std::size_t ho = pooled_extent(h, window.h, stride.h);
    const std::size_t wo = pooled_extent(w, window.w, stride.w);

    MaxPoolResult res{Tensor({n, to, ho, wo, c}), {}};
    res.cache.input_shape = x.shape();
    res.cache.output_shape = res.y.shape();
    res.cache.argmax.resize(res.y.numel());
    std::size_t out = 0;
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ot = 0; ot < to; ++ot)
            for (std::size_t oi = 0; oi < ho; ++oi)
                for (std::size_t oj = 0; oj < wo; ++oj)
                    for (std::size_t k = 0; k < c; ++k, ++out) {
                        std::size_t best = 0;
                        bool have = false;
                        for (std::size_t dt = 0; dt < window.t; ++dt)
                            for (std::size_t di = 0; di < window.h; ++di)
                                for (std::size_t dj = 0; dj < window.w; ++dj) {
                                    const std::size_t idx =
                                        (((b * t + ot * stride.t + dt) * h + oi * stride.h + di) * w + oj * stride.w +
                                         dj) * c + k;
                                    // strict '>' keeps the first maximum in window order
                                    if (!have || x[idx] > x[best]) {
                                        best = idx;
                                        have = true;
                                    }
                                }
                        res.y[out] = x[best];
                        res.cache.argmax[out] = best;
                    }
    res.cache.token.arm();
    return res;
}

Tensor maxpool3d_backward(const Tensor& dy, MaxPoolCache& cache) {
    if (dy.shape() != cache.output_shape) {
        throw ShapeError("maxpool3d_backward: dy " + shape_str(dy.shape()) + " does not match output " +
                         shape_str(cache.output_shape));
    }
    cache.token.consume("maxpool3d");
    Tensor dx(cache.input_shape);
    for (std::size_t i = 0; i < dy.numel(); ++i) dx[cache.argmax[i]] += dy[i];
    return dx;
}

}  // namespace gnet
