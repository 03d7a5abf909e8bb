#include "gnet/layers.hpp"

namespace gnet {

namespace {

void check_rate(real rate) {
    if (!(rate >= 0 && rate < 1)) throw ValueError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
}

}  // namespace

Tensor dropout_mask(const Shape& shape, real rate, RngStream& rng) {
    check_rate(rate);
    const real keep_scale = real(1) / (real(1) - rate);
    Tensor mask(shape);
    for (std::size_t i = 0; i < mask.numel(); ++i) mask[i] = rng.uniform() < double(rate) ? real(0) : keep_scale;
    return mask;
}

DropoutResult dropout_forward(const Tensor& x, real rate, Mode mode, RngStream& rng) {
    check_rate(rate);
    DropoutResult res{x, {}};
    res.cache.token.arm();
    if (mode == Mode::infer || rate == 0) return res;
    res.cache.mask = dropout_mask(x.shape(), rate, rng);
    res.cache.identity = false;
    for (std::size_t i = 0; i < x.numel(); ++i) res.y[i] = x[i] * res.cache.mask[i];
    return res;
}

Tensor dropout_backward(const Tensor& dy, DropoutCache& cache) {
    cache.token.consume("dropout");
    if (cache.identity) return dy;
    if (dy.shape() != cache.mask.shape()) {
        throw ShapeError("dropout_backward: dy " + shape_str(dy.shape()) + " does not match mask " +
                         shape_str(cache.mask.shape()));
    }
    Tensor dx(dy.shape());
    for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] = dy[i] * cache.mask[i];
    return dx;
}

}  // namespace gnet
