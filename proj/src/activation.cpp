#include <cmath>

#include "gnet/layers.hpp"

namespace gnet {

namespace {

real sigmoid(real x) { return real(1) / (real(1) + std::exp(-x)); }

}  // namespace

real activation_value(Activation kind, real x) {
    switch (kind) {
        case Activation::swish: return x * sigmoid(x);
        case Activation::elu: return x >= 0 ? x : std::expm1(x);  // alpha = 1
        case Activation::linear: return x;
    }
    return x;
}

real activation_derivative(Activation kind, real x) {
    switch (kind) {
        case Activation::swish: {
            const real s = sigmoid(x);
            return s + x * s * (real(1) - s);
        }
        case Activation::elu: return x >= 0 ? real(1) : std::exp(x);
        case Activation::linear: return real(1);
    }
    return real(1);
}

ActivationResult activation_forward(Activation kind, const Tensor& x) {
    ActivationResult res{Tensor(x.shape()), {}};
    for (std::size_t i = 0; i < x.numel(); ++i) res.y[i] = activation_value(kind, x[i]);
    res.cache.kind = kind;
    res.cache.x = x;
    res.cache.token.arm();
    return res;
}

Tensor activation_backward(const Tensor& dy, ActivationCache& cache) {
    if (dy.shape() != cache.x.shape()) {
        throw ShapeError("activation_backward: dy " + shape_str(dy.shape()) + " does not match input " +
                         shape_str(cache.x.shape()));
    }
    cache.token.consume("activation");
    Tensor dx(dy.shape());
    for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] = dy[i] * activation_derivative(cache.kind, cache.x[i]);
    return dx;
}

}  // namespace gnet
