#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>

#include "gnet/rng.hpp"
#include "gnet/tensor.hpp"

namespace gnet::testing {

inline Tensor random_tensor(const Shape& shape, RngStream& rng, double lo = -1, double hi = 1) {
    Tensor t(shape);
    for (real& v : t.storage()) v = real(rng.uniform(lo, hi));
    return t;
}

inline double l2(const Tensor& a) {
    double s = 0;
    for (real v : a.data()) s += double(v) * double(v);
    return std::sqrt(s);
}

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double rel_error(const Tensor& a, const Tensor& b) {
    double num = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = double(a[i]) - double(b[i]);
        num += d * d;
    }
    const double den = std::max(l2(a), l2(b));
    return den == 0 ? 0 : std::sqrt(num) / den;
}

/// Central differences of `loss` with respect to every element of `x`.
inline Tensor numeric_grad(Tensor& x, const std::function<double()>& loss, double step = 1e-5) {
    Tensor g(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const real saved = x[i];
        x[i] = saved + real(step);
        const double up = loss();
        x[i] = saved - real(step);
        const double down = loss();
        x[i] = saved;
        g[i] = real((up - down) / (2 * step));
    }
    return g;
}

/// sum(w * y), the probe loss whose gradient with respect to y is w.
inline double weighted_sum(const Tensor& y, const Tensor& w) {
    double s = 0;
    for (std::size_t i = 0; i < y.numel(); ++i) s += double(y[i]) * double(w[i]);
    return s;
}

/// rel_error with the denominator floored at `scale`, for gradients that
/// vanish analytically and are pure roundoff.
inline double grad_error(const Tensor& a, const Tensor& b, double scale = 1e-7) {
    Tensor d(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) d[i] = a[i] - b[i];
    return l2(d) / std::max({l2(a), l2(b), scale});
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (std::size_t i = 0; i < a.numel(); ++i)
        if (std::memcmp(&a[i], &b[i], sizeof(real)) != 0) return false;
    return true;
}

}  // namespace gnet::testing
