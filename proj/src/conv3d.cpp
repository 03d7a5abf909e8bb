#include <algorithm>

#include "gnet/layers.hpp"

namespace gnet {

namespace {

struct ConvGeometry {
    std::size_t n, t, h, w, cin;
    std::size_t kt, kh, kw, cout;
    std::size_t pt, ph, pw;

    std::size_t patch() const { return kt * kh * kw * cin; }
    std::size_t frame_in() const { return h * w * cin; }
    std::size_t frame_out() const { return h * w * cout; }
};

ConvGeometry geometry(const Tensor& x, const Tensor& kernel) {
    if (x.rank() != 5) throw ShapeError("conv3d: input must be [n,t,h,w,c], got " + shape_str(x.shape()));
    if (kernel.rank() != 5) {
        throw ShapeError("conv3d: kernel must be [kt,kh,kw,c_in,c_out], got " + shape_str(kernel.shape()));
    }
    if (kernel.dim(3) != x.dim(4)) {
        throw ShapeError("conv3d: input channels " + std::to_string(x.dim(4)) + " do not match kernel " +
                         shape_str(kernel.shape()));
    }
    ConvGeometry g{x.dim(0),      x.dim(1),      x.dim(2),      x.dim(3),      x.dim(4), kernel.dim(0),
                   kernel.dim(1), kernel.dim(2), kernel.dim(4), 0,             0,        0};
    g.pt = (g.kt - 1) / 2;
    g.ph = (g.kh - 1) / 2;
    g.pw = (g.kw - 1) / 2;
    return g;
}

std::vector<std::size_t> resolve_lengths(std::span<const std::size_t> lengths, const ConvGeometry& g) {
    if (lengths.empty()) return std::vector<std::size_t>(g.n, g.t);
    if (lengths.size() != g.n) {
        throw ShapeError("conv3d: " + std::to_string(lengths.size()) + " lengths for batch of " + std::to_string(g.n));
    }
    std::vector<std::size_t> out(lengths.begin(), lengths.end());
    for (std::size_t& len : out) len = std::min(len, g.t);
    return out;
}

// Patch matrix [len*h*w, patch] of sample `b`; column order (dt, di, dj, ci)
// matches the kernel layout, so the kernel is directly the [patch, c_out] operand.
// For fixed (dt, di) the (dj, ci) block is one contiguous run of the source row.
void im2col(const real* x, const ConvGeometry& g, std::size_t len, std::vector<real>& cols) {
    const std::size_t run = g.kw * g.cin;
    cols.resize(len * g.h * g.w * g.patch());
    real* dst = cols.data();
    for (std::size_t tau = 0; tau < len; ++tau)
        for (std::size_t i = 0; i < g.h; ++i)
            for (std::size_t j = 0; j < g.w; ++j) {
                const std::ptrdiff_t j0 = std::ptrdiff_t(j) - std::ptrdiff_t(g.pw);
                const bool inner = j0 >= 0 && j0 + std::ptrdiff_t(g.kw) <= std::ptrdiff_t(g.w);
                for (std::size_t dt = 0; dt < g.kt; ++dt) {
                    const std::ptrdiff_t ts = std::ptrdiff_t(tau + dt) - std::ptrdiff_t(g.pt);
                    const bool t_ok = ts >= 0 && ts < std::ptrdiff_t(len);
                    for (std::size_t di = 0; di < g.kh; ++di, dst += run) {
                        const std::ptrdiff_t is = std::ptrdiff_t(i + di) - std::ptrdiff_t(g.ph);
                        if (!t_ok || is < 0 || is >= std::ptrdiff_t(g.h)) {
                            std::fill_n(dst, run, real(0));
                            continue;
                        }
                        const real* row = x + (std::size_t(ts) * g.h + std::size_t(is)) * g.w * g.cin;
                        if (inner) {
                            std::copy_n(row + std::size_t(j0) * g.cin, run, dst);
                            continue;
                        }
                        for (std::size_t dj = 0; dj < g.kw; ++dj) {
                            const std::ptrdiff_t js = j0 + std::ptrdiff_t(dj);
                            real* d = dst + dj * g.cin;
                            if (js >= 0 && js < std::ptrdiff_t(g.w)) {
                                std::copy_n(row + std::size_t(js) * g.cin, g.cin, d);
                            } else {
                                std::fill_n(d, g.cin, real(0));
                            }
                        }
                    }
                }
            }
}

void col2im(const std::vector<real>& dcols, const ConvGeometry& g, std::size_t len, real* dx) {
    const std::size_t run = g.kw * g.cin;
    const real* src = dcols.data();
    for (std::size_t tau = 0; tau < len; ++tau)
        for (std::size_t i = 0; i < g.h; ++i)
            for (std::size_t j = 0; j < g.w; ++j) {
                const std::ptrdiff_t j0 = std::ptrdiff_t(j) - std::ptrdiff_t(g.pw);
                const bool inner = j0 >= 0 && j0 + std::ptrdiff_t(g.kw) <= std::ptrdiff_t(g.w);
                for (std::size_t dt = 0; dt < g.kt; ++dt) {
                    const std::ptrdiff_t ts = std::ptrdiff_t(tau + dt) - std::ptrdiff_t(g.pt);
                    const bool t_ok = ts >= 0 && ts < std::ptrdiff_t(len);
                    for (std::size_t di = 0; di < g.kh; ++di, src += run) {
                        const std::ptrdiff_t is = std::ptrdiff_t(i + di) - std::ptrdiff_t(g.ph);
                        if (!t_ok || is < 0 || is >= std::ptrdiff_t(g.h)) continue;
                        real* row = dx + (std::size_t(ts) * g.h + std::size_t(is)) * g.w * g.cin;
                        if (inner) {
                            real* d = row + std::size_t(j0) * g.cin;
                            for (std::size_t k = 0; k < run; ++k) d[k] += src[k];
                            continue;
                        }
                        for (std::size_t dj = 0; dj < g.kw; ++dj) {
                            const std::ptrdiff_t js = j0 + std::ptrdiff_t(dj);
                            if (js < 0 || js >= std::ptrdiff_t(g.w)) continue;
                            real* d = row + std::size_t(js) * g.cin;
                            for (std::size_t c = 0; c < g.cin; ++c) d[c] += src[dj * g.cin + c];
                        }
                    }
                }
            }
}

}  // namespace

Conv3DResult conv3d_forward(const Tensor& x, const Conv3DParams& p, std::span<const std::size_t> lengths) {
    const ConvGeometry g = geometry(x, p.kernel);
    if (p.bias.numel() != g.cout) {
        throw ShapeError("conv3d: bias " + shape_str(p.bias.shape()) + " does not match c_out " +
                         std::to_string(g.cout));
    }
    Conv3DResult res{Tensor({g.n, g.t, g.h, g.w, g.cout}), {}};
    res.cache.lengths = resolve_lengths(lengths, g);

    std::vector<real> cols;
    const std::size_t patch = g.patch();
    for (std::size_t b = 0; b < g.n; ++b) {
        const std::size_t len = res.cache.lengths[b];
        if (len == 0) continue;
        const std::size_t rows = len * g.h * g.w;
        real* y = res.y.ptr() + b * g.t * g.frame_out();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t o = 0; o < g.cout; ++o) y[r * g.cout + o] = p.bias[o];
        im2col(x.ptr() + b * g.t * g.frame_in(), g, len, cols);
        gemm(false, false, rows, g.cout, patch, real(1), cols.data(), patch, p.kernel.ptr(), g.cout, real(1), y,
             g.cout);
    }
    res.cache.input = x;
    res.cache.kernel = p.kernel;
    res.cache.token.arm();
    return res;
}

Conv3DGrads conv3d_backward(const Tensor& dy, Conv3DCache& cache, bool need_input_grad) {
    const ConvGeometry g = geometry(cache.input, cache.kernel);
    if (dy.shape() != Shape{g.n, g.t, g.h, g.w, g.cout}) {
        throw ShapeError("conv3d_backward: dy " + shape_str(dy.shape()) + " does not match forward output");
    }
    cache.token.consume("conv3d");

    Conv3DGrads grads{Tensor(cache.input.shape()), Tensor(cache.kernel.shape()), Tensor({g.cout})};
    const std::size_t patch = g.patch();
    std::vector<real> cols, dcols;
    for (std::size_t b = 0; b < g.n; ++b) {
        const std::size_t len = cache.lengths[b];
        if (len == 0) continue;
        const std::size_t rows = len * g.h * g.w;
        const real* dyb = dy.ptr() + b * g.t * g.frame_out();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t o = 0; o < g.cout; ++o) grads.dbias[o] += dyb[r * g.cout + o];

        im2col(cache.input.ptr() + b * g.t * g.frame_in(), g, len, cols);
        gemm(true, false, patch, g.cout, rows, real(1), cols.data(), patch, dyb, g.cout, real(1),
             grads.dkernel.ptr(), g.cout);
        if (need_input_grad) {
            dcols.resize(rows * patch);
            gemm(false, true, rows, patch, g.cout, real(1), dyb, g.cout, cache.kernel.ptr(), g.cout, real(0),
                 dcols.data(), patch);
            col2im(dcols, g, len, grads.dx.ptr() + b * g.t * g.frame_in());
        }
    }
    return grads;
}

}  // namespace gnet
