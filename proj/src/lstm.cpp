#include <cmath>

#include "gnet/sequence.hpp"

namespace gnet {

namespace {

real sigmoid(real x) { return real(1) / (real(1) + std::exp(-x)); }

void check_lengths(std::span<const std::size_t> lengths, std::size_t n, std::size_t steps, const char* who) {
    if (lengths.size() != n) {
        throw ShapeError(std::string(who) + ": " + std::to_string(lengths.size()) + " lengths for batch of " +
                         std::to_string(n));
    }
    for (std::size_t len : lengths) {
        if (len > steps) {
            throw ShapeError(std::string(who) + ": length " + std::to_string(len) + " exceeds " +
                             std::to_string(steps) + " steps");
        }
    }
}

}  // namespace

Tensor mask_from_lengths(std::span<const std::size_t> lengths, std::size_t steps) {
    Tensor m({lengths.size(), steps});
    for (std::size_t b = 0; b < lengths.size(); ++b)
        for (std::size_t t = 0; t < steps && t < lengths[b]; ++t) m[b * steps + t] = 1;
    return m;
}

Tensor SequenceBatch::mask() const { return mask_from_lengths(lengths, steps()); }

void SequenceBatch::validate() const {
    if (features.rank() != 3) throw ShapeError("sequence batch features must be [n,t,d], got " +
                                               shape_str(features.shape()));
    check_lengths(lengths, batch(), steps(), "sequence batch");
    const std::size_t t = steps(), d = features.dim(2);
    for (std::size_t b = 0; b < batch(); ++b)
        for (std::size_t s = lengths[b]; s < t; ++s)
            for (std::size_t k = 0; k < d; ++k)
                if (features[(b * t + s) * d + k] != 0) {
                    throw ValueError("sequence batch: nonzero feature at masked step " + std::to_string(s) +
                                     " of sample " + std::to_string(b));
                }
}

LstmResult lstm_forward(const SequenceBatch& seq, const LstmParams& p) {
    const Tensor& x = seq.features;
    if (x.rank() != 3) throw ShapeError("lstm: features must be [n,t,d_in], got " + shape_str(x.shape()));
    const std::size_t n = x.dim(0), t = x.dim(1), din = x.dim(2);
    if (p.U.rank() != 2 || p.U.dim(1) != 4 * p.U.dim(0)) {
        throw ShapeError("lstm: recurrent weights must be [h,4h], got " + shape_str(p.U.shape()));
    }
    const std::size_t H = p.hidden(), G = 4 * H;
    if (p.W.shape() != Shape{din, G}) {
        throw ShapeError("lstm: input weights " + shape_str(p.W.shape()) + " do not match d_in " +
                         std::to_string(din) + " and hidden " + std::to_string(H));
    }
    if (p.bias.numel() != G) throw ShapeError("lstm: bias " + shape_str(p.bias.shape()) + " for 4h = " +
                                              std::to_string(G));
    check_lengths(seq.lengths, n, t, "lstm");

    LstmResult res{Tensor({n, t, H}), {}};
    LstmCache& cache = res.cache;
    cache.x = x;
    cache.h = Tensor({n, t + 1, H});
    cache.c = Tensor({n, t + 1, H});
    cache.gates = Tensor({n, t, G});
    cache.tanh_c = Tensor({n, t, H});
    cache.W = p.W;
    cache.U = p.U;
    cache.lengths = seq.lengths;

    Tensor pre({n, G});
    const std::size_t hstride = (t + 1) * H;
    for (std::size_t s = 0; s < t; ++s) {
        bool any = false;
        for (std::size_t b = 0; b < n; ++b) any = any || s < seq.lengths[b];
        if (!any) {
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t k = 0; k < H; ++k) {
                    cache.h[b * hstride + (s + 1) * H + k] = cache.h[b * hstride + s * H + k];
                    cache.c[b * hstride + (s + 1) * H + k] = cache.c[b * hstride + s * H + k];
                }
            continue;
        }
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t k = 0; k < G; ++k) pre[b * G + k] = p.bias[k];
        gemm(false, false, n, G, din, real(1), x.ptr() + s * din, t * din, p.W.ptr(), G, real(1), pre.ptr(), G);
        gemm(false, false, n, G, H, real(1), cache.h.ptr() + s * H, hstride, p.U.ptr(), G, real(1), pre.ptr(), G);

        for (std::size_t b = 0; b < n; ++b) {
            const real* hp = cache.h.ptr() + b * hstride + s * H;
            const real* cp = cache.c.ptr() + b * hstride + s * H;
            real* hn = cache.h.ptr() + b * hstride + (s + 1) * H;
            real* cn = cache.c.ptr() + b * hstride + (s + 1) * H;
            if (s >= seq.lengths[b]) {
                for (std::size_t k = 0; k < H; ++k) {
                    hn[k] = hp[k];
                    cn[k] = cp[k];
                }
                continue;
            }
            const real* z = pre.ptr() + b * G;
            real* gt = cache.gates.ptr() + (b * t + s) * G;
            real* tc = cache.tanh_c.ptr() + (b * t + s) * H;
            real* out = res.outputs.ptr() + (b * t + s) * H;
            for (std::size_t k = 0; k < H; ++k) {
                const real ig = sigmoid(z[gate_input * H + k]);
                const real fg = sigmoid(z[gate_forget * H + k]);
                const real gg = std::tanh(z[gate_cell * H + k]);
                const real og = sigmoid(z[gate_output * H + k]);
                gt[gate_input * H + k] = ig;
                gt[gate_forget * H + k] = fg;
                gt[gate_cell * H + k] = gg;
                gt[gate_output * H + k] = og;
                cn[k] = fg * cp[k] + ig * gg;
                tc[k] = std::tanh(cn[k]);
                hn[k] = og * tc[k];
                out[k] = hn[k];
            }
        }
    }
    cache.token.arm();
    return res;
}

LstmGrads lstm_backward(const Tensor& doutputs, LstmCache& cache) {
    const std::size_t n = cache.x.dim(0), t = cache.x.dim(1), din = cache.x.dim(2);
    const std::size_t H = cache.U.dim(0), G = 4 * H;
    if (doutputs.shape() != Shape{n, t, H}) {
        throw ShapeError("lstm_backward: doutputs " + shape_str(doutputs.shape()) + " does not match outputs");
    }
    cache.token.consume("lstm");

    LstmGrads g{Tensor(cache.x.shape()), Tensor(cache.W.shape()), Tensor(cache.U.shape()), Tensor({G})};
    Tensor dh_next({n, H}), dc_next({n, H}), dgates({n, G}), dh_prev({n, H});
    const std::size_t hstride = (t + 1) * H;
    for (std::size_t s = t; s-- > 0;) {
        bool any = false;
        for (std::size_t b = 0; b < n; ++b) any = any || s < cache.lengths[b];
        if (!any) continue;
        dgates.fill(real(0));
        for (std::size_t b = 0; b < n; ++b) {
            if (s >= cache.lengths[b]) continue;
            const real* gt = cache.gates.ptr() + (b * t + s) * G;
            const real* tc = cache.tanh_c.ptr() + (b * t + s) * H;
            const real* cp = cache.c.ptr() + b * hstride + s * H;
            const real* dout = doutputs.ptr() + (b * t + s) * H;
            real* dg = dgates.ptr() + b * G;
            for (std::size_t k = 0; k < H; ++k) {
                const real ig = gt[gate_input * H + k], fg = gt[gate_forget * H + k];
                const real gg = gt[gate_cell * H + k], og = gt[gate_output * H + k];
                const real dh = dout[k] + dh_next[b * H + k];
                const real dc = dc_next[b * H + k] + dh * og * (real(1) - tc[k] * tc[k]);
                dg[gate_input * H + k] = dc * gg * ig * (real(1) - ig);
                dg[gate_forget * H + k] = dc * cp[k] * fg * (real(1) - fg);
                dg[gate_cell * H + k] = dc * ig * (real(1) - gg * gg);
                dg[gate_output * H + k] = dh * tc[k] * og * (real(1) - og);
                dc_next[b * H + k] = dc * fg;
            }
        }
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t k = 0; k < G; ++k) g.dbias[k] += dgates[b * G + k];
        gemm(true, false, din, G, n, real(1), cache.x.ptr() + s * din, t * din, dgates.ptr(), G, real(1), g.dW.ptr(),
             G);
        gemm(true, false, H, G, n, real(1), cache.h.ptr() + s * H, hstride, dgates.ptr(), G, real(1), g.dU.ptr(), G);
        gemm(false, true, n, din, G, real(1), dgates.ptr(), G, cache.W.ptr(), G, real(0), g.dx.ptr() + s * din,
             t * din);
        gemm(false, true, n, H, G, real(1), dgates.ptr(), G, cache.U.ptr(), G, real(0), dh_prev.ptr(), H);
        for (std::size_t b = 0; b < n; ++b) {
            if (s >= cache.lengths[b]) continue;
            for (std::size_t k = 0; k < H; ++k) dh_next[b * H + k] = dh_prev[b * H + k];
        }
    }
    return g;
}

Tensor gather_valid_steps(const Tensor& seq, std::span<const std::size_t> lengths) {
    if (seq.rank() < 3) throw ShapeError("gather_valid_steps: expects [n,t,...], got " + shape_str(seq.shape()));
    const std::size_t n = seq.dim(0), t = seq.dim(1), d = seq.numel() / (n * t);
    check_lengths(lengths, n, t, "gather_valid_steps");
    std::size_t rows = 0;
    for (std::size_t len : lengths) rows += len;
    if (rows == 0) throw ValueError("gather_valid_steps: batch has no valid steps");
    Tensor out({rows, d});
    std::size_t r = 0;
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t s = 0; s < lengths[b]; ++s, ++r)
            std::copy_n(seq.ptr() + (b * t + s) * d, d, out.ptr() + r * d);
    return out;
}

Tensor scatter_valid_steps(const Tensor& rows, std::span<const std::size_t> lengths, std::size_t steps) {
    const std::size_t d = rows.dim(1);
    Tensor out({lengths.size(), steps, d});
    std::size_t r = 0;
    for (std::size_t b = 0; b < lengths.size(); ++b)
        for (std::size_t s = 0; s < lengths[b]; ++s, ++r)
            std::copy_n(rows.ptr() + r * d, d, out.ptr() + (b * steps + s) * d);
    if (r != rows.dim(0)) throw ShapeError("scatter_valid_steps: row count does not match lengths");
    return out;
}

TemporalHeadResult temporal_mean_logits(const Tensor& outputs, std::span<const std::size_t> lengths,
                                        const DenseParams& head) {
    if (outputs.rank() != 3) throw ShapeError("temporal head: outputs must be [n,t,d], got " +
                                              shape_str(outputs.shape()));
    const std::size_t n = outputs.dim(0), t = outputs.dim(1);
    check_lengths(lengths, n, t, "temporal head");
    for (std::size_t b = 0; b < n; ++b) {
        if (lengths[b] == 0) throw ValueError("temporal head: sample " + std::to_string(b) + " has no valid frames");
    }
    DenseResult step = dense_forward(gather_valid_steps(outputs, lengths), head);
    const std::size_t classes = step.y.dim(1);

    TemporalHeadResult res{Tensor({n, classes}), {}};
    std::size_t r = 0;
    for (std::size_t b = 0; b < n; ++b) {
        real* out = res.logits.ptr() + b * classes;
        for (std::size_t s = 0; s < lengths[b]; ++s, ++r)
            for (std::size_t k = 0; k < classes; ++k) out[k] += step.y[r * classes + k];
        for (std::size_t k = 0; k < classes; ++k) out[k] /= real(lengths[b]);
    }
    res.cache.outputs_shape = outputs.shape();
    res.cache.lengths.assign(lengths.begin(), lengths.end());
    res.cache.dense = std::move(step.cache);
    res.cache.token.arm();
    return res;
}

TemporalHeadGrads temporal_mean_logits_backward(const Tensor& dlogits, TemporalHeadCache& cache) {
    const std::size_t n = cache.outputs_shape[0];
    const std::size_t classes = cache.dense.weight.dim(1);
    if (dlogits.shape() != Shape{n, classes}) {
        throw ShapeError("temporal head backward: dlogits " + shape_str(dlogits.shape()) + " does not match [" +
                         std::to_string(n) + "," + std::to_string(classes) + "]");
    }
    cache.token.consume("temporal head");
    Tensor dstep({cache.dense.x.dim(0), classes});
    std::size_t r = 0;
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t s = 0; s < cache.lengths[b]; ++s, ++r)
            for (std::size_t k = 0; k < classes; ++k)
                dstep[r * classes + k] = dlogits[b * classes + k] / real(cache.lengths[b]);
    DenseGrads dg = dense_backward(dstep, cache.dense);
    return {scatter_valid_steps(dg.dx, cache.lengths, cache.outputs_shape[1]), std::move(dg.dweight),
            std::move(dg.dbias)};
}

}  // namespace gnet
