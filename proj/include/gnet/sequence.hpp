#pragma once

#include <span>
#include <vector>

#include "gnet/layers.hpp"

namespace gnet {

/// Gate blocks along the 4*hidden axis, in this order.
enum LstmGate : std::size_t { gate_input = 0, gate_forget = 1, gate_cell = 2, gate_output = 3 };

struct LstmParams {
    Tensor W;     // [d_in, 4*hidden]
    Tensor U;     // [hidden, 4*hidden]
    Tensor bias;  // [4*hidden]

    std::size_t hidden() const { return U.dim(0); }
};

/// Zero-padded features with prefix-contiguous validity.
struct SequenceBatch {
    Tensor features;  // [n, t_max, d_in]
    std::vector<std::size_t> lengths;

    std::size_t batch() const { return features.dim(0); }
    std::size_t steps() const { return features.dim(1); }
    /// [n, t_max] with 1 at valid steps.
    Tensor mask() const;
    /// Throws unless lengths fit t_max and padded features are exactly zero.
    void validate() const;
};

Tensor mask_from_lengths(std::span<const std::size_t> lengths, std::size_t steps);

struct LstmCache {
    Tensor x;      // [n, t, d_in]
    Tensor h;      // [n, t+1, hidden], h[:,0] = 0
    Tensor c;      // [n, t+1, hidden]
    Tensor gates;  // [n, t, 4*hidden] post-nonlinearity (i, f, g, o)
    Tensor tanh_c;
    Tensor W;
    Tensor U;
    std::vector<std::size_t> lengths;
    CacheToken token;
};

struct LstmResult {
    Tensor outputs;  // [n, t, hidden], zero at masked steps
    LstmCache cache;
};

struct LstmGrads {
    Tensor dx;
    Tensor dW;
    Tensor dU;
    Tensor dbias;
};

/// h0 = c0 = 0. At masked steps the state is carried through unchanged.
LstmResult lstm_forward(const SequenceBatch& seq, const LstmParams& p);
LstmGrads lstm_backward(const Tensor& doutputs, LstmCache& cache);

// ---------------------------------------------------------------------------
// Per-step linear head followed by a mean over valid steps.

struct TemporalHeadCache {
    Shape outputs_shape;
    std::vector<std::size_t> lengths;
    DenseCache dense;
    CacheToken token;
};

struct TemporalHeadResult {
    Tensor logits;  // [n, classes]
    TemporalHeadCache cache;
};

struct TemporalHeadGrads {
    Tensor doutputs;
    Tensor dweight;
    Tensor dbias;
};

/// Copies the valid steps of [n, t, d] into a compact [rows, d] block in
/// (sample, step) order, and the inverse scatter (masked steps zero).
Tensor gather_valid_steps(const Tensor& seq, std::span<const std::size_t> lengths);
Tensor scatter_valid_steps(const Tensor& rows, std::span<const std::size_t> lengths, std::size_t steps);

TemporalHeadResult temporal_mean_logits(const Tensor& outputs, std::span<const std::size_t> lengths,
                                        const DenseParams& head);
TemporalHeadGrads temporal_mean_logits_backward(const Tensor& dlogits, TemporalHeadCache& cache);

}  // namespace gnet
