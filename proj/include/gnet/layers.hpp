#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "gnet/rng.hpp"
#include "gnet/tensor.hpp"

namespace gnet {

enum class Mode { train, infer };

/// Tracks single use of a forward cache by its backward pass.
class CacheToken {
public:
    void consume(const char* layer) {
        if (!live_) throw Error(std::string(layer) + ": backward called on a consumed or empty cache");
        live_ = false;
    }
    void arm() { live_ = true; }
    bool live() const { return live_; }

private:
    bool live_ = false;
};

// ---------------------------------------------------------------------------
// Conv3D, stride 1, SAME zero padding.

struct Conv3DParams {
    Tensor kernel;  // [kt, kh, kw, c_in, c_out]
    Tensor bias;    // [c_out]
};

struct Conv3DCache {
    Tensor input;
    Tensor kernel;
    std::vector<std::size_t> lengths;
    CacheToken token;
};

struct Conv3DResult {
    Tensor y;
    Conv3DCache cache;
};

struct Conv3DGrads {
    Tensor dx;
    Tensor dkernel;
    Tensor dbias;
};

/// x: [n, t, h, w, c_in]. When `lengths` is given, frames at or beyond
/// lengths[b] are absent: they neither feed the window sums nor receive
/// output, and their output stays exactly zero.
Conv3DResult conv3d_forward(const Tensor& x, const Conv3DParams& p, std::span<const std::size_t> lengths = {});
Conv3DGrads conv3d_backward(const Tensor& dy, Conv3DCache& cache, bool need_input_grad = true);

// ---------------------------------------------------------------------------
// Batch normalization over every axis except the last.

struct BatchNormParams {
    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
    real momentum = real(0.9);
    real epsilon = real(1e-5);
};

struct BatchNormCache {
    Mode mode = Mode::infer;
    Tensor x_hat;    // [rows, c]
    Tensor inv_std;  // [c]
    Tensor gamma;
    Tensor batch_mean;
    Tensor batch_var;
    Shape input_shape;
    std::vector<std::uint8_t> group_valid;
    std::size_t group_rows = 0;
    CacheToken token;
};

struct BatchNormResult {
    Tensor y;
    BatchNormCache cache;
};

struct BatchNormGrads {
    Tensor dx;
    Tensor dgamma;
    Tensor dbeta;
};

/// Pure forward; leaves running statistics untouched. `group_valid`, when
/// non-empty, splits the leading rows into equal groups and excludes groups
/// flagged 0 from the statistics (their output is 0).
BatchNormResult batchnorm_forward_pure(const Tensor& x, const BatchNormParams& p, Mode mode,
                                       std::span<const std::uint8_t> group_valid = {});
/// running = momentum * running + (1 - momentum) * batch.
void batchnorm_update_running(BatchNormParams& p, const BatchNormCache& cache);
BatchNormResult batchnorm_forward(const Tensor& x, BatchNormParams& p, Mode mode,
                                  std::span<const std::uint8_t> group_valid = {});
BatchNormGrads batchnorm_backward(const Tensor& dy, BatchNormCache& cache);

// ---------------------------------------------------------------------------
// Max pooling over [t, h, w], valid windows.

struct Window3 {
    std::size_t t = 1;
    std::size_t h = 1;
    std::size_t w = 1;
    friend bool operator==(const Window3&, const Window3&) = default;
};

struct MaxPoolCache {
    Shape input_shape;
    Shape output_shape;
    std::vector<std::size_t> argmax;  // flat input index per output element
    CacheToken token;
};

struct MaxPoolResult {
    Tensor y;
    MaxPoolCache cache;
};

std::size_t pooled_extent(std::size_t extent, std::size_t window, std::size_t stride);
MaxPoolResult maxpool3d_forward(const Tensor& x, Window3 window, Window3 stride);
Tensor maxpool3d_backward(const Tensor& dy, MaxPoolCache& cache);

// ---------------------------------------------------------------------------
// Activations.

enum class Activation { swish, elu, linear };

real activation_value(Activation kind, real x);
real activation_derivative(Activation kind, real x);

struct ActivationCache {
    Activation kind = Activation::linear;
    Tensor x;
    CacheToken token;
};

struct ActivationResult {
    Tensor y;
    ActivationCache cache;
};

ActivationResult activation_forward(Activation kind, const Tensor& x);
Tensor activation_backward(const Tensor& dy, ActivationCache& cache);

// ---------------------------------------------------------------------------
// Inverted dropout.

struct DropoutCache {
    Tensor mask;  // 0 or 1/(1-rate); empty when the layer was an identity
    bool identity = true;
    CacheToken token;
};

struct DropoutResult {
    Tensor y;
    DropoutCache cache;
};

/// Keep-mask scaled by 1/(1-rate), one uniform draw per element in order.
Tensor dropout_mask(const Shape& shape, real rate, RngStream& rng);
DropoutResult dropout_forward(const Tensor& x, real rate, Mode mode, RngStream& rng);
Tensor dropout_backward(const Tensor& dy, DropoutCache& cache);

// ---------------------------------------------------------------------------
// Flatten.

Tensor flatten(const Tensor& x);
Tensor unflatten(const Tensor& flat, const Shape& original);

// ---------------------------------------------------------------------------
// Dense.

struct DenseParams {
    Tensor weight;  // [d_in, d_out]
    Tensor bias;    // [d_out]
};

struct DenseCache {
    Tensor x;
    Tensor weight;
    CacheToken token;
};

struct DenseResult {
    Tensor y;
    DenseCache cache;
};

struct DenseGrads {
    Tensor dx;
    Tensor dweight;
    Tensor dbias;
};

DenseResult dense_forward(const Tensor& x, const DenseParams& p);
DenseGrads dense_backward(const Tensor& dy, DenseCache& cache);

}  // namespace gnet
