#include <cmath>

#include "gnet/layers.hpp"

namespace gnet {

namespace {

std::size_t channels_of(const Tensor& x, const BatchNormParams& p) {
    if (x.rank() < 1) throw ShapeError("batchnorm: input must have rank >= 1");
    const std::size_t c = x.dim(x.rank() - 1);
    if (p.gamma.numel() != c || p.beta.numel() != c || p.running_mean.numel() != c || p.running_var.numel() != c) {
        throw ShapeError("batchnorm: parameters sized " + shape_str(p.gamma.shape()) + " for input " +
                         shape_str(x.shape()));
    }
    return c;
}

}  // namespace

BatchNormResult batchnorm_forward_pure(const Tensor& x, const BatchNormParams& p, Mode mode,
                                       std::span<const std::uint8_t> group_valid) {
    const std::size_t c = channels_of(x, p);
    const std::size_t rows = x.numel() / c;
    std::size_t group_rows = rows;
    std::vector<std::uint8_t> valid(1, 1);
    if (!group_valid.empty()) {
        if (rows % group_valid.size() != 0) {
            throw ShapeError("batchnorm: " + std::to_string(group_valid.size()) + " mask groups do not divide " +
                             std::to_string(rows) + " rows");
        }
        group_rows = rows / group_valid.size();
        valid.assign(group_valid.begin(), group_valid.end());
    }
    auto row_valid = [&](std::size_t r) { return valid[r / group_rows] != 0; };

    BatchNormResult res{Tensor(x.shape()), {}};
    BatchNormCache& cache = res.cache;
    cache.mode = mode;
    cache.input_shape = x.shape();
    cache.group_valid = valid;
    cache.group_rows = group_rows;
    cache.gamma = p.gamma;
    cache.x_hat = Tensor({rows, c});
    cache.inv_std = Tensor({c});

    Tensor mean({c}), var({c});
    if (mode == Mode::train) {
        std::size_t count = 0;
        for (std::size_t r = 0; r < rows; ++r) {
            if (!row_valid(r)) continue;
            ++count;
            for (std::size_t k = 0; k < c; ++k) mean[k] += x[r * c + k];
        }
        if (count == 0) throw ValueError("batchnorm: no valid rows to normalize");
        for (std::size_t k = 0; k < c; ++k) mean[k] /= real(count);
        for (std::size_t r = 0; r < rows; ++r) {
            if (!row_valid(r)) continue;
            for (std::size_t k = 0; k < c; ++k) {
                const real d = x[r * c + k] - mean[k];
                var[k] += d * d;
            }
        }
        for (std::size_t k = 0; k < c; ++k) var[k] /= real(count);
        cache.batch_mean = mean;
        cache.batch_var = var;
    } else {
        mean = p.running_mean;
        var = p.running_var;
    }

    for (std::size_t k = 0; k < c; ++k) cache.inv_std[k] = real(1) / std::sqrt(var[k] + p.epsilon);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!row_valid(r)) continue;
        for (std::size_t k = 0; k < c; ++k) {
            const real xh = (x[r * c + k] - mean[k]) * cache.inv_std[k];
            cache.x_hat[r * c + k] = xh;
            res.y[r * c + k] = p.gamma[k] * xh + p.beta[k];
        }
    }
    cache.token.arm();
    return res;
}

void batchnorm_update_running(BatchNormParams& p, const BatchNormCache& cache) {
    if (cache.mode != Mode::train) return;
    const std::size_t c = p.running_mean.numel();
    for (std::size_t k = 0; k < c; ++k) {
        p.running_mean[k] = p.momentum * p.running_mean[k] + (real(1) - p.momentum) * cache.batch_mean[k];
        p.running_var[k] = p.momentum * p.running_var[k] + (real(1) - p.momentum) * cache.batch_var[k];
    }
}

BatchNormResult batchnorm_forward(const Tensor& x, BatchNormParams& p, Mode mode,
                                  std::span<const std::uint8_t> group_valid) {
    BatchNormResult res = batchnorm_forward_pure(x, p, mode, group_valid);
    batchnorm_update_running(p, res.cache);
    return res;
}

BatchNormGrads batchnorm_backward(const Tensor& dy, BatchNormCache& cache) {
    if (cache.mode != Mode::train) throw Error("batchnorm_backward: cache was produced in infer mode");
    if (dy.shape() != cache.input_shape) {
        throw ShapeError("batchnorm_backward: dy " + shape_str(dy.shape()) + " does not match input " +
                         shape_str(cache.input_shape));
    }
    cache.token.consume("batchnorm");
    const std::size_t c = cache.gamma.numel();
    const std::size_t rows = dy.numel() / c;
    auto row_valid = [&](std::size_t r) { return cache.group_valid[r / cache.group_rows] != 0; };

    BatchNormGrads g{Tensor(cache.input_shape), Tensor({c}), Tensor({c})};
    std::size_t count = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (!row_valid(r)) continue;
        ++count;
        for (std::size_t k = 0; k < c; ++k) {
            g.dbeta[k] += dy[r * c + k];
            g.dgamma[k] += dy[r * c + k] * cache.x_hat[r * c + k];
        }
    }
    const real inv_n = real(1) / real(count);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!row_valid(r)) continue;
        for (std::size_t k = 0; k < c; ++k) {
            const real scale = cache.gamma[k] * cache.inv_std[k];
            g.dx[r * c + k] =
                scale * (dy[r * c + k] - inv_n * g.dbeta[k] - cache.x_hat[r * c + k] * inv_n * g.dgamma[k]);
        }
    }
    return g;
}

}  // namespace gnet
