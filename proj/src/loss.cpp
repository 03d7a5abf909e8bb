#include <cmath>

#include "gnet/trainer.hpp"

namespace gnet {

LossResult sparse_softmax_ce(const Tensor& logits, std::span<const std::uint32_t> labels) {
    if (logits.rank() != 2) throw ShapeError("sparse_softmax_ce: logits must be [n, classes], got " +
                                             shape_str(logits.shape()));
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    if (labels.size() != n) throw ShapeError("sparse_softmax_ce: " + std::to_string(labels.size()) +
                                             " labels for " + std::to_string(n) + " rows");
    LossResult out{0, Tensor({n, k})};
    long double total = 0;
    for (std::size_t b = 0; b < n; ++b) {
        if (labels[b] >= k) throw ValueError("sparse_softmax_ce: label " + std::to_string(labels[b]) +
                                             " outside [0, " + std::to_string(k) + ")");
        const real* row = logits.ptr() + b * k;
        real mx = row[0];
        for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, row[c]);
        real sum = 0;
        for (std::size_t c = 0; c < k; ++c) sum += std::exp(row[c] - mx);
        const real lse = mx + std::log(sum);
        total += lse - row[labels[b]];
        real* d = out.dlogits.ptr() + b * k;
        for (std::size_t c = 0; c < k; ++c) {
            d[c] = (std::exp(row[c] - lse) - (c == labels[b] ? real(1) : real(0))) / real(n);
        }
    }
    out.loss = real(total / n);
    return out;
}

std::vector<std::uint32_t> predict(const Tensor& logits) {
    if (logits.rank() != 2) throw ShapeError("predict: logits must be [n, classes]");
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    std::vector<std::uint32_t> out(n);
    for (std::size_t b = 0; b < n; ++b) {
        const real* row = logits.ptr() + b * k;
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (row[c] > row[best]) best = c;
        out[b] = std::uint32_t(best);
    }
    return out;
}

real accuracy(const Tensor& logits, std::span<const std::uint32_t> labels) {
    const auto pred = predict(logits);
    if (labels.size() != pred.size()) throw ShapeError("accuracy: label count does not match logits");
    if (pred.empty()) return 0;
    std::size_t hits = 0;
    for (std::size_t b = 0; b < pred.size(); ++b) hits += pred[b] == labels[b];
    return real(hits) / real(pred.size());
}

}  // namespace gnet
