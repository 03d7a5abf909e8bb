#pragma once

#include <array>
#include <cstdint>

#include "gnet/tensor.hpp"

namespace gnet {

/// Counter-based generator (Philox4x32-10). The (seed, stream) pair selects an
/// independent sequence; `counter` indexes 128-bit blocks within it, so a
/// stream can be reconstructed at any position without replaying draws.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream = 0, std::uint64_t counter = 0)
        : seed_(seed), stream_(stream), counter_(counter) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t counter() const { return counter_; }

    /// Child stream keyed by `id`; the parent is untouched.
    RngStream derive(std::uint64_t id) const;

    std::uint32_t next_u32();
    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform();
    double uniform(double lo, double hi);
    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n);
    bool bernoulli(double p);
    /// Standard normal via Box-Muller; consumes two uniforms per call.
    double normal();

    static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

private:
    void refill();

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_;
    std::array<std::uint32_t, 4> block_{};
    unsigned used_ = 4;
};

/// Splitmix64 finalizer, used for stream-id derivation.
std::uint64_t mix64(std::uint64_t x);

Tensor draw_normal(RngStream& rng, const Shape& shape, real mu, real sigma);

}  // namespace gnet
