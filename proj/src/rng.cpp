#include "gnet/rng.hpp"

#include <cmath>
#include <numbers>

namespace gnet {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::array<std::uint32_t, 4> RngStream::philox(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kW0;
            key[1] += kW1;
        }
        const std::uint64_t p0 = std::uint64_t(kM0) * ctr[0];
        const std::uint64_t p1 = std::uint64_t(kM1) * ctr[2];
        ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
               std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
    }
    return ctr;
}

RngStream RngStream::derive(std::uint64_t id) const {
    return RngStream(seed_, mix64(stream_ ^ mix64(id + 0x632BE59BD9B4E019ull)), 0);
}

void RngStream::refill() {
    block_ = philox({std::uint32_t(counter_), std::uint32_t(counter_ >> 32), std::uint32_t(stream_),
                     std::uint32_t(stream_ >> 32)},
                    {std::uint32_t(seed_), std::uint32_t(seed_ >> 32)});
    ++counter_;
    used_ = 0;
}

std::uint32_t RngStream::next_u32() {
    if (used_ == 4) refill();
    return block_[used_++];
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
}

double RngStream::uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
    if (n <= 1) return 0;
    return std::uint64_t((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

bool RngStream::bernoulli(double p) { return uniform() < p; }

double RngStream::normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor draw_normal(RngStream& rng, const Shape& shape, real mu, real sigma) {
    if (!(sigma >= 0)) throw ValueError("draw_normal: sigma must be >= 0, got " + std::to_string(sigma));
    Tensor out(shape, mu);
    if (sigma == 0) return out;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = mu + sigma * real(rng.normal());
    return out;
}

}  // namespace gnet
