#include <cmath>
#include <numbers>

#include "gnet/dataset.hpp"

namespace gnet {

namespace {

// Five path families crossed with four headings.
struct Template {
    double heading;     // radians, direction of travel
    int family;         // 0 line, 1/2 arc bending left/right, 3/4 slow/fast wiggle
};

Template template_for(std::size_t label) {
    constexpr double kHeadings[4] = {0.0, std::numbers::pi, std::numbers::pi / 2, 3 * std::numbers::pi / 2};
    return {kHeadings[label % 4], int(label / 4)};
}

double lateral_offset(int family, double u, double phase) {
    switch (family) {
        case 1: return 0.22 * (1 - (2 * u - 1) * (2 * u - 1)) - 0.11;
        case 2: return -0.22 * (1 - (2 * u - 1) * (2 * u - 1)) + 0.11;
        case 3: return 0.12 * std::sin(2 * std::numbers::pi * 1.5 * u + phase);
        case 4: return 0.08 * std::sin(2 * std::numbers::pi * 3.0 * u + phase);
        default: return 0.0;
    }
}

}  // namespace

VideoSample synthetic_sample(std::size_t label, std::size_t resolution, std::size_t frames, std::size_t joints,
                             RngStream rng) {
    if (label >= kMaxSyntheticClasses) {
        throw ValueError("synthetic: at most " + std::to_string(kMaxSyntheticClasses) + " classes");
    }
    if (resolution < 8) throw ValueError("synthetic: resolution must be at least 8");
    if (frames == 0) throw ValueError("synthetic: need at least one frame");
    if (joints == 0) throw ValueError("synthetic: need at least one joint");

    const Template tpl = template_for(label);
    const double span = 0.55 * rng.uniform(0.85, 1.15);
    const double start = rng.uniform(-0.05, 0.05);
    const double phase = rng.uniform(-0.3, 0.3);
    const double cx = 0.5 + rng.uniform(-0.06, 0.06), cy = 0.5 + rng.uniform(-0.06, 0.06);
    const double sigma = rng.uniform(1.6, 2.4) * double(resolution) / 32.0;
    const double radius = 2.5 * sigma;
    const double amplitude = rng.uniform(0.8, 1.0);
    const double tint[3] = {1.0, rng.uniform(0.6, 0.9), rng.uniform(0.3, 0.6)};
    const double ax = std::cos(tpl.heading), ay = std::sin(tpl.heading);
    const double nx = -ay, ny = ax;

    const std::size_t t = frames, h = resolution, w = resolution;
    VideoSample s;
    s.label = std::uint32_t(label);
    s.num_frames = std::uint32_t(t);
    s.rgb = FloatTensor({t, h, w, 3});
    s.depth = FloatTensor({t, h, w, 1});
    s.segmentation = FloatTensor({t, h, w, 1});
    s.skeleton = FloatTensor({t, joints, 3});

    auto position = [&](double tau) {
        // eased progress so the clip lingers near its start point
        const double u = frames > 1 ? tau / double(frames - 1) : 0.0;
        const double along = (std::pow(u, 1.4) - 0.5 + start) * span;
        const double lat = lateral_offset(tpl.family, u, phase);
        return std::pair{cx + along * ax + lat * nx, cy + along * ay + lat * ny};
    };

    for (std::size_t f = 0; f < t; ++f) {
        const auto [px, py] = position(double(f));
        const auto [qx, qy] = position(double(f) + 1.0);
        const double col = px * double(w) - 0.5, row = py * double(h) - 0.5;
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                const double dr = double(i) - row, dc = double(j) - col;
                const double d2 = dr * dr + dc * dc;
                const double intensity = amplitude * std::exp(-d2 / (2 * sigma * sigma));
                const std::size_t pix = (f * h + i) * w + j;
                for (std::size_t c = 0; c < 3; ++c) {
                    s.rgb[pix * 3 + c] = float(std::clamp(0.04 + 0.96 * intensity * tint[c], 0.0, 1.0));
                }
                const double d = std::sqrt(d2);
                s.depth[pix] = float(std::max(0.0, 1.0 - d / radius));
                s.segmentation[pix] = d <= radius ? 1.f : 0.f;
            }
        }
        // joint 0 follows the blob; further joints lead along the velocity
        const double vx = qx - px, vy = qy - py;
        for (std::size_t k = 0; k < joints; ++k) {
            const double lead = joints > 1 ? 3.0 * double(k) / double(joints - 1) : 0.0;
            const std::size_t base = (f * joints + k) * 3;
            s.skeleton[base + 0] = float(px + lead * vx);
            s.skeleton[base + 1] = float(py + lead * vy);
            s.skeleton[base + 2] = float(0.5 + 0.1 * double(k));
        }
    }
    return s;
}

std::vector<VideoSample> generate_synthetic(const SyntheticSpec& spec) {
    if (spec.classes == 0 || spec.classes > kMaxSyntheticClasses) {
        throw ValueError("synthetic: classes must be in [1, " + std::to_string(kMaxSyntheticClasses) + "]");
    }
    if (spec.per_class == 0) throw ValueError("synthetic: per_class must be positive");
    if (spec.min_frames == 0 || spec.min_frames > spec.max_frames) {
        throw ValueError("synthetic: need 1 <= min_frames <= max_frames");
    }
    const RngStream root(spec.seed, 0x5A7u);
    std::vector<VideoSample> out;
    out.reserve(spec.classes * spec.per_class);
    for (std::size_t k = 0; k < spec.classes; ++k) {
        for (std::size_t i = 0; i < spec.per_class; ++i) {
            RngStream rng = root.derive(k).derive(i);
            const std::size_t frames = spec.min_frames + rng.uniform_index(spec.max_frames - spec.min_frames + 1);
            out.push_back(synthetic_sample(k, spec.resolution, frames, spec.joints, rng.derive(1)));
        }
    }
    return out;
}

}  // namespace gnet
