#include <cmath>
#include <numeric>

#include "gnet/dataset.hpp"
#include "gnet/json_util.hpp"

namespace gnet {

void VideoSample::validate(std::size_t classes) const {
    const std::size_t t = num_frames;
    if (t == 0) throw ValueError("sample has no frames");
    if (rgb.rank() != 4 || rgb.dim(0) != t || rgb.dim(3) != 3) {
        throw ValueError("sample rgb must be [t,h,w,3] with t = " + std::to_string(t) + ", got " +
                         shape_str(rgb.shape()));
    }
    const Shape single{t, rgb.dim(1), rgb.dim(2), 1};
    if (depth.shape() != single) throw ValueError("sample depth shape " + shape_str(depth.shape()));
    if (segmentation.shape() != single) throw ValueError("sample segmentation shape " + shape_str(segmentation.shape()));
    if (skeleton.rank() != 3 || skeleton.dim(0) != t || skeleton.dim(2) != 3) {
        throw ValueError("sample skeleton must be [t,j,3], got " + shape_str(skeleton.shape()));
    }
    if (label >= classes) throw ValueError("sample label " + std::to_string(label) + " outside [0, " +
                                           std::to_string(classes) + ")");
    for (float v : rgb.data())
        if (!(v >= 0.f && v <= 1.f)) throw ValueError("rgb value outside [0, 1]");
    for (float v : depth.data())
        if (!(v >= 0.f && v <= 1.f)) throw ValueError("depth value outside [0, 1]");
    for (float v : segmentation.data())
        if (v != std::floor(v)) throw ValueError("segmentation value is not an integer");
}

namespace {

void copy_padded(const FloatTensor& src, Tensor& dst, std::size_t b) {
    // dst is [n, t_max, ...]; src is [t, ...] with the same trailing extents
    const std::size_t per_sample = dst.numel() / dst.dim(0);
    real* out = dst.ptr() + b * per_sample;
    for (std::size_t i = 0; i < src.numel(); ++i) out[i] = real(src[i]);
}

}  // namespace

Batch collate(std::span<const VideoSample* const> samples, std::span<const std::size_t> indices) {
    if (samples.empty()) throw ValueError("collate: empty batch");
    const VideoSample& first = *samples.front();
    const std::size_t n = samples.size(), h = first.height(), w = first.width(), j = first.joints();
    std::size_t t_max = 0;
    for (const VideoSample* s : samples) {
        if (s->height() != h || s->width() != w || s->joints() != j) {
            throw ShapeError("collate: samples disagree on resolution or joint count");
        }
        t_max = std::max<std::size_t>(t_max, s->num_frames);
    }
    Batch batch;
    Tensor rgb({n, t_max, h, w, 3}), depth({n, t_max, h, w, 1}), seg({n, t_max, h, w, 1}), skel({n, t_max, j, 3});
    for (std::size_t b = 0; b < n; ++b) {
        const VideoSample& s = *samples[b];
        copy_padded(s.rgb, rgb, b);
        copy_padded(s.depth, depth, b);
        copy_padded(s.segmentation, seg, b);
        copy_padded(s.skeleton, skel, b);
        batch.lengths.push_back(s.num_frames);
        batch.labels.push_back(s.label);
        batch.indices.push_back(indices.empty() ? b : indices[b]);
    }
    batch.inputs.emplace(Modality::rgb, std::move(rgb));
    batch.inputs.emplace(Modality::depth, std::move(depth));
    batch.inputs.emplace(Modality::segmentation, std::move(seg));
    batch.inputs.emplace(Modality::skeleton, std::move(skel));
    batch.mask = mask_from_lengths(batch.lengths, t_max);
    return batch;
}

Batch collate(std::span<const VideoSample> samples) {
    std::vector<const VideoSample*> ptrs;
    for (const auto& s : samples) ptrs.push_back(&s);
    return collate(ptrs);
}

std::vector<std::vector<std::size_t>> batch_plan(std::size_t n, std::size_t batch_size, RngStream& rng,
                                                 bool drop_incomplete) {
    if (batch_size == 0) throw ValueError("batch size must be positive");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
    std::vector<std::vector<std::size_t>> plan;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        if (drop_incomplete && end - start < batch_size) break;
        plan.emplace_back(order.begin() + std::ptrdiff_t(start), order.begin() + std::ptrdiff_t(end));
    }
    return plan;
}

std::vector<Batch> make_batches(std::span<const VideoSample> samples, std::size_t batch_size, RngStream& rng,
                                bool drop_incomplete) {
    std::vector<Batch> out;
    for (const auto& idx : batch_plan(samples.size(), batch_size, rng, drop_incomplete)) {
        std::vector<const VideoSample*> ptrs;
        for (std::size_t i : idx) ptrs.push_back(&samples[i]);
        out.push_back(collate(ptrs, idx));
    }
    return out;
}

// ---------------------------------------------------------------------------

void SplitSpec::validate() const {
    if (!(train > 0)) throw ConfigError("split.train", "weight must be positive");
    if (!(val > 0)) throw ConfigError("split.val", "weight must be positive");
    if (!(test > 0)) throw ConfigError("split.test", "weight must be positive");
}

nlohmann::json SplitSpec::to_json() const { return {{"train", train}, {"val", val}, {"test", test}, {"seed", seed}}; }

SplitSpec SplitSpec::from_json(const nlohmann::json& j) {
    SplitSpec s;
    JsonReader r(j, "split");
    r.read("train", s.train);
    r.read("val", s.val);
    r.read("test", s.test);
    r.read("seed", s.seed);
    r.finish();
    s.validate();
    return s;
}

SplitCounts split_counts(std::size_t n, const SplitSpec& spec) {
    spec.validate();
    if (n < 3) throw ValueError("split: need at least 3 samples, got " + std::to_string(n));
    const double total = spec.train + spec.val + spec.test;
    const auto cut1 = std::size_t(std::floor(spec.train / total * double(n)));
    const auto cut2 = std::size_t(std::floor((spec.train + spec.val) / total * double(n)));
    return {cut1, cut2 - cut1, n - cut2};
}

std::vector<std::size_t> split_permutation(std::size_t n, std::uint64_t seed) {
    RngStream rng(seed, 0x5EB11Du);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
    return order;
}

DatasetSplit split(std::vector<VideoSample> samples, const SplitSpec& spec) {
    const SplitCounts counts = split_counts(samples.size(), spec);
    const std::vector<std::size_t> order = split_permutation(samples.size(), spec.seed);
    DatasetSplit out;
    for (std::size_t i = 0; i < order.size(); ++i) {
        VideoSample& s = samples[order[i]];
        if (i < counts.train) {
            out.train.push_back(std::move(s));
        } else if (i < counts.train + counts.val) {
            out.val.push_back(std::move(s));
        } else {
            out.test.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace gnet
