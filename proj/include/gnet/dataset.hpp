#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gnet/model.hpp"
#include "gnet/rng.hpp"
#include "gnet/tensor.hpp"

namespace gnet {

/// One labeled multimodal clip. Frame buffers are 32-bit, matching the
/// record container.
struct VideoSample {
    FloatTensor rgb;           // [t, h, w, 3] in [0, 1]
    FloatTensor depth;         // [t, h, w, 1] in [0, 1]
    FloatTensor segmentation;  // [t, h, w, 1] integer-valued
    FloatTensor skeleton;      // [t, joints, 3]
    std::uint32_t num_frames = 0;
    std::uint32_t label = 0;

    std::size_t height() const { return rgb.dim(1); }
    std::size_t width() const { return rgb.dim(2); }
    std::size_t joints() const { return skeleton.dim(1); }

    /// Throws ValueError when modalities disagree or values leave their range.
    void validate(std::size_t classes = 20) const;
    friend bool operator==(const VideoSample&, const VideoSample&) = default;
};

struct Batch {
    ModalityInputs inputs;             // padded [n, t_max, ...]
    Tensor mask;                       // [n, t_max]
    std::vector<std::size_t> lengths;  // valid frames per sample
    std::vector<std::uint32_t> labels;
    std::vector<std::size_t> indices;  // positions in the source collection

    std::size_t size() const { return labels.size(); }
};

/// Zero-pads every sample to the longest clip and emits all modalities.
Batch collate(std::span<const VideoSample* const> samples, std::span<const std::size_t> indices = {});
Batch collate(std::span<const VideoSample> samples);

/// Epoch plan: a shuffled permutation of [0, n) cut into batches.
std::vector<std::vector<std::size_t>> batch_plan(std::size_t n, std::size_t batch_size, RngStream& rng,
                                                 bool drop_incomplete);
std::vector<Batch> make_batches(std::span<const VideoSample> samples, std::size_t batch_size, RngStream& rng,
                                bool drop_incomplete);

// ---------------------------------------------------------------------------
// Splitting.

struct SplitSpec {
    double train = 50;
    double val = 15;
    double test = 15;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static SplitSpec from_json(const nlohmann::json& j);
};

struct SplitCounts {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
};

/// Partition sizes: cut points at floor(cumulative fraction * n).
SplitCounts split_counts(std::size_t n, const SplitSpec& spec);

struct DatasetSplit {
    std::vector<VideoSample> train;
    std::vector<VideoSample> val;
    std::vector<VideoSample> test;
};

/// Seeded shuffle, then contiguous cuts by `split_counts`.
DatasetSplit split(std::vector<VideoSample> samples, const SplitSpec& spec);
std::vector<std::size_t> split_permutation(std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Record container. Little-endian: "GREC", u32 version, then per record
// u64 payload length, payload (u32 label, u32 num_frames, u32 h, u32 w,
// u32 joints, rgb, depth, segmentation, skeleton as raw float32), u32 CRC-32
// of the payload.

inline constexpr std::uint32_t kRecordVersion = 1;

std::string encode_record(const VideoSample& sample);
VideoSample decode_record(std::string_view payload, std::size_t index);

class RecordWriter {
public:
    explicit RecordWriter(const std::string& path);
    void write(const VideoSample& sample);
    void close();
    std::size_t count() const { return count_; }
    std::uint64_t bytes_written() const { return bytes_; }

private:
    std::ofstream out_;
    std::string path_;
    std::size_t count_ = 0;
    std::uint64_t bytes_ = 0;
};

/// Linear streaming reader. A corrupt record raises an error naming its
/// index; records before it have already been returned.
class RecordReader {
public:
    explicit RecordReader(const std::string& path);
    std::optional<VideoSample> next();
    std::size_t index() const { return index_; }

private:
    std::ifstream in_;
    std::string path_;
    std::size_t index_ = 0;
};

void write_records(std::span<const VideoSample> samples, const std::string& path);
std::vector<VideoSample> read_records(const std::string& path);

// ---------------------------------------------------------------------------
// Synthetic gesture clips.

struct SyntheticSpec {
    std::size_t classes = 20;
    std::size_t per_class = 5;
    std::size_t resolution = 32;
    std::size_t min_frames = 20;
    std::size_t max_frames = 40;
    std::size_t joints = 2;
    std::uint64_t seed = 0;
};

inline constexpr std::size_t kMaxSyntheticClasses = 20;

/// Class k moves a bright blob along trajectory template k with per-sample
/// jitter in speed, phase, start point and size. Samples are ordered class
/// by class.
std::vector<VideoSample> generate_synthetic(const SyntheticSpec& spec);
VideoSample synthetic_sample(std::size_t label, std::size_t resolution, std::size_t frames, std::size_t joints,
                             RngStream rng);

}  // namespace gnet
