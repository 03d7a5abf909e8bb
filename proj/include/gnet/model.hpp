#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "gnet/layers.hpp"
#include "gnet/sequence.hpp"

namespace gnet {

enum class Modality { rgb, depth, segmentation, skeleton };

std::string to_string(Modality m);
Modality modality_from_string(const std::string& name);
std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct ModelConfig {
    std::vector<Modality> modalities{Modality::rgb};
    std::vector<std::size_t> conv_channels{3, 3, 3, 3, 3};
    std::array<std::size_t, 3> kernel{3, 3, 3};
    Window3 pool_window{1, 2, 2};
    Window3 pool_stride{1, 2, 2};
    std::size_t feature_width = 256;
    std::size_t lstm_width = 256;
    std::size_t classes = 20;
    std::size_t skeleton_joints = 2;
    std::size_t skeleton_hidden = 128;
    Activation activation = Activation::swish;
    real dropout = real(0.2);
    real bn_momentum = real(0.9);
    real bn_epsilon = real(1e-5);
    std::size_t height = 32;
    std::size_t width = 32;
    std::uint64_t seed = 0;

    /// Throws ConfigError naming the first invalid field.
    void validate() const;
    nlohmann::json to_json() const;
    /// Missing keys keep their defaults; unknown keys are rejected.
    static ModelConfig from_json(const nlohmann::json& j);

    bool is_multimodal() const { return modalities.size() > 1; }
    /// Channels of a video modality's frames (3 for rgb, 1 otherwise).
    static std::size_t channels(Modality m);
    /// Spatial extents after the conv stack.
    std::array<std::size_t, 2> pooled_resolution() const;
    std::size_t frames_after_pooling(std::size_t frames) const;
};

/// Named parameter tensors with matching gradient slots, in build order.
/// Non-trainable entries (batch-norm running statistics) have no optimizer
/// state but are serialized with the rest.
class ParameterRegistry {
public:
    struct Slot {
        std::string name;
        Tensor value;
        Tensor grad;
        bool trainable = true;
    };

    std::size_t add(std::string name, Tensor value, bool trainable = true);
    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    std::size_t index(const std::string& name) const;

    Tensor& value(const std::string& name) { return slots_[index(name)].value; }
    const Tensor& value(const std::string& name) const { return slots_[index(name)].value; }
    Tensor& grad(const std::string& name) { return slots_[index(name)].grad; }
    const Tensor& grad(const std::string& name) const { return slots_[index(name)].grad; }

    std::vector<Slot>& slots() { return slots_; }
    const std::vector<Slot>& slots() const { return slots_; }
    std::size_t size() const { return slots_.size(); }
    /// Total trainable scalars.
    std::size_t parameter_count() const;

    void zero_grad();
    /// Forward caches remember this stamp; any parameter update renews it.
    std::uint64_t version() const { return version_; }
    void touch();

private:
    std::vector<Slot> slots_;
    std::unordered_map<std::string, std::size_t> index_;
    std::uint64_t version_ = 0;
};

/// Inputs keyed by modality: video modalities [n, t, h, w, c], skeleton
/// [n, t, joints, 3].
using ModalityInputs = std::map<Modality, Tensor>;

struct EncoderCache;

struct ForwardCache {
    ForwardCache();
    ForwardCache(ForwardCache&&) noexcept;
    ForwardCache& operator=(ForwardCache&&) noexcept;
    ~ForwardCache();

    std::vector<std::unique_ptr<EncoderCache>> encoders;
    std::vector<std::size_t> feature_widths;
    std::vector<std::size_t> lengths;  // after temporal pooling
    std::size_t steps = 0;
    LstmCache lstm;
    Tensor dropout_masks;  // [valid rows, hidden]; empty without dropout
    bool dropout_active = false;
    TemporalHeadCache head;
    std::uint64_t registry_version = 0;
    bool update_stats = false;
    CacheToken token;
};

struct ForwardResult {
    Tensor logits;  // [n, classes]
    ForwardCache cache;
};

class Model {
public:
    /// Glorot-uniform weights, zero biases, LSTM forget bias 1.
    static Model build(const ModelConfig& config, RngStream rng);
    static Model build(const ModelConfig& config) { return build(config, RngStream(config.seed)); }
    /// Parameter layout of `config` with all tensors zero-initialized.
    static Model skeleton(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }
    ParameterRegistry& registry() { return registry_; }
    const ParameterRegistry& registry() const { return registry_; }

    /// In train mode batch statistics are used and running statistics are
    /// updated; dropout draws come from `dropout_rng` keyed by (sample, step).
    ForwardResult forward(const ModalityInputs& inputs, std::span<const std::size_t> lengths, Mode mode,
                          const RngStream* dropout_rng = nullptr);
    /// Train-mode forward that leaves running statistics untouched.
    ForwardResult forward_pure(const ModalityInputs& inputs, std::span<const std::size_t> lengths, Mode mode,
                               const RngStream* dropout_rng = nullptr) const;
    ForwardResult infer(const ModalityInputs& inputs, std::span<const std::size_t> lengths) const {
        return forward_pure(inputs, lengths, Mode::infer);
    }
    /// Single-modality convenience for the first configured modality.
    ForwardResult forward_single(const Tensor& clip, std::span<const std::size_t> lengths, Mode mode,
                                 const RngStream* dropout_rng = nullptr);

    /// Accumulates parameter gradients into the registry's gradient slots.
    void backward(const Tensor& dlogits, ForwardCache& cache);

private:
    Model(ModelConfig config, ParameterRegistry registry);
    void apply_running_stats(const ForwardCache& cache);

    ModelConfig config_;
    ParameterRegistry registry_;
};

// Checkpoint container. Layout (little-endian): "GNET", u32 version, then the
// CRC-covered payload: u64 config length + JSON bytes, u64 tensor count, per
// tensor u64 name length + bytes, u32 rank, u64 extents, raw values; finally
// u32 CRC-32 of the payload. Version 1 stores 32-bit floats, version 2
// stores 64-bit floats.
inline constexpr std::uint32_t kCheckpointVersionF32 = 1;
inline constexpr std::uint32_t kCheckpointVersionF64 = 2;

std::string serialize_checkpoint(const Model& model);
std::string serialize_checkpoint(const Model& model, std::uint32_t version);
Model deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace gnet
