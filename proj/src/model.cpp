#include <atomic>
#include <cmath>

#include "gnet/json_util.hpp"
#include "gnet/model.hpp"

namespace gnet {

// ---------------------------------------------------------------------------
// Names and config.

std::string to_string(Modality m) {
    switch (m) {
        case Modality::rgb: return "rgb";
        case Modality::depth: return "depth";
        case Modality::segmentation: return "segmentation";
        case Modality::skeleton: return "skeleton";
    }
    return "?";
}

Modality modality_from_string(const std::string& name) {
    if (name == "rgb") return Modality::rgb;
    if (name == "depth") return Modality::depth;
    if (name == "segmentation") return Modality::segmentation;
    if (name == "skeleton") return Modality::skeleton;
    throw ConfigError("modalities", "unknown modality '" + name + "'");
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::swish: return "swish";
        case Activation::elu: return "elu";
        case Activation::linear: return "linear";
    }
    return "?";
}

Activation activation_from_string(const std::string& name) {
    if (name == "swish") return Activation::swish;
    if (name == "elu") return Activation::elu;
    if (name == "linear") return Activation::linear;
    throw ConfigError("activation", "unknown activation '" + name + "'");
}

std::size_t ModelConfig::channels(Modality m) { return m == Modality::rgb ? 3 : 1; }

std::array<std::size_t, 2> ModelConfig::pooled_resolution() const {
    std::size_t h = height, w = width;
    for (std::size_t k = 0; k < conv_channels.size(); ++k) {
        h = pooled_extent(h, pool_window.h, pool_stride.h);
        w = pooled_extent(w, pool_window.w, pool_stride.w);
    }
    return {h, w};
}

std::size_t ModelConfig::frames_after_pooling(std::size_t frames) const {
    for (std::size_t k = 0; k < conv_channels.size(); ++k) frames = pooled_extent(frames, pool_window.t, pool_stride.t);
    return frames;
}

void ModelConfig::validate() const {
    if (modalities.empty()) throw ConfigError("modalities", "at least one modality is required");
    for (std::size_t i = 0; i < modalities.size(); ++i)
        for (std::size_t j = i + 1; j < modalities.size(); ++j)
            if (modalities[i] == modalities[j]) throw ConfigError("modalities", "duplicate " + to_string(modalities[i]));
    if (conv_channels.empty()) throw ConfigError("conv_channels", "at least one conv block is required");
    for (std::size_t c : conv_channels)
        if (c == 0) throw ConfigError("conv_channels", "channel counts must be positive");
    for (std::size_t k : kernel)
        if (k == 0) throw ConfigError("kernel", "kernel extents must be positive");
    if (pool_window.t == 0 || pool_window.h == 0 || pool_window.w == 0)
        throw ConfigError("pool_window", "window extents must be positive");
    if (pool_stride.t == 0 || pool_stride.h == 0 || pool_stride.w == 0)
        throw ConfigError("pool_stride", "stride extents must be positive");
    if (feature_width == 0) throw ConfigError("feature_width", "must be positive");
    if (lstm_width == 0) throw ConfigError("lstm_width", "must be positive");
    if (classes < 2) throw ConfigError("classes", "must be at least 2");
    if (skeleton_joints == 0) throw ConfigError("skeleton_joints", "must be positive");
    if (skeleton_hidden == 0) throw ConfigError("skeleton_hidden", "must be positive");
    if (!(dropout >= 0 && dropout < 1)) throw ConfigError("dropout", "must be in [0, 1)");
    if (!(bn_momentum > 0 && bn_momentum < 1)) throw ConfigError("bn_momentum", "must be in (0, 1)");
    if (!(bn_epsilon > 0)) throw ConfigError("bn_epsilon", "must be positive");
    if (height == 0 || width == 0) throw ConfigError("height", "resolution must be positive");
    const auto pooled = pooled_resolution();
    if (pooled[0] == 0 || pooled[1] == 0) {
        throw ConfigError("pool_window", "resolution " + std::to_string(height) + "x" + std::to_string(width) +
                                             " does not survive " + std::to_string(conv_channels.size()) +
                                             " pooling stages");
    }
    bool has_skeleton = false;
    for (Modality m : modalities) has_skeleton = has_skeleton || m == Modality::skeleton;
    if (has_skeleton && (pool_window.t != 1 || pool_stride.t != 1)) {
        throw ConfigError("pool_window", "temporal pooling cannot be combined with the skeleton modality");
    }
}

nlohmann::json ModelConfig::to_json() const {
    nlohmann::json mods = nlohmann::json::array();
    for (Modality m : modalities) mods.push_back(to_string(m));
    return {
        {"modalities", mods},
        {"conv_channels", conv_channels},
        {"kernel", kernel},
        {"pool_window", {pool_window.t, pool_window.h, pool_window.w}},
        {"pool_stride", {pool_stride.t, pool_stride.h, pool_stride.w}},
        {"feature_width", feature_width},
        {"lstm_width", lstm_width},
        {"classes", classes},
        {"skeleton_joints", skeleton_joints},
        {"skeleton_hidden", skeleton_hidden},
        {"activation", to_string(activation)},
        {"dropout", dropout},
        {"bn_momentum", bn_momentum},
        {"bn_epsilon", bn_epsilon},
        {"height", height},
        {"width", width},
        {"seed", seed},
    };
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    JsonReader r(j, "model");
    std::vector<std::string> mods;
    if (r.has("modalities")) {
        r.read("modalities", mods);
        c.modalities.clear();
        for (const auto& m : mods) c.modalities.push_back(modality_from_string(m));
    }
    r.read("conv_channels", c.conv_channels);
    r.read("kernel", c.kernel);
    std::array<std::size_t, 3> win{c.pool_window.t, c.pool_window.h, c.pool_window.w};
    std::array<std::size_t, 3> str{c.pool_stride.t, c.pool_stride.h, c.pool_stride.w};
    r.read("pool_window", win);
    r.read("pool_stride", str);
    c.pool_window = {win[0], win[1], win[2]};
    c.pool_stride = {str[0], str[1], str[2]};
    r.read("feature_width", c.feature_width);
    r.read("lstm_width", c.lstm_width);
    r.read("classes", c.classes);
    r.read("skeleton_joints", c.skeleton_joints);
    r.read("skeleton_hidden", c.skeleton_hidden);
    std::string act = to_string(c.activation);
    r.read("activation", act);
    c.activation = activation_from_string(act);
    r.read("dropout", c.dropout);
    r.read("bn_momentum", c.bn_momentum);
    r.read("bn_epsilon", c.bn_epsilon);
    r.read("height", c.height);
    r.read("width", c.width);
    r.read("seed", c.seed);
    r.finish();
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Registry.

std::size_t ParameterRegistry::add(std::string name, Tensor value, bool trainable) {
    if (index_.count(name)) throw Error("parameter registry: duplicate name '" + name + "'");
    index_.emplace(name, slots_.size());
    Tensor grad(value.shape());
    slots_.push_back({std::move(name), std::move(value), std::move(grad), trainable});
    touch();
    return slots_.size() - 1;
}

std::size_t ParameterRegistry::index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("parameter registry: no entry named '" + name + "'");
    return it->second;
}

std::size_t ParameterRegistry::parameter_count() const {
    std::size_t n = 0;
    for (const auto& s : slots_)
        if (s.trainable) n += s.value.numel();
    return n;
}

void ParameterRegistry::zero_grad() {
    for (auto& s : slots_) s.grad.fill(real(0));
}

void ParameterRegistry::touch() {
    static std::atomic<std::uint64_t> stamp{0};
    version_ = ++stamp;
}

// ---------------------------------------------------------------------------
// Caches.

struct BlockCache {
    Conv3DCache conv;
    BatchNormCache bn;
    ActivationCache act;
    MaxPoolCache pool;
    std::vector<std::size_t> out_lengths;
};

struct EncoderCache {
    Modality modality = Modality::rgb;
    std::vector<BlockCache> blocks;
    Shape pooled_shape;
    DenseCache fc;
    BatchNormCache fc_bn;
    DenseCache fc0;
    ActivationCache act0;
    DenseCache fc1;
};

ForwardCache::ForwardCache() = default;
ForwardCache::ForwardCache(ForwardCache&&) noexcept = default;
ForwardCache& ForwardCache::operator=(ForwardCache&&) noexcept = default;
ForwardCache::~ForwardCache() = default;

namespace {

std::string block_name(Modality m, const char* kind, std::size_t k) {
    return to_string(m) + "." + kind + std::to_string(k);
}

Tensor glorot(const Shape& shape, std::size_t fan_in, std::size_t fan_out, RngStream rng) {
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    Tensor t(shape);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = real(rng.uniform(-limit, limit));
    return t;
}

void add_bn(ParameterRegistry& reg, const std::string& prefix, std::size_t c) {
    reg.add(prefix + ".gamma", Tensor({c}, real(1)));
    reg.add(prefix + ".beta", Tensor({c}));
    reg.add(prefix + ".running_mean", Tensor({c}), false);
    reg.add(prefix + ".running_var", Tensor({c}, real(1)), false);
}

// Registry layout for `config`; when `rng` is given weights are drawn,
// otherwise every weight stays zero.
ParameterRegistry make_registry(const ModelConfig& config, const RngStream* rng) {
    ParameterRegistry reg;
    std::uint64_t draw = 0;
    auto weights = [&](const Shape& shape, std::size_t fan_in, std::size_t fan_out) {
        ++draw;
        return rng ? glorot(shape, fan_in, fan_out, rng->derive(draw)) : Tensor(shape);
    };

    for (Modality m : config.modalities) {
        const std::string mod = to_string(m);
        if (m == Modality::skeleton) {
            const std::size_t din = config.skeleton_joints * 3;
            reg.add(mod + ".fc0.weight", weights({din, config.skeleton_hidden}, din, config.skeleton_hidden));
            reg.add(mod + ".fc0.bias", Tensor({config.skeleton_hidden}));
            reg.add(mod + ".fc1.weight", weights({config.skeleton_hidden, config.feature_width}, config.skeleton_hidden,
                                                 config.feature_width));
            reg.add(mod + ".fc1.bias", Tensor({config.feature_width}));
            continue;
        }
        std::size_t cin = ModelConfig::channels(m);
        const auto [kt, kh, kw] = config.kernel;
        for (std::size_t k = 0; k < config.conv_channels.size(); ++k) {
            const std::size_t cout = config.conv_channels[k];
            const std::size_t taps = kt * kh * kw;
            reg.add(block_name(m, "conv", k) + ".kernel", weights({kt, kh, kw, cin, cout}, taps * cin, taps * cout));
            reg.add(block_name(m, "conv", k) + ".bias", Tensor({cout}));
            add_bn(reg, block_name(m, "bn", k), cout);
            cin = cout;
        }
        const auto pooled = config.pooled_resolution();
        const std::size_t flat = pooled[0] * pooled[1] * cin;
        reg.add(mod + ".fc.weight", weights({flat, config.feature_width}, flat, config.feature_width));
        reg.add(mod + ".fc.bias", Tensor({config.feature_width}));
        add_bn(reg, mod + ".fc_bn", config.feature_width);
    }

    const std::size_t features = config.modalities.size() * config.feature_width;
    const std::size_t H = config.lstm_width;
    reg.add("lstm.W", weights({features, 4 * H}, features, 4 * H));
    reg.add("lstm.U", weights({H, 4 * H}, H, 4 * H));
    Tensor bias({4 * H});
    if (rng) {
        for (std::size_t k = 0; k < H; ++k) bias[gate_forget * H + k] = real(1);
    }
    reg.add("lstm.bias", std::move(bias));
    reg.add("head.weight", weights({H, config.classes}, H, config.classes));
    reg.add("head.bias", Tensor({config.classes}));
    return reg;
}

BatchNormParams bn_params(const ParameterRegistry& reg, const std::string& prefix, const ModelConfig& config) {
    return {reg.value(prefix + ".gamma"), reg.value(prefix + ".beta"), reg.value(prefix + ".running_mean"),
            reg.value(prefix + ".running_var"), config.bn_momentum, config.bn_epsilon};
}

std::vector<std::uint8_t> frame_validity(std::span<const std::size_t> lengths, std::size_t steps) {
    std::vector<std::uint8_t> valid(lengths.size() * steps, 0);
    for (std::size_t b = 0; b < lengths.size(); ++b)
        for (std::size_t s = 0; s < lengths[b] && s < steps; ++s) valid[b * steps + s] = 1;
    return valid;
}

void zero_frames_beyond(Tensor& x, std::span<const std::size_t> lengths) {
    const std::size_t n = x.dim(0), t = x.dim(1), frame = x.numel() / (n * t);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t s = lengths[b]; s < t; ++s) std::fill_n(x.ptr() + (b * t + s) * frame, frame, real(0));
}

void accumulate(ParameterRegistry& reg, const std::string& name, const Tensor& g) {
    Tensor& slot = reg.grad(name);
    if (slot.shape() != g.shape()) {
        throw ShapeError("gradient for '" + name + "' has shape " + shape_str(g.shape()) + ", slot is " +
                         shape_str(slot.shape()));
    }
    for (std::size_t i = 0; i < g.numel(); ++i) slot[i] += g[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// Model.

Model::Model(ModelConfig config, ParameterRegistry registry)
    : config_(std::move(config)), registry_(std::move(registry)) {}

Model Model::build(const ModelConfig& config, RngStream rng) {
    config.validate();
    return Model(config, make_registry(config, &rng));
}

Model Model::skeleton(const ModelConfig& config) {
    config.validate();
    return Model(config, make_registry(config, nullptr));
}

ForwardResult Model::forward_single(const Tensor& clip, std::span<const std::size_t> lengths, Mode mode,
                                    const RngStream* dropout_rng) {
    ModalityInputs inputs;
    inputs.emplace(config_.modalities.front(), clip);
    return forward(inputs, lengths, mode, dropout_rng);
}

ForwardResult Model::forward(const ModalityInputs& inputs, std::span<const std::size_t> lengths, Mode mode,
                             const RngStream* dropout_rng) {
    ForwardResult res = forward_pure(inputs, lengths, mode, dropout_rng);
    if (mode == Mode::train) apply_running_stats(res.cache);
    return res;
}

void Model::apply_running_stats(const ForwardCache& cache) {
    auto update = [&](const std::string& prefix, const BatchNormCache& bn) {
        BatchNormParams p = bn_params(registry_, prefix, config_);
        batchnorm_update_running(p, bn);
        registry_.value(prefix + ".running_mean") = std::move(p.running_mean);
        registry_.value(prefix + ".running_var") = std::move(p.running_var);
    };
    for (const auto& enc : cache.encoders) {
        if (enc->modality == Modality::skeleton) continue;
        for (std::size_t k = 0; k < enc->blocks.size(); ++k) update(block_name(enc->modality, "bn", k), enc->blocks[k].bn);
        update(to_string(enc->modality) + ".fc_bn", enc->fc_bn);
    }
}

ForwardResult Model::forward_pure(const ModalityInputs& inputs, std::span<const std::size_t> lengths, Mode mode,
                                  const RngStream* dropout_rng) const {
    const ModelConfig& cfg = config_;
    const ParameterRegistry& reg = registry_;

    // Shape checks shared by all modalities.
    std::size_t n = 0, t = 0;
    for (Modality m : cfg.modalities) {
        auto it = inputs.find(m);
        if (it == inputs.end()) throw ValueError("forward: missing input for configured modality " + to_string(m));
        const Tensor& x = it->second;
        if (m == Modality::skeleton) {
            if (x.rank() != 4 || x.dim(2) != cfg.skeleton_joints || x.dim(3) != 3) {
                throw ShapeError("forward: skeleton input must be [n,t," + std::to_string(cfg.skeleton_joints) +
                                 ",3], got " + shape_str(x.shape()));
            }
        } else if (x.rank() != 5 || x.dim(2) != cfg.height || x.dim(3) != cfg.width ||
                   x.dim(4) != ModelConfig::channels(m)) {
            throw ShapeError("forward: " + to_string(m) + " input must be [n,t," + std::to_string(cfg.height) + "," +
                             std::to_string(cfg.width) + "," + std::to_string(ModelConfig::channels(m)) + "], got " +
                             shape_str(x.shape()));
        }
        if (n == 0) {
            n = x.dim(0);
            t = x.dim(1);
        } else if (x.dim(0) != n || x.dim(1) != t) {
            throw ShapeError("forward: modalities disagree on batch or frame count");
        }
    }
    if (lengths.size() != n) {
        throw ShapeError("forward: " + std::to_string(lengths.size()) + " lengths for batch of " + std::to_string(n));
    }
    for (std::size_t len : lengths) {
        if (len == 0 || len > t) throw ValueError("forward: clip length " + std::to_string(len) + " outside [1, " +
                                                  std::to_string(t) + "]");
    }
    const std::size_t steps = cfg.frames_after_pooling(t);
    std::vector<std::size_t> step_lengths(n);
    for (std::size_t b = 0; b < n; ++b) {
        step_lengths[b] = cfg.frames_after_pooling(lengths[b]);
        if (step_lengths[b] == 0) throw ShapeError("forward: clip of " + std::to_string(lengths[b]) +
                                                   " frames has no frames left after temporal pooling");
    }

    ForwardResult res;
    ForwardCache& cache = res.cache;
    cache.lengths = step_lengths;
    cache.steps = steps;
    cache.registry_version = reg.version();
    cache.update_stats = mode == Mode::train;

    std::vector<Tensor> features;
    for (Modality m : cfg.modalities) {
        const Tensor& x = inputs.at(m);
        auto enc = std::make_unique<EncoderCache>();
        enc->modality = m;
        const std::string mod = to_string(m);
        if (m == Modality::skeleton) {
            DenseResult fc0 = dense_forward(gather_valid_steps(x, lengths),
                                            {reg.value(mod + ".fc0.weight"), reg.value(mod + ".fc0.bias")});
            ActivationResult act = activation_forward(cfg.activation, fc0.y);
            DenseResult fc1 = dense_forward(act.y, {reg.value(mod + ".fc1.weight"), reg.value(mod + ".fc1.bias")});
            enc->fc0 = std::move(fc0.cache);
            enc->act0 = std::move(act.cache);
            enc->fc1 = std::move(fc1.cache);
            features.push_back(std::move(fc1.y));
        } else {
            Tensor h = x;
            std::vector<std::size_t> lens(lengths.begin(), lengths.end());
            for (std::size_t k = 0; k < cfg.conv_channels.size(); ++k) {
                BlockCache blk;
                Conv3DResult conv = conv3d_forward(
                    h, {reg.value(block_name(m, "conv", k) + ".kernel"), reg.value(block_name(m, "conv", k) + ".bias")},
                    lens);
                const std::vector<std::uint8_t> valid = frame_validity(lens, conv.y.dim(1));
                BatchNormResult bn =
                    batchnorm_forward_pure(conv.y, bn_params(reg, block_name(m, "bn", k), cfg), mode, valid);
                ActivationResult act = activation_forward(cfg.activation, bn.y);
                MaxPoolResult pool = maxpool3d_forward(act.y, cfg.pool_window, cfg.pool_stride);
                for (std::size_t& len : lens) len = pooled_extent(len, cfg.pool_window.t, cfg.pool_stride.t);
                zero_frames_beyond(pool.y, lens);
                blk.conv = std::move(conv.cache);
                blk.bn = std::move(bn.cache);
                blk.act = std::move(act.cache);
                blk.pool = std::move(pool.cache);
                blk.out_lengths = lens;
                enc->blocks.push_back(std::move(blk));
                h = std::move(pool.y);
            }
            enc->pooled_shape = h.shape();
            DenseResult fc =
                dense_forward(gather_valid_steps(h, lens), {reg.value(mod + ".fc.weight"), reg.value(mod + ".fc.bias")});
            BatchNormResult fc_bn = batchnorm_forward_pure(fc.y, bn_params(reg, mod + ".fc_bn", cfg), mode);
            enc->fc = std::move(fc.cache);
            enc->fc_bn = std::move(fc_bn.cache);
            features.push_back(std::move(fc_bn.y));
        }
        cache.feature_widths.push_back(features.back().dim(1));
        cache.encoders.push_back(std::move(enc));
    }

    // Concatenate per valid step along the feature axis.
    const std::size_t rows = features.front().dim(0);
    std::size_t width = 0;
    for (const Tensor& f : features) width += f.dim(1);
    Tensor concat({rows, width});
    std::size_t col = 0;
    for (const Tensor& f : features) {
        const std::size_t fw = f.dim(1);
        for (std::size_t r = 0; r < rows; ++r) std::copy_n(f.ptr() + r * fw, fw, concat.ptr() + r * width + col);
        col += fw;
    }

    SequenceBatch seq{scatter_valid_steps(concat, step_lengths, steps), step_lengths};
    LstmResult lstm = lstm_forward(seq, {reg.value("lstm.W"), reg.value("lstm.U"), reg.value("lstm.bias")});
    cache.lstm = std::move(lstm.cache);

    Tensor outputs = std::move(lstm.outputs);
    if (mode == Mode::train && cfg.dropout > 0) {
        const RngStream base = dropout_rng ? *dropout_rng : RngStream(cfg.seed).derive(0xD80u);
        const std::size_t H = cfg.lstm_width;
        cache.dropout_masks = Tensor({rows, H});
        cache.dropout_active = true;
        std::size_t r = 0;
        for (std::size_t b = 0; b < n; ++b) {
            const RngStream sample = base.derive(b);
            for (std::size_t s = 0; s < step_lengths[b]; ++s, ++r) {
                RngStream step = sample.derive(s);
                const Tensor mask = dropout_mask({H}, cfg.dropout, step);
                real* out = outputs.ptr() + (b * steps + s) * H;
                for (std::size_t k = 0; k < H; ++k) {
                    out[k] *= mask[k];
                    cache.dropout_masks[r * H + k] = mask[k];
                }
            }
        }
    }

    TemporalHeadResult head =
        temporal_mean_logits(outputs, step_lengths, {reg.value("head.weight"), reg.value("head.bias")});
    cache.head = std::move(head.cache);
    res.logits = std::move(head.logits);
    cache.token.arm();
    return res;
}

void Model::backward(const Tensor& dlogits, ForwardCache& cache) {
    if (!cache.update_stats) throw Error("model backward: cache comes from an infer-mode forward");
    if (cache.registry_version != registry_.version()) {
        throw Error("model backward: stale cache, parameters changed since the forward pass");
    }
    cache.token.consume("model");
    const ModelConfig& cfg = config_;
    ParameterRegistry& reg = registry_;

    TemporalHeadGrads head = temporal_mean_logits_backward(dlogits, cache.head);
    accumulate(reg, "head.weight", head.dweight);
    accumulate(reg, "head.bias", head.dbias);

    Tensor doutputs = std::move(head.doutputs);
    if (cache.dropout_active) {
        const std::size_t H = cfg.lstm_width;
        std::size_t r = 0;
        for (std::size_t b = 0; b < cache.lengths.size(); ++b)
            for (std::size_t s = 0; s < cache.lengths[b]; ++s, ++r) {
                real* d = doutputs.ptr() + (b * cache.steps + s) * H;
                for (std::size_t k = 0; k < H; ++k) d[k] *= cache.dropout_masks[r * H + k];
            }
    }

    LstmGrads lstm = lstm_backward(doutputs, cache.lstm);
    accumulate(reg, "lstm.W", lstm.dW);
    accumulate(reg, "lstm.U", lstm.dU);
    accumulate(reg, "lstm.bias", lstm.dbias);

    const Tensor drows = gather_valid_steps(lstm.dx, cache.lengths);
    const std::size_t rows = drows.dim(0), width = drows.dim(1);
    std::size_t col = 0;
    for (std::size_t e = 0; e < cache.encoders.size(); ++e) {
        EncoderCache& enc = *cache.encoders[e];
        const std::size_t fw = cache.feature_widths[e];
        Tensor dfeat({rows, fw});
        for (std::size_t r = 0; r < rows; ++r) std::copy_n(drows.ptr() + r * width + col, fw, dfeat.ptr() + r * fw);
        col += fw;
        const std::string mod = to_string(enc.modality);

        if (enc.modality == Modality::skeleton) {
            DenseGrads fc1 = dense_backward(dfeat, enc.fc1);
            accumulate(reg, mod + ".fc1.weight", fc1.dweight);
            accumulate(reg, mod + ".fc1.bias", fc1.dbias);
            DenseGrads fc0 = dense_backward(activation_backward(fc1.dx, enc.act0), enc.fc0);
            accumulate(reg, mod + ".fc0.weight", fc0.dweight);
            accumulate(reg, mod + ".fc0.bias", fc0.dbias);
            continue;
        }

        BatchNormGrads fc_bn = batchnorm_backward(dfeat, enc.fc_bn);
        accumulate(reg, mod + ".fc_bn.gamma", fc_bn.dgamma);
        accumulate(reg, mod + ".fc_bn.beta", fc_bn.dbeta);
        DenseGrads fc = dense_backward(fc_bn.dx, enc.fc);
        accumulate(reg, mod + ".fc.weight", fc.dweight);
        accumulate(reg, mod + ".fc.bias", fc.dbias);

        const std::vector<std::size_t>& last_lengths = enc.blocks.back().out_lengths;
        Tensor dy = scatter_valid_steps(fc.dx, last_lengths, enc.pooled_shape[1]).reshaped(enc.pooled_shape);
        for (std::size_t k = enc.blocks.size(); k-- > 0;) {
            BlockCache& blk = enc.blocks[k];
            zero_frames_beyond(dy, blk.out_lengths);
            Tensor dact = maxpool3d_backward(dy, blk.pool);
            Tensor dbn = activation_backward(dact, blk.act);
            BatchNormGrads bn = batchnorm_backward(dbn, blk.bn);
            accumulate(reg, block_name(enc.modality, "bn", k) + ".gamma", bn.dgamma);
            accumulate(reg, block_name(enc.modality, "bn", k) + ".beta", bn.dbeta);
            Conv3DGrads conv = conv3d_backward(bn.dx, blk.conv, k > 0);
            accumulate(reg, block_name(enc.modality, "conv", k) + ".kernel", conv.dkernel);
            accumulate(reg, block_name(enc.modality, "conv", k) + ".bias", conv.dbias);
            dy = std::move(conv.dx);
        }
    }
}

}  // namespace gnet
