#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gnet/augment.hpp"
#include "gnet/dataset.hpp"
#include "gnet/model.hpp"

namespace gnet {

// ---------------------------------------------------------------------------
// Loss and metrics.

struct LossResult {
    real loss = 0;
    Tensor dlogits;  // [n, classes], already divided by n
};

/// Mean sparse softmax cross entropy with a max-shifted logsumexp.
LossResult sparse_softmax_ce(const Tensor& logits, std::span<const std::uint32_t> labels);
/// Row argmax; ties go to the lowest class index.
std::vector<std::uint32_t> predict(const Tensor& logits);
real accuracy(const Tensor& logits, std::span<const std::uint32_t> labels);

// ---------------------------------------------------------------------------
// Optimizer.

struct AdamState {
    real lr = real(1e-3);
    real beta1 = real(0.9);
    real beta2 = real(0.999);
    real epsilon = real(1e-8);
    std::uint64_t step = 0;
    std::vector<Tensor> m;  // one per registry slot, empty for frozen slots
    std::vector<Tensor> v;
};

/// One bias-corrected update on flat buffers with step count `t` (>= 1).
void adam_update(std::span<real> theta, std::span<const real> grad, std::span<real> m, std::span<real> v,
                 std::uint64_t t, real lr, real beta1, real beta2, real epsilon);

/// Updates every trainable slot of `registry` from its gradient slot.
void adam_step(ParameterRegistry& registry, AdamState& state);

struct ScheduleState {
    double best = 0;
    bool has_best = false;
    std::size_t since_improvement = 0;
    std::size_t since_reduction = 0;
    std::size_t early_stop_patience = 20;
    std::size_t plateau_patience = 10;
    double factor = 0.1;
    double min_lr = 1e-6;
    double threshold = 1e-4;

    void validate() const;
};

struct ScheduleDecision {
    bool reduce_lr = false;
    bool stop = false;
};

/// Feeds one epoch's validation loss. If `lr` is given it is reduced in place
/// when the plateau rule fires.
ScheduleDecision schedule_update(ScheduleState& state, double val_loss, real* lr = nullptr);

// ---------------------------------------------------------------------------
// Training loop.

struct TrainEvent {
    std::size_t epoch = 0;
    double train_loss = 0;
    double train_acc = 0;
    double val_loss = 0;
    double val_acc = 0;
    double lr = 0;
    bool reduced = false;
    bool stopped = false;

    friend bool operator==(const TrainEvent&, const TrainEvent&) = default;
};

inline constexpr const char* kEventsHeader = "epoch,train_loss,train_acc,val_loss,val_acc,lr,reduced,stopped";
std::string event_csv_row(const TrainEvent& e);
std::string events_csv(std::span<const TrainEvent> events);
void write_events_csv(std::span<const TrainEvent> events, const std::string& path);

struct TrainOptions {
    std::size_t max_epochs = 100;
    std::size_t batch_size = 8;
    real lr = real(1e-3);
    ScheduleState schedule;
    bool augment = true;
    AugmentPolicy policy;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    /// Stop once infer-mode train accuracy reaches this value; 0 disables.
    double target_train_accuracy = 0;
    /// When set, the best-so-far checkpoint is written here.
    std::string checkpoint_path;
    /// Called after every epoch; handy for progress output.
    std::function<void(const TrainEvent&)> on_epoch;

    void validate() const;
};

struct TrainResult {
    Model best;
    std::vector<TrainEvent> events;
    std::size_t best_epoch = 0;
};

/// Raises DivergenceError naming the epoch and batch on a non-finite loss.
TrainResult train(const ModelConfig& config, std::span<const VideoSample> train_set,
                  std::span<const VideoSample> val_set, const TrainOptions& options);

struct EvalResult {
    double loss = 0;
    double accuracy = 0;
    std::vector<std::uint32_t> predicted;  // aligned with the input order
    std::vector<std::uint32_t> labels;
};

/// Infer-mode pass in fixed batches; output is independent of `workers`.
EvalResult evaluate(const Model& model, std::span<const VideoSample> samples, std::size_t batch_size = 8,
                    std::size_t workers = 1);
EvalResult evaluate(const std::string& checkpoint_path, const std::string& record_path, std::size_t workers = 1);

/// Checks that the samples match what the model consumes.
void check_compatible(const ModelConfig& config, std::span<const VideoSample> samples);

/// Runs fn(i) for i in [0, n) over `workers` threads. Exceptions propagate
/// (the one from the lowest index wins).
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace gnet
