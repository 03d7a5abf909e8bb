#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <atomic>
#include <thread>

#include "gnet/binary_io.hpp"
#include "gnet/trainer.hpp"

namespace gnet {

namespace {

// Stream ids under the run seed.
constexpr std::uint64_t kShuffleStream = 0x5EF1;
constexpr std::uint64_t kAugmentStream = 0xA06;
constexpr std::uint64_t kDropoutStream = 0xD80;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string event_csv_row(const TrainEvent& e) {
    return std::to_string(e.epoch) + "," + fmt(e.train_loss) + "," + fmt(e.train_acc) + "," + fmt(e.val_loss) + "," +
           fmt(e.val_acc) + "," + fmt(e.lr) + "," + (e.reduced ? "1" : "0") + "," + (e.stopped ? "1" : "0");
}

std::string events_csv(std::span<const TrainEvent> events) {
    std::string out = std::string(kEventsHeader) + "\n";
    for (const auto& e : events) out += event_csv_row(e) + "\n";
    return out;
}

void write_events_csv(std::span<const TrainEvent> events, const std::string& path) {
    write_file(path, events_csv(events));
}

void TrainOptions::validate() const {
    if (max_epochs == 0) throw ConfigError("train.max_epochs", "must be positive");
    if (batch_size == 0) throw ConfigError("train.batch_size", "must be positive");
    if (!(lr > 0)) throw ConfigError("train.lr", "must be positive");
    if (workers == 0) throw ConfigError("train.workers", "must be positive");
    if (!(target_train_accuracy >= 0 && target_train_accuracy <= 1)) {
        throw ConfigError("train.target_train_accuracy", "must lie in [0, 1]");
    }
    schedule.validate();
    policy.validate();
}

void check_compatible(const ModelConfig& config, std::span<const VideoSample> samples) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const VideoSample& s = samples[i];
        const std::string where = "sample " + std::to_string(i);
        try {
            s.validate(config.classes);
        } catch (const ValueError& e) {
            throw ShapeError(where + ": " + e.what());
        }
        if (s.height() != config.height || s.width() != config.width) {
            throw ShapeError(where + ": frames are " + std::to_string(s.height()) + "x" + std::to_string(s.width()) +
                             ", model expects " + std::to_string(config.height) + "x" +
                             std::to_string(config.width));
        }
        for (Modality m : config.modalities) {
            if (m == Modality::skeleton && s.joints() != config.skeleton_joints) {
                throw ShapeError(where + ": " + std::to_string(s.joints()) + " skeleton joints, model expects " +
                                 std::to_string(config.skeleton_joints));
            }
        }
    }
}

EvalResult evaluate(const Model& model, std::span<const VideoSample> samples, std::size_t batch_size,
                    std::size_t workers) {
    if (samples.empty()) throw ValueError("evaluate: no samples");
    if (batch_size == 0) throw ValueError("evaluate: batch size must be positive");
    const std::size_t chunks = (samples.size() + batch_size - 1) / batch_size;
    std::vector<double> chunk_loss(chunks);
    EvalResult out;
    out.predicted.resize(samples.size());
    out.labels.resize(samples.size());
    parallel_for(chunks, workers, [&](std::size_t k) {
        const std::size_t start = k * batch_size, end = std::min(samples.size(), start + batch_size);
        std::vector<const VideoSample*> ptrs;
        for (std::size_t i = start; i < end; ++i) ptrs.push_back(&samples[i]);
        const Batch batch = collate(ptrs);
        const Tensor logits = model.infer(batch.inputs, batch.lengths).logits;
        chunk_loss[k] = double(sparse_softmax_ce(logits, batch.labels).loss) * double(end - start);
        const auto pred = predict(logits);
        for (std::size_t i = start; i < end; ++i) {
            out.predicted[i] = pred[i - start];
            out.labels[i] = batch.labels[i - start];
        }
    });
    double total = 0;
    std::size_t hits = 0;
    for (double l : chunk_loss) total += l;
    for (std::size_t i = 0; i < samples.size(); ++i) hits += out.predicted[i] == out.labels[i];
    out.loss = total / double(samples.size());
    out.accuracy = double(hits) / double(samples.size());
    return out;
}

EvalResult evaluate(const std::string& checkpoint_path, const std::string& record_path, std::size_t workers) {
    const Model model = load_checkpoint(checkpoint_path);
    const auto samples = read_records(record_path);
    check_compatible(model.config(), samples);
    return evaluate(model, samples, 8, workers);
}

TrainResult train(const ModelConfig& config, std::span<const VideoSample> train_set,
                  std::span<const VideoSample> val_set, const TrainOptions& options) {
    config.validate();
    options.validate();
    if (train_set.empty() || val_set.empty()) throw ValueError("train: both splits must be nonempty");
    check_compatible(config, train_set);
    check_compatible(config, val_set);

    Model model = Model::build(config);
    AdamState adam;
    adam.lr = options.lr;
    ScheduleState schedule = options.schedule;
    TrainResult result{model, {}, 0};
    const RngStream shuffle_root(options.seed, kShuffleStream);
    const RngStream augment_root(options.seed, kAugmentStream);
    const RngStream dropout_root(options.seed, kDropoutStream);

    std::vector<VideoSample> augmented(options.augment ? train_set.size() : 0);
    for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
        if (options.augment) {
            const RngStream epoch_rng = augment_root.derive(epoch);
            parallel_for(train_set.size(), options.workers, [&](std::size_t i) {
                augmented[i] = apply_policy(train_set[i], options.policy, epoch_rng.derive(i)).sample;
            });
        }
        const std::span<const VideoSample> source = options.augment ? std::span<const VideoSample>(augmented)
                                                                    : train_set;
        RngStream shuffle = shuffle_root.derive(epoch);
        const auto plan = batch_plan(source.size(), options.batch_size, shuffle, false);
        for (std::size_t k = 0; k < plan.size(); ++k) {
            std::vector<const VideoSample*> ptrs;
            for (std::size_t i : plan[k]) ptrs.push_back(&source[i]);
            const Batch batch = collate(ptrs, plan[k]);
            const RngStream dropout = dropout_root.derive(epoch).derive(k);
            model.registry().zero_grad();
            ForwardResult fwd = model.forward(batch.inputs, batch.lengths, Mode::train, &dropout);
            const LossResult loss = sparse_softmax_ce(fwd.logits, batch.labels);
            if (!std::isfinite(double(loss.loss))) {
                throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(k));
            }
            model.backward(loss.dlogits, fwd.cache);
            adam_step(model.registry(), adam);
        }

        TrainEvent ev;
        ev.epoch = epoch;
        ev.lr = double(adam.lr);
        const EvalResult tr = evaluate(model, train_set, options.batch_size, options.workers);
        const EvalResult va = evaluate(model, val_set, options.batch_size, options.workers);
        if (!std::isfinite(tr.loss) || !std::isfinite(va.loss)) {
            throw DivergenceError("non-finite evaluation loss after epoch " + std::to_string(epoch));
        }
        ev.train_loss = tr.loss;
        ev.train_acc = tr.accuracy;
        ev.val_loss = va.loss;
        ev.val_acc = va.accuracy;
        const ScheduleDecision d = schedule_update(schedule, va.loss, &adam.lr);
        ev.reduced = d.reduce_lr;
        ev.stopped = d.stop || (options.target_train_accuracy > 0 && tr.accuracy >= options.target_train_accuracy);
        if (schedule.since_improvement == 0) {
            result.best = model;
            result.best_epoch = epoch;
            if (!options.checkpoint_path.empty()) save_checkpoint(model, options.checkpoint_path);
        }
        result.events.push_back(ev);
        if (options.on_epoch) options.on_epoch(ev);
        if (ev.stopped) break;
    }
    return result;
}

}  // namespace gnet
