#include <cmath>

#include "gnet/trainer.hpp"

namespace gnet {

void adam_update(std::span<real> theta, std::span<const real> grad, std::span<real> m, std::span<real> v,
                 std::uint64_t t, real lr, real beta1, real beta2, real epsilon) {
    if (grad.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
        throw ShapeError("adam_update: buffer sizes differ");
    }
    if (t == 0) throw ValueError("adam_update: step count starts at 1");
    const real c1 = 1 - std::pow(beta1, real(t));
    const real c2 = 1 - std::pow(beta2, real(t));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = beta1 * m[i] + (1 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1 - beta2) * grad[i] * grad[i];
        const real m_hat = m[i] / c1;
        const real v_hat = v[i] / c2;
        theta[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon);
    }
}

void adam_step(ParameterRegistry& registry, AdamState& state) {
    auto& slots = registry.slots();
    if (state.m.empty()) {
        state.m.resize(slots.size());
        state.v.resize(slots.size());
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (!slots[i].trainable) continue;
            state.m[i] = Tensor::zeros(slots[i].value.shape());
            state.v[i] = Tensor::zeros(slots[i].value.shape());
        }
    }
    if (state.m.size() != slots.size()) throw ShapeError("adam_step: optimizer state belongs to another registry");
    ++state.step;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        auto& s = slots[i];
        if (!s.trainable) continue;
        if (s.grad.shape() != s.value.shape() || state.m[i].shape() != s.value.shape()) {
            throw ShapeError("adam_step: shape mismatch for '" + s.name + "'");
        }
        adam_update(s.value.storage(), s.grad.data(), state.m[i].storage(), state.v[i].storage(), state.step,
                    state.lr, state.beta1, state.beta2, state.epsilon);
    }
    registry.touch();
}

void ScheduleState::validate() const {
    if (!(factor > 0 && factor < 1)) throw ConfigError("schedule.factor", "must lie in (0, 1)");
    if (!(min_lr >= 0)) throw ConfigError("schedule.min_lr", "must be non-negative");
    if (!(threshold >= 0)) throw ConfigError("schedule.threshold", "must be non-negative");
    if (early_stop_patience == 0) throw ConfigError("schedule.early_stop_patience", "must be positive");
    if (plateau_patience == 0) throw ConfigError("schedule.plateau_patience", "must be positive");
}

ScheduleDecision schedule_update(ScheduleState& s, double val_loss, real* lr) {
    ScheduleDecision d;
    if (!s.has_best || val_loss < s.best - s.threshold) {
        s.best = val_loss;
        s.has_best = true;
        s.since_improvement = 0;
        s.since_reduction = 0;
        return d;
    }
    ++s.since_improvement;
    ++s.since_reduction;
    if (s.since_improvement >= s.early_stop_patience) {
        d.stop = true;
        return d;
    }
    if (s.since_reduction >= s.plateau_patience) {
        d.reduce_lr = true;
        s.since_reduction = 0;
        if (lr) *lr = real(std::max(double(*lr) * s.factor, s.min_lr));
    }
    return d;
}

}  // namespace gnet
