// Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gnet/augment.hpp"
#include "gnet/binary_io.hpp"
#include "gnet/run_config.hpp"
#include "gnet/trainer.hpp"
#include "../test_util.hpp"

using namespace gnet;
using namespace gnet::testing;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kLayerGradTol = 1e-4;
constexpr double kModelGradTol = 1e-3;
constexpr double kGradSuiteSeconds = 60;
constexpr double kLossTol = 1e-9;
constexpr double kSwishOne = 0.731059;
constexpr double kSwishTol = 1e-6;
constexpr double kAdamTol = 1e-9;
constexpr double kResampleTol = 1e-6;
constexpr double kSkeletonFlipTol = 1e-7;
constexpr double kLadderTrainAcc = 0.95;
constexpr double kLadderValAcc = 0.30;
constexpr double kAugmentValSlack = 0.05;
constexpr std::size_t kLadderMaxEpochs = 200;
constexpr double kLadderSeconds = 15 * 60;

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
        }
    }
    void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Gradient suite.

ModelConfig tiny_model(std::vector<Modality> modalities) {
    ModelConfig c;
    c.modalities = std::move(modalities);
    c.conv_channels = {2, 2, 2};
    c.height = c.width = 8;
    c.feature_width = 4;
    c.lstm_width = 3;
    c.classes = 4;
    c.skeleton_hidden = 5;
    c.dropout = 0;
    c.seed = 11;
    return c;
}

ModalityInputs random_inputs(const ModelConfig& c, std::size_t n, std::size_t t, RngStream& rng) {
    ModalityInputs in;
    for (Modality m : c.modalities) {
        if (m == Modality::skeleton) {
            in.emplace(m, random_tensor({n, t, c.skeleton_joints, 3}, rng, 0, 1));
        } else {
            in.emplace(m, random_tensor({n, t, c.height, c.width, ModelConfig::channels(m)}, rng, 0, 1));
        }
    }
    return in;
}

double model_grad_error(const ModelConfig& c, const std::vector<std::size_t>& lengths, std::size_t t) {
    Model m = Model::build(c);
    RngStream rng(21);
    const ModalityInputs in = random_inputs(c, lengths.size(), t, rng);
    const Tensor w = random_tensor({lengths.size(), c.classes}, rng);
    const RngStream drop(5);
    auto r = m.forward(in, lengths, Mode::train, &drop);
    m.registry().zero_grad();
    m.backward(w, r.cache);
    auto loss = [&] { return weighted_sum(m.forward_pure(in, lengths, Mode::train, &drop).logits, w); };
    double worst = 0;
    for (auto& slot : m.registry().slots()) {
        if (!slot.trainable) continue;
        worst = std::max(worst, grad_error(slot.grad, numeric_grad(slot.value, loss)));
    }
    return worst;
}

Outcome gradient_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    RngStream rng(1);
    std::vector<std::pair<std::string, double>> layer;

    {
        Tensor x = random_tensor({2, 4, 5, 4, 2}, rng);
        Conv3DParams p{random_tensor({3, 3, 3, 2, 3}, rng), random_tensor({3}, rng)};
        const std::vector<std::size_t> lengths{4, 2};
        const Tensor w = random_tensor({2, 4, 5, 4, 3}, rng);
        auto r = conv3d_forward(x, p, lengths);
        const Conv3DGrads g = conv3d_backward(w, r.cache);
        auto loss = [&] { return weighted_sum(conv3d_forward(x, p, lengths).y, w); };
        layer.push_back({"conv3d", std::max({grad_error(g.dx, numeric_grad(x, loss)),
                                             grad_error(g.dkernel, numeric_grad(p.kernel, loss)),
                                             grad_error(g.dbias, numeric_grad(p.bias, loss))})});
    }
    {
        Tensor x = random_tensor({2, 3, 2, 2, 3}, rng, -2, 2);
        BatchNormParams p{random_tensor({3}, rng, 0.5, 1.5), random_tensor({3}, rng), Tensor({3}), Tensor({3}, real(1))};
        const std::vector<std::uint8_t> valid{1, 1, 1, 1, 0, 0};
        const Tensor w = random_tensor(x.shape(), rng);
        auto r = batchnorm_forward_pure(x, p, Mode::train, valid);
        const BatchNormGrads g = batchnorm_backward(w, r.cache);
        auto loss = [&] { return weighted_sum(batchnorm_forward_pure(x, p, Mode::train, valid).y, w); };
        layer.push_back({"batchnorm", std::max({grad_error(g.dx, numeric_grad(x, loss)),
                                                grad_error(g.dgamma, numeric_grad(p.gamma, loss)),
                                                grad_error(g.dbeta, numeric_grad(p.beta, loss))})});
    }
    {
        Tensor x = random_tensor({2, 2, 4, 6, 2}, rng);
        const Tensor w = random_tensor({2, 2, 2, 3, 2}, rng);
        auto r = maxpool3d_forward(x, {1, 2, 2}, {1, 2, 2});
        const Tensor dx = maxpool3d_backward(w, r.cache);
        auto loss = [&] { return weighted_sum(maxpool3d_forward(x, {1, 2, 2}, {1, 2, 2}).y, w); };
        layer.push_back({"maxpool3d", grad_error(dx, numeric_grad(x, loss))});
    }
    {
        Tensor x = random_tensor({5, 4}, rng);
        DenseParams p{random_tensor({4, 3}, rng), random_tensor({3}, rng)};
        const Tensor w = random_tensor({5, 3}, rng);
        auto r = dense_forward(x, p);
        const DenseGrads g = dense_backward(w, r.cache);
        auto loss = [&] { return weighted_sum(dense_forward(x, p).y, w); };
        layer.push_back({"dense", std::max({grad_error(g.dx, numeric_grad(x, loss)),
                                            grad_error(g.dweight, numeric_grad(p.weight, loss)),
                                            grad_error(g.dbias, numeric_grad(p.bias, loss))})});
    }
    for (Activation kind : {Activation::swish, Activation::elu}) {
        Tensor x = random_tensor({4, 6}, rng, -3, 3);
        const Tensor w = random_tensor({4, 6}, rng);
        auto r = activation_forward(kind, x);
        const Tensor dx = activation_backward(w, r.cache);
        auto loss = [&] { return weighted_sum(activation_forward(kind, x).y, w); };
        layer.push_back({to_string(kind), grad_error(dx, numeric_grad(x, loss))});
    }
    {
        Tensor x = random_tensor({6, 5}, rng);
        const Tensor w = random_tensor({6, 5}, rng);
        RngStream d0(3);
        auto r = dropout_forward(x, real(0.4), Mode::train, d0);
        const Tensor dx = dropout_backward(w, r.cache);
        auto loss = [&] {
            RngStream d(3);
            return weighted_sum(dropout_forward(x, real(0.4), Mode::train, d).y, w);
        };
        layer.push_back({"dropout", grad_error(dx, numeric_grad(x, loss))});
    }
    {
        const std::size_t d = 3, hd = 2;
        LstmParams p{random_tensor({d, 4 * hd}, rng), random_tensor({hd, 4 * hd}, rng), random_tensor({4 * hd}, rng)};
        SequenceBatch seq{random_tensor({2, 5, d}, rng), {5, 3}};
        // padding steps of the short sample are zero
        for (std::size_t k = 0; k < 2 * d; ++k) seq.features[(5 + 3) * d + k] = 0;
        const Tensor w = random_tensor({2, 5, hd}, rng);
        auto r = lstm_forward(seq, p);
        const LstmGrads g = lstm_backward(w, r.cache);
        auto loss = [&] { return weighted_sum(lstm_forward(seq, p).outputs, w); };
        layer.push_back({"lstm", std::max({grad_error(g.dx, numeric_grad(seq.features, loss)),
                                           grad_error(g.dW, numeric_grad(p.W, loss)),
                                           grad_error(g.dU, numeric_grad(p.U, loss)),
                                           grad_error(g.dbias, numeric_grad(p.bias, loss))})});

        DenseParams head{random_tensor({hd, 4}, rng), random_tensor({4}, rng)};
        Tensor outputs = random_tensor({2, 5, hd}, rng);
        const std::vector<std::size_t> lengths{5, 2};
        const Tensor wh = random_tensor({2, 4}, rng);
        auto rh = temporal_mean_logits(outputs, lengths, head);
        const TemporalHeadGrads gh = temporal_mean_logits_backward(wh, rh.cache);
        auto hloss = [&] { return weighted_sum(temporal_mean_logits(outputs, lengths, head).logits, wh); };
        layer.push_back({"temporal-head", std::max({grad_error(gh.doutputs, numeric_grad(outputs, hloss)),
                                                    grad_error(gh.dweight, numeric_grad(head.weight, hloss))})});
    }

    double worst_layer = 0;
    std::string worst_name;
    for (const auto& [name, err] : layer) {
        if (err >= worst_layer) worst_layer = err, worst_name = name;
    }

    ModelConfig dropout_model = tiny_model({Modality::rgb});
    dropout_model.dropout = real(0.3);
    ModelConfig multi = tiny_model({Modality::rgb, Modality::depth, Modality::skeleton});
    multi.activation = Activation::elu;
    const double e2e = std::max(
        {model_grad_error(tiny_model({Modality::rgb}), {3, 2}, 3), model_grad_error(dropout_model, {3, 1}, 3),
         model_grad_error(multi, {3, 2}, 3)});
    const double elapsed = seconds_since(t0);

    Outcome o;
    o.check(worst_layer < kLayerGradTol, "layer gradients");
    o.check(e2e < kModelGradTol, "end-to-end gradients");
    o.check(elapsed < kGradSuiteSeconds, "runtime");
    o.note(std::to_string(layer.size()) + " layer checks, worst " + worst_name + " " + fmt("%.2e", worst_layer) +
           " (< 1e-4); end-to-end " + fmt("%.2e", e2e) + " (< 1e-3); " + fmt("%.1f s", elapsed) + " (< 60 s)");
    return o;
}

// ---------------------------------------------------------------------------

Outcome analytic_values() {
    Outcome o;
    const std::vector<std::uint32_t> labels{0, 7, 19};
    const double loss = sparse_softmax_ce(Tensor({3, 20}, real(0.25)), labels).loss;
    const double swish = activation_value(Activation::swish, 1);
    std::vector<real> theta{0}, grad{1}, m{0}, v{0};
    adam_update(theta, grad, m, v, 1, real(1e-3), real(0.9), real(0.999), real(1e-8));
    const double expect = -1e-3 / (1 + 1e-8);
    o.check(std::abs(loss - std::log(20.0)) < kLossTol, "uniform loss");
    o.check(std::abs(swish - kSwishOne) < kSwishTol, "swish(1)");
    o.check(std::abs(theta[0] - expect) < kAdamTol, "Adam first step");
    o.note("ln20 err " + fmt("%.1e", std::abs(loss - std::log(20.0))) + ", swish(1) " + fmt("%.7f", swish) +
           ", Adam step " + fmt("%.10f", theta[0]) + " vs " + fmt("%.10f", expect));
    return o;
}

// ---------------------------------------------------------------------------

bool mask_case(const ModelConfig& c, std::size_t t, std::size_t extra, const std::vector<std::size_t>& lengths) {
    RngStream rng(6);
    ModalityInputs base = random_inputs(c, lengths.size(), t, rng);
    for (auto& [m, x] : base) {
        const std::size_t frame = x.numel() / (lengths.size() * t);
        for (std::size_t b = 0; b < lengths.size(); ++b)
            std::fill(x.ptr() + (b * t + lengths[b]) * frame, x.ptr() + (b + 1) * t * frame, real(0));
    }
    ModalityInputs padded;
    for (const auto& [m, x] : base) {
        Shape shape = x.shape();
        shape[1] = t + extra;
        Tensor y(shape);
        const std::size_t frame = x.numel() / (lengths.size() * t);
        for (std::size_t b = 0; b < lengths.size(); ++b)
            std::copy_n(x.ptr() + b * t * frame, t * frame, y.ptr() + b * (t + extra) * frame);
        padded.emplace(m, std::move(y));
    }
    const Tensor w = random_tensor({lengths.size(), c.classes}, rng);
    const RngStream drop(77);
    Model a = Model::build(c), b = Model::build(c);
    auto ra = a.forward(base, lengths, Mode::train, &drop);
    auto rb = b.forward(padded, lengths, Mode::train, &drop);
    bool ok = bit_equal(ra.logits, rb.logits);
    a.registry().zero_grad();
    b.registry().zero_grad();
    a.backward(w, ra.cache);
    b.backward(w, rb.cache);
    for (std::size_t i = 0; i < a.registry().size(); ++i) {
        ok = ok && bit_equal(a.registry().slots()[i].grad, b.registry().slots()[i].grad);
        ok = ok && bit_equal(a.registry().slots()[i].value, b.registry().slots()[i].value);
    }
    return ok && bit_equal(a.infer(base, lengths).logits, b.infer(padded, lengths).logits);
}

Outcome mask_invariance() {
    Outcome o;
    ModelConfig tiny = tiny_model({Modality::rgb, Modality::depth, Modality::segmentation, Modality::skeleton});
    tiny.dropout = real(0.3);
    ModelConfig full;
    o.check(mask_case(tiny, 4, 3, {2, 4, 1}), "tiny multimodal");
    o.check(mask_case(full, 4, 2, {3, 4}), "default rgb");
    o.note("logits, every gradient slot and running statistics compared bit for bit (tiny 4-modality, default 32x32)");
    return o;
}

// ---------------------------------------------------------------------------

Outcome schedule_semantics() {
    Outcome o;
    ScheduleState s;
    real lr = real(1e-3);
    std::vector<std::size_t> reductions;
    std::size_t stop = 0;
    for (std::size_t epoch = 0; epoch < 40; ++epoch) {
        const ScheduleDecision d = schedule_update(s, 0.75, &lr);
        if (d.reduce_lr) reductions.push_back(epoch);
        if (d.stop) {
            stop = epoch;
            break;
        }
    }
    o.check(reductions == std::vector<std::size_t>{10}, "single reduction at epoch 10");
    o.check(stop == 20, "stop at epoch 20");
    o.check(std::abs(lr - 1e-4) <= 1e-4 * 1e-12, "lr 1e-4 after reduction");
    o.note("reduce at epoch " + (reductions.empty() ? std::string("none") : std::to_string(reductions.front())) +
           ", stop at epoch " + std::to_string(stop) + ", lr " + fmt("%.3g", lr));
    return o;
}

// ---------------------------------------------------------------------------

double sample_diff(const VideoSample& a, const VideoSample& b) {
    if (a.rgb.shape() != b.rgb.shape() || a.skeleton.shape() != b.skeleton.shape() || a.label != b.label ||
        a.num_frames != b.num_frames) {
        return INFINITY;
    }
    double d = 0;
    for (auto [x, y] : {std::pair{&a.rgb, &b.rgb}, {&a.depth, &b.depth}, {&a.segmentation, &b.segmentation},
                        {&a.skeleton, &b.skeleton}})
        for (std::size_t i = 0; i < x->numel(); ++i) d = std::max(d, std::abs(double((*x)[i]) - double((*y)[i])));
    return d;
}

bool frames_equal(const VideoSample& a, const VideoSample& b) {
    return a.rgb == b.rgb && a.depth == b.depth && a.segmentation == b.segmentation && a.label == b.label &&
           a.num_frames == b.num_frames;
}

Outcome augmentation_suite() {
    Outcome o;
    const VideoSample s = synthetic_sample(9, 32, 24, 2, RngStream(4));

    const VideoSample ff = flip_sample(flip_sample(s));
    o.check(frames_equal(ff, s) && sample_diff(ff, s) <= kSkeletonFlipTol, "flip involution");
    o.check(reverse_time(reverse_time(s)) == s, "reverse involution");

    struct ZeroOp {
        const char* name;
        std::function<void(AugmentPolicy&)> set;
        double tol;
    };
    const std::vector<ZeroOp> zero_ops{
        {"noise", [](AugmentPolicy& p) { p.noise = true, p.noise_sigma = 0; }, 0},
        {"flip", [](AugmentPolicy& p) { p.flip = true, p.flip_probability = 0; }, 0},
        {"rotate", [](AugmentPolicy& p) { p.rotate = true, p.rotate_max_degrees = 0; }, 0},
        {"crop", [](AugmentPolicy& p) { p.crop = true, p.crop_area_min = p.crop_area_max = 1; }, kResampleTol},
        {"rescale", [](AugmentPolicy& p) { p.rescale = true, p.rescale_min = p.rescale_max = 1; }, kResampleTol},
        {"color",
         [](AugmentPolicy& p) { p.color = true, p.brightness_min = p.brightness_max = p.hue_min = p.hue_max = 0; },
         kResampleTol},
        {"reverse", [](AugmentPolicy& p) { p.reverse = true, p.reverse_probability = 0; }, 0},
        {"shorten", [](AugmentPolicy& p) { p.shorten = true, p.keep_min = p.keep_max = 1; }, 0},
    };
    std::string bad_identity;
    for (const ZeroOp& op : zero_ops) {
        AugmentPolicy p = AugmentPolicy::none();
        op.set(p);
        if (!(sample_diff(apply_policy(s, p, RngStream(8)).sample, s) <= op.tol)) bad_identity += std::string(" ") + op.name;
    }
    o.check(bad_identity.empty(), "zero-magnitude identity for" + bad_identity);

    // every op at full strength, one at a time and all together
    std::vector<AugmentPolicy> policies;
    const std::vector<std::function<void(AugmentPolicy&)>> enable{
        [](AugmentPolicy& p) { p.noise = true, p.noise_sigma = 0.1; },
        [](AugmentPolicy& p) { p.flip = true; },
        [](AugmentPolicy& p) { p.rotate = true; },
        [](AugmentPolicy& p) { p.crop = true; },
        [](AugmentPolicy& p) { p.rescale = true; },
        [](AugmentPolicy& p) { p.color = true; },
        [](AugmentPolicy& p) { p.reverse = true; },
        [](AugmentPolicy& p) { p.shorten = true, p.keep_min = 0.3; },
    };
    AugmentPolicy all;
    for (const auto& e : enable) {
        AugmentPolicy p = AugmentPolicy::none();
        e(p);
        e(all);
        policies.push_back(p);
    }
    policies.push_back(all);

    std::size_t draws = 0;
    bool contracts = true, deterministic = true;
    for (const AugmentPolicy& p : policies)
        for (std::uint64_t k = 0; k < 12; ++k, ++draws) {
            const RngStream stream = RngStream(31, k);
            const AugmentedSample a = apply_policy(s, p, stream);
            const AugmentedSample b = apply_policy(s, p, stream);
            deterministic = deterministic && a == b && a.dump() == b.dump();
            const VideoSample& x = a.sample;
            bool ok = x.label == s.label && x.num_frames >= 1 && x.height() == s.height() && x.width() == s.width();
            ok = ok && x.rgb.dim(0) == x.num_frames && x.depth.dim(0) == x.num_frames &&
                 x.segmentation.dim(0) == x.num_frames && x.skeleton.dim(0) == x.num_frames;
            for (float v : x.rgb.data()) ok = ok && v >= 0 && v <= 1;
            for (float v : x.depth.data()) ok = ok && v >= 0 && v <= 1;
            for (float v : x.segmentation.data()) ok = ok && (v == 0 || v == 1);
            contracts = contracts && ok;
        }
    o.check(contracts, "label/shape/range contracts");
    o.check(deterministic, "bit-determinism");
    o.note("involutions, 8 zero-magnitude identities, " + std::to_string(draws) +
           " seeded draws over 9 policies checked for contracts and repeatability");
    return o;
}

// ---------------------------------------------------------------------------
// Overfit ladder and variant parity.

struct Rung {
    std::string name;
    std::size_t epochs = 0;
    double train_acc = 0;
    double val_acc = 0;
    double seconds = 0;
    bool finite = true;
};

Rung run_rung(const std::string& name, const ModelConfig& model, bool augment, std::size_t max_epochs,
              std::span<const VideoSample> train_set, std::span<const VideoSample> val_set) {
    TrainOptions o;
    o.max_epochs = max_epochs;
    o.augment = augment;
    o.seed = 1;
    o.target_train_accuracy = kLadderTrainAcc;
    o.on_epoch = [&](const TrainEvent& e) {
        std::fprintf(stderr, "  %s epoch %zu train_acc %.3f val_acc %.3f val_loss %.4f\n", name.c_str(), e.epoch,
                     e.train_acc, e.val_acc, e.val_loss);
    };
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult r = train(model, train_set, val_set, o);
    Rung rung;
    rung.name = name;
    rung.epochs = r.events.size();
    rung.train_acc = r.events.back().train_acc;
    rung.val_acc = r.events.back().val_acc;
    for (const TrainEvent& e : r.events) rung.finite = rung.finite && std::isfinite(e.train_loss) && std::isfinite(e.val_loss);
    rung.seconds = seconds_since(t0);
    std::fprintf(stderr, "  %s: %zu epochs, train %.3f, val %.3f, %.0f s\n", name.c_str(), rung.epochs, rung.train_acc,
                 rung.val_acc, rung.seconds);
    return rung;
}

std::string describe(const Rung& r) {
    return r.name + " " + std::to_string(r.epochs) + " ep train " + fmt("%.3f", r.train_acc) + " val " +
           fmt("%.3f", r.val_acc);
}

struct LadderData {
    std::vector<VideoSample> train;
    std::vector<VideoSample> val;
};

LadderData ladder_data() {
    SyntheticSpec spec;  // 20 classes x 5, 32x32, 20-40 frames
    LadderData d;
    d.train = generate_synthetic(spec);
    spec.per_class = 2;
    spec.seed = 1;
    d.val = generate_synthetic(spec);
    return d;
}

Outcome overfit_ladder(const LadderData& data, std::vector<Rung>& rungs, double& elapsed) {
    const auto t0 = std::chrono::steady_clock::now();
    const ModelConfig swish;
    const Rung plain = run_rung("swish", swish, false, kLadderMaxEpochs, data.train, data.val);
    const Rung aug = run_rung("swish+aug", swish, true, std::min<std::size_t>(kLadderMaxEpochs, 3 * plain.epochs),
                              data.train, data.val);
    rungs = {plain, aug};
    elapsed = seconds_since(t0);

    Outcome o;
    const double gap_plain = plain.train_acc - plain.val_acc, gap_aug = aug.train_acc - aug.val_acc;
    o.check(plain.train_acc >= kLadderTrainAcc, "train accuracy >= 0.95");
    o.check(plain.val_acc >= kLadderValAcc, "val accuracy >= 0.30");
    o.check(gap_aug < gap_plain || aug.val_acc >= plain.val_acc - kAugmentValSlack, "augmentation direction");
    o.note(describe(plain) + "; " + describe(aug) + "; gap " + fmt("%.3f", gap_plain) + " -> " + fmt("%.3f", gap_aug));
    return o;
}

Outcome variant_parity(const LadderData& data, double ladder_seconds) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    ModelConfig elu;
    elu.activation = Activation::elu;
    const Rung e = run_rung("elu", elu, false, kLadderMaxEpochs, data.train, data.val);
    ModelConfig multi;
    multi.modalities = {Modality::rgb, Modality::depth, Modality::skeleton};
    const Rung m = run_rung("multimodal", multi, false, kLadderMaxEpochs, data.train, data.val);
    const double total = ladder_seconds + seconds_since(t0);
    for (const Rung* r : {&e, &m}) {
        o.check(r->finite && r->epochs >= 1, r->name + " completes");
        o.check(r->train_acc >= kLadderTrainAcc, r->name + " train accuracy >= 0.95");
    }
    o.check(total < kLadderSeconds, "ladder under 15 min");

    // degenerate concatenation
    ModelConfig single;
    single.modalities = {Modality::depth};
    Model a = Model::build(single), b = Model::build(single);
    const Batch batch = collate(std::span<const VideoSample>(data.val).subspan(0, 4));
    const RngStream drop(3);
    const Tensor via_map = a.forward(batch.inputs, batch.lengths, Mode::train, &drop).logits;
    const Tensor via_single = b.forward_single(batch.inputs.at(Modality::depth), batch.lengths, Mode::train, &drop).logits;
    o.check(bit_equal(via_map, via_single), "single-modality multimodal path");
    o.note(describe(e) + "; " + describe(m) + "; single-modality bit-exact " +
           (bit_equal(via_map, via_single) ? "yes" : "no") + "; ladder total " + fmt("%.0f s", total) + " (< 900 s)");
    return o;
}

// ---------------------------------------------------------------------------

template <typename E, typename F>
bool throws(F&& f) {
    try {
        f();
    } catch (const E&) {
        return true;
    } catch (...) {
        return false;
    }
    return false;
}

Outcome serialization(const fs::path& dir) {
    Outcome o;
    SyntheticSpec spec;
    spec.per_class = 1;
    spec.min_frames = 6;
    spec.max_frames = 12;
    const auto samples = generate_synthetic(spec);
    const std::string records = (dir / "serial.grec").string();
    write_records(samples, records);
    const auto back = read_records(records);
    bool rec_ok = back.size() == samples.size();
    for (std::size_t i = 0; rec_ok && i < back.size(); ++i) rec_ok = encode_record(back[i]) == encode_record(samples[i]);
    o.check(rec_ok, "record round trip");

    const std::string bytes = read_file(records);
    bool named = true;
    for (std::size_t k = 0; k < samples.size(); k += 7) {
        std::size_t at = 8;
        for (std::size_t i = 0; i < k; ++i) at += 12 + encode_record(samples[i]).size();
        std::string bad = bytes;
        bad[at + 8 + 21] = char(bad[at + 8 + 21] ^ 0x04);
        write_file(records, bad);
        RecordReader reader(records);
        std::size_t yielded = 0;
        try {
            while (reader.next()) ++yielded;
            named = false;
        } catch (const CrcError& e) {
            named = named && yielded == k && std::string(e.what()).find("record " + std::to_string(k)) != std::string::npos;
        }
    }
    o.check(named, "record corruption names its index");
    bool rec_trunc = true;
    for (std::size_t cut = 0; cut < bytes.size(); cut += 97) {
        write_file(records, bytes.substr(0, cut));
        rec_trunc = rec_trunc && throws<FormatError>([&] { read_records(records); });
    }
    std::string magic = bytes;
    magic[0] = 'g';
    write_file(records, magic);
    rec_trunc = rec_trunc && throws<BadMagicError>([&] { read_records(records); });
    o.check(rec_trunc, "record truncation/magic errors");

    ModelConfig c = tiny_model({Modality::rgb, Modality::skeleton});
    Model m = Model::build(c);
    RngStream rng(9);
    const ModalityInputs in = random_inputs(c, 2, 3, rng);
    const std::vector<std::size_t> lengths{3, 2};
    m.forward(in, lengths, Mode::train);
    const std::string ckpt = (dir / "serial.gnet").string();
    save_checkpoint(m, ckpt);
    const Model loaded = load_checkpoint(ckpt);
    bool ck_ok = loaded.config().to_json() == m.config().to_json() && loaded.registry().size() == m.registry().size();
    for (std::size_t i = 0; ck_ok && i < m.registry().size(); ++i)
        ck_ok = bit_equal(loaded.registry().slots()[i].value, m.registry().slots()[i].value);
    ck_ok = ck_ok && bit_equal(loaded.infer(in, lengths).logits, m.infer(in, lengths).logits);
    o.check(ck_ok, "checkpoint round trip");

    const std::string cbytes = serialize_checkpoint(m);
    bool flips = true, truncs = true;
    std::size_t trials = 0;
    for (std::size_t pos = 8; pos < cbytes.size(); ++pos, ++trials) {
        std::string bad = cbytes;
        bad[pos] = char(bad[pos] ^ 0x80);
        flips = flips && throws<CrcError>([&] { deserialize_checkpoint(bad); });
    }
    for (std::size_t len = 0; len < cbytes.size(); ++len, ++trials)
        truncs = truncs && throws<FormatError>([&] { deserialize_checkpoint(cbytes.substr(0, len)); });
    std::string bad = cbytes;
    bad[2] = 'X';
    const bool magic_ok = throws<BadMagicError>([&] { deserialize_checkpoint(bad); });
    bad = cbytes;
    bad[4] = 3;
    const bool version_ok = throws<VersionError>([&] { deserialize_checkpoint(bad); });
    o.check(flips, "checkpoint byte flips raise CRC errors");
    o.check(truncs, "checkpoint truncations raise format errors");
    o.check(magic_ok && version_ok, "checkpoint magic/version errors");
    o.note("records and checkpoint bit-exact; " + std::to_string(trials) + " corrupted checkpoints all rejected");
    return o;
}

// ---------------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& dir) {
    const std::string cmd = std::string(GNET_CLI_PATH) + " " + args + " >" + (dir / "cli.log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome cli_determinism(const fs::path& dir) {
    Outcome o;
    const std::string data = (dir / "cli.grec").string();
    o.check(run_cli("gen-data --out " + data + " --classes 20 --per-class 1", dir) == 0, "gen-data");
    RunConfig rc;
    rc.train.max_epochs = 2;
    const std::string config = (dir / "cli.json").string();
    rc.save(config);
    std::vector<std::string> csv;
    std::vector<std::string> ckpt;
    for (const char* workers : {"1", "1", "3"}) {
        const fs::path out = dir / ("cli_run" + std::to_string(csv.size()));
        const int code = run_cli("train --quiet --config " + config + " --data " + data + " --out-dir " + out.string() +
                                     " --workers " + workers,
                                 dir);
        o.check(code == 0, std::string("train with --workers ") + workers);
        csv.push_back(code == 0 ? read_file((out / "events.csv").string()) : std::string());
        ckpt.push_back(code == 0 ? read_file((out / "best.gnet").string()) : std::string());
    }
    o.check(!csv[0].empty() && csv[0] == csv[1], "rerun gives identical events CSV");
    o.check(csv[0] == csv[2], "events CSV independent of --workers");
    o.check(ckpt[0] == ckpt[1] && ckpt[0] == ckpt[2], "identical checkpoints");
    o.note("3 full train runs (default model, augmentation on, 2 epochs; workers 1, 1, 3) byte-compared");
    return o;
}

}  // namespace

int main() {
    const fs::path dir = fs::current_path() / "acceptance_work";
    fs::remove_all(dir);
    fs::create_directories(dir);

    int failures = 0;
    auto report = [&](const char* name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s  %-20s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    };

    report("gradient-suite", gradient_suite);
    report("analytic-values", analytic_values);
    report("mask-invariance", mask_invariance);
    report("schedule-semantics", schedule_semantics);
    report("augmentation-suite", augmentation_suite);
    const LadderData data = ladder_data();
    std::vector<Rung> rungs;
    double ladder_seconds = 0;
    report("overfit-ladder", [&] { return overfit_ladder(data, rungs, ladder_seconds); });
    report("variant-parity", [&] { return variant_parity(data, ladder_seconds); });
    report("serialization", [&] { return serialization(dir); });
    report("determinism", [&] { return cli_determinism(dir); });

    fs::remove_all(dir);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
