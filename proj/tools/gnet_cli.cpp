// Command-line front end: synthetic data, training, evaluation and
// augmentation previews.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "gnet/binary_io.hpp"
#include "gnet/run_config.hpp"

namespace fs = std::filesystem;
using namespace gnet;

namespace {

constexpr int kExitData = 2;
constexpr int kExitDiverged = 3;

std::pair<std::size_t, std::size_t> parse_frames(const std::string& text) {
    const auto dash = text.find_first_of("-:");
    try {
        std::size_t used = 0;
        if (dash == std::string::npos) {
            const auto n = std::stoul(text, &used);
            if (used != text.size()) throw std::invalid_argument(text);
            return {n, n};
        }
        const auto lo = std::stoul(text.substr(0, dash), &used);
        if (used != dash) throw std::invalid_argument(text);
        const std::string rest = text.substr(dash + 1);
        const auto hi = std::stoul(rest, &used);
        if (used != rest.size()) throw std::invalid_argument(text);
        return {lo, hi};
    } catch (const std::logic_error&) {
        throw ConfigError("--frames", "expected N or MIN-MAX, got '" + text + "'");
    }
}

AugmentPolicy policy_from_arg(const std::string& arg) {
    if (arg == "default") return AugmentPolicy{};
    if (arg == "none") return AugmentPolicy::none();
    if (arg == "flip") return AugmentPolicy::flip_only();
    return AugmentPolicy::from_json(parse_json(read_file(arg), arg));
}

struct GenDataArgs {
    std::string out;
    std::size_t classes = 20;
    std::size_t per_class = 5;
    std::size_t resolution = 32;
    std::string frames = "20-40";
    std::size_t joints = 2;
    std::uint64_t seed = 0;
};

int cmd_gen_data(const GenDataArgs& a) {
    SyntheticSpec spec;
    spec.classes = a.classes;
    spec.per_class = a.per_class;
    spec.resolution = a.resolution;
    std::tie(spec.min_frames, spec.max_frames) = parse_frames(a.frames);
    spec.joints = a.joints;
    spec.seed = a.seed;
    const auto samples = generate_synthetic(spec);
    RecordWriter w(a.out);
    for (const auto& s : samples) w.write(s);
    w.close();
    std::cout << "wrote " << w.count() << " records (" << w.bytes_written() << " bytes) to " << a.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string config;
    std::string data;
    std::string out_dir;
    bool no_augment = false;
    std::vector<std::string> modalities;
    std::size_t workers = 1;
    std::size_t max_epochs = 0;
    bool quiet = false;
    bool write_splits = false;
};

int cmd_train(const TrainArgs& a) {
    RunConfig rc = a.config.empty() ? RunConfig{} : RunConfig::load(a.config);
    if (!a.data.empty()) rc.records = a.data;
    if (rc.records.empty()) throw ConfigError("paths.records", "no record file given (use --data)");
    if (a.no_augment) rc.train.augment = false;
    if (a.max_epochs) rc.train.max_epochs = a.max_epochs;
    if (!a.modalities.empty()) {
        rc.model.modalities.clear();
        for (const auto& m : a.modalities) rc.model.modalities.push_back(modality_from_string(m));
    }
    rc.train.policy = rc.augment;
    rc.train.workers = a.workers;
    rc.validate();

    fs::create_directories(a.out_dir);
    rc.save((fs::path(a.out_dir) / "config.json").string());
    rc.train.checkpoint_path = (fs::path(a.out_dir) / rc.checkpoint).string();
    if (!a.quiet) {
        rc.train.on_epoch = [](const TrainEvent& e) {
            std::cerr << "epoch " << e.epoch << " train_loss " << e.train_loss << " train_acc " << e.train_acc
                      << " val_loss " << e.val_loss << " val_acc " << e.val_acc << " lr " << e.lr
                      << (e.reduced ? " reduced" : "") << (e.stopped ? " stopped" : "") << "\n";
        };
    }

    const DatasetSplit parts = split(read_records(rc.records), rc.split);
    if (a.write_splits) {
        write_records(parts.train, (fs::path(a.out_dir) / "train.grec").string());
        write_records(parts.val, (fs::path(a.out_dir) / "val.grec").string());
        write_records(parts.test, (fs::path(a.out_dir) / "test.grec").string());
    }
    const TrainResult result = train(rc.model, parts.train, parts.val, rc.train);
    write_events_csv(result.events, (fs::path(a.out_dir) / rc.events).string());
    const EvalResult val = evaluate(result.best, parts.val, rc.train.batch_size, a.workers);
    std::cout << "epochs " << result.events.size() << "\n"
              << "best_epoch " << result.best_epoch << "\n"
              << "val_loss " << val.loss << "\n"
              << "val_accuracy " << val.accuracy << "\n";
    return 0;
}

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string predictions = "predictions.csv";
    std::size_t workers = 1;
};

int cmd_eval(const EvalArgs& a) {
    const EvalResult r = evaluate(a.checkpoint, a.data, a.workers);
    std::string csv = "index,label,predicted,correct\n";
    for (std::size_t i = 0; i < r.predicted.size(); ++i) {
        csv += std::to_string(i) + "," + std::to_string(r.labels[i]) + "," + std::to_string(r.predicted[i]) + "," +
               (r.labels[i] == r.predicted[i] ? "1" : "0") + "\n";
    }
    write_file(a.predictions, csv);
    std::cout << "samples " << r.predicted.size() << "\n"
              << "loss " << r.loss << "\n"
              << "accuracy " << r.accuracy << "\n";
    return 0;
}

struct PreviewArgs {
    std::string data;
    std::size_t index = 0;
    std::string policy = "default";
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_augment_preview(const PreviewArgs& a) {
    const AugmentPolicy policy = policy_from_arg(a.policy);
    RecordReader reader(a.data);
    std::optional<VideoSample> sample;
    while (auto s = reader.next()) {
        if (reader.index() == a.index + 1) {
            sample = std::move(s);
            break;
        }
    }
    if (!sample) {
        throw ValueError("--index " + std::to_string(a.index) + " out of range (" + std::to_string(reader.index()) +
                         " records)");
    }
    const AugmentedSample aug = apply_policy(*sample, policy, RngStream(a.seed).derive(a.index));
    RecordWriter w(a.out);
    w.write(aug.sample);
    w.close();
    write_file(a.out + ".params.json", aug.dump());
    std::cout << aug.dump();
    return 0;
}

int cmd_config(const std::string& out) {
    const std::string text = RunConfig{}.to_json().dump(2) + "\n";
    if (out.empty()) {
        std::cout << text;
    } else {
        write_file(out, text);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gnet: 3D-convolutional recurrent gesture classifier"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic gesture dataset as a record file");
    gen_cmd->add_option("--out", gen.out, "Output record file")->required();
    gen_cmd->add_option("--classes", gen.classes, "Number of classes (at most 20)")->capture_default_str();
    gen_cmd->add_option("--per-class", gen.per_class, "Samples per class")->capture_default_str();
    gen_cmd->add_option("--resolution", gen.resolution, "Frame height and width (at least 8)")->capture_default_str();
    gen_cmd->add_option("--frames", gen.frames, "Frame count N or range MIN-MAX")->capture_default_str();
    gen_cmd->add_option("--joints", gen.joints, "Skeleton key-points per frame")->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train a model and write the best checkpoint and events CSV");
    train_cmd->add_option("--config", tr.config, "Run config JSON (defaults when omitted)");
    train_cmd->add_option("--data", tr.data, "Record file (overrides paths.records)");
    train_cmd->add_option("--out-dir", tr.out_dir, "Directory for checkpoint, events and config")->required();
    train_cmd->add_flag("--no-augment", tr.no_augment, "Disable training-set augmentation");
    train_cmd->add_option("--modality", tr.modalities, "Modalities: rgb, depth, segmentation, skeleton")
        ->delimiter(',');
    train_cmd->add_option("--workers", tr.workers, "Threads for augmentation and evaluation")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--max-epochs", tr.max_epochs, "Override train.max_epochs (0 keeps the config)")
        ->capture_default_str();
    train_cmd->add_flag("--quiet", tr.quiet, "No per-epoch progress on stderr");
    train_cmd->add_flag("--write-splits", tr.write_splits, "Also write train/val/test.grec into the output directory");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a record file");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
    eval_cmd->add_option("--data", ev.data, "Record file")->required();
    eval_cmd->add_option("--predictions", ev.predictions, "Per-sample predictions CSV")->capture_default_str();
    eval_cmd->add_option("--workers", ev.workers, "Evaluation threads")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    PreviewArgs pv;
    auto* preview_cmd = app.add_subcommand("augment-preview", "Augment one record and dump the drawn parameters");
    preview_cmd->add_option("--data", pv.data, "Record file")->required();
    preview_cmd->add_option("--index", pv.index, "Record index")->capture_default_str();
    preview_cmd->add_option("--policy", pv.policy, "default, none, flip, or a policy JSON file")
        ->capture_default_str();
    preview_cmd->add_option("--seed", pv.seed, "Augmentation seed")->capture_default_str();
    preview_cmd->add_option("--out", pv.out, "Output record file (parameters go to <out>.params.json)")
        ->required();

    std::string config_out;
    auto* config_cmd = app.add_subcommand("config", "Print the default run config");
    config_cmd->add_option("--out", config_out, "Write to this file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitData;
    }

    try {
        if (*gen_cmd) return cmd_gen_data(gen);
        if (*train_cmd) return cmd_train(tr);
        if (*eval_cmd) return cmd_eval(ev);
        if (*preview_cmd) return cmd_augment_preview(pv);
        if (*config_cmd) return cmd_config(config_out);
    } catch (const DivergenceError& e) {
        std::cerr << "error: diverged: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitData;
}
