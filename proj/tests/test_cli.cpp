#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gnet/binary_io.hpp"
#include "gnet/dataset.hpp"
#include "gnet/run_config.hpp"

using namespace gnet;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("gnet_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    RunResult run(const std::string& args) const {
        const std::string out = path("stdout.txt"), err = path("stderr.txt");
        const std::string cmd = std::string(GNET_CLI_PATH) + " " + args + " >" + out + " 2>" + err;
        const int status = std::system(cmd.c_str());
        RunResult r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = read_file(out);
        r.err = read_file(err);
        return r;
    }

    // Tiny model and trainer settings that overfit a 3-class set in seconds.
    std::string tiny_config(const std::string& name, double lr = 3e-3) const {
        RunConfig rc;
        rc.model.conv_channels = {4, 4, 4};
        rc.model.height = rc.model.width = 8;
        rc.model.feature_width = 16;
        rc.model.lstm_width = 16;
        rc.model.classes = 3;
        rc.model.dropout = 0;
        rc.train.lr = real(lr);
        rc.train.batch_size = 2;
        rc.train.max_epochs = 60;
        rc.train.augment = false;
        rc.train.target_train_accuracy = 1.0;
        const std::string p = path(name);
        rc.save(p);
        return p;
    }

    std::string tiny_data(const std::string& name) const {
        const std::string p = path(name);
        const RunResult r = run("gen-data --out " + p + " --classes 3 --per-class 4 --resolution 8 --frames 5-8");
        EXPECT_EQ(r.code, 0) << r.err;
        return p;
    }

    fs::path dir_;
};

std::size_t count_lines(const std::string& text) {
    return std::size_t(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_F(Cli, HelpListsFlagsWithDefaults) {
    const RunResult top = run("--help");
    EXPECT_EQ(top.code, 0);
    for (const char* sub : {"gen-data", "train", "eval", "augment-preview", "config"})
        EXPECT_NE(top.out.find(sub), std::string::npos) << sub;
    const RunResult gen = run("gen-data --help");
    EXPECT_EQ(gen.code, 0);
    for (const char* flag : {"--out", "--classes", "--per-class", "--resolution", "--frames", "--seed"})
        EXPECT_NE(gen.out.find(flag), std::string::npos) << flag;
    EXPECT_NE(gen.out.find("[20-40]"), std::string::npos);
    const RunResult tr = run("train --help");
    for (const char* flag : {"--config", "--data", "--out-dir", "--no-augment", "--modality", "--workers"})
        EXPECT_NE(tr.out.find(flag), std::string::npos) << flag;
    const RunResult ev = run("eval --help");
    EXPECT_NE(ev.out.find("[predictions.csv]"), std::string::npos);
    const RunResult pv = run("augment-preview --help");
    for (const char* flag : {"--data", "--index", "--policy", "--seed", "--out"})
        EXPECT_NE(pv.out.find(flag), std::string::npos) << flag;
    EXPECT_EQ(run("config --help").code, 0);
    EXPECT_EQ(run("gen-data --bogus 1 --out x").code, 2);
    EXPECT_EQ(run("gen-data").code, 2);
}

TEST_F(Cli, GenDataCountsAndDeterminism) {
    const RunResult a = run("gen-data --out " + path("a.grec") + " --classes 20 --per-class 5 --resolution 16");
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_NE(a.out.find("wrote 100 records"), std::string::npos) << a.out;
    EXPECT_EQ(read_records(path("a.grec")).size(), 100u);
    ASSERT_EQ(run("gen-data --out " + path("b.grec") + " --classes 20 --per-class 5 --resolution 16").code, 0);
    EXPECT_EQ(read_file(path("a.grec")), read_file(path("b.grec")));
    ASSERT_EQ(run("gen-data --out " + path("c.grec") + " --classes 20 --per-class 5 --resolution 16 --seed 1").code, 0);
    EXPECT_NE(read_file(path("a.grec")), read_file(path("c.grec")));

    const RunResult small = run("gen-data --out " + path("d.grec") + " --resolution 4");
    EXPECT_EQ(small.code, 2);
    EXPECT_NE(small.err.find("error:"), std::string::npos);
    EXPECT_EQ(run("gen-data --out " + path("missing/dir/x.grec")).code, 2);
}

TEST_F(Cli, TrainEvalRoundTrip) {
    const std::string data = tiny_data("data.grec");
    const std::string config = tiny_config("tiny.json");
    const RunResult t1 =
        run("train --config " + config + " --data " + data + " --out-dir " + path("run1") + " --quiet --write-splits");
    ASSERT_EQ(t1.code, 0) << t1.err;
    EXPECT_NE(t1.out.find("val_accuracy"), std::string::npos);
    const std::string events = read_file(path("run1/events.csv"));
    EXPECT_EQ(events.substr(0, events.find('\n')), "epoch,train_loss,train_acc,val_loss,val_acc,lr,reduced,stopped");
    EXPECT_LE(count_lines(events), 101u);
    EXPECT_TRUE(fs::exists(path("run1/config.json")));

    const RunResult t2 = run("train --config " + config + " --data " + data + " --out-dir " + path("run2") +
                             " --quiet --workers 2");
    ASSERT_EQ(t2.code, 0) << t2.err;
    EXPECT_EQ(read_file(path("run2/events.csv")), events);
    EXPECT_EQ(read_file(path("run2/best.gnet")), read_file(path("run1/best.gnet")));

    // train split right after an overfit run
    const RunResult e1 = run("eval --checkpoint " + path("run1/best.gnet") + " --data " + path("run1/train.grec") +
                             " --predictions " + path("train_pred.csv"));
    ASSERT_EQ(e1.code, 0) << e1.err;
    EXPECT_NE(e1.out.find("accuracy 1\n"), std::string::npos) << e1.out;

    const RunResult e2 = run("eval --checkpoint " + path("run1/best.gnet") + " --data " + data + " --predictions " +
                             path("all_pred.csv") + " --workers 3");
    ASSERT_EQ(e2.code, 0) << e2.err;
    const std::string preds = read_file(path("all_pred.csv"));
    EXPECT_EQ(preds.substr(0, preds.find('\n')), "index,label,predicted,correct");
    EXPECT_EQ(count_lines(preds), 1 + read_records(data).size());
}

TEST_F(Cli, TrainErrorsMapToExitCodes) {
    const std::string data = tiny_data("data.grec");
    const std::string diverge = tiny_config("diverge.json", 1e300);
    const RunResult d = run("train --config " + diverge + " --data " + data + " --out-dir " + path("d") + " --quiet");
    EXPECT_EQ(d.code, 3) << d.err;
    EXPECT_NE(d.err.find("batch"), std::string::npos) << d.err;

    nlohmann::json bad = nlohmann::json::parse(read_file(tiny_config("bad.json")));
    bad["model"]["classes"] = 1;
    write_file(path("bad.json"), bad.dump());
    const RunResult b = run("train --config " + path("bad.json") + " --data " + data + " --out-dir " + path("b"));
    EXPECT_EQ(b.code, 2);
    EXPECT_NE(b.err.find("classes"), std::string::npos) << b.err;

    bad = nlohmann::json::parse(read_file(tiny_config("unknown.json")));
    bad["train"]["lerning_rate"] = 1;
    write_file(path("unknown.json"), bad.dump());
    const RunResult u = run("train --config " + path("unknown.json") + " --data " + data + " --out-dir " + path("u"));
    EXPECT_EQ(u.code, 2);
    EXPECT_NE(u.err.find("lerning_rate"), std::string::npos) << u.err;

    // default 32x32 model against 8x8 clips
    const RunResult m = run("train --data " + data + " --out-dir " + path("m") + " --quiet");
    EXPECT_EQ(m.code, 2);
}

TEST_F(Cli, EvalRejectsBadInputs) {
    const std::string data = tiny_data("data.grec");
    const std::string config = tiny_config("tiny.json");
    nlohmann::json j = nlohmann::json::parse(read_file(config));
    j["train"]["max_epochs"] = 1;
    write_file(config, j.dump());
    ASSERT_EQ(run("train --config " + config + " --data " + data + " --out-dir " + path("run") + " --quiet").code, 0);

    std::string ckpt = read_file(path("run/best.gnet"));
    ckpt[ckpt.size() / 2] = char(ckpt[ckpt.size() / 2] ^ 0x40);
    write_file(path("corrupt.gnet"), ckpt);
    const RunResult c = run("eval --checkpoint " + path("corrupt.gnet") + " --data " + data);
    EXPECT_EQ(c.code, 2);
    EXPECT_NE(c.err.find("CRC"), std::string::npos) << c.err;

    ASSERT_EQ(run("gen-data --out " + path("big.grec") + " --classes 3 --per-class 1 --resolution 16").code, 0);
    EXPECT_EQ(run("eval --checkpoint " + path("run/best.gnet") + " --data " + path("big.grec")).code, 2);
    EXPECT_EQ(run("eval --checkpoint " + path("nope.gnet") + " --data " + data).code, 2);
}

TEST_F(Cli, AugmentPreview) {
    const std::string data = tiny_data("data.grec");
    const auto samples = read_records(data);

    ASSERT_EQ(run("augment-preview --data " + data + " --index 3 --policy none --out " + path("none.grec")).code, 0);
    const auto none = read_records(path("none.grec"));
    ASSERT_EQ(none.size(), 1u);
    EXPECT_EQ(none[0], samples[3]);
    EXPECT_EQ(encode_record(none[0]), encode_record(samples[3]));

    const RunResult a = run("augment-preview --data " + data + " --index 2 --seed 5 --out " + path("a.grec"));
    const RunResult b = run("augment-preview --data " + data + " --index 2 --seed 5 --out " + path("b.grec"));
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(read_file(path("a.grec.params.json")), read_file(path("b.grec.params.json")));
    EXPECT_EQ(read_file(path("a.grec")), read_file(path("b.grec")));
    EXPECT_NE(a.out.find("angle_degrees"), std::string::npos);

    ASSERT_EQ(run("augment-preview --data " + data + " --index 1 --policy flip --out " + path("f1.grec")).code, 0);
    ASSERT_EQ(run("augment-preview --data " + path("f1.grec") + " --index 0 --policy flip --out " + path("f2.grec")).code,
              0);
    EXPECT_NE(read_records(path("f1.grec"))[0], samples[1]);
    // pixels come back exactly; joint x goes through 1 - (1 - x) in float32
    const VideoSample back = read_records(path("f2.grec"))[0];
    EXPECT_EQ(back.rgb, samples[1].rgb);
    EXPECT_EQ(back.depth, samples[1].depth);
    EXPECT_EQ(back.segmentation, samples[1].segmentation);
    EXPECT_EQ(back.num_frames, samples[1].num_frames);
    EXPECT_EQ(back.label, samples[1].label);
    for (std::size_t k = 0; k < back.skeleton.numel(); ++k) EXPECT_NEAR(back.skeleton[k], samples[1].skeleton[k], 1e-7);

    AugmentPolicy custom = AugmentPolicy::none();
    custom.rotate = true;
    write_file(path("policy.json"), custom.to_json().dump());
    const RunResult c = run("augment-preview --data " + data + " --policy " + path("policy.json") + " --out " +
                            path("c.grec"));
    EXPECT_EQ(c.code, 0) << c.err;

    const RunResult oob = run("augment-preview --data " + data + " --index 12 --out " + path("x.grec"));
    EXPECT_EQ(oob.code, 2);
}

TEST_F(Cli, ConfigRoundTrip) {
    ASSERT_EQ(run("config --out " + path("c.json")).code, 0);
    const RunConfig rc = RunConfig::load(path("c.json"));
    EXPECT_EQ(rc.to_json(), RunConfig{}.to_json());
    const RunResult printed = run("config");
    EXPECT_EQ(nlohmann::json::parse(printed.out), RunConfig{}.to_json());
}
