// Drives the command-line tool as a subprocess.

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "iarn/iarn.hpp"

using namespace iarn;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("iarn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path path(const std::string& name) const { return dir_ / name; }

    RunResult run(const std::string& args, const std::string& env = "") const {
        const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
        const std::string cmd = env + (env.empty() ? "" : " ") + std::string(IARN_CLI_PATH) + " " + args + " > " +
                                out.string() + " 2> " + err.string();
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
    }

    std::string synth(const std::string& name, const std::string& flags) const {
        const std::string p = path(name).string();
        EXPECT_EQ(run("synth " + flags + " --out " + p).code, 0);
        return p;
    }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SynthIsDeterministicAndRoundTrips) {
    const std::string a = synth("a.csv", "--kind sine --n 100 --noise 0 --seed 1");
    const std::string b = synth("b.csv", "--kind sine --n 100 --noise 0 --seed 1");
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_EQ(line_count(slurp(a)), 101u);
    const Series s = read_csv_file(a);
    EXPECT_EQ(s, synth_series(SynthKind::Sine, 100, 0.0, 1));
    EXPECT_EQ(to_csv(s), slurp(a));
    EXPECT_TRUE(fs::exists(path("a.manifest.json")));
}

TEST_F(CliTest, SynthUnknownKindIsUsageError) {
    const RunResult r = run("synth --kind bogus --out " + path("x.csv").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
    EXPECT_FALSE(fs::exists(path("x.csv")));
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
}

TEST_F(CliTest, TrainWithDefaultsThenEvaluateAndPredict) {
    const std::string data = synth("flow.csv", "--kind sine --n 600 --noise 0 --seed 3");
    const std::string before = slurp(data);
    const std::string model = path("model.json").string();
    const RunResult tr = run("train --data " + data + " --out " + model);
    ASSERT_EQ(tr.code, 0) << tr.err;
    EXPECT_NE(tr.out.find("final_train_loss="), std::string::npos);
    EXPECT_EQ(slurp(data), before);
    const std::string history = slurp(path("model.history.csv"));
    EXPECT_EQ(line_count(history), 101u);
    EXPECT_EQ(history.substr(0, history.find('\n')), "epoch,train_loss,val_loss,seconds");
    const auto manifest = nlohmann::json::parse(slurp(path("model.manifest.json")));
    EXPECT_EQ(manifest["command"], "train");
    EXPECT_EQ(manifest["config"]["train"]["epochs"], 100);
    EXPECT_EQ(manifest["config"]["model"]["window_len"], 30);
    EXPECT_TRUE(manifest["seeds"].contains("shuffle"));

    const RunResult ev = run("evaluate --model " + model + " --data " + data);
    ASSERT_EQ(ev.code, 0) << ev.err;
    EXPECT_EQ(ev.out.substr(0, ev.out.find('\n')), "RMSE,MAE,MAPE(%),EVS");
    const auto report = nlohmann::json::parse(slurp(path("model.report.json")));
    EXPECT_GE(report["evs"].get<double>(), 0.99);
    EXPECT_EQ(report["n"], 120);
    const std::string preds = slurp(path("model.predictions.csv"));
    EXPECT_EQ(line_count(preds), 121u);
    EXPECT_EQ(preds.substr(0, preds.find('\n')), "timestamp,actual,predicted");
    EXPECT_TRUE(fs::exists(path("model.report.manifest.json")));

    // Predictions must reproduce the library's forward pass exactly.
    const SavedModel m = load_model(model);
    const Series series = read_csv_file(data);
    const std::vector<double> tail =
        scale(values_of(std::span<const SeriesRecord>(series).last(30)), m.scaler);
    const std::vector<double> manual = predict_recursive(m.params, tail, 3);

    const RunResult one = run("predict --model " + model + " --data " + data + " --steps 1");
    ASSERT_EQ(one.code, 0) << one.err;
    const std::string expected_one = format_double(m.scaler.unscale(iarn_forward(tail, m.params)));
    EXPECT_NE(one.out.find("1,2017-01-26T00:00:00Z," + expected_one + "\n"), std::string::npos) << one.out;

    const RunResult three = run("predict --model " + model + " --data " + data + " --steps 3");
    ASSERT_EQ(three.code, 0);
    EXPECT_EQ(line_count(three.out), 4u);
    for (std::size_t k = 0; k < 3; ++k)
        EXPECT_NE(three.out.find("," + format_double(m.scaler.unscale(manual[k])) + "\n"), std::string::npos);
    // Recursion by hand: feed each prediction back into the window.
    std::vector<double> w = tail;
    for (std::size_t k = 0; k < 3; ++k) {
        const double next = iarn_forward(std::span<const double>(w).last(30), m.params);
        EXPECT_EQ(next, manual[k]);
        w.push_back(next);
    }
}

TEST_F(CliTest, TrainErrorsLeaveNoModel) {
    const std::string data = synth("flow.csv", "--kind sine --n 200 --noise 0 --seed 3");
    const RunResult r = run("train --data " + data + " --out " + path("m.json").string() + " --epochs 0");
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(fs::exists(path("m.json")));
    EXPECT_FALSE(fs::exists(path("m.history.csv")));

    EXPECT_EQ(run("train --data " + path("missing.csv").string() + " --out " + path("m.json").string()).code, 2);
    EXPECT_EQ(run("train --data " + data + " --out " + path("m.json").string() + " --kernel 4").code, 2);
    std::ofstream(path("bad.csv")) << "timestamp,value\n2017-01-01T00:00:00Z,abc\n";
    const RunResult bad = run("train --data " + path("bad.csv").string() + " --out " + path("m.json").string());
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.err.find("line 2"), std::string::npos);
    EXPECT_FALSE(fs::exists(path("m.json")));
}

TEST_F(CliTest, TrainIsByteDeterministic) {
    const std::string data = synth("flow.csv", "--kind double-season --n 300 --noise 0.2 --seed 4");
    const std::string flags = " --window 12 --hidden 4 --blocks 2 --epochs 3 --seed 7 --batch-size 32";
    ASSERT_EQ(run("train --data " + data + " --out " + path("a.json").string() + flags).code, 0);
    ASSERT_EQ(run("train --data " + data + " --out " + path("b.json").string() + flags).code, 0);
    EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
    ASSERT_EQ(run("train --data " + data + " --out " + path("c.json").string() + flags + " --shuffle-seed 1").code, 0);
    EXPECT_NE(slurp(path("a.json")), slurp(path("c.json")));
}

TEST_F(CliTest, EvaluateAndPredictRejectShortSeries) {
    const ModelConfig cfg;
    save_model(init_params(cfg, 0), cfg, Scaler{7.0, 13.0}, path("m.json").string());
    const std::string data = synth("short.csv", "--kind sine --n 10 --noise 0 --seed 0");
    EXPECT_EQ(run("evaluate --model " + path("m.json").string() + " --data " + data).code, 2);
    EXPECT_EQ(run("predict --model " + path("m.json").string() + " --data " + data).code, 2);
    EXPECT_EQ(run("predict --model " + path("nope.json").string() + " --data " + data).code, 2);
    std::ofstream(path("broken.json")) << "{\"format_version\": 1, \"config\": {";
    EXPECT_EQ(run("evaluate --model " + path("broken.json").string() + " --data " + data).code, 2);
}

TEST_F(CliTest, ConstantModelPredictsConstant) {
    const ModelConfig cfg{8, 2, 3, 2, 0};
    IarnParams p = IarnParams::zeros(cfg);
    p.head_bias = 0.25;
    save_model(p, cfg, Scaler{10.0, 18.0}, path("c.json").string());
    const std::string data = synth("s.csv", "--kind sine --n 40 --noise 0.1 --seed 2");
    const RunResult r = run("predict --model " + path("c.json").string() + " --data " + data + " --steps 5 --out " +
                            path("pred.csv").string());
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream lines(slurp(path("pred.csv")));
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, "step,timestamp,predicted");
    int rows = 0;
    while (std::getline(lines, line)) {
        EXPECT_EQ(line.substr(line.rfind(',') + 1), "12");
        ++rows;
    }
    EXPECT_EQ(rows, 5);
    EXPECT_TRUE(fs::exists(path("pred.manifest.json")));
}

TEST_F(CliTest, GradcheckContract) {
    const RunResult r = run("gradcheck");
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_NE(r.out.find("max_relative_error="), std::string::npos);
    for (int seed = 1; seed < 10; ++seed) EXPECT_EQ(run("gradcheck --seed " + std::to_string(seed)).code, 0) << seed;
    EXPECT_EQ(run("gradcheck --threshold 0").code, 1);
}

TEST_F(CliTest, LogLevelControlsStderr) {
    const std::string data = path("d.csv").string();
    const RunResult quiet = run("synth --n 10 --out " + data, "IARN_LOG=error");
    EXPECT_EQ(quiet.code, 0);
    EXPECT_TRUE(quiet.err.empty()) << quiet.err;
    const RunResult info = run("synth --n 10 --out " + data, "IARN_LOG=info");
    EXPECT_NE(info.err.find("[info]"), std::string::npos);
    EXPECT_TRUE(info.out.empty());
}
