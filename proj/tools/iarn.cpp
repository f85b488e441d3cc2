// Command-line front end: synth, train, evaluate, predict, gradcheck.
//
// Exit codes: 0 success, 1 runtime or numeric failure, 2 usage or configuration error.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "iarn/iarn.hpp"

namespace {

constexpr const char* kToolVersion = "1.0.0";

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("IARN_LOG");
        if (!env) return LogLevel::Info;
        const std::string v(env);
        if (v == "error") return LogLevel::Error;
        if (v == "debug") return LogLevel::Debug;
        return LogLevel::Info;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) std::cerr << "[info] " << msg << '\n';
}

void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::Debug) std::cerr << "[debug] " << msg << '\n';
}

void log_error(const std::string& msg) { std::cerr << "error: " << msg << '\n'; }

std::string sibling(const std::string& path, const std::string& suffix) {
    std::filesystem::path p(path);
    p.replace_extension(suffix);
    return p.string();
}

using ojson = nlohmann::ordered_json;

void write_manifest(const std::string& path, const std::string& command, ojson config, ojson seeds, ojson inputs,
                    ojson outputs) {
    ojson m;
    m["command"] = command;
    m["tool_version"] = kToolVersion;
    m["config"] = std::move(config);
    m["seeds"] = std::move(seeds);
    m["inputs"] = std::move(inputs);
    m["outputs"] = std::move(outputs);
    iarn::write_file_atomic(path, m.dump(2) + "\n");
}

ojson model_config_json(const iarn::ModelConfig& c) {
    return {{"window_len", c.window_len},
            {"hidden_channels", c.hidden_channels},
            {"kernel_size", c.kernel_size},
            {"num_blocks", c.num_blocks},
            {"seed", c.seed}};
}

// Removes the listed files unless released; used so failed runs leave no outputs.
class OutputGuard {
public:
    void track(std::string path) { paths_.push_back(std::move(path)); }
    void release() { paths_.clear(); }
    ~OutputGuard() {
        for (const auto& p : paths_) {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
    }

private:
    std::vector<std::string> paths_;
};

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string kind = "sine";
    std::size_t n = 1000;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::string out;
};

int run_synth(const SynthArgs& a) {
    const iarn::SynthKind kind = iarn::parse_synth_kind(a.kind);
    const iarn::Series s = iarn::synth_series(kind, a.n, a.noise, a.seed);
    iarn::write_file_atomic(a.out, iarn::to_csv(s));
    write_manifest(sibling(a.out, ".manifest.json"), "synth",
                   {{"kind", iarn::to_string(kind)}, {"n", a.n}, {"noise_sigma", a.noise}}, {{"noise", a.seed}},
                   ojson::object(), {{"data", a.out}});
    log_info("wrote " + std::to_string(s.size()) + " records to " + a.out);
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string out;
    std::string history;
    double train_fraction = 0.8;
    iarn::ModelConfig model;
    iarn::TrainConfig train;
    bool validate = true;
};

int run_train(TrainArgs a) {
    a.model.validate();
    a.train.validate();
    if (a.history.empty()) a.history = sibling(a.out, ".history.csv");
    const std::string manifest = sibling(a.out, ".manifest.json");

    const iarn::Series series = iarn::read_csv_file(a.data);
    const iarn::PreparedData prep = iarn::prepare_data(series, a.model.window_len, a.train_fraction);
    if (prep.train.empty()) throw iarn::ConfigError("training split is too short to form any window");
    log_info("training on " + std::to_string(prep.train.size()) + " windows, validating on " +
             std::to_string(prep.test.size()));

    const auto on_epoch = [](std::size_t epoch, double loss, std::optional<double> val) {
        std::string msg = "epoch " + std::to_string(epoch) + " train_loss=" + iarn::format_double(loss);
        if (val) msg += " val_loss=" + iarn::format_double(*val);
        if (epoch % 10 == 0) log_info(msg);
        else log_debug(msg);
    };
    const iarn::TrainResult result =
        iarn::train(prep.train, a.model, a.train, a.validate ? &prep.test : nullptr, on_epoch);

    OutputGuard guard;
    std::ostringstream hist;
    iarn::write_history_csv(hist, result.history);
    guard.track(a.history);
    iarn::write_file_atomic(a.history, hist.str());
    guard.track(manifest);
    write_manifest(manifest, "train",
                   {{"model", model_config_json(a.model)},
                    {"train",
                     {{"learning_rate", a.train.learning_rate},
                      {"beta1", a.train.beta1},
                      {"beta2", a.train.beta2},
                      {"epsilon", a.train.epsilon},
                      {"weight_decay", a.train.weight_decay},
                      {"epochs", a.train.epochs},
                      {"batch_size", a.train.batch_size}}},
                    {"train_fraction", a.train_fraction},
                    {"validate", a.validate}},
                   {{"init", a.model.seed}, {"shuffle", a.train.seed}}, {{"data", a.data}},
                   {{"model", a.out}, {"history", a.history}});
    iarn::save_model(result.params, a.model, prep.scaler, a.out);
    guard.release();

    std::cout << "final_train_loss=" << iarn::format_double(result.history.train_loss.back()) << '\n';
    return 0;
}

struct EvaluateArgs {
    std::string model;
    std::string data;
    std::string report;
    std::string predictions;
    double train_fraction = 0.8;
};

int run_evaluate(EvaluateArgs a) {
    if (a.report.empty()) a.report = sibling(a.model, ".report.json");
    if (a.predictions.empty()) a.predictions = sibling(a.model, ".predictions.csv");
    const iarn::SavedModel m = iarn::load_model(a.model);
    const iarn::Series series = iarn::read_csv_file(a.data);
    const iarn::PreparedData prep =
        iarn::prepare_data(series, m.config.window_len, a.train_fraction, &m.scaler);
    const iarn::Evaluation ev = iarn::evaluate_dataset(m.params, prep.test, m.scaler);

    std::ostringstream pred;
    pred << "timestamp,actual,predicted\n";
    for (std::size_t i = 0; i < ev.actual.size(); ++i) {
        pred << iarn::format_timestamp(prep.test_times[i]) << ',' << iarn::format_double(ev.actual[i]) << ','
             << iarn::format_double(ev.predicted[i]) << '\n';
    }
    ojson report = iarn::metrics_to_json(ev.report);
    report["table_row"] = {{"header", iarn::metrics_csv_header()}, {"row", iarn::metrics_csv_row(ev.report)}};

    OutputGuard guard;
    guard.track(a.predictions);
    iarn::write_file_atomic(a.predictions, pred.str());
    guard.track(a.report);
    iarn::write_file_atomic(a.report, report.dump(2) + "\n");
    const std::string manifest = sibling(a.report, ".manifest.json");
    guard.track(manifest);
    write_manifest(manifest, "evaluate", {{"model", model_config_json(m.config)}, {"train_fraction", a.train_fraction}},
                   {{"init", m.config.seed}}, {{"model", a.model}, {"data", a.data}},
                   {{"report", a.report}, {"predictions", a.predictions}});
    guard.release();

    std::cout << iarn::metrics_csv_header() << '\n' << iarn::metrics_csv_row(ev.report) << '\n';
    log_info("rmse=" + iarn::format_double(ev.report.rmse) + " mae=" + iarn::format_double(ev.report.mae) +
             " (unnormalized, n=" + std::to_string(ev.report.n) + ")");
    return 0;
}

struct PredictArgs {
    std::string model;
    std::string data;
    std::size_t steps = 1;
    std::string out;
};

int run_predict(const PredictArgs& a) {
    if (a.steps == 0) throw iarn::ConfigError("--steps must be >= 1");
    const iarn::SavedModel m = iarn::load_model(a.model);
    const iarn::Series series = iarn::read_csv_file(a.data);
    const std::size_t w = m.config.window_len;
    if (series.size() < w)
        throw iarn::ConfigError("need at least " + std::to_string(w) + " records, got " +
                                std::to_string(series.size()));
    const std::vector<double> tail = iarn::scale(
        iarn::values_of(std::span<const iarn::SeriesRecord>(series).last(w)), m.scaler);
    const std::vector<double> forecast = iarn::unscale(iarn::predict_recursive(m.params, tail, a.steps), m.scaler);

    std::optional<std::chrono::seconds> step;
    if (series.size() >= 2) step = series.back().timestamp - series[series.size() - 2].timestamp;
    std::ostringstream csv;
    csv << "step,timestamp,predicted\n";
    for (std::size_t i = 0; i < forecast.size(); ++i) {
        csv << (i + 1) << ',';
        if (step) csv << iarn::format_timestamp(series.back().timestamp + *step * static_cast<long>(i + 1));
        csv << ',' << iarn::format_double(forecast[i]) << '\n';
    }
    if (a.out.empty()) {
        std::cout << csv.str();
    } else {
        OutputGuard guard;
        guard.track(a.out);
        iarn::write_file_atomic(a.out, csv.str());
        const std::string manifest = sibling(a.out, ".manifest.json");
        guard.track(manifest);
        write_manifest(manifest, "predict", {{"model", model_config_json(m.config)}, {"steps", a.steps}},
                       {{"init", m.config.seed}}, {{"model", a.model}, {"data", a.data}}, {{"predictions", a.out}});
        guard.release();
    }
    return 0;
}

struct GradcheckArgs {
    std::uint64_t seed = 0;
    double threshold = 1e-4;
    double eps = 1e-5;
};

int run_gradcheck(const GradcheckArgs& a) {
    const iarn::NetworkCheckCase c = iarn::make_network_check_case(a.seed);
    const iarn::GradCheckResult r = iarn::check_network_gradients(c, a.eps);
    std::cout << "max_relative_error=" << iarn::format_double(r.max_relative_error) << '\n';
    log_debug("worst parameter index " + std::to_string(r.worst_index) + " analytic=" +
              iarn::format_double(r.analytic) + " numeric=" + iarn::format_double(r.numeric));
    if (r.max_relative_error < a.threshold) return 0;
    log_error("gradient check failed: " + iarn::format_double(r.max_relative_error) +
              " >= threshold " + iarn::format_double(a.threshold));
    return 1;
}

void add_model_flags(CLI::App* cmd, iarn::ModelConfig& m) {
    cmd->add_option("--window", m.window_len, "Input window length W")->capture_default_str();
    cmd->add_option("--hidden", m.hidden_channels, "Hidden channels H")->capture_default_str();
    cmd->add_option("--kernel", m.kernel_size, "Convolution kernel size (odd)")->capture_default_str();
    cmd->add_option("--blocks", m.num_blocks, "Number of residual blocks")->capture_default_str();
    cmd->add_option("--seed", m.seed, "Parameter initialization seed")->capture_default_str();
}

void add_train_flags(CLI::App* cmd, iarn::TrainConfig& t) {
    cmd->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch-size", t.batch_size, "Mini-batch size")->capture_default_str();
    cmd->add_option("--lr", t.learning_rate, "Adam learning rate")->capture_default_str();
    cmd->add_option("--beta1", t.beta1, "Adam first-moment decay")->capture_default_str();
    cmd->add_option("--beta2", t.beta2, "Adam second-moment decay")->capture_default_str();
    cmd->add_option("--adam-eps", t.epsilon, "Adam epsilon")->capture_default_str();
    cmd->add_option("--weight-decay", t.weight_decay, "L2 weight decay (weights only)")->capture_default_str();
    cmd->add_option("--shuffle-seed", t.seed, "Batch shuffling seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Initialized attention residual network for univariate time-series forecasting"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic series as CSV");
    synth_cmd->add_option("--kind", synth.kind, "sine | double-season | trend+season")
        ->check(CLI::IsMember({"sine", "sine+noise", "double-season", "trend+season", "trend"}))
        ->capture_default_str();
    synth_cmd->add_option("--n", synth.n, "Number of hourly records")->capture_default_str();
    synth_cmd->add_option("--noise", synth.noise, "Gaussian noise standard deviation")->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed, "Noise seed")->capture_default_str();
    synth_cmd->add_option("--out", synth.out, "Output CSV path")->required();

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train a model on a CSV series");
    train_cmd->add_option("--data", train.data, "Input CSV (timestamp,value)")->required();
    train_cmd->add_option("--out", train.out, "Output model JSON")->required();
    train_cmd->add_option("--history", train.history, "History CSV (default: <out>.history.csv)");
    train_cmd->add_option("--train-fraction", train.train_fraction, "Chronological training fraction")
        ->capture_default_str();
    train_cmd->add_flag("!--no-validation", train.validate, "Skip per-epoch loss on the held-out split");
    add_model_flags(train_cmd, train.model);
    add_train_flags(train_cmd, train.train);

    EvaluateArgs eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "One-step-ahead evaluation on the held-out split");
    eval_cmd->add_option("--model", eval.model, "Model JSON")->required();
    eval_cmd->add_option("--data", eval.data, "Input CSV (timestamp,value)")->required();
    eval_cmd->add_option("--report", eval.report, "Metrics JSON (default: <model>.report.json)");
    eval_cmd->add_option("--predictions", eval.predictions, "Predictions CSV (default: <model>.predictions.csv)");
    eval_cmd->add_option("--train-fraction", eval.train_fraction, "Chronological training fraction")
        ->capture_default_str();

    PredictArgs pred;
    auto* pred_cmd = app.add_subcommand("predict", "Forecast past the last record");
    pred_cmd->add_option("--model", pred.model, "Model JSON")->required();
    pred_cmd->add_option("--data", pred.data, "Input CSV (timestamp,value)")->required();
    pred_cmd->add_option("--steps", pred.steps, "Steps ahead, fed back recursively")->capture_default_str();
    pred_cmd->add_option("--out", pred.out, "Output CSV (default: standard output)");

    GradcheckArgs gc;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the full network gradient");
    gc_cmd->add_option("--seed", gc.seed, "Random case seed")->capture_default_str();
    gc_cmd->add_option("--threshold", gc.threshold, "Pass when max relative error is below this")
        ->capture_default_str();
    gc_cmd->add_option("--eps", gc.eps, "Finite-difference step")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        const CLI::App* sub = nullptr;
        for (const auto* s : app.get_subcommands()) sub = s;
        std::cerr << (sub ? sub->help() : app.help());
        return 2;
    }

    try {
        if (*synth_cmd) return run_synth(synth);
        if (*train_cmd) return run_train(train);
        if (*eval_cmd) return run_evaluate(eval);
        if (*pred_cmd) return run_predict(pred);
        if (*gc_cmd) return run_gradcheck(gc);
    } catch (const iarn::ConfigError& e) {
        log_error(e.what());
        return 2;
    } catch (const iarn::DimensionError& e) {
        log_error(e.what());
        return 2;
    } catch (const iarn::ParseError& e) {
        log_error(e.what());
        return 2;
    } catch (const iarn::ModelLoadError& e) {
        log_error(e.what());
        return 2;
    } catch (const std::exception& e) {
        log_error(e.what());
        return 1;
    }
    return 2;
}
