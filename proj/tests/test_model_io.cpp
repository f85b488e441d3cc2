#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "iarn/model_io.hpp"
#include "oracles.hpp"

using namespace iarn;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("iarn_io_" + name)).string();
}

std::string read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

ModelLoadError::Kind load_error_kind(const std::string& text) {
    try {
        model_from_json(text);
    } catch (const ModelLoadError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected ModelLoadError";
    return ModelLoadError::Kind::MissingFile;
}

}  // namespace

TEST(ModelIo, RoundTripIsBitExact) {
    const ModelConfig cfg{12, 5, 3, 3, 77};
    IarnParams p = init_params(cfg, 77);
    std::mt19937_64 rng(1);
    p.for_each([&](const ParamView& v) {
        for (double& x : v.data) x += std::uniform_real_distribution<double>(-1e-3, 1e-3)(rng);
    });
    const Scaler sc{3.25, 17.0000000001};
    const std::string path = temp_path("roundtrip.json");
    save_model(p, cfg, sc, path);
    const SavedModel m = load_model(path);
    EXPECT_EQ(m.params, p);
    EXPECT_EQ(m.config, cfg);
    EXPECT_EQ(m.scaler, sc);
    for (int i = 0; i < 100; ++i) {
        const std::vector<double> w = oracle::random_vector(12, rng, 0.0, 1.0);
        EXPECT_EQ(iarn_forward(w, m.params), iarn_forward(w, p));
    }
    EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
    save_model(p, cfg, sc, path + ".2");
    EXPECT_EQ(read_all(path), read_all(path + ".2"));
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".2");
}

TEST(ModelIo, LayoutHasDeclaredShapes) {
    const ModelConfig cfg{4, 2, 3, 2, 0};
    const auto doc = nlohmann::json::parse(model_to_json(init_params(cfg, 0), cfg, Scaler{0, 1}));
    EXPECT_EQ(doc["format_version"], 1);
    EXPECT_EQ(doc["config"]["window_len"], 4);
    EXPECT_EQ(doc["params"]["blocks.0.conv1.weight"]["shape"], nlohmann::json({2, 1, 3}));
    EXPECT_EQ(doc["params"]["blocks.0.conv1.weight"]["data"].size(), 2u);
    EXPECT_EQ(doc["params"]["blocks.0.conv1.weight"]["data"][0].size(), 1u);
    EXPECT_EQ(doc["params"]["blocks.0.conv1.weight"]["data"][0][0].size(), 3u);
    EXPECT_TRUE(doc["params"].contains("blocks.0.shortcut.weight"));
    EXPECT_FALSE(doc["params"].contains("blocks.1.shortcut.weight"));
    EXPECT_EQ(doc["params"]["head_affine.weight"]["shape"], nlohmann::json({4}));
}

TEST(ModelIo, DistinctErrors) {
    EXPECT_THROW(
        {
            try {
                load_model(temp_path("does_not_exist.json"));
            } catch (const ModelLoadError& e) {
                EXPECT_EQ(e.kind(), ModelLoadError::Kind::MissingFile);
                throw;
            }
        },
        ModelLoadError);

    const ModelConfig cfg{4, 2, 3, 2, 0};
    const std::string good = model_to_json(init_params(cfg, 0), cfg, Scaler{0, 1});
    EXPECT_EQ(load_error_kind(good.substr(0, good.size() / 2)), ModelLoadError::Kind::Schema);
    EXPECT_EQ(load_error_kind("[]"), ModelLoadError::Kind::Schema);

    auto doc = nlohmann::json::parse(good);
    doc["format_version"] = 2;
    EXPECT_EQ(load_error_kind(doc.dump()), ModelLoadError::Kind::Version);

    doc = nlohmann::json::parse(good);
    doc["params"]["blocks.1.conv2.weight"]["data"][0].erase(0);
    try {
        model_from_json(doc.dump());
        FAIL();
    } catch (const ModelLoadError& e) {
        EXPECT_EQ(e.kind(), ModelLoadError::Kind::Validation);
        EXPECT_NE(std::string(e.what()).find("blocks.1.conv2.weight"), std::string::npos);
    }

    doc = nlohmann::json::parse(good);
    doc["params"]["head_affine.weight"]["shape"] = {5};
    try {
        model_from_json(doc.dump());
        FAIL();
    } catch (const ModelLoadError& e) {
        EXPECT_EQ(e.kind(), ModelLoadError::Kind::Validation);
        EXPECT_NE(std::string(e.what()).find("head_affine.weight"), std::string::npos);
    }

    doc = nlohmann::json::parse(good);
    doc["params"].erase("attention.bias");
    EXPECT_EQ(load_error_kind(doc.dump()), ModelLoadError::Kind::Schema);

    doc = nlohmann::json::parse(good);
    doc["scaler"]["max"] = -1.0;
    EXPECT_EQ(load_error_kind(doc.dump()), ModelLoadError::Kind::Validation);

    doc = nlohmann::json::parse(good);
    doc["config"]["kernel_size"] = 2;
    EXPECT_EQ(load_error_kind(doc.dump()), ModelLoadError::Kind::Validation);

    doc = nlohmann::json::parse(good);
    doc["config"].erase("hidden_channels");
    EXPECT_EQ(load_error_kind(doc.dump()), ModelLoadError::Kind::Schema);
}

TEST(ModelIo, SaveRejectsMismatchedConfig) {
    const ModelConfig cfg{4, 2, 3, 2, 0};
    const ModelConfig other{5, 2, 3, 2, 0};
    EXPECT_THROW(save_model(init_params(cfg, 0), other, Scaler{0, 1}, temp_path("bad.json")), ConfigError);
    EXPECT_FALSE(std::filesystem::exists(temp_path("bad.json")));
}

TEST(ModelIo, MetricsJson) {
    const MetricsReport r = evaluate(std::vector<double>{1, 2, 3}, std::vector<double>{1, 1, 4});
    const auto j = metrics_to_json(r);
    EXPECT_EQ(j["n"], 3);
    EXPECT_DOUBLE_EQ(j["mae_normalized"].get<double>(), r.mae_normalized);
    EXPECT_DOUBLE_EQ(j["evs"].get<double>(), r.evs);
}
