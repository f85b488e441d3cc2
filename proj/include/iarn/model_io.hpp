#pragma once

// JSON persistence for trained models and metric reports.
//
// Model file layout:
//   { "format_version": 1,
//     "config": { window_len, hidden_channels, kernel_size, num_blocks, seed },
//     "scaler": { min, max },
//     "params": { "<name>": { "shape": [...], "data": <nested lists> }, ... } }

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "iarn/data.hpp"
#include "iarn/error.hpp"
#include "iarn/metrics.hpp"
#include "iarn/model.hpp"

namespace iarn {

inline constexpr int kModelFormatVersion = 1;

struct SavedModel {
    IarnParams params;
    ModelConfig config;
    Scaler scaler;
};

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson nest(std::span<const double> data, std::span<const std::size_t> shape) {
    if (shape.size() == 1) return ojson(std::vector<double>(data.begin(), data.end()));
    ojson arr = ojson::array();
    const std::size_t stride = data.size() / shape[0];
    for (std::size_t i = 0; i < shape[0]; ++i) arr.push_back(nest(data.subspan(i * stride, stride), shape.subspan(1)));
    return arr;
}

// Flattens `node` into `out`, checking it has exactly `shape`.
inline void unnest(const ojson& node, std::span<const std::size_t> shape, std::vector<double>& out,
                   const std::string& field) {
    if (!node.is_array() || node.size() != shape[0])
        throw ModelLoadError(ModelLoadError::Kind::Validation,
                             "model file: field '" + field + "' does not match its declared shape");
    for (const auto& child : node) {
        if (shape.size() == 1) {
            if (!child.is_number())
                throw ModelLoadError(ModelLoadError::Kind::Schema, "model file: field '" + field + "' holds a non-number");
            const double v = child.get<double>();
            if (!std::isfinite(v))
                throw ModelLoadError(ModelLoadError::Kind::Validation,
                                     "model file: field '" + field + "' holds a non-finite value");
            out.push_back(v);
        } else {
            unnest(child, shape.subspan(1), out, field);
        }
    }
}

template <class T>
T field_of(const ojson& obj, const char* key, const char* section) {
    if (!obj.contains(key))
        throw ModelLoadError(ModelLoadError::Kind::Schema,
                             std::string("model file: missing '") + section + "." + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ModelLoadError(ModelLoadError::Kind::Schema,
                             std::string("model file: '") + section + "." + key + "' has the wrong type");
    }
}

}  // namespace detail

inline std::string model_to_json(const IarnParams& params, const ModelConfig& cfg, const Scaler& scaler) {
    using detail::ojson;
    ojson doc;
    doc["format_version"] = kModelFormatVersion;
    doc["config"] = {{"window_len", cfg.window_len},
                     {"hidden_channels", cfg.hidden_channels},
                     {"kernel_size", cfg.kernel_size},
                     {"num_blocks", cfg.num_blocks},
                     {"seed", cfg.seed}};
    doc["scaler"] = {{"min", scaler.min}, {"max", scaler.max}};
    ojson p = ojson::object();
    params.for_each([&](const ConstParamView& v) {
        p[v.name] = {{"shape", v.shape}, {"data", detail::nest(v.data, v.shape)}};
    });
    doc["params"] = std::move(p);
    return doc.dump() + "\n";
}

inline SavedModel model_from_json(const std::string& text) {
    using detail::ojson;
    using Kind = ModelLoadError::Kind;
    ojson doc;
    try {
        doc = ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ModelLoadError(Kind::Schema, std::string("model file: malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ModelLoadError(Kind::Schema, "model file: top level must be an object");
    if (!doc.contains("format_version") || !doc["format_version"].is_number_integer())
        throw ModelLoadError(Kind::Schema, "model file: missing integer 'format_version'");
    if (doc["format_version"].get<int>() != kModelFormatVersion)
        throw ModelLoadError(Kind::Version, "model file: unsupported format_version " +
                                                std::to_string(doc["format_version"].get<int>()) + " (expected " +
                                                std::to_string(kModelFormatVersion) + ")");
    for (const char* section : {"config", "scaler", "params"}) {
        if (!doc.contains(section) || !doc[section].is_object())
            throw ModelLoadError(Kind::Schema, std::string("model file: missing object '") + section + "'");
    }
    SavedModel m;
    const ojson& c = doc["config"];
    m.config.window_len = detail::field_of<std::size_t>(c, "window_len", "config");
    m.config.hidden_channels = detail::field_of<std::size_t>(c, "hidden_channels", "config");
    m.config.kernel_size = detail::field_of<std::size_t>(c, "kernel_size", "config");
    m.config.num_blocks = detail::field_of<std::size_t>(c, "num_blocks", "config");
    m.config.seed = detail::field_of<std::uint64_t>(c, "seed", "config");
    try {
        m.config.validate();
    } catch (const ConfigError& e) {
        throw ModelLoadError(Kind::Validation, std::string("model file: invalid config: ") + e.what());
    }
    m.scaler.min = detail::field_of<double>(doc["scaler"], "min", "scaler");
    m.scaler.max = detail::field_of<double>(doc["scaler"], "max", "scaler");
    if (!(m.scaler.max > m.scaler.min) || !std::isfinite(m.scaler.min) || !std::isfinite(m.scaler.max))
        throw ModelLoadError(Kind::Validation, "model file: scaler requires finite min < max");

    m.params = IarnParams::zeros(m.config);
    const ojson& p = doc["params"];
    std::size_t found = 0;
    m.params.for_each([&](const ParamView& v) {
        if (!p.contains(v.name)) throw ModelLoadError(Kind::Schema, "model file: missing parameter '" + v.name + "'");
        const ojson& entry = p[v.name];
        if (!entry.is_object() || !entry.contains("shape") || !entry.contains("data"))
            throw ModelLoadError(Kind::Schema, "model file: parameter '" + v.name + "' needs 'shape' and 'data'");
        std::vector<std::size_t> declared;
        try {
            declared = entry["shape"].get<std::vector<std::size_t>>();
        } catch (const nlohmann::json::exception&) {
            throw ModelLoadError(Kind::Schema, "model file: malformed shape for '" + v.name + "'");
        }
        if (declared != v.shape)
            throw ModelLoadError(Kind::Validation,
                                 "model file: declared shape of '" + v.name + "' does not match the config");
        std::vector<double> flat;
        flat.reserve(v.data.size());
        detail::unnest(entry["data"], declared, flat, v.name);
        std::copy(flat.begin(), flat.end(), v.data.begin());
        ++found;
    });
    if (found != p.size()) throw ModelLoadError(Kind::Schema, "model file: unexpected extra parameters");
    return m;
}

/// Writes atomically: the file appears only once fully written.
inline void write_file_atomic(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open '" + tmp + "' for writing");
        out << contents;
        out.flush();
        if (!out) {
            out.close();
            std::remove(tmp.c_str());
            throw Error("failed writing '" + tmp + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::remove(tmp.c_str());
        throw Error("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
    }
}

inline void save_model(const IarnParams& params, const ModelConfig& cfg, const Scaler& scaler,
                       const std::string& path) {
    if (!params.matches(cfg)) throw ConfigError("save_model: parameters do not match the config");
    write_file_atomic(path, model_to_json(params, cfg, scaler));
}

inline SavedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelLoadError(ModelLoadError::Kind::MissingFile, "cannot open model file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_from_json(buf.str());
}

inline nlohmann::ordered_json metrics_to_json(const MetricsReport& r) {
    return {{"n", r.n},
            {"rmse", r.rmse},
            {"mae", r.mae},
            {"mape_percent", r.mape_percent},
            {"evs", r.evs},
            {"rmse_normalized", r.rmse_normalized},
            {"mae_normalized", r.mae_normalized}};
}

}  // namespace iarn
