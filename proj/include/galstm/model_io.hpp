#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "galstm/errors.hpp"
#include "galstm/lstm.hpp"

namespace galstm {

// Model file layout (JSON; doubles use shortest round-trip formatting, so a
// reload reproduces every weight bit for bit):
//
//   { "format": "galstm-model", "version": 1,
//     "meta": {"input_size", "hidden_size", "num_layers"},
//     "lookback", "scaler": {"lo", "hi"},
//     "layers": [ {"W_i": {"rows","cols","data":[row-major]}, ... "b_g": [...]} ],
//     "head": {"w_out": [...], "b_out": x},
//     "mae_history": [...] }

namespace detail {

inline constexpr std::array<const char*, kGateCount> kGateSuffix{"i", "f", "o", "g"};

inline nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

inline Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols,
                               const std::string& name) {
  if (j.at("rows").get<Eigen::Index>() != rows || j.at("cols").get<Eigen::Index>() != cols) {
    throw SchemaError("model: " + name + " has wrong shape");
  }
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw SchemaError("model: " + name + " has wrong element count");
  }
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

inline Vector vector_from_json(const nlohmann::json& j, Eigen::Index size, const std::string& name) {
  const auto data = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != size) {
    throw SchemaError("model: " + name + " has wrong length");
  }
  return Eigen::Map<const Vector>(data.data(), size);
}

}  // namespace detail

inline nlohmann::json model_to_json(const TrainedModel& model) {
  const auto& p = model.params;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : p.layers) {
    nlohmann::json jl;
    for (std::size_t g = 0; g < kGateCount; ++g) {
      const std::string s = detail::kGateSuffix[g];
      jl["W_" + s] = detail::matrix_to_json(layer.W[g]);
      jl["U_" + s] = detail::matrix_to_json(layer.U[g]);
      jl["b_" + s] = std::vector<double>(layer.b[g].data(), layer.b[g].data() + layer.b[g].size());
    }
    layers.push_back(std::move(jl));
  }
  nlohmann::json j;
  j["format"] = "galstm-model";
  j["version"] = 1;
  j["meta"] = {{"input_size", p.input_size},
               {"hidden_size", p.hidden_size},
               {"num_layers", p.num_layers}};
  j["lookback"] = model.lookback;
  j["scaler"] = {{"lo", model.scaler.lo}, {"hi", model.scaler.hi}};
  j["layers"] = std::move(layers);
  j["head"] = {{"w_out", std::vector<double>(p.w_out.data(), p.w_out.data() + p.w_out.size())},
               {"b_out", p.b_out}};
  j["mae_history"] = model.mae_history;
  return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "galstm-model") throw SchemaError("model: unknown format");
    if (j.at("version").get<int>() != 1) throw SchemaError("model: unsupported version");
    const auto& meta = j.at("meta");
    const auto input = meta.at("input_size").get<std::size_t>();
    const auto hidden = meta.at("hidden_size").get<std::size_t>();
    const auto num_layers = meta.at("num_layers").get<std::size_t>();
    if (input == 0 || hidden == 0 || num_layers == 0) throw SchemaError("model: zero dimension");

    TrainedModel model;
    model.params = LstmParams::zeros(input, hidden, num_layers);
    auto& p = model.params;
    const auto& layers = j.at("layers");
    if (layers.size() != num_layers) throw SchemaError("model: layer count mismatch");
    const auto h = static_cast<Eigen::Index>(hidden);
    for (std::size_t l = 0; l < num_layers; ++l) {
      const auto in = static_cast<Eigen::Index>(p.layer_input_size(l));
      for (std::size_t g = 0; g < kGateCount; ++g) {
        const std::string s = detail::kGateSuffix[g];
        p.layers[l].W[g] = detail::matrix_from_json(layers[l].at("W_" + s), h, in, "W_" + s);
        p.layers[l].U[g] = detail::matrix_from_json(layers[l].at("U_" + s), h, h, "U_" + s);
        p.layers[l].b[g] = detail::vector_from_json(layers[l].at("b_" + s), h, "b_" + s);
      }
    }
    p.w_out = detail::vector_from_json(j.at("head").at("w_out"), h, "w_out");
    p.b_out = j.at("head").at("b_out").get<double>();
    if (!p.all_finite()) throw SchemaError("model: non-finite weights");

    model.lookback = j.at("lookback").get<std::size_t>();
    if (model.lookback == 0) throw SchemaError("model: lookback must be positive");
    model.scaler.lo = j.at("scaler").at("lo").get<double>();
    model.scaler.hi = j.at("scaler").at("hi").get<double>();
    if (!(model.scaler.hi > model.scaler.lo)) throw SchemaError("model: scaler requires hi > lo");
    model.mae_history = j.at("mae_history").get<std::vector<double>>();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("model: ") + e.what());
  }
}

inline void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << model_to_json(model).dump(1) << '\n';
}

inline TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace galstm
