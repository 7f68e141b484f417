// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <string>

#include "avt/model.hpp"
#include "avt/optimizer.hpp"

#include <json.hpp>

namespace avt::harness {

/// Checkpoint container: the full config, the preset name, the trained step
/// count, every weight tensor as {shape, data} under its namespaced key, and
/// the optimizer moments needed to resume exactly.
inline nlohmann::json checkpoint_to_json(AVTModel& model, const AdamW& opt, std::size_t step) {
  nlohmann::json out;
  out["format"] = "avt-checkpoint-v1";
  out["preset"] = model.preset.name;
  out["step"] = step;
  out["config"] = model.cfg.to_json();

  nlohmann::json weights = nlohmann::json::object();
  model.visit_params([&weights](const std::string& name, Tensor& t) {
    weights[name] = nlohmann::json{{"shape", t.shape()}, {"data", t.data()}};
  });
  out["weights"] = weights;

  nlohmann::json optim;
  optim["t"] = opt.step_count();
  nlohmann::json m = nlohmann::json::object(), v = nlohmann::json::object();
  const auto& params = opt.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[params[i].first] = opt.first_moments()[i];
    v[params[i].first] = opt.second_moments()[i];
  }
  optim["m"] = m;
  optim["v"] = v;
  out["optim"] = optim;
  return out;
}

inline void save_checkpoint(AVTModel& model, const AdamW& opt, std::size_t step,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  out << checkpoint_to_json(model, opt, step) << "\n";
}

struct LoadedCheckpoint {
  AVTModel model;
  std::size_t step = 0;
  std::uint64_t optim_t = 0;
  std::vector<std::vector<double>> optim_m, optim_v;
};

inline LoadedCheckpoint checkpoint_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "avt-checkpoint-v1") {
    throw ConfigError("not an avt checkpoint (missing format tag)");
  }
  LoadedCheckpoint ck;
  const ExperimentConfig cfg = parse_config(j.at("config"));
  ck.model = AVTModel::build(cfg, parse_preset(j.at("preset").get<std::string>()));
  ck.step = j.at("step").get<std::size_t>();

  const nlohmann::json& weights = j.at("weights");
  ck.model.visit_params([&weights](const std::string& name, Tensor& t) {
    if (!weights.contains(name)) throw ConfigError("checkpoint missing weight: " + name);
    const nlohmann::json& w = weights.at(name);
    const auto shape = w.at("shape").get<std::vector<std::size_t>>();
    if (shape != t.shape()) {
      throw ShapeError("checkpoint weight " + name + " has shape " + shape_str(shape) +
                       ", model expects " + shape_str(t.shape()));
    }
    const auto data = w.at("data").get<std::vector<double>>();
    if (data.size() != t.size()) throw ShapeError("checkpoint weight " + name + " has wrong length");
    t.data() = data;
  });

  if (j.contains("optim")) {
    const nlohmann::json& optim = j.at("optim");
    ck.optim_t = optim.at("t").get<std::uint64_t>();
    auto params = ck.model.named_params();
    for (const auto& [name, tensor] : params) {
      ck.optim_m.push_back(optim.at("m").at(name).get<std::vector<double>>());
      ck.optim_v.push_back(optim.at("v").at(name).get<std::vector<double>>());
    }
  }
  return ck;
}

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint " + path + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace avt::harness
