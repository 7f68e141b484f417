// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "avt/common.hpp"

#include <json.hpp>

namespace avt::harness {

/// Synthetic dataset description; a dataset is a pure function of these fields.
struct DatasetSpec {
  std::string kind = "xor";
  std::size_t size = 512;
  double noise = 0.3;
  std::uint64_t seed = 7;
  std::size_t video_frames = 4, video_height = 8, video_width = 8, video_channels = 1;
  std::size_t audio_frames = 64, audio_bins = 16;
  std::size_t num_classes = 2;
};

inline const std::vector<std::string>& all_presets() {
  static const std::vector<std::string> names = {
      "audio_only",  "video_only", "avg",         "avbottleneck",
      "avc",         "avc_avm",    "avc_avm_mav", "avc_avm_masegmv"};
  return names;
}

/// Every experiment hyperparameter with its default value.
struct ExperimentConfig {
  std::size_t embed_dim = 32;
  std::size_t heads = 4;
  std::size_t encoder_depth = 2;
  std::size_t fusion_blocks = 4;      // K
  std::size_t bottleneck_tokens = 4;  // L
  double lambda1 = 0.5;
  double lambda2 = 0.1;
  double lambda3 = 0.01;
  double tau = 0.07;
  std::size_t proj_dim = 256;
  double mask_ratio = 0.04;
  std::size_t num_segments = 50;
  std::size_t sg_window = 5;
  std::size_t batch_size = 8;
  double learning_rate = 1e-4;
  std::size_t steps = 200;
  std::size_t eval_interval = 50;
  double eval_fraction = 0.2;
  std::uint64_t seed = 42;
  bool avc_symmetric = true;
  std::size_t tubelet_t = 2, tubelet_h = 4, tubelet_w = 4;
  std::size_t patch_time = 8, patch_freq = 8;
  std::vector<std::string> presets = all_presets();
  std::string out_dir = "runs/default";
  DatasetSpec dataset;

  std::size_t audio_tokens() const {
    return (dataset.audio_frames / patch_time) * (dataset.audio_bins / patch_freq);
  }
  std::size_t video_tokens() const {
    return (dataset.video_frames / tubelet_t) * (dataset.video_height / tubelet_h) *
           (dataset.video_width / tubelet_w);
  }

  void validate() const {
    if (embed_dim == 0 || heads == 0 || embed_dim % heads != 0) {
      throw ConfigError("embed_dim must be a positive multiple of heads");
    }
    if (fusion_blocks < 1) throw ConfigError("fusion_blocks must be >= 1");
    if (tau <= 0.0) throw ConfigError("tau must be positive");
    if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0) {
      throw ConfigError("lambda weights must be nonnegative");
    }
    if (mask_ratio < 0.0 || mask_ratio > 1.0) throw ConfigError("mask_ratio must be in [0, 1]");
    if (eval_fraction <= 0.0 || eval_fraction >= 1.0) {
      throw ConfigError("eval_fraction must be in (0, 1)");
    }
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2 (matching needs a negative)");
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (eval_interval < 1) throw ConfigError("eval_interval must be >= 1");
    if (dataset.kind != "xor") throw ConfigError("unknown dataset kind: " + dataset.kind);
    if (dataset.num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (dataset.size < 8) throw ConfigError("dataset_size must be >= 8");
    if (patch_time == 0 || patch_freq == 0 || dataset.audio_frames % patch_time != 0 ||
        dataset.audio_bins % patch_freq != 0) {
      throw ConfigError("audio shape must be divisible by the patch size");
    }
    if (tubelet_t == 0 || tubelet_h == 0 || tubelet_w == 0 ||
        dataset.video_frames % tubelet_t != 0 || dataset.video_height % tubelet_h != 0 ||
        dataset.video_width % tubelet_w != 0) {
      throw ConfigError("video shape must be divisible by the tubelet size");
    }
    if (dataset.video_channels == 0) throw ConfigError("video_channels must be >= 1");
    if (num_segments < 1 || num_segments > dataset.audio_frames) {
      throw ConfigError("num_segments must be in [1, audio_frames]");
    }
    if (sg_window % 2 == 0 || sg_window < 3) throw ConfigError("sg_window must be odd and >= 3");
    if (dataset.audio_frames < sg_window) {
      throw ConfigError("audio_frames must be >= sg_window");
    }
    if (bottleneck_tokens >= std::min(audio_tokens(), video_tokens())) {
      throw ConfigError("bottleneck_tokens must be smaller than min(audio, video) token count");
    }
    if (presets.empty()) throw ConfigError("presets must not be empty");
    for (const std::string& p : presets) {
      if (std::find(all_presets().begin(), all_presets().end(), p) == all_presets().end()) {
        throw ConfigError("unknown preset: " + p);
      }
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["embed_dim"] = embed_dim;
    j["heads"] = heads;
    j["encoder_depth"] = encoder_depth;
    j["fusion_blocks"] = fusion_blocks;
    j["bottleneck_tokens"] = bottleneck_tokens;
    j["lambda1"] = lambda1;
    j["lambda2"] = lambda2;
    j["lambda3"] = lambda3;
    j["tau"] = tau;
    j["proj_dim"] = proj_dim;
    j["mask_ratio"] = mask_ratio;
    j["num_segments"] = num_segments;
    j["sg_window"] = sg_window;
    j["batch_size"] = batch_size;
    j["learning_rate"] = learning_rate;
    j["steps"] = steps;
    j["eval_interval"] = eval_interval;
    j["eval_fraction"] = eval_fraction;
    j["seed"] = seed;
    j["avc_symmetric"] = avc_symmetric;
    j["tubelet_t"] = tubelet_t;
    j["tubelet_h"] = tubelet_h;
    j["tubelet_w"] = tubelet_w;
    j["patch_time"] = patch_time;
    j["patch_freq"] = patch_freq;
    j["presets"] = presets;
    j["out_dir"] = out_dir;
    j["dataset"] = dataset.kind;
    j["dataset_size"] = dataset.size;
    j["dataset_noise"] = dataset.noise;
    j["dataset_seed"] = dataset.seed;
    j["video_frames"] = dataset.video_frames;
    j["video_height"] = dataset.video_height;
    j["video_width"] = dataset.video_width;
    j["video_channels"] = dataset.video_channels;
    j["audio_frames"] = dataset.audio_frames;
    j["audio_bins"] = dataset.audio_bins;
    j["num_classes"] = dataset.num_classes;
    return j;
  }
};

namespace detail {

template <class T>
T as_number(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return v.get<T>();
}

}  // namespace detail

/// Applies one flat key/value onto the config. Unknown keys are rejected by
/// name. Returns false only for keys belonging to the dataset subset when
/// `dataset_only` filtering is requested by the caller.
inline void apply_config_key(ExperimentConfig& cfg, const std::string& key,
                             const nlohmann::json& value) {
  using detail::as_number;
  if (key == "embed_dim") cfg.embed_dim = as_number<std::size_t>(value, key);
  else if (key == "heads") cfg.heads = as_number<std::size_t>(value, key);
  else if (key == "encoder_depth") cfg.encoder_depth = as_number<std::size_t>(value, key);
  else if (key == "fusion_blocks") cfg.fusion_blocks = as_number<std::size_t>(value, key);
  else if (key == "bottleneck_tokens") cfg.bottleneck_tokens = as_number<std::size_t>(value, key);
  else if (key == "lambda1") cfg.lambda1 = as_number<double>(value, key);
  else if (key == "lambda2") cfg.lambda2 = as_number<double>(value, key);
  else if (key == "lambda3") cfg.lambda3 = as_number<double>(value, key);
  else if (key == "tau") cfg.tau = as_number<double>(value, key);
  else if (key == "proj_dim") cfg.proj_dim = as_number<std::size_t>(value, key);
  else if (key == "mask_ratio") cfg.mask_ratio = as_number<double>(value, key);
  else if (key == "num_segments") cfg.num_segments = as_number<std::size_t>(value, key);
  else if (key == "sg_window") cfg.sg_window = as_number<std::size_t>(value, key);
  else if (key == "batch_size") cfg.batch_size = as_number<std::size_t>(value, key);
  else if (key == "learning_rate") cfg.learning_rate = as_number<double>(value, key);
  else if (key == "steps") cfg.steps = as_number<std::size_t>(value, key);
  else if (key == "eval_interval") cfg.eval_interval = as_number<std::size_t>(value, key);
  else if (key == "eval_fraction") cfg.eval_fraction = as_number<double>(value, key);
  else if (key == "seed") cfg.seed = as_number<std::uint64_t>(value, key);
  else if (key == "avc_symmetric") {
    if (!value.is_boolean()) throw ConfigError("config key 'avc_symmetric' must be a boolean");
    cfg.avc_symmetric = value.get<bool>();
  } else if (key == "tubelet_t") cfg.tubelet_t = as_number<std::size_t>(value, key);
  else if (key == "tubelet_h") cfg.tubelet_h = as_number<std::size_t>(value, key);
  else if (key == "tubelet_w") cfg.tubelet_w = as_number<std::size_t>(value, key);
  else if (key == "patch_time") cfg.patch_time = as_number<std::size_t>(value, key);
  else if (key == "patch_freq") cfg.patch_freq = as_number<std::size_t>(value, key);
  else if (key == "presets") {
    if (!value.is_array()) throw ConfigError("config key 'presets' must be an array of strings");
    cfg.presets.clear();
    for (const auto& p : value) cfg.presets.push_back(p.get<std::string>());
  } else if (key == "out_dir") cfg.out_dir = value.get<std::string>();
  else if (key == "dataset") cfg.dataset.kind = value.get<std::string>();
  else if (key == "dataset_size") cfg.dataset.size = as_number<std::size_t>(value, key);
  else if (key == "dataset_noise") cfg.dataset.noise = as_number<double>(value, key);
  else if (key == "dataset_seed") cfg.dataset.seed = as_number<std::uint64_t>(value, key);
  else if (key == "video_frames") cfg.dataset.video_frames = as_number<std::size_t>(value, key);
  else if (key == "video_height") cfg.dataset.video_height = as_number<std::size_t>(value, key);
  else if (key == "video_width") cfg.dataset.video_width = as_number<std::size_t>(value, key);
  else if (key == "video_channels") cfg.dataset.video_channels = as_number<std::size_t>(value, key);
  else if (key == "audio_frames") cfg.dataset.audio_frames = as_number<std::size_t>(value, key);
  else if (key == "audio_bins") cfg.dataset.audio_bins = as_number<std::size_t>(value, key);
  else if (key == "num_classes") cfg.dataset.num_classes = as_number<std::size_t>(value, key);
  else throw ConfigError("unknown config key: " + key);
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig cfg;
  for (const auto& [key, value] : j.items()) apply_config_key(cfg, key, value);
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

/// Dataset description files for `eval --data`: the dataset_* subset of the
/// config keys, unknown keys rejected.
inline DatasetSpec load_dataset_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("data file " + path + " is not valid JSON: " + e.what());
  }
  static const std::vector<std::string> allowed = {
      "dataset",      "dataset_size", "dataset_noise",  "dataset_seed",
      "video_frames", "video_height", "video_width",    "video_channels",
      "audio_frames", "audio_bins",   "num_classes"};
  ExperimentConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown data file key: " + key);
    }
    apply_config_key(cfg, key, value);
  }
  return cfg.dataset;
}

}  // namespace avt::harness
