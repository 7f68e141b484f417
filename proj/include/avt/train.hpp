// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "avt/audioseg.hpp"
#include "avt/checkpoint.hpp"
#include "avt/data.hpp"
#include "avt/model.hpp"
#include "avt/optimizer.hpp"

#include <json.hpp>

namespace avt::harness {

struct StepRecord {
  std::size_t step = 0;
  LossBreakdown losses;
  std::optional<double> train_acc;
  std::optional<double> val_acc;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["step"] = step;
    j["L_cls_av"] = losses.cls_av;
    j["L_avc"] = losses.avc;
    j["L_avm"] = losses.avm;
    j["L_masegmv"] = losses.masegmv;
    j["L_total"] = losses.total;
    if (train_acc) j["train_acc"] = *train_acc;
    if (val_acc) j["val_acc"] = *val_acc;
    return j;
  }
};

inline double evaluate_accuracy(const AVTModel& model, const std::vector<SyntheticSample>& data,
                                const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ContractError("evaluate_accuracy: no samples");
  std::size_t correct = 0;
  for (std::size_t idx : indices) {
    if (argmax(predict(model, data[idx])) == data[idx].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

/// Single-preset training driver. One step is: sample a batch (a pure function
/// of seed and step index), run the forward, accumulate gradients once through
/// the tape, apply AdamW. Everything is deterministic given the config.
class Trainer {
 public:
  Trainer(const ExperimentConfig& cfg, const PresetSpec& preset,
          const std::vector<SyntheticSample>& dataset)
      : model_(AVTModel::build(cfg, preset)),
        opt_(model_.named_params()),
        dataset_(dataset),
        split_(train_val_split(dataset.size(), cfg.eval_fraction, cfg.seed)),
        segmap_cache_(dataset.size()) {
    if (cfg.batch_size > split_.train.size()) {
      throw ConfigError("batch_size exceeds the training split size");
    }
  }

  /// Resume path: adopt weights and optimizer state from a checkpoint.
  Trainer(LoadedCheckpoint&& ck, const std::vector<SyntheticSample>& dataset)
      : model_(std::move(ck.model)),
        opt_(model_.named_params()),
        dataset_(dataset),
        split_(train_val_split(dataset.size(), model_.cfg.eval_fraction, model_.cfg.seed)),
        segmap_cache_(dataset.size()),
        start_step_(ck.step) {
    if (!ck.optim_m.empty()) opt_.restore_state(ck.optim_t, std::move(ck.optim_m), std::move(ck.optim_v));
  }

  AVTModel& model() { return model_; }
  const AVTModel& model() const { return model_; }
  AdamW& optimizer() { return opt_; }
  const DataSplit& split() const { return split_; }
  std::size_t start_step() const { return start_step_; }

  StepRecord train_step(std::size_t step) {
    const ExperimentConfig& cfg = model_.cfg;
    GradTape& tape = GradTape::active();
    tape.clear();
    opt_.zero_grad();

    RandomStream batch_rng(mix_seed(cfg.seed, 0x626174ULL, step));
    const std::vector<std::size_t> picks =
        batch_rng.sample_without_replacement(split_.train.size(), cfg.batch_size);
    std::vector<const SyntheticSample*> batch;
    std::vector<const audioseg::SegmentMap*> segmaps;
    batch.reserve(cfg.batch_size);
    segmaps.reserve(cfg.batch_size);
    for (std::size_t p : picks) {
      const std::size_t idx = split_.train[p];
      batch.push_back(&dataset_[idx]);
      segmaps.push_back(segment_map_for(idx));
    }

    StepRecord rec;
    rec.step = step;
    Tensor total = compute_losses(model_, batch, segmaps, mix_seed(cfg.seed, 0x73746570ULL, step),
                                  rec.losses);
    if (!std::isfinite(rec.losses.total)) {
      std::cerr << "[avt] non-finite loss at step " << step << ": " << rec.to_json() << "\n";
      throw ContractError("training aborted: non-finite loss at step " + std::to_string(step));
    }
    tape.backward(total);
    tape.clear();
    opt_.step(cfg.learning_rate);
    return rec;
  }

  double train_accuracy(std::size_t max_samples = 200) const {
    std::vector<std::size_t> subset(split_.train.begin(),
                                    split_.train.begin() +
                                        static_cast<std::ptrdiff_t>(
                                            std::min(max_samples, split_.train.size())));
    return evaluate_accuracy(model_, dataset_, subset);
  }

  double val_accuracy() const { return evaluate_accuracy(model_, dataset_, split_.val); }

 private:
  const audioseg::SegmentMap* segment_map_for(std::size_t idx) {
    if (!(model_.preset.use_mask && model_.preset.audio_mask_kind == masking::MaskKind::segment)) {
      return nullptr;
    }
    if (!segmap_cache_[idx]) {
      segmap_cache_[idx] = std::make_unique<audioseg::SegmentMap>(audioseg::detect_segments(
          dataset_[idx].audio, model_.cfg.num_segments, {model_.cfg.sg_window, 2}));
    }
    return segmap_cache_[idx].get();
  }

  AVTModel model_;
  AdamW opt_;
  const std::vector<SyntheticSample>& dataset_;
  DataSplit split_;
  std::vector<std::unique_ptr<audioseg::SegmentMap>> segmap_cache_;
  std::size_t start_step_ = 0;
};

struct PresetResult {
  std::string name;
  double final_train_acc = 0.0;
  double final_val_acc = 0.0;
  std::size_t steps = 0;
};

/// Trains one preset to cfg.steps, appending one JSONL record per step to
/// `metrics_path` (train/val accuracy added every eval_interval steps and on
/// the final step) and writing the final checkpoint.
inline PresetResult run_preset(Trainer& trainer, const std::string& metrics_path,
                               const std::string& checkpoint_path) {
  const ExperimentConfig& cfg = trainer.model().cfg;
  std::ofstream metrics(metrics_path, trainer.start_step() > 0 ? std::ios::app : std::ios::trunc);
  if (!metrics) throw ConfigError("cannot write metrics file: " + metrics_path);

  PresetResult result;
  result.name = trainer.model().preset.name;
  for (std::size_t step = trainer.start_step() + 1; step <= cfg.steps; ++step) {
    StepRecord rec = trainer.train_step(step);
    if (step % cfg.eval_interval == 0 || step == cfg.steps) {
      rec.train_acc = trainer.train_accuracy();
      rec.val_acc = trainer.val_accuracy();
    }
    metrics << rec.to_json() << "\n";
    if (step == cfg.steps) {
      result.final_train_acc = *rec.train_acc;
      result.final_val_acc = *rec.val_acc;
    }
  }
  result.steps = cfg.steps;
  metrics.close();
  save_checkpoint(trainer.model(), trainer.optimizer(), cfg.steps, checkpoint_path);
  return result;
}

/// Runs every preset listed in the config against one shared dataset; writes
/// per-preset metrics and checkpoints plus a summary JSON with the final
/// accuracies. Returns the summary.
inline nlohmann::json run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  const std::vector<SyntheticSample> dataset = gen_xor_dataset(cfg.dataset);

  nlohmann::json presets_out = nlohmann::json::object();
  for (const std::string& name : cfg.presets) {
    Trainer trainer(cfg, parse_preset(name), dataset);
    const std::string base = cfg.out_dir + "/" + name;
    const PresetResult res = run_preset(trainer, base + ".metrics.jsonl", base + ".checkpoint.json");
    presets_out[name] = {{"final_train_acc", res.final_train_acc},
                         {"final_val_acc", res.final_val_acc},
                         {"steps", res.steps}};
    std::cerr << "[avt] preset " << name << ": train_acc " << res.final_train_acc << ", val_acc "
              << res.final_val_acc << "\n";
  }

  nlohmann::json summary;
  summary["config"] = cfg.to_json();
  summary["presets"] = presets_out;
  std::ofstream out(cfg.out_dir + "/summary.json", std::ios::binary);
  if (!out) throw ConfigError("cannot write summary: " + cfg.out_dir + "/summary.json");
  out << summary.dump(2) << "\n";
  return summary;
}

}  // namespace avt::harness
