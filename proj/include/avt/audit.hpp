// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "avt/gradcheck.hpp"
#include "avt/model.hpp"
#include "avt/train.hpp"

namespace avt::harness {

/// Tiny geometry for the gradient audits: a full pipeline (both encoders and a
/// 2-block fusion stack) small enough that central differences over sampled
/// coordinates of every parameter tensor stay fast.
inline ExperimentConfig audit_config(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.embed_dim = 8;
  cfg.heads = 2;
  cfg.encoder_depth = 1;
  cfg.fusion_blocks = 2;
  cfg.bottleneck_tokens = 2;
  cfg.proj_dim = 12;
  cfg.batch_size = 3;
  cfg.mask_ratio = 0.25;
  cfg.num_segments = 4;
  cfg.sg_window = 5;
  cfg.seed = seed;
  cfg.dataset.size = 8;
  cfg.dataset.noise = 0.5;
  cfg.dataset.seed = mix_seed(seed, 0x617564ULL);
  cfg.dataset.audio_frames = 8;
  cfg.dataset.audio_bins = 8;
  cfg.patch_time = 4;
  cfg.patch_freq = 4;  // M = 4 audio tokens
  cfg.dataset.video_frames = 2;
  cfg.dataset.video_height = 4;
  cfg.dataset.video_width = 4;
  cfg.dataset.video_channels = 1;
  cfg.tubelet_t = 1;
  cfg.tubelet_h = 2;
  cfg.tubelet_w = 2;  // N = 8 video tokens
  cfg.validate();
  return cfg;
}

inline const std::vector<std::string>& audit_loss_names() {
  static const std::vector<std::string> names = {"ce", "avc", "avm", "mask", "cls", "hybrid"};
  return names;
}

struct AuditResult {
  std::string loss;
  std::uint64_t seed = 0;
  double max_rel_error = 0.0;
  bool pass = false;
  std::size_t checked_coords = 0;
};

/// Central-difference audit of one loss term's gradient through the whole toy
/// model. Every parameter tensor is covered; within each tensor a
/// deterministic sample of `coords_per_tensor` coordinates is checked
/// (0 checks all of them).
inline AuditResult audit_loss_gradients(const std::string& loss_name, std::uint64_t seed,
                                        double h = 1e-5, double tol = 1e-4,
                                        std::size_t coords_per_tensor = 12) {
  const ExperimentConfig cfg = audit_config(seed);
  PresetSpec preset;
  preset.name = "audit_" + loss_name;
  if (loss_name == "ce") {
    preset.kind = PresetKind::video_only;
  } else {
    preset.kind = PresetKind::multimodal;
    if (loss_name == "avc") preset.use_avc = true;
    else if (loss_name == "avm") preset.use_avm = true;
    else if (loss_name == "mask") preset.use_mask = true;
    else if (loss_name == "cls") { /* classification term is always on */ }
    else if (loss_name == "hybrid") preset.use_avc = preset.use_avm = preset.use_mask = true;
    else throw ConfigError("unknown audit loss: " + loss_name);
  }

  AVTModel model = AVTModel::build(cfg, preset);
  const std::vector<SyntheticSample> data = gen_xor_dataset(cfg.dataset);
  std::vector<const SyntheticSample*> batch;
  for (std::size_t i = 0; i < cfg.batch_size; ++i) batch.push_back(&data[i]);

  std::vector<audioseg::SegmentMap> owned_maps;
  std::vector<const audioseg::SegmentMap*> segmaps(batch.size(), nullptr);
  if (preset.use_mask && preset.audio_mask_kind == masking::MaskKind::segment) {
    owned_maps.reserve(batch.size());
    for (const SyntheticSample* s : batch) {
      owned_maps.push_back(audioseg::detect_segments(s->audio, cfg.num_segments, {cfg.sg_window, 2}));
    }
    for (std::size_t i = 0; i < batch.size(); ++i) segmaps[i] = &owned_maps[i];
  }

  const std::uint64_t step_seed = mix_seed(seed, 0x61756474ULL);
  const auto loss_fn = [&]() {
    const LossTensors t = compute_loss_tensors(model, batch, segmaps, step_seed);
    if (loss_name == "avc") return t.avc;
    if (loss_name == "avm") return t.avm;
    if (loss_name == "mask") return t.masegmv;
    if (loss_name == "cls") return t.cls_av;
    return t.total;  // ce (unimodal) and hybrid
  };

  std::vector<Tensor> params;
  for (auto& [name, tensor] : model.named_params()) params.push_back(tensor);
  const numerics::GradCheckReport report =
      numerics::grad_check(loss_fn, params, h, tol, coords_per_tensor, seed);

  return AuditResult{loss_name, seed, report.max_rel_error, report.pass, report.checked_coords};
}

}  // namespace avt::harness
