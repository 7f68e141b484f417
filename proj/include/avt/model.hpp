// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "avt/config.hpp"
#include "avt/data.hpp"
#include "avt/fusion.hpp"
#include "avt/losses.hpp"
#include "avt/masking.hpp"

namespace avt::harness {

using encoders::AudioPatchConfig;
using encoders::EncoderWeights;
using encoders::TokenSequence;
using encoders::VideoTubeletConfig;
using fusion::BottleneckState;
using fusion::FusionOutput;
using fusion::FusionWeights;
using numerics::LinearWeights;
using numerics::Tensor;

enum class PresetKind { audio_only, video_only, avg, multimodal };

/// One ablation row: which pipeline to train and which loss terms are active.
struct PresetSpec {
  std::string name;
  PresetKind kind = PresetKind::multimodal;
  bool use_avc = false;
  bool use_avm = false;
  bool use_mask = false;
  masking::MaskKind audio_mask_kind = masking::MaskKind::segment;
};

inline PresetSpec parse_preset(const std::string& name) {
  PresetSpec p;
  p.name = name;
  if (name == "audio_only") {
    p.kind = PresetKind::audio_only;
  } else if (name == "video_only") {
    p.kind = PresetKind::video_only;
  } else if (name == "avg") {
    p.kind = PresetKind::avg;
  } else if (name == "avbottleneck") {
    p.kind = PresetKind::multimodal;
  } else if (name == "avc") {
    p.kind = PresetKind::multimodal;
    p.use_avc = true;
  } else if (name == "avc_avm") {
    p.kind = PresetKind::multimodal;
    p.use_avc = p.use_avm = true;
  } else if (name == "avc_avm_mav") {
    p.kind = PresetKind::multimodal;
    p.use_avc = p.use_avm = p.use_mask = true;
    p.audio_mask_kind = masking::MaskKind::random;
  } else if (name == "avc_avm_masegmv") {
    p.kind = PresetKind::multimodal;
    p.use_avc = p.use_avm = p.use_mask = true;
    p.audio_mask_kind = masking::MaskKind::segment;
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  return p;
}

/// All weights for one preset. Component seed streams are derived per
/// component, so e.g. the encoder init is identical across presets sharing a
/// seed; ablation rows then differ only in what is trained on top.
struct AVTModel {
  ExperimentConfig cfg;
  PresetSpec preset;

  EncoderWeights audio_encoder, video_encoder;
  FusionWeights fusion_weights;
  LinearWeights g_audio, g_video;        // contrastive projections
  LinearWeights cls_head;                // (2 dim -> C), multimodal
  LinearWeights avm_head;                // (2 dim -> 1)
  LinearWeights audio_head, video_head;  // (dim -> C), unimodal
  LinearWeights audio_decoder, video_decoder;

  bool has_audio_encoder = false, has_video_encoder = false, has_fusion = false;
  bool has_avc = false, has_cls_head = false, has_avm = false;
  bool has_audio_head = false, has_video_head = false, has_decoders = false;

  AudioPatchConfig audio_patch() const { return {cfg.patch_time, cfg.patch_freq}; }
  VideoTubeletConfig video_tubelet() const { return {cfg.tubelet_t, cfg.tubelet_h, cfg.tubelet_w}; }

  static AVTModel build(const ExperimentConfig& cfg, const PresetSpec& preset) {
    cfg.validate();
    AVTModel m;
    m.cfg = cfg;
    m.preset = preset;
    const std::size_t dim = cfg.embed_dim;
    const std::size_t classes = cfg.dataset.num_classes;
    const std::size_t audio_patch_dim = cfg.patch_time * cfg.patch_freq;
    const std::size_t video_patch_dim =
        cfg.tubelet_t * cfg.tubelet_h * cfg.tubelet_w * cfg.dataset.video_channels;

    const bool multimodal = preset.kind == PresetKind::multimodal;
    m.has_audio_encoder = preset.kind != PresetKind::video_only;
    m.has_video_encoder = preset.kind != PresetKind::audio_only;
    m.has_fusion = multimodal;
    m.has_cls_head = multimodal;
    m.has_avc = multimodal && preset.use_avc;
    m.has_avm = multimodal && preset.use_avm;
    m.has_decoders = multimodal && preset.use_mask;
    m.has_audio_head = preset.kind == PresetKind::audio_only || preset.kind == PresetKind::avg;
    m.has_video_head = preset.kind == PresetKind::video_only || preset.kind == PresetKind::avg;

    if (m.has_audio_encoder) {
      RandomStream rng(mix_seed(cfg.seed, 0x01));
      m.audio_encoder =
          EncoderWeights::create(audio_patch_dim, cfg.audio_tokens(), dim, cfg.encoder_depth, rng);
    }
    if (m.has_video_encoder) {
      RandomStream rng(mix_seed(cfg.seed, 0x02));
      m.video_encoder =
          EncoderWeights::create(video_patch_dim, cfg.video_tokens(), dim, cfg.encoder_depth, rng);
    }
    if (m.has_fusion) {
      RandomStream rng(mix_seed(cfg.seed, 0x03));
      m.fusion_weights = FusionWeights::create(cfg.bottleneck_tokens, dim, cfg.fusion_blocks, rng);
    }
    if (m.has_avc) {
      RandomStream rng(mix_seed(cfg.seed, 0x04));
      m.g_audio = LinearWeights::create(dim, cfg.proj_dim, rng);
      m.g_video = LinearWeights::create(dim, cfg.proj_dim, rng);
    }
    if (m.has_cls_head) {
      RandomStream rng(mix_seed(cfg.seed, 0x05));
      m.cls_head = LinearWeights::create(2 * dim, classes, rng);
    }
    if (m.has_avm) {
      RandomStream rng(mix_seed(cfg.seed, 0x06));
      m.avm_head = LinearWeights::create(2 * dim, 1, rng);
    }
    if (m.has_audio_head) {
      RandomStream rng(mix_seed(cfg.seed, 0x07));
      m.audio_head = LinearWeights::create(dim, classes, rng);
    }
    if (m.has_video_head) {
      RandomStream rng(mix_seed(cfg.seed, 0x08));
      m.video_head = LinearWeights::create(dim, classes, rng);
    }
    if (m.has_decoders) {
      RandomStream rng(mix_seed(cfg.seed, 0x09));
      m.audio_decoder = LinearWeights::create(dim, audio_patch_dim, rng);
      m.video_decoder = LinearWeights::create(dim, video_patch_dim, rng);
    }
    return m;
  }

  template <class F>
  void visit_params(F&& f) {
    const auto linear_visit = [&f](const std::string& prefix, LinearWeights& w) {
      f(prefix + ".weight", w.weight);
      f(prefix + ".bias", w.bias);
    };
    if (has_audio_encoder) audio_encoder.visit("audio_encoder", f);
    if (has_video_encoder) video_encoder.visit("video_encoder", f);
    if (has_fusion) fusion_weights.visit("fusion", f);
    if (has_avc) {
      linear_visit("avc.g_audio", g_audio);
      linear_visit("avc.g_video", g_video);
    }
    if (has_cls_head) linear_visit("heads.cls_av", cls_head);
    if (has_avm) linear_visit("heads.avm", avm_head);
    if (has_audio_head) linear_visit("heads.audio", audio_head);
    if (has_video_head) linear_visit("heads.video", video_head);
    if (has_decoders) {
      linear_visit("decoder.audio", audio_decoder);
      linear_visit("decoder.video", video_decoder);
    }
  }

  std::vector<std::pair<std::string, Tensor>> named_params() {
    std::vector<std::pair<std::string, Tensor>> out;
    visit_params([&out](const std::string& name, Tensor& t) { out.emplace_back(name, t); });
    return out;
  }

  TokenSequence encode_audio(const encoders::SpectrogramInput& a) const {
    return encoders::encode(encoders::embed_audio(a, audio_patch(), audio_encoder.embed),
                            audio_encoder.blocks, cfg.heads);
  }

  TokenSequence encode_video(const encoders::VideoClipInput& v) const {
    return encoders::encode(encoders::embed_video(v, video_tubelet(), video_encoder.embed),
                            video_encoder.blocks, cfg.heads);
  }

  FusionOutput fuse_sequences(const TokenSequence& video, const TokenSequence& audio) const {
    const BottleneckState init{fusion_weights.bottleneck, {}};
    return fusion::fuse(video, audio, init, fusion_weights, cfg.heads);
  }
};

inline Tensor one_hot_labels(const std::vector<const SyntheticSample*>& batch,
                             std::size_t num_classes) {
  Tensor labels = Tensor::zeros({batch.size(), num_classes});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i]->label >= num_classes) {
      throw ContractError("sample label " + std::to_string(batch[i]->label) + " out of range");
    }
    labels[i * num_classes + batch[i]->label] = 1.0;
  }
  return labels;
}

struct LossBreakdown {
  double cls_av = 0.0, avc = 0.0, avm = 0.0, masegmv = 0.0, total = 0.0;
};

namespace detail {

struct EncodedBatch {
  std::vector<TokenSequence> audio, video;  // post-encoder, pre-fusion
  std::vector<FusionOutput> fused;
};

inline Tensor stack_cls(const std::vector<TokenSequence>& seqs) {
  std::vector<Tensor> rows;
  rows.reserve(seqs.size());
  for (const TokenSequence& s : seqs) rows.push_back(s.cls());
  return numerics::concat_rows(rows);
}

inline Tensor spectrogram_tensor(const encoders::SpectrogramInput& a) {
  return Tensor::from_data({a.time_frames, a.freq_bins}, a.values);
}

inline Tensor clip_tensor(const encoders::VideoClipInput& v) {
  return Tensor::from_data({v.frames, v.height, v.width, v.channels}, v.values);
}

}  // namespace detail

/// The per-term loss tensors for one batch; every term is on the tape, so a
/// single backward pass trains all components jointly.
struct LossTensors {
  Tensor cls_av;
  Tensor avc;
  Tensor avm;
  Tensor masegmv;
  Tensor total;
};

/// Full training objective for one batch. `segmaps` must align with `batch`
/// when the preset masks whole audio segments (pass nullptr entries never;
/// callers cache the per-sample maps). `step_seed` drives the mask draws.
inline LossTensors compute_loss_tensors(AVTModel& model,
                                        const std::vector<const SyntheticSample*>& batch,
                                        const std::vector<const audioseg::SegmentMap*>& segmaps,
                                        std::uint64_t step_seed) {
  using namespace numerics;
  if (batch.empty()) throw ContractError("compute_loss_tensors: empty batch");
  const ExperimentConfig& cfg = model.cfg;
  const Tensor labels = one_hot_labels(batch, cfg.dataset.num_classes);
  const std::size_t n = batch.size();

  if (model.preset.kind != PresetKind::multimodal) {
    std::vector<Tensor> ce_parts;
    if (model.has_audio_encoder) {
      std::vector<TokenSequence> seqs;
      seqs.reserve(n);
      for (const SyntheticSample* s : batch) seqs.push_back(model.encode_audio(s->audio));
      ce_parts.push_back(
          losses::cross_entropy_cls(linear(detail::stack_cls(seqs), model.audio_head), labels));
    }
    if (model.has_video_encoder) {
      std::vector<TokenSequence> seqs;
      seqs.reserve(n);
      for (const SyntheticSample* s : batch) seqs.push_back(model.encode_video(s->video));
      ce_parts.push_back(
          losses::cross_entropy_cls(linear(detail::stack_cls(seqs), model.video_head), labels));
    }
    Tensor total = ce_parts[0];
    for (std::size_t i = 1; i < ce_parts.size(); ++i) total = add(total, ce_parts[i]);
    return LossTensors{total, Tensor::scalar(0.0), Tensor::scalar(0.0), Tensor::scalar(0.0), total};
  }

  detail::EncodedBatch enc;
  enc.audio.reserve(n);
  enc.video.reserve(n);
  enc.fused.reserve(n);
  for (const SyntheticSample* s : batch) {
    enc.audio.push_back(model.encode_audio(s->audio));
    enc.video.push_back(model.encode_video(s->video));
    enc.fused.push_back(model.fuse_sequences(enc.video.back(), enc.audio.back()));
  }

  std::vector<TokenSequence> fused_video, fused_audio;
  fused_video.reserve(n);
  fused_audio.reserve(n);
  for (const FusionOutput& f : enc.fused) {
    fused_video.push_back(f.video);
    fused_audio.push_back(f.audio);
  }
  const losses::ClassificationOutput cls = losses::cls_av_loss(
      detail::stack_cls(fused_video), detail::stack_cls(fused_audio), labels, model.cls_head);

  losses::LossParts parts;
  parts.cls_av = cls.loss;
  parts.avc = Tensor::scalar(0.0);
  parts.avm = Tensor::scalar(0.0);
  parts.masegmv = Tensor::scalar(0.0);

  if (model.preset.use_avc) {
    const losses::BatchPairing pairing{detail::stack_cls(enc.audio), detail::stack_cls(enc.video)};
    parts.avc = losses::avc_loss(pairing, model.g_audio, model.g_video, cfg.tau, cfg.avc_symmetric);
  }

  if (model.preset.use_avm) {
    if (n < 2) throw ConfigError("audio-video matching needs a batch of at least 2");
    std::vector<losses::FusedPair> pairs;
    pairs.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      pairs.push_back({enc.fused[i].video.cls(), enc.fused[i].audio.cls(), true});
    }
    for (std::size_t i = 0; i < n; ++i) {
      // derangement: each video pairs with the next sample's audio
      const FusionOutput mismatched = model.fuse_sequences(enc.video[i], enc.audio[(i + 1) % n]);
      pairs.push_back({mismatched.video.cls(), mismatched.audio.cls(), false});
    }
    parts.avm = losses::avm_loss(pairs, model.avm_head);
  }

  if (model.preset.use_mask) {
    std::vector<losses::ReconstructionSample> recs;
    recs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const SyntheticSample& s = *batch[i];
      const std::uint64_t sample_seed = mix_seed(step_seed, 0x6d736bULL, i);

      const TokenSequence video_emb =
          encoders::embed_video(s.video, model.video_tubelet(), model.video_encoder.embed);
      auto [video_masked_emb, video_mask] =
          masking::random_mask(video_emb, cfg.mask_ratio, mix_seed(sample_seed, 0x76ULL),
                               masking::Modality::video);
      const TokenSequence video_masked =
          encoders::encode(video_masked_emb, model.video_encoder.blocks, cfg.heads);

      TokenSequence audio_masked;
      Tensor audio_mask_elems;
      if (model.preset.audio_mask_kind == masking::MaskKind::segment) {
        const audioseg::SegmentMap& segmap = *segmaps[i];
        auto [masked_spec, mask_spec] =
            masking::segment_mask(s.audio, segmap, cfg.mask_ratio, mix_seed(sample_seed, 0x61ULL));
        audio_masked = model.encode_audio(masked_spec);
        audio_mask_elems = masking::segment_mask_elements(s.audio, segmap, mask_spec.masked_indices);
      } else {
        const TokenSequence audio_emb =
            encoders::embed_audio(s.audio, model.audio_patch(), model.audio_encoder.embed);
        auto [audio_masked_emb, mask_spec] =
            masking::random_mask(audio_emb, cfg.mask_ratio, mix_seed(sample_seed, 0x61ULL),
                                 masking::Modality::audio);
        audio_masked = encoders::encode(audio_masked_emb, model.audio_encoder.blocks, cfg.heads);
        audio_mask_elems =
            masking::audio_token_mask_elements(s.audio, model.audio_patch(), mask_spec.masked_indices);
      }

      const FusionOutput fused_masked = model.fuse_sequences(video_masked, audio_masked);
      const Tensor video_rec = masking::reconstruct_video(fused_masked.video, model.video_decoder,
                                                          s.video, model.video_tubelet());
      const Tensor audio_rec =
          masking::reconstruct_audio(fused_masked.audio, model.audio_decoder, s.audio.time_frames,
                                     s.audio.freq_bins, model.audio_patch());
      const Tensor video_mask_elems =
          masking::video_token_mask_elements(s.video, model.video_tubelet(), video_mask.masked_indices);

      recs.push_back(losses::ReconstructionSample{
          {detail::clip_tensor(s.video), video_rec, video_mask_elems},
          {detail::spectrogram_tensor(s.audio), audio_rec, audio_mask_elems}});
    }
    parts.masegmv = losses::masked_reconstruction_loss(recs);
  }

  const losses::LossWeights weights{model.preset.use_avc ? cfg.lambda1 : 0.0,
                                    model.preset.use_avm ? cfg.lambda2 : 0.0,
                                    model.preset.use_mask ? cfg.lambda3 : 0.0, cfg.tau};
  const Tensor total = losses::hybrid_loss(parts, weights);
  return LossTensors{parts.cls_av, parts.avc, parts.avm, parts.masegmv, total};
}

inline Tensor compute_losses(AVTModel& model, const std::vector<const SyntheticSample*>& batch,
                             const std::vector<const audioseg::SegmentMap*>& segmaps,
                             std::uint64_t step_seed, LossBreakdown& breakdown) {
  const LossTensors t = compute_loss_tensors(model, batch, segmaps, step_seed);
  breakdown.cls_av = t.cls_av.item();
  breakdown.avc = model.preset.use_avc ? t.avc.item() : 0.0;
  breakdown.avm = model.preset.use_avm ? t.avm.item() : 0.0;
  breakdown.masegmv = model.preset.use_mask ? t.masegmv.item() : 0.0;
  breakdown.total = t.total.item();
  return t.total;
}

/// Class probabilities for one sample. Inference never applies masks, so the
/// output is independent of mask_ratio.
inline std::vector<double> predict(const AVTModel& model, const SyntheticSample& sample) {
  NoGradGuard no_grad;
  const std::size_t classes = model.cfg.dataset.num_classes;
  using namespace numerics;
  const auto probs_row = [&](const Tensor& logits) {
    const Tensor p = softmax(logits, 1);
    return std::vector<double>(p.data().begin(), p.data().end());
  };
  switch (model.preset.kind) {
    case PresetKind::audio_only:
      return probs_row(linear(model.encode_audio(sample.audio).cls(), model.audio_head));
    case PresetKind::video_only:
      return probs_row(linear(model.encode_video(sample.video).cls(), model.video_head));
    case PresetKind::avg: {
      const auto pa = probs_row(linear(model.encode_audio(sample.audio).cls(), model.audio_head));
      const auto pv = probs_row(linear(model.encode_video(sample.video).cls(), model.video_head));
      std::vector<double> avg(classes);
      for (std::size_t c = 0; c < classes; ++c) avg[c] = 0.5 * (pa[c] + pv[c]);
      return avg;
    }
    case PresetKind::multimodal: {
      const FusionOutput fused =
          model.fuse_sequences(model.encode_video(sample.video), model.encode_audio(sample.audio));
      const Tensor logits =
          linear(concat_cols({fused.video.cls(), fused.audio.cls()}), model.cls_head);
      return probs_row(logits);
    }
  }
  throw ContractError("predict: unhandled preset kind");
}

inline std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace avt::harness
