// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "avt/audioseg.hpp"
#include "avt/encoders.hpp"

#include <json.hpp>

namespace avt::masking {

using audioseg::SegmentMap;
using encoders::AudioPatchConfig;
using encoders::SpectrogramInput;
using encoders::TokenSequence;
using encoders::VideoClipInput;
using encoders::VideoTubeletConfig;
using numerics::LinearWeights;
using numerics::Tensor;

enum class Modality { audio, video };
enum class MaskKind { random, segment };

/// Which token or segment indices were hidden, and how.
struct MaskSpec {
  Modality modality = Modality::audio;
  MaskKind kind = MaskKind::random;
  std::vector<std::size_t> masked_indices;
  double ratio = 0.0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return nlohmann::json{{"modality", modality == Modality::audio ? "audio" : "video"},
                          {"kind", kind == MaskKind::random ? "random" : "segment"},
                          {"indices", masked_indices},
                          {"ratio", ratio},
                          {"seed", seed}};
  }
};

/// Zeroes round(ratio * token_count) non-CLS tokens, chosen uniformly without
/// replacement. The CLS slot is never maskable.
inline std::pair<TokenSequence, MaskSpec> random_mask(const TokenSequence& tokens, double ratio,
                                                      std::uint64_t seed, Modality modality) {
  if (ratio < 0.0 || ratio > 1.0) {
    throw ConfigError("random_mask: ratio " + std::to_string(ratio) + " outside [0, 1]");
  }
  const std::size_t count = tokens.token_count();
  const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(count)));

  MaskSpec spec;
  spec.modality = modality;
  spec.kind = MaskKind::random;
  spec.ratio = ratio;
  spec.seed = seed;

  if (k == 0) return {tokens, spec};

  RandomStream rng(mix_seed(seed, 0x6d61736bULL));
  spec.masked_indices = rng.sample_without_replacement(count, k);
  std::sort(spec.masked_indices.begin(), spec.masked_indices.end());

  Tensor keep = Tensor::full(tokens.embeddings.shape(), 1.0);
  const std::size_t dim = tokens.dim();
  for (std::size_t idx : spec.masked_indices) {
    for (std::size_t j = 0; j < dim; ++j) keep[(idx + 1) * dim + j] = 0.0;  // +1 skips CLS
  }
  return {TokenSequence{numerics::mul(tokens.embeddings, keep)}, spec};
}

/// Zeroes max(1, round(ratio * segment_count)) whole activity segments: every
/// time frame of a chosen segment across ALL frequency bins, in input space
/// before patch embedding.
inline std::pair<SpectrogramInput, MaskSpec> segment_mask(const SpectrogramInput& spec,
                                                          const SegmentMap& segmap, double ratio,
                                                          std::uint64_t seed) {
  if (ratio < 0.0 || ratio > 1.0) {
    throw ConfigError("segment_mask: ratio " + std::to_string(ratio) + " outside [0, 1]");
  }
  if (segmap.time_frames != spec.time_frames) {
    throw ShapeError("segment_mask: segment map covers " + std::to_string(segmap.time_frames) +
                     " frames, spectrogram has " + std::to_string(spec.time_frames));
  }
  segmap.validate();
  const std::size_t segment_count = segmap.segment_count();
  const std::size_t k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(segment_count))));

  MaskSpec out_spec;
  out_spec.modality = Modality::audio;
  out_spec.kind = MaskKind::segment;
  out_spec.ratio = ratio;
  out_spec.seed = seed;
  RandomStream rng(mix_seed(seed, 0x7365676dULL));
  out_spec.masked_indices = rng.sample_without_replacement(segment_count, k);
  std::sort(out_spec.masked_indices.begin(), out_spec.masked_indices.end());

  SpectrogramInput masked = spec;
  const auto segments = segmap.segments();
  for (std::size_t idx : out_spec.masked_indices) {
    for (std::size_t t = segments[idx].first; t < segments[idx].second; ++t) {
      for (std::size_t f = 0; f < spec.freq_bins; ++f) masked.at(t, f) = 0.0;
    }
  }
  return {masked, out_spec};
}

// ---------------------------------------------------------------------------
// element masks (which input values the reconstruction loss scores)
// ---------------------------------------------------------------------------

/// 1.0 over every cell of the chosen segments, 0.0 elsewhere.
inline Tensor segment_mask_elements(const SpectrogramInput& spec, const SegmentMap& segmap,
                                    const std::vector<std::size_t>& segment_indices) {
  Tensor mask = Tensor::zeros({spec.time_frames, spec.freq_bins});
  const auto segments = segmap.segments();
  for (std::size_t idx : segment_indices) {
    for (std::size_t t = segments[idx].first; t < segments[idx].second; ++t) {
      for (std::size_t f = 0; f < spec.freq_bins; ++f) mask[t * spec.freq_bins + f] = 1.0;
    }
  }
  return mask;
}

/// 1.0 over the spectrogram cells of the given patch-token indices.
inline Tensor audio_token_mask_elements(const SpectrogramInput& spec, const AudioPatchConfig& cfg,
                                        const std::vector<std::size_t>& token_indices) {
  Tensor mask = Tensor::zeros({spec.time_frames, spec.freq_bins});
  const std::size_t bf = spec.freq_bins / cfg.patch_freq;
  for (std::size_t idx : token_indices) {
    const std::size_t bi = idx / bf, bj = idx % bf;
    for (std::size_t dt = 0; dt < cfg.patch_time; ++dt)
      for (std::size_t df = 0; df < cfg.patch_freq; ++df)
        mask[(bi * cfg.patch_time + dt) * spec.freq_bins + bj * cfg.patch_freq + df] = 1.0;
  }
  return mask;
}

/// 1.0 over the clip voxels of the given tubelet-token indices.
inline Tensor video_token_mask_elements(const VideoClipInput& clip, const VideoTubeletConfig& cfg,
                                        const std::vector<std::size_t>& token_indices) {
  Tensor mask = Tensor::zeros({clip.frames, clip.height, clip.width, clip.channels});
  const std::size_t nh = clip.height / cfg.h, nw = clip.width / cfg.w;
  for (std::size_t idx : token_indices) {
    const std::size_t bi = idx / (nh * nw);
    const std::size_t bj = (idx / nw) % nh;
    const std::size_t bl = idx % nw;
    for (std::size_t dt = 0; dt < cfg.t; ++dt)
      for (std::size_t dy = 0; dy < cfg.h; ++dy)
        for (std::size_t dx = 0; dx < cfg.w; ++dx)
          for (std::size_t c = 0; c < clip.channels; ++c)
            mask[clip.offset(bi * cfg.t + dt, bj * cfg.h + dy, bl * cfg.w + dx, c)] = 1.0;
  }
  return mask;
}

// ---------------------------------------------------------------------------
// reconstruction decoder
// ---------------------------------------------------------------------------

namespace detail {

// out_flat_index -> row-major index into the (tokens x patch_pixels) matrix.
// With kernel size equal to stride, the transposed convolution writes each
// output position from exactly one token, so the scatter is a permutation.
inline std::vector<std::size_t> audio_scatter_index(std::size_t time_frames, std::size_t freq_bins,
                                                    const AudioPatchConfig& cfg) {
  const std::size_t bf = freq_bins / cfg.patch_freq;
  const std::size_t patch_pix = cfg.patch_time * cfg.patch_freq;
  std::vector<std::size_t> index(time_frames * freq_bins);
  for (std::size_t t = 0; t < time_frames; ++t) {
    for (std::size_t f = 0; f < freq_bins; ++f) {
      const std::size_t token = (t / cfg.patch_time) * bf + f / cfg.patch_freq;
      const std::size_t within = (t % cfg.patch_time) * cfg.patch_freq + f % cfg.patch_freq;
      index[t * freq_bins + f] = token * patch_pix + within;
    }
  }
  return index;
}

inline std::vector<std::size_t> video_scatter_index(const VideoClipInput& geom,
                                                    const VideoTubeletConfig& cfg) {
  const std::size_t nh = geom.height / cfg.h, nw = geom.width / cfg.w;
  const std::size_t tub_pix = cfg.t * cfg.h * cfg.w * geom.channels;
  std::vector<std::size_t> index(geom.size());
  for (std::size_t t = 0; t < geom.frames; ++t)
    for (std::size_t y = 0; y < geom.height; ++y)
      for (std::size_t x = 0; x < geom.width; ++x)
        for (std::size_t c = 0; c < geom.channels; ++c) {
          const std::size_t token = (t / cfg.t) * nh * nw + (y / cfg.h) * nw + x / cfg.w;
          const std::size_t within =
              (((t % cfg.t) * cfg.h + y % cfg.h) * cfg.w + x % cfg.w) * geom.channels + c;
          index[geom.offset(t, y, x, c)] = token * tub_pix + within;
        }
  return index;
}

}  // namespace detail

/// One-layer transposed-convolution decoder (kernel = stride = patch size):
/// each token is projected from the embedding dim to its patch's pixels and
/// the patches are rearranged to their grid positions. Output shape equals the
/// original spectrogram shape.
inline Tensor reconstruct_audio(const TokenSequence& fused, const LinearWeights& decoder,
                                std::size_t time_frames, std::size_t freq_bins,
                                const AudioPatchConfig& cfg) {
  const std::size_t grid = (time_frames / cfg.patch_time) * (freq_bins / cfg.patch_freq);
  if (fused.token_count() != grid) {
    throw ShapeError("reconstruct_audio: " + std::to_string(fused.token_count()) +
                     " tokens do not cover a " + std::to_string(grid) + "-patch grid");
  }
  if (decoder.out_dim() != cfg.patch_time * cfg.patch_freq) {
    throw ShapeError("reconstruct_audio: decoder emits " + std::to_string(decoder.out_dim()) +
                     " pixels per patch, patch has " +
                     std::to_string(cfg.patch_time * cfg.patch_freq));
  }
  const Tensor patches = numerics::linear(fused.tokens(), decoder);
  return numerics::gather_flat(patches, detail::audio_scatter_index(time_frames, freq_bins, cfg),
                               {time_frames, freq_bins});
}

/// Video counterpart: tokens back to tubelet positions at clip resolution.
/// `geom.values` is ignored; only the dimensions are read.
inline Tensor reconstruct_video(const TokenSequence& fused, const LinearWeights& decoder,
                                const VideoClipInput& geom, const VideoTubeletConfig& cfg) {
  const std::size_t grid = encoders::video_token_count(geom, cfg);
  if (fused.token_count() != grid) {
    throw ShapeError("reconstruct_video: " + std::to_string(fused.token_count()) +
                     " tokens do not cover a " + std::to_string(grid) + "-tubelet grid");
  }
  const std::size_t tub_pix = cfg.t * cfg.h * cfg.w * geom.channels;
  if (decoder.out_dim() != tub_pix) {
    throw ShapeError("reconstruct_video: decoder emits " + std::to_string(decoder.out_dim()) +
                     " voxels per tubelet, tubelet has " + std::to_string(tub_pix));
  }
  const Tensor patches = numerics::linear(fused.tokens(), decoder);
  return numerics::gather_flat(patches, detail::video_scatter_index(geom, cfg),
                               {geom.frames, geom.height, geom.width, geom.channels});
}

}  // namespace avt::masking
