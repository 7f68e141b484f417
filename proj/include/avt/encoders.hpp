// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "avt/ops.hpp"

namespace avt::encoders {

using numerics::AttentionWeights;
using numerics::LinearWeights;
using numerics::Tensor;

/// Input audio spectrogram, time-major: values[t * freq_bins + f].
struct SpectrogramInput {
  std::size_t time_frames = 0;
  std::size_t freq_bins = 0;
  std::vector<double> values;

  double at(std::size_t t, std::size_t f) const { return values[t * freq_bins + f]; }
  double& at(std::size_t t, std::size_t f) { return values[t * freq_bins + f]; }
  std::size_t size() const { return time_frames * freq_bins; }
};

/// Input video clip, row-major over (frame, row, col, channel).
struct VideoClipInput {
  std::size_t frames = 0, height = 0, width = 0, channels = 0;
  std::vector<double> values;

  std::size_t size() const { return frames * height * width * channels; }
  std::size_t offset(std::size_t t, std::size_t y, std::size_t x, std::size_t c) const {
    return ((t * height + y) * width + x) * channels + c;
  }
};

/// Ordered embedding vectors with a distinguished CLS slot at row 0.
struct TokenSequence {
  Tensor embeddings;  // (1 + token_count) x dim; row 0 is CLS

  std::size_t token_count() const { return embeddings.rows() == 0 ? 0 : embeddings.rows() - 1; }
  std::size_t dim() const { return embeddings.cols(); }
  Tensor cls() const { return numerics::slice_rows(embeddings, 0, 1); }
  Tensor tokens() const { return numerics::slice_rows(embeddings, 1, embeddings.rows()); }
};

struct AudioPatchConfig {
  std::size_t patch_time = 8;
  std::size_t patch_freq = 8;
};

struct VideoTubeletConfig {
  std::size_t t = 2, h = 4, w = 4;
};

// ---------------------------------------------------------------------------
// weights
// ---------------------------------------------------------------------------

struct PatchEmbedWeights {
  LinearWeights proj;  // (patch_dim x emb_dim)
  Tensor cls;          // (1 x emb_dim), learned
  Tensor pos;          // ((1 + token_count) x emb_dim), learned positional embedding

  static PatchEmbedWeights create(std::size_t patch_dim, std::size_t token_count,
                                  std::size_t emb_dim, RandomStream& rng) {
    PatchEmbedWeights w;
    w.proj = LinearWeights::create(patch_dim, emb_dim, rng);
    w.cls = Tensor::zeros({1, emb_dim}, true);
    for (double& v : w.cls.data()) v = rng.trunc_normal(0.02);
    w.pos = Tensor::zeros({1 + token_count, emb_dim}, true);
    for (double& v : w.pos.data()) v = rng.trunc_normal(0.02);
    return w;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".proj.weight", proj.weight);
    f(prefix + ".proj.bias", proj.bias);
    f(prefix + ".cls", cls);
    f(prefix + ".pos", pos);
  }
};

/// Pre-norm transformer block: x + MSA(LN(x)), then + MLP(LN(.)). The MLP is
/// Linear -> GELU -> Linear with a 4x hidden expansion.
struct TransformerBlockWeights {
  Tensor ln1_gain, ln1_bias;
  AttentionWeights attn;
  Tensor ln2_gain, ln2_bias;
  LinearWeights mlp_in, mlp_out;

  static TransformerBlockWeights create(std::size_t dim, RandomStream& rng) {
    TransformerBlockWeights w;
    w.ln1_gain = Tensor::full({dim}, 1.0, true);
    w.ln1_bias = Tensor::zeros({dim}, true);
    w.attn = AttentionWeights::create(dim, rng);
    w.ln2_gain = Tensor::full({dim}, 1.0, true);
    w.ln2_bias = Tensor::zeros({dim}, true);
    w.mlp_in = LinearWeights::create(dim, 4 * dim, rng);
    w.mlp_out = LinearWeights::create(4 * dim, dim, rng);
    return w;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".ln1.gain", ln1_gain);
    f(prefix + ".ln1.bias", ln1_bias);
    f(prefix + ".attn.query.weight", attn.query.weight);
    f(prefix + ".attn.query.bias", attn.query.bias);
    f(prefix + ".attn.key.weight", attn.key.weight);
    f(prefix + ".attn.key.bias", attn.key.bias);
    f(prefix + ".attn.value.weight", attn.value.weight);
    f(prefix + ".attn.value.bias", attn.value.bias);
    f(prefix + ".attn.out.weight", attn.out.weight);
    f(prefix + ".attn.out.bias", attn.out.bias);
    f(prefix + ".ln2.gain", ln2_gain);
    f(prefix + ".ln2.bias", ln2_bias);
    f(prefix + ".mlp.in.weight", mlp_in.weight);
    f(prefix + ".mlp.in.bias", mlp_in.bias);
    f(prefix + ".mlp.out.weight", mlp_out.weight);
    f(prefix + ".mlp.out.bias", mlp_out.bias);
  }
};

struct EncoderWeights {
  PatchEmbedWeights embed;
  std::vector<TransformerBlockWeights> blocks;

  static EncoderWeights create(std::size_t patch_dim, std::size_t token_count, std::size_t dim,
                               std::size_t depth, RandomStream& rng) {
    EncoderWeights w;
    w.embed = PatchEmbedWeights::create(patch_dim, token_count, dim, rng);
    w.blocks.reserve(depth);
    for (std::size_t i = 0; i < depth; ++i) w.blocks.push_back(TransformerBlockWeights::create(dim, rng));
    return w;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    embed.visit(prefix + ".embed", f);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      blocks[i].visit(prefix + ".block" + std::to_string(i), f);
    }
  }
};

// ---------------------------------------------------------------------------
// operations
// ---------------------------------------------------------------------------

inline std::size_t audio_token_count(const SpectrogramInput& a, const AudioPatchConfig& cfg) {
  return (a.time_frames / cfg.patch_time) * (a.freq_bins / cfg.patch_freq);
}

inline std::size_t video_token_count(const VideoClipInput& v, const VideoTubeletConfig& cfg) {
  return (v.frames / cfg.t) * (v.height / cfg.h) * (v.width / cfg.w);
}

/// Flattens non-overlapping 2-D patches (time-major within a patch) into the
/// rows of an (M x patch_dim) constant matrix. Patch order is row-major over
/// (time block, freq block).
inline Tensor audio_patch_matrix(const SpectrogramInput& a, const AudioPatchConfig& cfg) {
  if (cfg.patch_time == 0 || cfg.patch_freq == 0 || a.time_frames % cfg.patch_time != 0 ||
      a.freq_bins % cfg.patch_freq != 0) {
    throw ShapeError("audio patches: spectrogram (" + std::to_string(a.time_frames) + " x " +
                     std::to_string(a.freq_bins) + ") not divisible by patch (" +
                     std::to_string(cfg.patch_time) + " x " + std::to_string(cfg.patch_freq) + ")");
  }
  const std::size_t bt = a.time_frames / cfg.patch_time;
  const std::size_t bf = a.freq_bins / cfg.patch_freq;
  const std::size_t patch_dim = cfg.patch_time * cfg.patch_freq;
  Tensor m = Tensor::zeros({bt * bf, patch_dim});
  std::size_t row = 0;
  for (std::size_t i = 0; i < bt; ++i) {
    for (std::size_t j = 0; j < bf; ++j, ++row) {
      std::size_t k = 0;
      for (std::size_t dt = 0; dt < cfg.patch_time; ++dt)
        for (std::size_t df = 0; df < cfg.patch_freq; ++df, ++k)
          m[row * patch_dim + k] = a.at(i * cfg.patch_time + dt, j * cfg.patch_freq + df);
    }
  }
  return m;
}

/// Flattens non-overlapping space-time tubelets into rows of (N x tubelet_dim).
/// Tubelet order is row-major over (t block, h block, w block); within a
/// tubelet, (t, y, x, channel) row-major.
inline Tensor video_tubelet_matrix(const VideoClipInput& v, const VideoTubeletConfig& cfg) {
  if (cfg.t == 0 || cfg.h == 0 || cfg.w == 0 || v.frames % cfg.t != 0 || v.height % cfg.h != 0 ||
      v.width % cfg.w != 0) {
    throw ShapeError("video tubelets: clip (" + std::to_string(v.frames) + " x " +
                     std::to_string(v.height) + " x " + std::to_string(v.width) + " x " +
                     std::to_string(v.channels) + ") not divisible by tubelet (" +
                     std::to_string(cfg.t) + " x " + std::to_string(cfg.h) + " x " +
                     std::to_string(cfg.w) + ")");
  }
  const std::size_t nt = v.frames / cfg.t, nh = v.height / cfg.h, nw = v.width / cfg.w;
  const std::size_t tub_dim = cfg.t * cfg.h * cfg.w * v.channels;
  Tensor m = Tensor::zeros({nt * nh * nw, tub_dim});
  std::size_t row = 0;
  for (std::size_t i = 0; i < nt; ++i)
    for (std::size_t j = 0; j < nh; ++j)
      for (std::size_t l = 0; l < nw; ++l, ++row) {
        std::size_t k = 0;
        for (std::size_t dt = 0; dt < cfg.t; ++dt)
          for (std::size_t dy = 0; dy < cfg.h; ++dy)
            for (std::size_t dx = 0; dx < cfg.w; ++dx)
              for (std::size_t c = 0; c < v.channels; ++c, ++k)
                m[row * tub_dim + k] =
                    v.values[v.offset(i * cfg.t + dt, j * cfg.h + dy, l * cfg.w + dx, c)];
      }
  return m;
}

inline TokenSequence embed_patches(const Tensor& patch_matrix, const PatchEmbedWeights& w) {
  const Tensor projected = numerics::linear(patch_matrix, w.proj);
  const Tensor with_cls = numerics::concat_rows({w.cls, projected});
  if (with_cls.rows() != w.pos.rows()) {
    throw ShapeError("positional embedding rows " + shape_str(w.pos.shape()) +
                     " do not match token rows " + shape_str(with_cls.shape()));
  }
  return TokenSequence{numerics::add(with_cls, w.pos)};
}

inline TokenSequence embed_audio(const SpectrogramInput& a, const AudioPatchConfig& cfg,
                                 const PatchEmbedWeights& w) {
  return embed_patches(audio_patch_matrix(a, cfg), w);
}

inline TokenSequence embed_video(const VideoClipInput& v, const VideoTubeletConfig& cfg,
                                 const PatchEmbedWeights& w) {
  return embed_patches(video_tubelet_matrix(v, cfg), w);
}

inline Tensor transformer_block(const Tensor& x, const TransformerBlockWeights& w,
                                std::size_t heads) {
  using namespace numerics;
  const Tensor attended =
      add(multi_head_self_attention(layer_norm(x, w.ln1_gain, w.ln1_bias), w.attn, heads), x);
  const Tensor normed = layer_norm(attended, w.ln2_gain, w.ln2_bias);
  return add(linear(gelu(linear(normed, w.mlp_in)), w.mlp_out), attended);
}

/// Applies `blocks.size()` pre-norm transformer blocks; an empty block list
/// returns the input unchanged. Token count and dim are preserved.
inline TokenSequence encode(const TokenSequence& seq,
                            const std::vector<TransformerBlockWeights>& blocks,
                            std::size_t heads) {
  Tensor x = seq.embeddings;
  for (const TransformerBlockWeights& b : blocks) x = transformer_block(x, b, heads);
  return TokenSequence{x};
}

}  // namespace avt::encoders
