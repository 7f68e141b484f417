// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "avt/encoders.hpp"

namespace avt::fusion {

using encoders::TokenSequence;
using encoders::TransformerBlockWeights;
using numerics::Tensor;

/// The L shared bottleneck tokens threaded through the fusion blocks, plus one
/// snapshot of the token set per completed block (diagnostic).
struct BottleneckState {
  Tensor tokens;  // (L x dim); L may be 0, which degenerates to unimodal blocks
  std::vector<Tensor> per_block_snapshots;

  std::size_t count() const { return tokens.rows(); }
};

struct FusionOutput {
  TokenSequence video;  // token count unchanged (N + CLS)
  TokenSequence audio;  // token count unchanged (M + CLS)
  BottleneckState bottleneck;
};

/// Each block applies two transformer passes with separate weights: one over
/// [video tokens, bottleneck] and one over [bottleneck, audio tokens].
struct FusionBlockWeights {
  TransformerBlockWeights video_pass;
  TransformerBlockWeights audio_pass;

  static FusionBlockWeights create(std::size_t dim, RandomStream& rng) {
    FusionBlockWeights w;
    w.video_pass = TransformerBlockWeights::create(dim, rng);
    w.audio_pass = TransformerBlockWeights::create(dim, rng);
    return w;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    video_pass.visit(prefix + ".video", f);
    audio_pass.visit(prefix + ".audio", f);
  }
};

struct FusionWeights {
  Tensor bottleneck;  // (L x dim), learned initial tokens
  std::vector<FusionBlockWeights> blocks;

  static FusionWeights create(std::size_t num_tokens, std::size_t dim, std::size_t num_blocks,
                              RandomStream& rng) {
    FusionWeights w;
    w.bottleneck = Tensor::zeros({num_tokens, dim}, true);
    for (double& v : w.bottleneck.data()) v = rng.trunc_normal(0.02);
    w.blocks.reserve(num_blocks);
    for (std::size_t i = 0; i < num_blocks; ++i) w.blocks.push_back(FusionBlockWeights::create(dim, rng));
    return w;
  }

  std::size_t bottleneck_count() const { return bottleneck.rows(); }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".bottleneck", bottleneck);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      blocks[i].visit(prefix + ".block" + std::to_string(i), f);
    }
  }
};

/// Learned initial bottleneck tokens, truncated-normal init (std 0.02).
inline BottleneckState init_bottleneck(std::size_t num_tokens, std::size_t dim,
                                       std::uint64_t seed) {
  if (num_tokens < 1) throw ConfigError("init_bottleneck: need at least 1 token");
  RandomStream rng(seed);
  Tensor t = Tensor::zeros({num_tokens, dim}, true);
  for (double& v : t.data()) v = rng.trunc_normal(0.02);
  return BottleneckState{t, {}};
}

/// One cross-modality bottleneck block. Step (i): attend over
/// [video CLS, video tokens, bottleneck], split back into updated video tokens
/// and updated bottleneck. Step (ii): attend over
/// [updated bottleneck, audio CLS, audio tokens], split into the final
/// bottleneck and updated audio tokens. Within one block, video outputs are
/// produced before step (ii) and therefore cannot depend on audio inputs.
inline FusionOutput fusion_block(const TokenSequence& video, const TokenSequence& audio,
                                 const BottleneckState& bottleneck, const FusionBlockWeights& w,
                                 std::size_t heads) {
  using namespace numerics;
  const std::size_t dim = video.dim();
  if (audio.dim() != dim || (bottleneck.count() > 0 && bottleneck.tokens.cols() != dim)) {
    throw ShapeError("fusion_block: embedding dims differ, video " +
                     shape_str(video.embeddings.shape()) + ", audio " +
                     shape_str(audio.embeddings.shape()) + ", bottleneck " +
                     shape_str(bottleneck.tokens.shape()));
  }
  const std::size_t n_video = video.token_count();
  const std::size_t m_audio = audio.token_count();
  const std::size_t l = bottleneck.count();
  if (l > 0 && l >= std::min(n_video, m_audio)) {
    throw ConfigError("fusion_block: bottleneck token count " + std::to_string(l) +
                      " must be smaller than min(token counts) = " +
                      std::to_string(std::min(n_video, m_audio)));
  }

  const std::size_t vrows = 1 + n_video;
  const Tensor video_and_bn =
      l == 0 ? video.embeddings : concat_rows({video.embeddings, bottleneck.tokens});
  const Tensor video_out_full = encoders::transformer_block(video_and_bn, w.video_pass, heads);
  const Tensor video_out = slice_rows(video_out_full, 0, vrows);
  const Tensor bn_mid = slice_rows(video_out_full, vrows, vrows + l);

  const Tensor bn_and_audio = l == 0 ? audio.embeddings : concat_rows({bn_mid, audio.embeddings});
  const Tensor audio_out_full = encoders::transformer_block(bn_and_audio, w.audio_pass, heads);
  const Tensor bn_out = slice_rows(audio_out_full, 0, l);
  const Tensor audio_out = slice_rows(audio_out_full, l, l + 1 + m_audio);

  return FusionOutput{TokenSequence{video_out}, TokenSequence{audio_out},
                      BottleneckState{bn_out, {}}};
}

/// Stacks fusion blocks, carrying video/audio/bottleneck tokens forward and
/// recording one bottleneck snapshot per block.
inline FusionOutput fuse(const TokenSequence& video, const TokenSequence& audio,
                         const BottleneckState& init, const FusionWeights& w, std::size_t heads) {
  if (w.blocks.empty()) throw ConfigError("fuse: need at least 1 fusion block");
  TokenSequence v = video;
  TokenSequence a = audio;
  BottleneckState bn{init.tokens, {}};
  std::vector<Tensor> snapshots;
  snapshots.reserve(w.blocks.size());
  for (const FusionBlockWeights& block : w.blocks) {
    FusionOutput out = fusion_block(v, a, bn, block, heads);
    v = out.video;
    a = out.audio;
    bn = out.bottleneck;
    snapshots.push_back(bn.tokens);
  }
  bn.per_block_snapshots = std::move(snapshots);
  return FusionOutput{v, a, bn};
}

/// Diagnostic readout: the mean of the per-block bottleneck snapshots. Not on
/// the forward path; the forward carry is strictly sequential.
inline Tensor bottleneck_average(const BottleneckState& state) {
  if (state.per_block_snapshots.empty()) {
    throw ContractError("bottleneck_average: no snapshots recorded");
  }
  Tensor acc = state.per_block_snapshots[0];
  for (std::size_t i = 1; i < state.per_block_snapshots.size(); ++i) {
    acc = numerics::add(acc, state.per_block_snapshots[i]);
  }
  return numerics::scale(acc, 1.0 / static_cast<double>(state.per_block_snapshots.size()));
}

}  // namespace avt::fusion
