// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "avt/encoders.hpp"
#include "avt/gradcheck.hpp"

using namespace avt;
using namespace avt::encoders;

namespace {

SpectrogramInput make_spectrogram(std::size_t t, std::size_t f, RandomStream& rng) {
  SpectrogramInput s;
  s.time_frames = t;
  s.freq_bins = f;
  s.values.resize(t * f);
  for (double& v : s.values) v = rng.uniform(-1.0, 1.0);
  return s;
}

VideoClipInput make_clip(std::size_t t, std::size_t h, std::size_t w, std::size_t c,
                         RandomStream& rng) {
  VideoClipInput v;
  v.frames = t;
  v.height = h;
  v.width = w;
  v.channels = c;
  v.values.resize(v.size());
  for (double& x : v.values) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("audio patch arithmetic") {
  RandomStream rng(1);
  const AudioPatchConfig cfg{4, 4};
  const SpectrogramInput spec = make_spectrogram(16, 16, rng);
  const PatchEmbedWeights w = PatchEmbedWeights::create(16, 16, 8, rng);
  const TokenSequence seq = embed_audio(spec, cfg, w);
  CHECK(seq.token_count() == 16);
  CHECK(seq.embeddings.rows() == 17);
  CHECK(seq.dim() == 8);
}

TEST_CASE("degenerate single audio patch") {
  RandomStream rng(2);
  const SpectrogramInput spec = make_spectrogram(8, 8, rng);
  const PatchEmbedWeights w = PatchEmbedWeights::create(64, 1, 8, rng);
  const TokenSequence seq = embed_audio(spec, {8, 8}, w);
  CHECK(seq.token_count() == 1);
}

TEST_CASE("indivisible audio dims raise a shape error") {
  RandomStream rng(3);
  const SpectrogramInput spec = make_spectrogram(10, 16, rng);
  const PatchEmbedWeights w = PatchEmbedWeights::create(16, 10, 8, rng);
  CHECK_THROWS_AS(embed_audio(spec, {4, 4}, w), ShapeError);
}

TEST_CASE("same seed embeds identical spectrograms identically") {
  RandomStream data_rng(4);
  const SpectrogramInput spec = make_spectrogram(16, 16, data_rng);
  RandomStream r1(9), r2(9);
  const PatchEmbedWeights w1 = PatchEmbedWeights::create(16, 16, 8, r1);
  const PatchEmbedWeights w2 = PatchEmbedWeights::create(16, 16, 8, r2);
  const TokenSequence a = embed_audio(spec, {4, 4}, w1);
  const TokenSequence b = embed_audio(spec, {4, 4}, w2);
  REQUIRE(a.embeddings.size() == b.embeddings.size());
  for (std::size_t i = 0; i < a.embeddings.size(); ++i) {
    CHECK(a.embeddings[i] == b.embeddings[i]);
  }
}

TEST_CASE("video tubelet arithmetic") {
  RandomStream rng(5);
  const VideoClipInput clip = make_clip(8, 16, 16, 3, rng);
  const VideoTubeletConfig cfg{2, 4, 4};
  CHECK(video_token_count(clip, cfg) == 64);
  const PatchEmbedWeights w = PatchEmbedWeights::create(2 * 4 * 4 * 3, 64, 8, rng);
  CHECK(embed_video(clip, cfg, w).token_count() == 64);

  const VideoClipInput tiny = make_clip(2, 4, 4, 1, rng);
  CHECK(video_token_count(tiny, {2, 4, 4}) == 1);
}

TEST_CASE("indivisible video dims raise a shape error") {
  RandomStream rng(6);
  const VideoClipInput clip = make_clip(3, 4, 4, 1, rng);
  CHECK_THROWS_AS(video_tubelet_matrix(clip, {2, 4, 4}), ShapeError);
}

TEST_CASE("swapping two input tubelets swaps the two projected tokens") {
  RandomStream rng(7);
  VideoClipInput clip = make_clip(4, 8, 8, 1, rng);
  const VideoTubeletConfig cfg{2, 4, 4};
  const numerics::Tensor before = video_tubelet_matrix(clip, cfg);

  // swap the contents of tubelet 0 and tubelet 3 in input space
  const std::size_t tub_dim = 2 * 4 * 4;
  std::vector<double> row0(tub_dim), row3(tub_dim);
  for (std::size_t k = 0; k < tub_dim; ++k) {
    row0[k] = before[0 * tub_dim + k];
    row3[k] = before[3 * tub_dim + k];
  }
  // tubelet 3 of a 2x2x2 grid is (t=0, h=1, w=1): frames 0-1, rows 4-7, cols 4-7
  for (std::size_t dt = 0; dt < 2; ++dt)
    for (std::size_t dy = 0; dy < 4; ++dy)
      for (std::size_t dx = 0; dx < 4; ++dx) {
        std::swap(clip.values[clip.offset(dt, dy, dx, 0)],
                  clip.values[clip.offset(dt, 4 + dy, 4 + dx, 0)]);
      }
  const numerics::Tensor after = video_tubelet_matrix(clip, cfg);
  for (std::size_t k = 0; k < tub_dim; ++k) {
    CHECK(after[0 * tub_dim + k] == row3[k]);
    CHECK(after[3 * tub_dim + k] == row0[k]);
  }
  // projection is row-wise, so the projected (pre-positional) tokens swap too
  RandomStream wrng(8);
  const numerics::LinearWeights proj = numerics::LinearWeights::create(tub_dim, 8, wrng);
  const numerics::Tensor pb = numerics::linear(before, proj);
  const numerics::Tensor pa = numerics::linear(after, proj);
  for (std::size_t j = 0; j < 8; ++j) {
    CHECK(pa.at(0, j) == pb.at(3, j));
    CHECK(pa.at(3, j) == pb.at(0, j));
  }
}

TEST_CASE("encode with depth 0 returns the input unchanged") {
  RandomStream rng(10);
  const SpectrogramInput spec = make_spectrogram(16, 16, rng);
  const PatchEmbedWeights w = PatchEmbedWeights::create(16, 16, 8, rng);
  const TokenSequence seq = embed_audio(spec, {4, 4}, w);
  const TokenSequence out = encode(seq, {}, 2);
  CHECK(out.embeddings.same_storage(seq.embeddings));
}

TEST_CASE("encode preserves token count and dim") {
  RandomStream rng(11);
  const SpectrogramInput spec = make_spectrogram(16, 16, rng);
  const EncoderWeights w = EncoderWeights::create(16, 16, 8, 2, rng);
  const TokenSequence seq = embed_audio(spec, {4, 4}, w.embed);
  const TokenSequence out = encode(seq, w.blocks, 2);
  CHECK(out.embeddings.rows() == 17);
  CHECK(out.dim() == 8);
  // stacking depths composes: shape contract of encode(encode(t,a),b) matches encode(t,a+b)
  const TokenSequence twice = encode(encode(seq, {w.blocks[0]}, 2), {w.blocks[1]}, 2);
  CHECK(twice.embeddings.shape() == out.embeddings.shape());
}

TEST_CASE("encoder output depends on every input patch") {
  RandomStream rng(12);
  const SpectrogramInput spec = make_spectrogram(8, 8, rng);
  const EncoderWeights w = EncoderWeights::create(16, 4, 8, 1, rng);
  const numerics::Tensor base_cls = encode(embed_audio(spec, {4, 4}, w.embed), w.blocks, 2).cls();
  for (std::size_t patch = 0; patch < 4; ++patch) {
    SpectrogramInput zeroed = spec;
    const std::size_t bi = patch / 2, bj = patch % 2;
    for (std::size_t dt = 0; dt < 4; ++dt)
      for (std::size_t df = 0; df < 4; ++df) zeroed.at(bi * 4 + dt, bj * 4 + df) = 0.0;
    const numerics::Tensor cls = encode(embed_audio(zeroed, {4, 4}, w.embed), w.blocks, 2).cls();
    bool changed = false;
    for (std::size_t j = 0; j < cls.size(); ++j) changed = changed || cls[j] != base_cls[j];
    CHECK(changed);
  }
}

TEST_CASE("gradient through a depth-2 encoder matches finite differences") {
  RandomStream rng(13);
  const SpectrogramInput spec = make_spectrogram(8, 8, rng);
  EncoderWeights w = EncoderWeights::create(16, 4, 8, 2, rng);
  const auto f = [&]() {
    return numerics::sum(encode(embed_audio(spec, {4, 4}, w.embed), w.blocks, 2).cls());
  };
  std::vector<numerics::Tensor> params;
  w.visit("enc", [&params](const std::string&, numerics::Tensor& t) { params.push_back(t); });
  const numerics::GradCheckReport report = numerics::grad_check(f, params, 1e-5, 1e-4, 8, 99);
  INFO("max rel error " << report.max_rel_error << " at " << report.worst_location);
  CHECK(report.pass);
}
