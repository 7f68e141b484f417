// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch.hpp>

#include <set>
#include <vector>

#include "avt/gradcheck.hpp"
#include "avt/losses.hpp"
#include "avt/masking.hpp"

using namespace avt;
using namespace avt::masking;
using encoders::SpectrogramInput;
using encoders::TokenSequence;
using numerics::Tensor;

namespace {

TokenSequence random_sequence(std::size_t tokens, std::size_t dim, RandomStream& rng) {
  Tensor t = Tensor::zeros({tokens + 1, dim});
  for (double& v : t.data()) v = rng.uniform(0.5, 1.5);  // strictly nonzero
  return TokenSequence{t};
}

SpectrogramInput random_spec(std::size_t t, std::size_t f, RandomStream& rng) {
  SpectrogramInput s;
  s.time_frames = t;
  s.freq_bins = f;
  s.values.resize(t * f);
  for (double& v : s.values) v = rng.uniform(0.5, 1.5);
  return s;
}

audioseg::SegmentMap uniform_map(std::size_t t, std::size_t segments) {
  audioseg::SegmentMap map;
  map.time_frames = t;
  for (std::size_t i = 1; i < segments; ++i) map.boundaries.push_back(i * t / segments);
  return map;
}

}  // namespace

TEST_CASE("random mask with ratio zero is a no-op") {
  RandomStream rng(1);
  const TokenSequence seq = random_sequence(10, 4, rng);
  const auto [masked, spec] = random_mask(seq, 0.0, 7, Modality::video);
  CHECK(spec.masked_indices.empty());
  CHECK(masked.embeddings.same_storage(seq.embeddings));
}

TEST_CASE("a 4% ratio masks exactly round(0.04 * count) tokens") {
  RandomStream rng(2);
  const TokenSequence seq = random_sequence(100, 4, rng);
  const auto [masked, spec] = random_mask(seq, 0.04, 7, Modality::video);
  CHECK(spec.masked_indices.size() == 4);
  // masked rows are exactly zero; all others untouched
  std::set<std::size_t> masked_set(spec.masked_indices.begin(), spec.masked_indices.end());
  for (std::size_t tok = 0; tok < 100; ++tok) {
    for (std::size_t j = 0; j < 4; ++j) {
      const double v = masked.embeddings.at(tok + 1, j);
      if (masked_set.count(tok)) {
        CHECK(v == 0.0);
      } else {
        CHECK(v == seq.embeddings.at(tok + 1, j));
      }
    }
  }
}

TEST_CASE("ratio one masks every non-CLS token and never the CLS") {
  RandomStream rng(3);
  const TokenSequence seq = random_sequence(12, 4, rng);
  const auto [masked, spec] = random_mask(seq, 1.0, 9, Modality::audio);
  CHECK(spec.masked_indices.size() == 12);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(masked.embeddings.at(0, j) == seq.embeddings.at(0, j));
  }
  for (std::size_t tok = 1; tok <= 12; ++tok)
    for (std::size_t j = 0; j < 4; ++j) CHECK(masked.embeddings.at(tok, j) == 0.0);
}

TEST_CASE("random mask is reproducible under a fixed seed") {
  RandomStream rng(4);
  const TokenSequence seq = random_sequence(30, 4, rng);
  const auto [m1, s1] = random_mask(seq, 0.3, 42, Modality::video);
  const auto [m2, s2] = random_mask(seq, 0.3, 42, Modality::video);
  CHECK(s1.masked_indices == s2.masked_indices);
  const auto [m3, s3] = random_mask(seq, 0.3, 43, Modality::video);
  CHECK(s1.masked_indices != s3.masked_indices);
}

TEST_CASE("random mask rejects ratios outside [0, 1]") {
  RandomStream rng(5);
  const TokenSequence seq = random_sequence(4, 4, rng);
  CHECK_THROWS_AS(random_mask(seq, -0.1, 1, Modality::video), ConfigError);
  CHECK_THROWS_AS(random_mask(seq, 1.5, 1, Modality::video), ConfigError);
}

TEST_CASE("a 4% ratio over fifty segments masks two of them") {
  RandomStream rng(6);
  const SpectrogramInput spec = random_spec(100, 8, rng);
  const auto map = uniform_map(100, 50);
  const auto [masked, mask_spec] = segment_mask(spec, map, 0.04, 3);
  CHECK(mask_spec.masked_indices.size() == 2);
}

TEST_CASE("a vanishing ratio still masks one whole segment") {
  RandomStream rng(7);
  const SpectrogramInput spec = random_spec(40, 8, rng);
  const auto [masked, mask_spec] = segment_mask(spec, uniform_map(40, 10), 0.001, 5);
  CHECK(mask_spec.masked_indices.size() == 1);
}

TEST_CASE("segment masking zeroes whole segments and nothing else") {
  RandomStream rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t t = 10 + rng.index(50);
    const std::size_t f = 1 + rng.index(8);
    const SpectrogramInput spec = random_spec(t, f, rng);
    const std::size_t nseg = 2 + rng.index(8);
    const auto map = uniform_map(t, nseg);
    const auto [masked, mask_spec] =
        segment_mask(spec, map, rng.uniform(0.0, 1.0), rng.next_u64());
    const auto segments = map.segments();
    std::set<std::size_t> chosen(mask_spec.masked_indices.begin(), mask_spec.masked_indices.end());
    for (std::size_t seg = 0; seg < segments.size(); ++seg) {
      for (std::size_t tt = segments[seg].first; tt < segments[seg].second; ++tt) {
        for (std::size_t ff = 0; ff < f; ++ff) {
          if (chosen.count(seg)) {
            REQUIRE(masked.at(tt, ff) == 0.0);
          } else {
            REQUIRE(masked.at(tt, ff) == spec.at(tt, ff));
          }
        }
      }
    }
  }
}

TEST_CASE("segment mask validates the map against the spectrogram") {
  RandomStream rng(9);
  const SpectrogramInput spec = random_spec(20, 4, rng);
  CHECK_THROWS_AS(segment_mask(spec, uniform_map(24, 4), 0.5, 1), ShapeError);
}

TEST_CASE("mask specs serialize to JSON") {
  RandomStream rng(10);
  const TokenSequence seq = random_sequence(10, 4, rng);
  const auto [masked, spec] = random_mask(seq, 0.2, 11, Modality::video);
  const nlohmann::json j = spec.to_json();
  CHECK(j["modality"] == "video");
  CHECK(j["kind"] == "random");
  CHECK(j["ratio"] == 0.2);
  CHECK(j["seed"] == 11);
  CHECK(j["indices"].size() == spec.masked_indices.size());
}

TEST_CASE("audio reconstruction matches the input shape") {
  RandomStream rng(11);
  const std::size_t dim = 6;
  const encoders::AudioPatchConfig patch{4, 4};
  const TokenSequence fused = random_sequence(16, dim, rng);  // 16 patches of a 16x16 grid
  const numerics::LinearWeights dec = numerics::LinearWeights::create(dim, 16, rng);
  const Tensor rec = reconstruct_audio(fused, dec, 16, 16, patch);
  CHECK(rec.shape() == std::vector<std::size_t>{16, 16});
}

TEST_CASE("token-grid mismatches are shape errors") {
  RandomStream rng(12);
  const TokenSequence fused = random_sequence(9, 6, rng);
  const numerics::LinearWeights dec = numerics::LinearWeights::create(6, 16, rng);
  CHECK_THROWS_AS(reconstruct_audio(fused, dec, 16, 16, {4, 4}), ShapeError);
  const numerics::LinearWeights wrong_pix = numerics::LinearWeights::create(6, 9, rng);
  const TokenSequence ok = random_sequence(16, 6, rng);
  CHECK_THROWS_AS(reconstruct_audio(ok, wrong_pix, 16, 16, {4, 4}), ShapeError);
}

TEST_CASE("scatter places each token's pixels at its own patch") {
  RandomStream rng(13);
  const std::size_t dim = 3;
  const encoders::AudioPatchConfig patch{2, 2};
  // 2x2 patches over a 4x4 spectrogram: 4 tokens
  const TokenSequence fused = random_sequence(4, dim, rng);
  numerics::LinearWeights dec;
  dec.weight = Tensor::zeros({dim, 4}, true);
  dec.bias = Tensor::zeros({4}, true);
  dec.weight[0 * 4 + 0] = 1.0;  // pixel (0,0) of each patch = token coord 0
  const Tensor rec = reconstruct_audio(fused, dec, 4, 4, patch);
  // token order is row-major over (time block, freq block)
  CHECK(rec.at(0, 0) == fused.embeddings.at(1, 0));
  CHECK(rec.at(0, 2) == fused.embeddings.at(2, 0));
  CHECK(rec.at(2, 0) == fused.embeddings.at(3, 0));
  CHECK(rec.at(2, 2) == fused.embeddings.at(4, 0));
  CHECK(rec.at(1, 1) == 0.0);
}

TEST_CASE("zero decoder weights reduce masked MSE to the masked input energy") {
  RandomStream rng(14);
  const std::size_t dim = 5;
  const encoders::AudioPatchConfig patch{4, 4};
  SpectrogramInput spec = random_spec(8, 8, rng);
  const TokenSequence fused = random_sequence(4, dim, rng);
  numerics::LinearWeights dec;
  dec.weight = Tensor::zeros({dim, 16}, true);
  dec.bias = Tensor::zeros({16}, true);
  const Tensor rec = reconstruct_audio(fused, dec, 8, 8, patch);

  const auto map = uniform_map(8, 4);
  const std::vector<std::size_t> chosen = {1, 2};
  const Tensor mask = segment_mask_elements(spec, map, chosen);
  const Tensor orig = Tensor::from_data({8, 8}, spec.values);
  const double loss =
      losses::masked_reconstruction_loss({{{orig, rec, mask}, {orig, rec, mask}}}).item();

  long double expected = 0.0L, count = 0.0L;
  for (std::size_t i = 0; i < orig.size(); ++i) {
    if (mask[i] == 1.0) {
      expected += orig[i] * orig[i];
      count += 1.0L;
    }
  }
  CHECK(loss == Approx(static_cast<double>(2.0L * expected / count)).margin(1e-12));
}

TEST_CASE("video reconstruction and voxel masks line up") {
  RandomStream rng(15);
  encoders::VideoClipInput clip;
  clip.frames = 4;
  clip.height = 4;
  clip.width = 4;
  clip.channels = 2;
  clip.values.resize(clip.size());
  for (double& v : clip.values) v = rng.uniform(-1.0, 1.0);
  const encoders::VideoTubeletConfig cfg{2, 2, 2};

  const std::size_t tokens = encoders::video_token_count(clip, cfg);  // 2*2*2 = 8
  const TokenSequence fused = random_sequence(tokens, 6, rng);
  const numerics::LinearWeights dec = numerics::LinearWeights::create(6, 2 * 2 * 2 * 2, rng);
  const Tensor rec = reconstruct_video(fused, dec, clip, cfg);
  CHECK(rec.shape() == std::vector<std::size_t>{4, 4, 4, 2});

  const Tensor mask = video_token_mask_elements(clip, cfg, {0, 7});
  double on = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) on += mask[i];
  CHECK(on == 2.0 * 2 * 2 * 2 * 2);  // two tubelets, 16 voxels each
}

TEST_CASE("gradients flow through the decoder") {
  RandomStream rng(16);
  const std::size_t dim = 4;
  const encoders::AudioPatchConfig patch{2, 2};
  SpectrogramInput spec = random_spec(4, 4, rng);
  Tensor tokens = Tensor::zeros({5, dim}, true);
  for (double& v : tokens.data()) v = rng.uniform(-1.0, 1.0);
  numerics::LinearWeights dec = numerics::LinearWeights::create(dim, 4, rng);
  const Tensor orig = Tensor::from_data({4, 4}, spec.values);
  Tensor mask = Tensor::zeros({4, 4});
  for (std::size_t i = 0; i < 8; ++i) mask[i] = 1.0;

  const auto f = [&]() {
    const Tensor rec = reconstruct_audio(TokenSequence{tokens}, dec, 4, 4, patch);
    return losses::masked_reconstruction_loss({{{orig, rec, mask}, {orig, rec, mask}}});
  };
  const auto report = numerics::grad_check(f, {tokens, dec.weight, dec.bias}, 1e-5, 1e-4);
  INFO("max rel err " << report.max_rel_error);
  CHECK(report.pass);
}
