// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "avt/config.hpp"
#include "avt/encoders.hpp"

namespace avt::harness {

using encoders::SpectrogramInput;
using encoders::VideoClipInput;

struct SyntheticSample {
  VideoClipInput video;
  SpectrogramInput audio;
  std::size_t label = 0;
  int audio_cue = 0;  // latent bit rendered into the audio
  int video_cue = 0;  // latent bit rendered into the video
};

/// XOR dataset: the audio cue selects a tone band in the lower or upper half
/// of the frequency axis, the video cue selects a bright quadrant, and the
/// label is the XOR of the two cues. Either modality alone carries no label
/// information; both together determine it exactly (before noise).
///
/// Instances also carry label-irrelevant variation: the band slot within its
/// half and the cue amplitudes differ per sample, and a shared per-sample
/// style latent is rendered into BOTH modalities (an alternating pattern over
/// frequency bins and a checkerboard over pixels). The style is what a
/// matched audio-video pair has in common, so the contrastive and matching
/// objectives have a real cross-modal signal to align without leaking the
/// label.
inline std::vector<SyntheticSample> gen_xor_dataset(const DatasetSpec& spec) {
  if (spec.noise < 0.0) throw ConfigError("gen_xor_dataset: noise must be >= 0");
  if (spec.kind != "xor") throw ConfigError("gen_xor_dataset: dataset kind is " + spec.kind);
  constexpr double kStyleStrength = 0.1;
  std::vector<SyntheticSample> out;
  out.reserve(spec.size);
  for (std::size_t i = 0; i < spec.size; ++i) {
    RandomStream rng(mix_seed(spec.seed, 0x786f72ULL, i));
    SyntheticSample s;
    s.audio_cue = rng.next_u64() & 1 ? 1 : 0;
    s.video_cue = rng.next_u64() & 1 ? 1 : 0;
    s.label = static_cast<std::size_t>(s.audio_cue ^ s.video_cue);
    const double audio_amp = 1.5 + rng.uniform01();
    const double video_amp = 1.5 + rng.uniform01();
    const double style = rng.uniform(-1.0, 1.0);

    s.audio.time_frames = spec.audio_frames;
    s.audio.freq_bins = spec.audio_bins;
    s.audio.values.resize(s.audio.size());
    for (double& v : s.audio.values) v = spec.noise * rng.normal();
    const std::size_t half = spec.audio_bins / 2;
    const std::size_t band_width = std::max<std::size_t>(1, half / 2);
    const std::size_t slack = half - band_width;
    const std::size_t slot = slack > 0 ? rng.index(slack + 1) : 0;
    const std::size_t band_lo = (s.audio_cue == 0 ? 0 : half) + slot;
    for (std::size_t t = 0; t < spec.audio_frames; ++t) {
      for (std::size_t f = 0; f < spec.audio_bins; ++f) {
        s.audio.at(t, f) += style * kStyleStrength * (f % 2 == 0 ? 1.0 : -1.0);
      }
      for (std::size_t f = band_lo; f < band_lo + band_width && f < spec.audio_bins; ++f) {
        s.audio.at(t, f) += audio_amp;
      }
    }

    s.video.frames = spec.video_frames;
    s.video.height = spec.video_height;
    s.video.width = spec.video_width;
    s.video.channels = spec.video_channels;
    s.video.values.resize(s.video.size());
    for (double& v : s.video.values) v = spec.noise * rng.normal();
    for (std::size_t t = 0; t < spec.video_frames; ++t)
      for (std::size_t y = 0; y < spec.video_height; ++y)
        for (std::size_t x = 0; x < spec.video_width; ++x)
          for (std::size_t c = 0; c < spec.video_channels; ++c)
            s.video.values[s.video.offset(t, y, x, c)] +=
                style * kStyleStrength * ((x + y) % 2 == 0 ? 1.0 : -1.0);
    const std::size_t y0 = s.video_cue == 0 ? 0 : spec.video_height / 2;
    const std::size_t x0 = s.video_cue == 0 ? 0 : spec.video_width / 2;
    for (std::size_t t = 0; t < spec.video_frames; ++t)
      for (std::size_t y = y0; y < y0 + spec.video_height / 2; ++y)
        for (std::size_t x = x0; x < x0 + spec.video_width / 2; ++x)
          for (std::size_t c = 0; c < spec.video_channels; ++c)
            s.video.values[s.video.offset(t, y, x, c)] += video_amp;

    out.push_back(std::move(s));
  }
  return out;
}

struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Fixed-seed shuffle, then the trailing `eval_fraction` goes to validation.
inline DataSplit train_val_split(std::size_t n, double eval_fraction, std::uint64_t seed) {
  if (eval_fraction <= 0.0 || eval_fraction >= 1.0) {
    throw ConfigError("train_val_split: eval_fraction must be in (0, 1)");
  }
  RandomStream rng(mix_seed(seed, 0x73706c69ULL));
  std::vector<std::size_t> order = rng.sample_without_replacement(n, n);
  const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                  std::llround(eval_fraction * static_cast<double>(n))));
  if (n_val >= n) throw ConfigError("train_val_split: validation split leaves no training data");
  DataSplit split;
  split.train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  split.val.assign(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  return split;
}

}  // namespace avt::harness
