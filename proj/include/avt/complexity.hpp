// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "avt/common.hpp"

namespace avt::complexity {

/// Attention cost at a given geometry. `token_pair_count` is the number of
/// entries in the attention score matrices ((sequence length)^2 per attention
/// call, shared across heads); `mac_count` = pairs * dim * 2, counting the
/// QK^T and PV multiply-accumulates at full embedding width.
struct AttentionCost {
  std::uint64_t token_pair_count = 0;
  std::uint64_t mac_count = 0;
};

inline AttentionCost cost_from_pairs(std::uint64_t pairs, std::size_t dim) {
  return AttentionCost{pairs, pairs * static_cast<std::uint64_t>(dim) * 2};
}

/// Merged-concatenation baseline: one attention call over all modality tokens
/// (plus the two CLS tokens when `include_cls`). The baseline carries no
/// bottleneck tokens; `l` is accepted for signature symmetry and ignored.
inline AttentionCost cost_merged(std::size_t m_audio, std::size_t n_video, std::size_t l,
                                 std::size_t dim, bool include_cls = true) {
  (void)l;
  if (m_audio < 1 || n_video < 1) throw ConfigError("cost_merged: token counts must be >= 1");
  const std::uint64_t len = m_audio + n_video + (include_cls ? 2 : 0);
  return cost_from_pairs(len * len, dim);
}

/// Bottleneck fusion: per block, one attention over the video tokens plus L
/// bottleneck tokens and one over the audio tokens plus L, times K blocks.
inline AttentionCost cost_bottleneck(std::size_t m_audio, std::size_t n_video, std::size_t l,
                                     std::size_t dim, std::size_t k_blocks,
                                     bool include_cls = true) {
  if (m_audio < 1 || n_video < 1) throw ConfigError("cost_bottleneck: token counts must be >= 1");
  if (k_blocks < 1) throw ConfigError("cost_bottleneck: need at least 1 block");
  if (l > 0 && l >= std::min(m_audio, n_video)) {
    throw ConfigError("cost_bottleneck: bottleneck token count " + std::to_string(l) +
                      " must be smaller than min(M, N) = " +
                      std::to_string(std::min(m_audio, n_video)));
  }
  const std::uint64_t cls = include_cls ? 1 : 0;
  const std::uint64_t video_len = n_video + cls + l;
  const std::uint64_t audio_len = m_audio + cls + l;
  const std::uint64_t per_block = video_len * video_len + audio_len * audio_len;
  return cost_from_pairs(per_block * k_blocks, dim);
}

/// Largest L for which one bottleneck block costs strictly fewer pairs than
/// one merged attention call, found by direct scan over the valid domain.
/// Returns 0 if even L = 1 loses (L = 0 always wins).
inline std::size_t crossover_bound(std::size_t m_audio, std::size_t n_video,
                                   bool include_cls = true) {
  const std::uint64_t merged = cost_merged(m_audio, n_video, 0, 1, include_cls).token_pair_count;
  std::size_t best = 0;
  for (std::size_t l = 1; l < std::min(m_audio, n_video); ++l) {
    if (cost_bottleneck(m_audio, n_video, l, 1, 1, include_cls).token_pair_count < merged) {
      best = l;
    } else {
      break;  // per-block cost is monotone in L
    }
  }
  return best;
}

struct ComplexityConfig {
  std::size_t m_audio = 16;
  std::size_t n_video = 8;
  std::size_t l = 4;
  std::size_t k = 4;
  std::size_t dim = 32;
  bool include_cls = true;
};

/// Per-config pair counts, MAC counts and merged/bottleneck ratios as CSV.
/// The ratio compares K merged attention calls against the K-block bottleneck
/// stack, so it is independent of K. Counts cover the fusion stage only;
/// encoder backbone costs are out of scope and not modeled here.
inline std::string report(const std::vector<ComplexityConfig>& configs) {
  std::ostringstream out;
  out << "# attention cost accounting: fusion stage only, encoder backbones excluded\n";
  out << "# pairs = score-matrix entries per attention call; macs = pairs * dim * 2\n";
  out << "M,N,L,K,dim,include_cls,merged_pairs,bottleneck_pairs,merged_macs,bottleneck_macs,"
         "ratio\n";
  for (const ComplexityConfig& c : configs) {
    const AttentionCost merged = cost_merged(c.m_audio, c.n_video, c.l, c.dim, c.include_cls);
    const AttentionCost bn = cost_bottleneck(c.m_audio, c.n_video, c.l, c.dim, c.k, c.include_cls);
    const double ratio = static_cast<double>(merged.token_pair_count) *
                         static_cast<double>(c.k) / static_cast<double>(bn.token_pair_count);
    if (c.l < crossover_bound(c.m_audio, c.n_video, c.include_cls) + 1 && ratio <= 1.0) {
      throw ContractError("complexity report: ratio <= 1 below the crossover bound at M=" +
                          std::to_string(c.m_audio) + " N=" + std::to_string(c.n_video) +
                          " L=" + std::to_string(c.l));
    }
    std::ostringstream ratio_txt;
    ratio_txt.precision(6);
    ratio_txt << ratio;
    out << c.m_audio << ',' << c.n_video << ',' << c.l << ',' << c.k << ',' << c.dim << ','
        << (c.include_cls ? 1 : 0) << ',' << merged.token_pair_count << ','
        << bn.token_pair_count << ',' << merged.mac_count << ',' << bn.mac_count << ','
        << ratio_txt.str() << '\n';
  }
  return out.str();
}

/// Rows worth printing without any grid: the artifact's default fusion
/// geometry (K = L = 4) plus a no-CLS asymptotic illustration.
inline std::vector<ComplexityConfig> default_configs() {
  return {
      ComplexityConfig{16, 8, 4, 4, 32, true},
      ComplexityConfig{100, 100, 4, 1, 32, false},
      ComplexityConfig{100, 100, 4, 4, 32, true},
  };
}

}  // namespace avt::complexity
