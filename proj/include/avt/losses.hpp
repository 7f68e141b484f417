// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <iostream>
#include <vector>

#include "avt/ops.hpp"

namespace avt::losses {

using numerics::LinearWeights;
using numerics::Tensor;

/// Loss-term weights and the contrastive temperature.
struct LossWeights {
  double lambda1 = 0.5;
  double lambda2 = 0.1;
  double lambda3 = 0.01;
  double tau = 0.07;

  void validate() const {
    if (tau <= 0.0) throw ConfigError("LossWeights: tau must be positive");
    if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0) {
      throw ConfigError("LossWeights: lambdas must be nonnegative");
    }
  }
};

/// In-batch pairing of CLS embeddings; pair (i, j) is a positive iff i == j.
struct BatchPairing {
  Tensor audio_cls;  // (n x dim)
  Tensor video_cls;  // (n x dim)

  std::size_t batch_size() const { return audio_cls.rows(); }
  double y_av(std::size_t i, std::size_t j) const { return i == j ? 1.0 : 0.0; }
};

inline void require_one_hot(const Tensor& labels) {
  const std::size_t n = labels.rows(), c = labels.cols();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const double v = labels[i * c + j];
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        throw ContractError("labels row " + std::to_string(i) + " is not one-hot");
      }
    }
    if (ones != 1) throw ContractError("labels row " + std::to_string(i) + " is not one-hot");
  }
}

/// Mean over the batch of -log softmax probability of the true class.
inline Tensor cross_entropy_cls(const Tensor& logits, const Tensor& labels) {
  if (logits.shape() != labels.shape() || logits.shape().size() != 2) {
    throw ShapeError("cross_entropy_cls: logits " + shape_str(logits.shape()) + " vs labels " +
                     shape_str(labels.shape()));
  }
  if (logits.cols() < 2) throw ContractError("cross_entropy_cls: need at least 2 classes");
  require_one_hot(labels);
  using namespace numerics;
  const double n = static_cast<double>(logits.rows());
  return scale(sum(mul(log_softmax(logits, 1), labels)), -1.0 / n);
}

namespace detail {

inline std::vector<std::size_t> diag_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i * n + i;
  return idx;
}

}  // namespace detail

/// Per-row L2 normalization with a zero-safe floor: x_i / max(||x_i||, eps).
inline Tensor normalize_rows(const Tensor& x, double eps = 1e-12) {
  using namespace numerics;
  const std::size_t r = x.rows(), c = x.cols();
  const bool ng = grad_needed(x);
  Tensor out = make_output(x.shape(), ng);
  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < c; ++j) sq += x[i * c + j] * x[i * c + j];
    norms[i] = std::max(std::sqrt(sq), eps);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] / norms[i];
  }
  if (ng) {
    GradTape::active().record([x, out, norms, r, c]() {
      for (std::size_t i = 0; i < r; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += out.grad()[i * c + j] * out[i * c + j];
        for (std::size_t j = 0; j < c; ++j) {
          x.grad()[i * c + j] += (out.grad()[i * c + j] - out[i * c + j] * dot) / norms[i];
        }
      }
    });
  }
  return out;
}

/// Symmetric InfoNCE over a precomputed similarity matrix: cross-entropy with
/// diagonal targets of S/tau over rows, averaged with the column direction
/// when `symmetric`.
inline Tensor avc_loss_from_similarities(const Tensor& sims, double tau, bool symmetric = true) {
  if (tau <= 0.0) throw ConfigError("avc_loss: tau must be positive");
  if (sims.shape().size() != 2 || sims.rows() != sims.cols() || sims.rows() < 1) {
    throw ShapeError("avc_loss: similarity matrix must be square, got " + shape_str(sims.shape()));
  }
  using namespace numerics;
  const std::size_t n = sims.rows();
  const Tensor logits = scale(sims, 1.0 / tau);
  const auto diag = detail::diag_indices(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  const Tensor row_ce = scale(sum(gather_flat(log_softmax(logits, 1), diag, {n})), -inv_n);
  if (!symmetric) return row_ce;
  const Tensor col_ce = scale(sum(gather_flat(log_softmax(logits, 0), diag, {n})), -inv_n);
  return scale(add(row_ce, col_ce), 0.5);
}

/// Audio-video contrastive loss. Similarities are cosine form:
/// s_ij = <g_A(a_i), g_V(v_j)> after per-row L2 normalization of the
/// projections, scaled by 1/tau; the symmetric variant averages the
/// audio->video and video->audio directions.
inline Tensor avc_loss(const BatchPairing& pairing, const LinearWeights& g_audio,
                       const LinearWeights& g_video, double tau, bool symmetric = true) {
  const std::size_t n = pairing.batch_size();
  if (n < 1 || pairing.video_cls.rows() != n) {
    throw ShapeError("avc_loss: batch mismatch, audio " + shape_str(pairing.audio_cls.shape()) +
                     " vs video " + shape_str(pairing.video_cls.shape()));
  }
  using namespace numerics;
  const Tensor pa = normalize_rows(linear(pairing.audio_cls, g_audio));
  const Tensor pv = normalize_rows(linear(pairing.video_cls, g_video));
  return avc_loss_from_similarities(matmul(pa, transpose(pv)), tau, symmetric);
}

/// Stable binary cross-entropy on logits: mean_i [softplus(z_i) - y_i z_i].
/// Backward: d/dz_i = (sigmoid(z_i) - y_i) / count.
inline Tensor bce_with_logits_mean(const Tensor& logits, const std::vector<double>& targets) {
  if (logits.size() != targets.size() || logits.size() == 0) {
    throw ShapeError("bce_with_logits_mean: logits " + shape_str(logits.shape()) + " vs " +
                     std::to_string(targets.size()) + " targets");
  }
  using namespace numerics;
  const std::size_t p = logits.size();
  const bool ng = grad_needed(logits);
  Tensor out = make_output({1}, ng);
  double acc = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const double z = logits[i];
    acc += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - targets[i] * z;
  }
  out[0] = acc / static_cast<double>(p);
  if (ng) {
    GradTape::active().record([logits, out, targets, p]() mutable {
      const double g = out.grad()[0] / static_cast<double>(p);
      for (std::size_t i = 0; i < p; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-logits[i]));
        logits.grad()[i] += g * (s - targets[i]);
      }
    });
  }
  return out;
}

/// One fused audio-video pair and whether both halves came from the same sample.
struct FusedPair {
  Tensor video_cls;  // (1 x dim), post-fusion
  Tensor audio_cls;  // (1 x dim), post-fusion
  bool same = false;
};

/// Audio-video matching loss: binary classification of [E_CLS^V, E_CLS^A]
/// pairs (post-fusion) as matched or mismatched.
inline Tensor avm_loss(const std::vector<FusedPair>& pairs, const LinearWeights& head) {
  std::size_t positives = 0, negatives = 0;
  for (const FusedPair& p : pairs) (p.same ? positives : negatives)++;
  if (positives == 0 || negatives == 0) {
    throw ConfigError("avm_loss: need at least one matched and one mismatched pair, got " +
                      std::to_string(positives) + " / " + std::to_string(negatives));
  }
  using namespace numerics;
  std::vector<Tensor> logit_rows;
  std::vector<double> targets;
  logit_rows.reserve(pairs.size());
  targets.reserve(pairs.size());
  for (const FusedPair& p : pairs) {
    logit_rows.push_back(linear(concat_cols({p.video_cls, p.audio_cls}), head));
    targets.push_back(p.same ? 1.0 : 0.0);
  }
  return bce_with_logits_mean(concat_rows(logit_rows), targets);
}

/// One sample's reconstruction triple for one modality. `mask` marks with 1.0
/// the input elements that were hidden; original and mask are constants.
struct ReconstructionTerm {
  Tensor original;
  Tensor reconstruction;
  Tensor mask;
};

struct ReconstructionSample {
  ReconstructionTerm video;
  ReconstructionTerm audio;
};

namespace detail {

inline double mask_count(const Tensor& mask) {
  double c = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) c += mask[i];
  return c;
}

inline Tensor masked_mse(const ReconstructionTerm& t, double count) {
  using namespace numerics;
  require_same_shape(t.original, t.reconstruction, "masked_mse");
  require_same_shape(t.original, t.mask, "masked_mse");
  const Tensor diff = sub(t.reconstruction, t.original);
  return scale(sum(mul(mul(diff, diff), t.mask)), 1.0 / count);
}

}  // namespace detail

/// Mean over the batch of the video and audio masked-reconstruction errors.
/// Each term is mean squared error over MASKED positions only; values at
/// unmasked positions of the reconstruction never contribute. A batch with no
/// masked positions at all returns 0 (with a warning on stderr).
inline Tensor masked_reconstruction_loss(const std::vector<ReconstructionSample>& batch) {
  if (batch.empty()) throw ContractError("masked_reconstruction_loss: empty batch");
  using namespace numerics;
  Tensor total = Tensor::scalar(0.0);
  double any_masked = 0.0;
  for (const ReconstructionSample& s : batch) {
    const double cv = detail::mask_count(s.video.mask);
    const double ca = detail::mask_count(s.audio.mask);
    any_masked += cv + ca;
    if (cv > 0.0) total = add(total, detail::masked_mse(s.video, cv));
    if (ca > 0.0) total = add(total, detail::masked_mse(s.audio, ca));
  }
  if (any_masked == 0.0) {
    std::cerr << "[avt] warning: masked_reconstruction_loss called with empty masks; "
                 "returning 0\n";
  }
  return scale(total, 1.0 / static_cast<double>(batch.size()));
}

struct ClassificationOutput {
  Tensor loss;
  Tensor probs;  // (n x C), rows sum to 1
};

/// Multimodal classification: concatenate post-fusion CLS embeddings, apply a
/// linear head, cross-entropy against one-hot labels. Returns loss and p^AV.
inline ClassificationOutput cls_av_loss(const Tensor& video_cls, const Tensor& audio_cls,
                                        const Tensor& labels, const LinearWeights& head) {
  using namespace numerics;
  if (video_cls.rows() != audio_cls.rows()) {
    throw ShapeError("cls_av_loss: batch mismatch " + shape_str(video_cls.shape()) + " vs " +
                     shape_str(audio_cls.shape()));
  }
  const Tensor logits = linear(concat_cols({video_cls, audio_cls}), head);
  return ClassificationOutput{cross_entropy_cls(logits, labels), softmax(logits, 1)};
}

struct LossParts {
  Tensor cls_av;
  Tensor avc;
  Tensor avm;
  Tensor masegmv;
};

/// L = L_CLS^AV + lambda1 * L_AVC + lambda2 * L_AVM + lambda3 * L_MASegmV.
inline Tensor hybrid_loss(const LossParts& parts, const LossWeights& w) {
  using namespace numerics;
  w.validate();
  Tensor total = parts.cls_av;
  if (w.lambda1 != 0.0) total = add(total, scale(parts.avc, w.lambda1));
  if (w.lambda2 != 0.0) total = add(total, scale(parts.avm, w.lambda2));
  if (w.lambda3 != 0.0) total = add(total, scale(parts.masegmv, w.lambda3));
  return total;
}

}  // namespace avt::losses
