// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "avt/common.hpp"
#include "avt/tensor.hpp"

namespace avt::numerics {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

inline Tensor make_output(std::vector<std::size_t> shape, bool needs_grad) {
  Tensor out = Tensor::zeros(std::move(shape));
  if (needs_grad) out.set_requires_grad(true);
  return out;
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const bool ng = grad_needed(a) || grad_needed(b);
  Tensor out = make_output(a.shape(), ng);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
  if (ng) {
    GradTape::active().record([a, b, out]() mutable {
      const std::size_t m = out.size();
      if (a.requires_grad())
        for (std::size_t i = 0; i < m; ++i) a.grad()[i] += out.grad()[i];
      if (b.requires_grad())
        for (std::size_t i = 0; i < m; ++i) b.grad()[i] += out.grad()[i];
    });
  }
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const bool ng = grad_needed(a) || grad_needed(b);
  Tensor out = make_output(a.shape(), ng);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
  if (ng) {
    GradTape::active().record([a, b, out]() mutable {
      const std::size_t m = out.size();
      if (a.requires_grad())
        for (std::size_t i = 0; i < m; ++i) a.grad()[i] += out.grad()[i];
      if (b.requires_grad())
        for (std::size_t i = 0; i < m; ++i) b.grad()[i] -= out.grad()[i];
    });
  }
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const bool ng = grad_needed(a) || grad_needed(b);
  Tensor out = make_output(a.shape(), ng);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
  if (ng) {
    GradTape::active().record([a, b, out]() mutable {
      const std::size_t m = out.size();
      if (a.requires_grad())
        for (std::size_t i = 0; i < m; ++i) a.grad()[i] += out.grad()[i] * b[i];
      if (b.requires_grad())
        for (std::size_t i = 0; i < m; ++i) b.grad()[i] += out.grad()[i] * a[i];
    });
  }
  return out;
}

inline Tensor scale(const Tensor& a, double c) {
  const bool ng = grad_needed(a);
  Tensor out = make_output(a.shape(), ng);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * c;
  if (ng) {
    GradTape::active().record([a, out, c]() mutable {
      const std::size_t m = out.size();
      for (std::size_t i = 0; i < m; ++i) a.grad()[i] += out.grad()[i] * c;
    });
  }
  return out;
}

inline Tensor add_scalar(const Tensor& a, double c) {
  const bool ng = grad_needed(a);
  Tensor out = make_output(a.shape(), ng);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + c;
  if (ng) {
    GradTape::active().record([a, out]() mutable {
      const std::size_t m = out.size();
      for (std::size_t i = 0; i < m; ++i) a.grad()[i] += out.grad()[i];
    });
  }
  return out;
}

inline Tensor gelu(const Tensor& a) {
  const bool ng = grad_needed(a);
  Tensor out = make_output(a.shape(), ng);
  const std::size_t n = out.size();
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt2pi = 0.39894228040143267794;
  for (std::size_t i = 0; i < n; ++i) out[i] = 0.5 * a[i] * (1.0 + std::erf(a[i] * inv_sqrt2));
  if (ng) {
    GradTape::active().record([a, out]() mutable {
      const std::size_t m = out.size();
      for (std::size_t i = 0; i < m; ++i) {
        const double x = a[i];
        const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
        const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
        a.grad()[i] += out.grad()[i] * (cdf + x * pdf);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& a) {
  const bool ng = grad_needed(a);
  Tensor out = make_output({1}, ng);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
  out[0] = s;
  if (ng) {
    GradTape::active().record([a, out]() mutable {
      const double g = out.grad()[0];
      for (std::size_t i = 0; i < a.size(); ++i) a.grad()[i] += g;
    });
  }
  return out;
}

inline Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

// ---------------------------------------------------------------------------
// matrix ops
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
  const bool ng = grad_needed(a) || grad_needed(b);
  Tensor out = make_output({r, c}, ng);
  {
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* od = out.data().data();
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = ad[i * k + p];
        if (aip == 0.0) continue;
        const double* brow = bd + p * c;
        double* orow = od + i * c;
        for (std::size_t j = 0; j < c; ++j) orow[j] += aip * brow[j];
      }
    }
  }
  if (ng) {
    GradTape::active().record([a, b, out, r, k, c]() mutable {
      const double* og = out.grad().data();
      if (a.requires_grad()) {
        // dA[i,p] += sum_j dOut[i,j] * B[p,j]
        const double* bd = b.data().data();
        double* ag = a.grad().data();
        for (std::size_t i = 0; i < r; ++i) {
          const double* orow = og + i * c;
          for (std::size_t p = 0; p < k; ++p) {
            const double* brow = bd + p * c;
            double acc = 0.0;
            for (std::size_t j = 0; j < c; ++j) acc += orow[j] * brow[j];
            ag[i * k + p] += acc;
          }
        }
      }
      if (b.requires_grad()) {
        // dB[p,j] += sum_i A[i,p] * dOut[i,j]
        const double* ad = a.data().data();
        double* bg = b.grad().data();
        for (std::size_t i = 0; i < r; ++i) {
          const double* orow = og + i * c;
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = ad[i * k + p];
            if (aip == 0.0) continue;
            double* bgrow = bg + p * c;
            for (std::size_t j = 0; j < c; ++j) bgrow[j] += aip * orow[j];
          }
        }
      }
    });
  }
  return out;
}

inline Tensor transpose(const Tensor& a) {
  if (a.shape().size() != 2) throw ShapeError("transpose: need rank-2, got " + shape_str(a.shape()));
  const std::size_t r = a.rows(), c = a.cols();
  const bool ng = grad_needed(a);
  Tensor out = make_output({c, r}, ng);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  if (ng) {
    GradTape::active().record([a, out, r, c]() mutable {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) a.grad()[i * c + j] += out.grad()[j * r + i];
    });
  }
  return out;
}

/// Broadcast-add a length-c bias vector to every row of an (r x c) matrix.
inline Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (x.shape().size() != 2 || bias.size() != x.cols()) {
    throw ShapeError("add_bias: " + shape_str(x.shape()) + " with bias " + shape_str(bias.shape()));
  }
  const std::size_t r = x.rows(), c = x.cols();
  const bool ng = grad_needed(x) || grad_needed(bias);
  Tensor out = make_output(x.shape(), ng);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] + bias[j];
  if (ng) {
    GradTape::active().record([x, bias, out, r, c]() mutable {
      if (x.requires_grad())
        for (std::size_t i = 0; i < r * c; ++i) x.grad()[i] += out.grad()[i];
      if (bias.requires_grad())
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) bias.grad()[j] += out.grad()[i * c + j];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// slicing / concatenation
// ---------------------------------------------------------------------------

inline Tensor slice_rows(const Tensor& x, std::size_t r0, std::size_t r1) {
  if (x.shape().size() != 2 || r0 > r1 || r1 > x.rows()) {
    throw ShapeError("slice_rows: rows [" + std::to_string(r0) + ", " + std::to_string(r1) +
                     ") of " + shape_str(x.shape()));
  }
  const std::size_t c = x.cols(), nr = r1 - r0;
  const bool ng = grad_needed(x);
  Tensor out = make_output({nr, c}, ng);
  for (std::size_t i = 0; i < nr * c; ++i) out[i] = x[r0 * c + i];
  if (ng) {
    GradTape::active().record([x, out, r0, c, nr]() mutable {
      for (std::size_t i = 0; i < nr * c; ++i) x.grad()[r0 * c + i] += out.grad()[i];
    });
  }
  return out;
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t rtot = 0;
  bool ng = false;
  for (const Tensor& p : parts) {
    if (p.shape().size() != 2 || p.cols() != c) {
      throw ShapeError("concat_rows: column mismatch " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    }
    rtot += p.rows();
    ng = ng || grad_needed(p);
  }
  Tensor out = make_output({rtot, c}, ng);
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    for (std::size_t i = 0; i < p.size(); ++i) out[off + i] = p[i];
    off += p.size();
  }
  if (ng) {
    GradTape::active().record([parts, out]() mutable {
      std::size_t o = 0;
      for (const Tensor& p : parts) {
        if (p.requires_grad())
          for (std::size_t i = 0; i < p.size(); ++i) p.grad()[i] += out.grad()[o + i];
        o += p.size();
      }
    });
  }
  return out;
}

inline Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t c1) {
  if (x.shape().size() != 2 || c0 > c1 || c1 > x.cols()) {
    throw ShapeError("slice_cols: cols [" + std::to_string(c0) + ", " + std::to_string(c1) +
                     ") of " + shape_str(x.shape()));
  }
  const std::size_t r = x.rows(), c = x.cols(), nc = c1 - c0;
  const bool ng = grad_needed(x);
  Tensor out = make_output({r, nc}, ng);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < nc; ++j) out[i * nc + j] = x[i * c + c0 + j];
  if (ng) {
    GradTape::active().record([x, out, r, c, c0, nc]() mutable {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < nc; ++j) x.grad()[i * c + c0 + j] += out.grad()[i * nc + j];
    });
  }
  return out;
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::size_t ctot = 0;
  bool ng = false;
  for (const Tensor& p : parts) {
    if (p.shape().size() != 2 || p.rows() != r) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    }
    ctot += p.cols();
    ng = ng || grad_needed(p);
  }
  Tensor out = make_output({r, ctot}, ng);
  std::size_t coff = 0;
  for (const Tensor& p : parts) {
    const std::size_t pc = p.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < pc; ++j) out[i * ctot + coff + j] = p[i * pc + j];
    coff += pc;
  }
  if (ng) {
    GradTape::active().record([parts, out, r, ctot]() mutable {
      std::size_t co = 0;
      for (const Tensor& p : parts) {
        const std::size_t pc = p.cols();
        if (p.requires_grad())
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < pc; ++j) p.grad()[i * pc + j] += out.grad()[i * ctot + co + j];
        co += pc;
      }
    });
  }
  return out;
}

/// out[i] = x[index[i]]. Every source index must be valid; indices may repeat.
inline Tensor gather_flat(const Tensor& x, const std::vector<std::size_t>& index,
                          std::vector<std::size_t> out_shape) {
  if (Tensor::numel(out_shape) != index.size()) {
    throw ShapeError("gather_flat: index length " + std::to_string(index.size()) +
                     " vs out shape " + shape_str(out_shape));
  }
  for (std::size_t i : index) {
    if (i >= x.size()) throw ShapeError("gather_flat: index " + std::to_string(i) + " out of range");
  }
  const bool ng = grad_needed(x);
  Tensor out = make_output(std::move(out_shape), ng);
  for (std::size_t i = 0; i < index.size(); ++i) out[i] = x[index[i]];
  if (ng) {
    GradTape::active().record([x, out, index]() mutable {
      for (std::size_t i = 0; i < index.size(); ++i) x.grad()[index[i]] += out.grad()[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// normalization / softmax
// ---------------------------------------------------------------------------

namespace detail {

// Iterates the 1-D "lines" of a rank-1/rank-2 tensor along `axis`.
struct LineIter {
  std::size_t count, len, stride, base_step;
};

inline LineIter lines_along(const Tensor& x, int axis) {
  const auto& sh = x.shape();
  if (sh.size() == 1) {
    if (axis != 0 && axis != -1) throw ShapeError("axis " + std::to_string(axis) + " invalid for rank-1");
    return {1, sh[0], 1, 0};
  }
  if (sh.size() != 2) throw ShapeError("softmax/log_softmax: need rank 1 or 2, got " + shape_str(sh));
  if (axis == -1) axis = 1;
  if (axis == 1) return {sh[0], sh[1], 1, sh[1]};   // along each row
  if (axis == 0) return {sh[1], sh[0], sh[1], 1};   // along each column
  throw ShapeError("axis " + std::to_string(axis) + " invalid for rank-2");
}

}  // namespace detail

/// Numerically stabilized softmax along `axis` (max subtraction).
inline Tensor softmax(const Tensor& x, int axis = -1) {
  const auto it = detail::lines_along(x, axis);
  const bool ng = grad_needed(x);
  Tensor out = make_output(x.shape(), ng);
  for (std::size_t l = 0; l < it.count; ++l) {
    const std::size_t base = l * it.base_step;
    double mx = x[base];
    for (std::size_t i = 1; i < it.len; ++i) mx = std::max(mx, x[base + i * it.stride]);
    double denom = 0.0;
    for (std::size_t i = 0; i < it.len; ++i) {
      const double e = std::exp(x[base + i * it.stride] - mx);
      out[base + i * it.stride] = e;
      denom += e;
    }
    for (std::size_t i = 0; i < it.len; ++i) out[base + i * it.stride] /= denom;
  }
  if (ng) {
    GradTape::active().record([x, out, it]() mutable {
      for (std::size_t l = 0; l < it.count; ++l) {
        const std::size_t base = l * it.base_step;
        double dot = 0.0;
        for (std::size_t i = 0; i < it.len; ++i) {
          const std::size_t k = base + i * it.stride;
          dot += out.grad()[k] * out[k];
        }
        for (std::size_t i = 0; i < it.len; ++i) {
          const std::size_t k = base + i * it.stride;
          x.grad()[k] += out[k] * (out.grad()[k] - dot);
        }
      }
    });
  }
  return out;
}

inline Tensor log_softmax(const Tensor& x, int axis = -1) {
  const auto it = detail::lines_along(x, axis);
  const bool ng = grad_needed(x);
  Tensor out = make_output(x.shape(), ng);
  for (std::size_t l = 0; l < it.count; ++l) {
    const std::size_t base = l * it.base_step;
    double mx = x[base];
    for (std::size_t i = 1; i < it.len; ++i) mx = std::max(mx, x[base + i * it.stride]);
    double denom = 0.0;
    for (std::size_t i = 0; i < it.len; ++i) denom += std::exp(x[base + i * it.stride] - mx);
    const double lse = mx + std::log(denom);
    for (std::size_t i = 0; i < it.len; ++i) {
      const std::size_t k = base + i * it.stride;
      out[k] = x[k] - lse;
    }
  }
  if (ng) {
    GradTape::active().record([x, out, it]() mutable {
      for (std::size_t l = 0; l < it.count; ++l) {
        const std::size_t base = l * it.base_step;
        double gsum = 0.0;
        for (std::size_t i = 0; i < it.len; ++i) gsum += out.grad()[base + i * it.stride];
        for (std::size_t i = 0; i < it.len; ++i) {
          const std::size_t k = base + i * it.stride;
          x.grad()[k] += out.grad()[k] - std::exp(out[k]) * gsum;
        }
      }
    });
  }
  return out;
}

/// Layer normalization over the last axis with learned gain/bias.
/// Per vector: zero mean, unit variance (biased estimate, + eps), then affine.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                         double eps = 1e-5) {
  if (eps <= 0.0) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t c = x.shape().size() == 1 ? x.shape()[0] : x.cols();
  const std::size_t r = x.shape().size() == 1 ? 1 : x.rows();
  if (gain.size() != c || bias.size() != c) {
    throw ShapeError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                     shape_str(bias.shape()) + " vs feature dim " + std::to_string(c));
  }
  const bool ng = grad_needed(x) || grad_needed(gain) || grad_needed(bias);
  Tensor out = make_output(x.shape(), ng);
  Tensor xhat = Tensor::zeros({r, c});
  std::vector<double> inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += x[i * c + j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = x[i * c + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (x[i * c + j] - mu) * is;
      xhat[i * c + j] = h;
      out[i * c + j] = gain[j] * h + bias[j];
    }
  }
  if (ng) {
    GradTape::active().record([x, gain, bias, out, xhat, inv_std, r, c]() mutable {
      for (std::size_t i = 0; i < r; ++i) {
        double sum_dh = 0.0, sum_dh_h = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const double dh = out.grad()[i * c + j] * gain[j];
          sum_dh += dh;
          sum_dh_h += dh * xhat[i * c + j];
        }
        if (x.requires_grad()) {
          const double invc = 1.0 / static_cast<double>(c);
          for (std::size_t j = 0; j < c; ++j) {
            const double dh = out.grad()[i * c + j] * gain[j];
            x.grad()[i * c + j] +=
                inv_std[i] * (dh - invc * sum_dh - invc * xhat[i * c + j] * sum_dh_h);
          }
        }
        if (gain.requires_grad())
          for (std::size_t j = 0; j < c; ++j)
            gain.grad()[j] += out.grad()[i * c + j] * xhat[i * c + j];
        if (bias.requires_grad())
          for (std::size_t j = 0; j < c; ++j) bias.grad()[j] += out.grad()[i * c + j];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// linear layers and attention
// ---------------------------------------------------------------------------

struct LinearWeights {
  Tensor weight;  // (in x out)
  Tensor bias;    // (out)

  static LinearWeights create(std::size_t in, std::size_t out, RandomStream& rng,
                              double init_std = 0.02) {
    LinearWeights w;
    w.weight = Tensor::zeros({in, out}, true);
    for (double& v : w.weight.data()) v = rng.trunc_normal(init_std);
    w.bias = Tensor::zeros({out}, true);
    return w;
  }

  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }
};

inline Tensor linear(const Tensor& x, const LinearWeights& w) {
  return add_bias(matmul(x, w.weight), w.bias);
}

struct AttentionWeights {
  LinearWeights query, key, value, out;

  static AttentionWeights create(std::size_t dim, RandomStream& rng, double init_std = 0.02) {
    return {LinearWeights::create(dim, dim, rng, init_std),
            LinearWeights::create(dim, dim, rng, init_std),
            LinearWeights::create(dim, dim, rng, init_std),
            LinearWeights::create(dim, dim, rng, init_std)};
  }
};

/// Running count of attention score-matrix entries: each attention call over t
/// tokens contributes t^2 pairs (heads share the pair count). Thread-local so
/// parallel runs do not interfere.
inline std::uint64_t& attention_pair_counter() {
  thread_local std::uint64_t count = 0;
  return count;
}

inline void reset_attention_pair_counter() { attention_pair_counter() = 0; }

/// Multi-head self-attention: per-head scaled dot-product (scale
/// 1/sqrt(head_dim)), heads concatenated, output-projected. Token count and
/// embedding dim are preserved.
inline Tensor multi_head_self_attention(const Tensor& tokens, const AttentionWeights& w,
                                        std::size_t num_heads) {
  if (tokens.shape().size() != 2) {
    throw ShapeError("attention: tokens must be rank-2, got " + shape_str(tokens.shape()));
  }
  const std::size_t dim = tokens.cols();
  if (num_heads == 0 || dim % num_heads != 0) {
    throw ConfigError("attention: embedding dim " + std::to_string(dim) +
                      " not divisible by head count " + std::to_string(num_heads));
  }
  const std::size_t t = tokens.rows();
  const std::size_t head_dim = dim / num_heads;
  attention_pair_counter() += static_cast<std::uint64_t>(t) * static_cast<std::uint64_t>(t);

  const Tensor q = linear(tokens, w.query);
  const Tensor k = linear(tokens, w.key);
  const Tensor v = linear(tokens, w.value);
  const double sc = 1.0 / std::sqrt(static_cast<double>(head_dim));

  std::vector<Tensor> heads;
  heads.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    const std::size_t c0 = h * head_dim, c1 = (h + 1) * head_dim;
    const Tensor qh = slice_cols(q, c0, c1);
    const Tensor kh = slice_cols(k, c0, c1);
    const Tensor vh = slice_cols(v, c0, c1);
    const Tensor scores = scale(matmul(qh, transpose(kh)), sc);
    const Tensor probs = softmax(scores, 1);
    heads.push_back(matmul(probs, vh));
  }
  return linear(num_heads == 1 ? heads[0] : concat_cols(heads), w.out);
}

}  // namespace avt::numerics
