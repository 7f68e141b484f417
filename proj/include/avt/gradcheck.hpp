// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "avt/ops.hpp"
#include "avt/tensor.hpp"

namespace avt::numerics {

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool pass = false;
  std::size_t checked_coords = 0;
  std::string worst_location;
};

/// Compares the tape gradient of a scalar function against central finite
/// differences, coordinate by coordinate. `inputs` are the leaves to audit;
/// their values are perturbed in place and restored. When
/// `max_coords_per_tensor` is nonzero, a deterministic subsample of that many
/// coordinates per tensor is checked instead of every coordinate.
///
/// The error metric is |analytic - numeric| / max(|analytic|, |numeric|, 1e-3):
/// relative for gradients of ordinary size, absolute (scaled by 1e3) for
/// near-zero gradients, where central differences bottom out at truncation
/// noise around 1e-9 and a plain relative error would measure only that noise.
inline GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                                  double h = 1e-5, double tol = 1e-5,
                                  std::size_t max_coords_per_tensor = 0,
                                  std::uint64_t sample_seed = 0) {
  if (h <= 0.0) throw ConfigError("grad_check: h must be positive");
  GradTape& tape = GradTape::active();
  tape.clear();
  for (Tensor& t : inputs) t.zero_grad();

  Tensor loss = f();
  if (loss.size() != 1) {
    throw ContractError("grad_check: function must return a scalar, got " +
                        shape_str(loss.shape()));
  }
  tape.backward(loss);
  tape.clear();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    if (!t.requires_grad()) throw ContractError("grad_check: input tensor does not require grad");
    analytic.push_back(t.grad());
  }

  const auto eval = [&f]() {
    NoGradGuard ng;
    return f().item();
  };

  GradCheckReport report;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    Tensor& t = inputs[ti];
    std::vector<std::size_t> coords;
    if (max_coords_per_tensor == 0 || max_coords_per_tensor >= t.size()) {
      coords.resize(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) coords[i] = i;
    } else {
      RandomStream rng(mix_seed(sample_seed, 0x6763ULL, ti));
      coords = rng.sample_without_replacement(t.size(), max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t i : coords) {
      const double orig = t[i];
      t[i] = orig + h;
      const double lp = eval();
      t[i] = orig - h;
      const double lm = eval();
      t[i] = orig;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[ti][i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3});
      ++report.checked_coords;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_location = "input " + std::to_string(ti) + " coord " + std::to_string(i);
      }
    }
  }
  report.pass = report.max_rel_error < tol;
  return report;
}

}  // namespace avt::numerics
