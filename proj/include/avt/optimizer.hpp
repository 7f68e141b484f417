// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "avt/tensor.hpp"

namespace avt::harness {

/// AdamW with decoupled weight decay:
///   p -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

class AdamW {
 public:
  using Options = AdamWOptions;

  AdamW(std::vector<std::pair<std::string, Tensor>> params, Options opts = Options())
      : params_(std::move(params)), opts_(opts) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i].second.size(), 0.0);
      v_[i].assign(params_[i].second.size(), 0.0);
    }
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = params_[i].second;
      const std::vector<double>& g = p.grad();
      for (std::size_t k = 0; k < p.size(); ++k) {
        m_[i][k] = opts_.beta1 * m_[i][k] + (1.0 - opts_.beta1) * g[k];
        v_[i][k] = opts_.beta2 * v_[i][k] + (1.0 - opts_.beta2) * g[k] * g[k];
        const double m_hat = m_[i][k] / bc1;
        const double v_hat = v_[i][k] / bc2;
        p[k] -= lr * (m_hat / (std::sqrt(v_hat) + opts_.eps) + opts_.weight_decay * p[k]);
      }
    }
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
  }

  std::uint64_t step_count() const { return t_; }
  const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

  void restore_state(std::uint64_t t, std::vector<std::vector<double>> m,
                     std::vector<std::vector<double>> v) {
    if (m.size() != params_.size() || v.size() != params_.size()) {
      throw ContractError("AdamW: optimizer state does not match parameter count");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (m[i].size() != params_[i].second.size() || v[i].size() != params_[i].second.size()) {
        throw ContractError("AdamW: optimizer state shape mismatch at " + params_[i].first);
      }
    }
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  Options opts_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace avt::harness
