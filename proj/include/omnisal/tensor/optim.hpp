#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "omnisal/common/error.hpp"
#include "omnisal/tensor/tensor.hpp"

namespace omnisal::ag {

struct AdamWConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

// Decoupled weight decay AdamW with bias correction. Only the tensors handed
// to the constructor are updated; everything else stays bitwise untouched.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i].size(), 0.0);
      v_[i].assign(params_[i].size(), 0.0);
    }
  }

  // lr < 0 uses the configured base rate; a scheduler passes the current rate.
  void step(double lr = -1.0) {
    if (lr < 0.0) lr = cfg_.lr;
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      auto& p = params_[pi].raw_values();
      const auto& g = params_[pi].has_grad() ? params_[pi].grad() : zero_like(pi);
      auto& m = m_[pi];
      auto& v = v_[pi];
      for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] -= lr * cfg_.weight_decay * p[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  std::size_t step_count() const { return step_count_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  const std::vector<double>& zero_like(std::size_t pi) {
    scratch_.assign(params_[pi].size(), 0.0);
    return scratch_;
  }

  std::vector<Tensor> params_;
  AdamWConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::vector<double> scratch_;
  std::size_t step_count_ = 0;
};

// Half-cosine interpolation from lr_start at step 0 to lr_end at total_steps.
inline double cosine_lr(std::size_t step, std::size_t total_steps, double lr_start, double lr_end) {
  if (step > total_steps) throw DataError("cosine_lr: step out of range");
  if (total_steps == 0) return lr_end;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(3.14159265358979323846 * t));
}

}  // namespace omnisal::ag
